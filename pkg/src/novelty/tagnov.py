"""Tag surprise: how unexpected an image's tags are given all earlier tags.

The surprise of tag t on the focal image is -ln P(t), where P(t) is the
fraction of images carrying t among the prior images *plus the focal one*
(so a never-seen tag has P = 1/(|I|+1) instead of zero).  An image's raw
novelty averages the surprise over its tags; the normalized score divides
by ln(|I|+1), the exact surprise of a brand-new tag, landing in [0, 1].
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable


@dataclass
class TagLedger:
    """Running per-tag image counts over everything ingested so far."""

    counts: Counter = field(default_factory=Counter)
    n_images: int = 0

    def copy(self) -> "TagLedger":
        return TagLedger(counts=Counter(self.counts), n_images=self.n_images)


def ingest(ledger: TagLedger, tags: Iterable[str]) -> TagLedger:
    """Count one image's tag set into the ledger (mutates and returns it)."""
    for tag in set(tags):
        ledger.counts[tag] += 1
    ledger.n_images += 1
    return ledger


def tag_novelty(ledger: TagLedger, tags: Iterable[str]) -> tuple[float, float]:
    """Score a focal image's tags against a ledger of strictly earlier images.

    Returns (raw, normalized).  Tagless images score (0, 0); the very first
    image scores normalized 1.0 by convention (nothing to compare against).
    """
    tagset = set(tags)
    if not tagset:
        return 0.0, 0.0
    n_prior = ledger.n_images
    denom_images = n_prior + 1  # focal image included in P(t)
    raw = 0.0
    for tag in sorted(tagset):  # fixed order: float sum independent of set hashing
        # -log P(t) written as log(1/P) so a never-seen tag's surprise is
        # exactly log(|I|+1) and the normalized ceiling is exactly 1.
        raw += math.log(denom_images / (ledger.counts.get(tag, 0) + 1))
    raw /= len(tagset)
    if n_prior == 0:
        return raw, 1.0
    normalized = raw / math.log(denom_images)
    return raw, min(1.0, max(0.0, normalized))


def score_stream(
    tag_sets: Iterable[Iterable[str]],
) -> list[tuple[float, float]]:
    """Fold a temporally ordered stream of tag sets into per-image scores.

    Each image is scored against the ledger of its predecessors, then
    ingested.  This is the one pass the pipeline uses.
    """
    ledger = TagLedger()
    out: list[tuple[float, float]] = []
    for tags in tag_sets:
        out.append(tag_novelty(ledger, tags))
        ingest(ledger, tags)
    return out
