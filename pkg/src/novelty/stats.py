"""Validation and analysis statistics over the assembled score table.

Pearson correlations, the Mann-Whitney U test (exact enumeration for
small samples, tie/continuity-corrected normal approximation otherwise),
emerging-tag selection with the early-vs-late novelty comparison, and the
analysis-ready CSV export for external regression tooling.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .feature_store import ShotRecord, format_timestamp

EXACT_ENUMERATION_MAX = 20  # total sample size above which the normal approximation kicks in

ANALYSIS_COLUMNS = (
    "shot_id",
    "user_id",
    "timestamp",
    "log_likes",
    "log_views",
    "tagnov",
    "incep_fvgmm",
    "comp_fvgmm",
    "incep_fvmrf",
    "comp_fvmrf",
    "log_days_active",
    "n_prev_shots",
    "in_deg",
    "out_deg",
    "closeness",
    "constraint",
    "density",
)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; rejects zero-variance inputs."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("inputs must be equal-length 1-D vectors")
    if xa.size < 2:
        raise ValueError("need at least 2 observations")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    denom = math.sqrt(float((xc * xc).sum()) * float((yc * yc).sum()))
    if denom == 0.0:
        raise ValueError("correlation undefined for zero-variance input")
    return float((xc * yc).sum()) / denom


def _midranks(values: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based); tied values share the mean of their ranks."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test; returns (U for sample a, p).

    U comes from rank sums with midrank ties.  For combined sizes up to
    20 the p-value is exact, enumerating every C(n1+n2, n1) labeling of
    the pooled sample; larger samples use the normal approximation with
    tie correction and a 0.5 continuity correction.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = a.size, b.size
    if n1 == 0 or n2 == 0:
        raise ValueError("samples must be non-empty")
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    r1 = float(ranks[:n1].sum())
    u = r1 - n1 * (n1 + 1) / 2.0
    mean_u = n1 * n2 / 2.0

    if n1 + n2 <= EXACT_ENUMERATION_MAX:
        observed = abs(u - mean_u)
        offset = n1 * (n1 + 1) / 2.0
        count = 0
        total = 0
        for subset in combinations(range(n1 + n2), n1):
            u_perm = ranks[list(subset)].sum() - offset
            if abs(u_perm - mean_u) >= observed - 1e-12:
                count += 1
            total += 1
        return u, count / total

    n = n1 + n2
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float((tie_counts**3 - tie_counts).sum()) / (n * (n - 1))
    var_u = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var_u <= 0:
        return u, 1.0  # all values identical
    z = (abs(u - mean_u) - 0.5) / math.sqrt(var_u)
    p = 2.0 * _norm_sf(max(z, 0.0))
    return u, min(1.0, p)


def emerging_tags(
    shots: Sequence[ShotRecord], cutoff_date: datetime, top_k: int
) -> list[str]:
    """Tags first used strictly after ``cutoff_date`` that rank in the
    ``top_k`` most-used tags overall; ordered by count descending."""
    first_seen: dict[str, datetime] = {}
    counts: dict[str, int] = {}
    for shot in shots:
        for tag in shot.tags:
            counts[tag] = counts.get(tag, 0) + 1
            if tag not in first_seen:
                first_seen[tag] = shot.timestamp
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    top = {tag for tag, _ in ranked[:top_k]}
    return [
        tag
        for tag, _ in ranked
        if tag in top and first_seen[tag] > cutoff_date
    ]


@dataclass
class ColumnComparison:
    u: float
    p: float
    early_mean: float
    late_mean: float


@dataclass
class EarlyLateReport:
    tag: str
    n_tagged: int
    group_size: int
    early_ids: list[str]
    late_ids: list[str]
    columns: dict[str, ColumnComparison] = field(default_factory=dict)


def early_late_test(
    score_rows: Iterable[dict],
    shots: Sequence[ShotRecord],
    tag: str,
    frac: float = 0.10,
    columns: Sequence[str] = ("incep_fvgmm_scaled", "comp_fvgmm_scaled", "tagnov_norm"),
) -> EarlyLateReport:
    """Compare the earliest and latest ``frac`` of scored images using ``tag``.

    Requires at least 20 scored tag-bearing images; groups of floor(frac*m)
    images are compared column by column with the Mann-Whitney U test.
    """
    by_id = {row["shot_id"]: row for row in score_rows}
    tagged = [s for s in shots if tag in s.tags and s.shot_id in by_id]
    m = len(tagged)
    if m < 20:
        raise ValueError(f"tag {tag!r} has only {m} scored images, need >= 20")
    size = int(frac * m)
    if size < 1:
        raise ValueError(f"fraction {frac} yields an empty group for {m} images")
    early = tagged[:size]
    late = tagged[-size:]
    report = EarlyLateReport(
        tag=tag,
        n_tagged=m,
        group_size=size,
        early_ids=[s.shot_id for s in early],
        late_ids=[s.shot_id for s in late],
    )
    for col in columns:
        ev = [float(by_id[s.shot_id][col]) for s in early]
        lv = [float(by_id[s.shot_id][col]) for s in late]
        ev = [v for v in ev if not math.isnan(v)]
        lv = [v for v in lv if not math.isnan(v)]
        if not ev or not lv:
            continue
        u, p = mann_whitney_u(ev, lv)
        report.columns[col] = ColumnComparison(
            u=u, p=p, early_mean=float(np.mean(ev)), late_mean=float(np.mean(lv))
        )
    return report


def pca2d(data: np.ndarray) -> np.ndarray:
    """Project rows onto the top-2 principal directions.

    Sign convention: each direction's largest-magnitude loading is
    positive.  Rank-deficient data get an all-zero second column and a
    warning instead of noise.
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise ValueError("need an (n, d) matrix with n >= 3")
    centered = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    basis = np.zeros((X.shape[1], 2))
    n_dirs = min(2, vt.shape[0])
    basis[:, :n_dirs] = vt[:n_dirs].T
    for j in range(2):
        pivot = int(np.argmax(np.abs(basis[:, j])))
        if basis[pivot, j] < 0:
            basis[:, j] = -basis[:, j]
    coords = centered @ basis
    if s.size < 2 or s[1] <= 1e-12 * max(s[0], 1.0):
        warnings.warn("data rank < 2; second principal coordinate set to zero")
        coords[:, 1] = 0.0
    return coords


def _fmt(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def export_analysis_table(score_rows: Iterable[dict], path: str | Path) -> None:
    """Write the analysis-ready CSV (fixed column set, ln(1+x) for counts)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ANALYSIS_COLUMNS)
        for row in score_rows:
            ts = row["timestamp"]
            if isinstance(ts, datetime):
                ts = format_timestamp(ts)
            writer.writerow(
                [
                    row["shot_id"],
                    row["user_id"],
                    ts,
                    _fmt(math.log1p(float(row["likes"]))),
                    _fmt(math.log1p(float(row["views"]))),
                    _fmt(float(row["tagnov_norm"])),
                    _fmt(float(row["incep_fvgmm_scaled"])),
                    _fmt(float(row["comp_fvgmm_scaled"])),
                    _fmt(float(row["incep_fvmrf"])),
                    _fmt(float(row["comp_fvmrf"])),
                    _fmt(math.log1p(float(row["days_active"]))),
                    row["n_prev_shots"],
                    row["in_deg"],
                    row["out_deg"],
                    _fmt(float(row["closeness"])),
                    _fmt(float(row["constraint"])),
                    _fmt(float(row["density"])),
                ]
            )


def correlation_matrix(
    score_rows: Sequence[dict], columns: Sequence[str]
) -> np.ndarray:
    """Pairwise-complete Pearson matrix over the named numeric columns."""
    data = np.full((len(score_rows), len(columns)), np.nan)
    for i, row in enumerate(score_rows):
        for j, col in enumerate(columns):
            try:
                data[i, j] = float(row[col])
            except (TypeError, ValueError):
                pass
    k = len(columns)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            mask = ~(np.isnan(data[:, i]) | np.isnan(data[:, j]))
            if mask.sum() >= 2:
                try:
                    out[i, j] = out[j, i] = pearson(data[mask, i], data[mask, j])
                except ValueError:
                    out[i, j] = out[j, i] = np.nan
            else:
                out[i, j] = out[j, i] = np.nan
    return out
