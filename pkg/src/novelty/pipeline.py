"""Rolling-window orchestration: fit on the trailing year, score the next quarter.

The first 365 days of the corpus only train; every following 91-day
quarter is scored by a mixture fit on the 365 days preceding it, so each
shot is judged strictly by models of its past.  Tag novelty is one
corpus-long fold and network metrics are evaluated at each shot's
timestamp, giving one assembled row per scored shot.

Also home to the seeded synthetic-corpus generator the test suite and the
``synth`` subcommand use: preferential-attachment follows, mixture-drawn
features, and an optional planted feature shift arriving with a planted
tag at a chosen instant.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import fisher, tagnov
from .feature_store import FeaturePack, ShotRecord, format_timestamp
from .gmm import FitConfig, aic_per_image, fit_gmm
from .netmet import NetworkFeatures, Snapshot, TemporalGraph, metrics_for

TRAIN_DAYS = 365
SCORE_DAYS = 91

COMP_KIND = "comp"
EMBED_KIND = "incep"

SCORE_COLUMNS = (
    "shot_id",
    "user_id",
    "timestamp",
    "likes",
    "views",
    "days_active",
    "n_prev_shots",
    "tagnov_raw",
    "tagnov_norm",
    "comp_fvgmm_raw",
    "comp_fvgmm_scaled",
    "comp_fvmrf",
    "comp_aic",
    "incep_fvgmm_raw",
    "incep_fvgmm_scaled",
    "incep_fvmrf",
    "incep_aic",
    "in_deg",
    "out_deg",
    "closeness",
    "constraint",
    "density",
)


@dataclass(frozen=True)
class Window:
    train_start: datetime
    train_end: datetime  # == score_start
    score_start: datetime
    score_end: datetime


@dataclass
class WindowSchedule:
    windows: list[Window] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def build_schedule(
    t_first: datetime,
    t_last: datetime,
    train_days: int = TRAIN_DAYS,
    score_days: int = SCORE_DAYS,
) -> WindowSchedule:
    """Quarterly scoring windows, each trained on the preceding year.

    Fixed-length arithmetic (365/91 days, no calendar), so reruns are
    reproducible.  Shots inside the first training year are never scored;
    a corpus shorter than the training span yields an empty schedule and
    a warning.
    """
    if t_first >= t_last and not (t_first == t_last):
        raise ValueError("t_first must precede t_last")
    schedule = WindowSchedule()
    train = timedelta(days=train_days)
    score = timedelta(days=score_days)
    score_start = t_first + train
    if score_start > t_last:
        schedule.warnings.append(
            f"corpus spans less than {train_days} days; nothing is scorable"
        )
        return schedule
    end_guard = t_last + timedelta(seconds=1)
    while score_start <= t_last:
        score_end = min(score_start + score, end_guard)
        schedule.windows.append(
            Window(
                train_start=score_start - train,
                train_end=score_start,
                score_start=score_start,
                score_end=score_end,
            )
        )
        score_start = score_start + score
    return schedule


@dataclass
class PipelineConfig:
    n_components: int = 16
    max_iters: int = 200
    rel_tol: float = 1e-6
    variance_floor: float = 1e-6
    seed: int = 0
    pca_dim_embed: int | None = 64
    train_days: int = TRAIN_DAYS
    score_days: int = SCORE_DAYS
    min_user_shots: int = 0  # optional low-activity-author filter, off by default
    threads: int = 1

    def fit_config(self, kind: str) -> FitConfig:
        return FitConfig(
            n_components=self.n_components,
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            variance_floor=self.variance_floor,
            seed=self.seed,
            pca_dim=self.pca_dim_embed if kind == EMBED_KIND else None,
        )


@dataclass
class ShotScores:
    shot_id: str
    user_id: str
    timestamp: datetime
    likes: int
    views: int
    days_active: float
    n_prev_shots: int
    tagnov_raw: float
    tagnov_norm: float
    comp_fvgmm_raw: float = math.nan
    comp_fvgmm_scaled: float = math.nan
    comp_fvmrf: float = math.nan
    comp_aic: float = math.nan
    incep_fvgmm_raw: float = math.nan
    incep_fvgmm_scaled: float = math.nan
    incep_fvmrf: float = math.nan
    incep_aic: float = math.nan
    in_deg: int = 0
    out_deg: int = 0
    closeness: float = 0.0
    constraint: float = 0.0
    density: float = 0.0

    def as_row(self) -> dict:
        return {
            "shot_id": self.shot_id,
            "user_id": self.user_id,
            "timestamp": self.timestamp,
            "likes": self.likes,
            "views": self.views,
            "days_active": self.days_active,
            "n_prev_shots": self.n_prev_shots,
            "tagnov_raw": self.tagnov_raw,
            "tagnov_norm": self.tagnov_norm,
            "comp_fvgmm_raw": self.comp_fvgmm_raw,
            "comp_fvgmm_scaled": self.comp_fvgmm_scaled,
            "comp_fvmrf": self.comp_fvmrf,
            "comp_aic": self.comp_aic,
            "incep_fvgmm_raw": self.incep_fvgmm_raw,
            "incep_fvgmm_scaled": self.incep_fvgmm_scaled,
            "incep_fvmrf": self.incep_fvmrf,
            "incep_aic": self.incep_aic,
            "in_deg": self.in_deg,
            "out_deg": self.out_deg,
            "closeness": self.closeness,
            "constraint": self.constraint,
            "density": self.density,
        }


@dataclass
class RunResult:
    scores: list[ShotScores]
    warnings: list[str]
    schedule: WindowSchedule


def _chunked_map(func, X: np.ndarray, threads: int) -> np.ndarray:
    """Apply a row-batch function over fixed chunks; order-preserving, so the
    result is identical at any thread count."""
    if X.shape[0] == 0:
        return func(X)
    if threads <= 1 or X.shape[0] < 2 * threads:
        return func(X)
    chunks = np.array_split(np.arange(X.shape[0]), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda idx: func(X[idx]), chunks))
    return np.concatenate(parts)


def run(
    shots: Sequence[ShotRecord],
    follows: Sequence[tuple[str, str, datetime]],
    packs: dict[str, FeaturePack],
    cfg: PipelineConfig | None = None,
) -> RunResult:
    """Score every shot after the first training year; see module docstring.

    ``packs`` maps feature kinds (``comp``, ``incep``) to their packs.
    Shots missing from a pack are skipped for that kind and reported in
    the warnings.  Deterministic for fixed (inputs, seed, config).
    """
    cfg = cfg or PipelineConfig()
    warnings: list[str] = []

    shots = sorted(shots, key=lambda s: (s.timestamp, s.shot_id))
    if cfg.min_user_shots > 1:
        per_user: dict[str, int] = {}
        for s in shots:
            per_user[s.user_id] = per_user.get(s.user_id, 0) + 1
        before = len(shots)
        shots = [s for s in shots if per_user[s.user_id] >= cfg.min_user_shots]
        if len(shots) != before:
            warnings.append(
                f"dropped {before - len(shots)} shots from authors with fewer "
                f"than {cfg.min_user_shots} images"
            )

    if not shots:
        return RunResult([], warnings + ["no shots to score"], WindowSchedule())

    schedule = build_schedule(
        shots[0].timestamp, shots[-1].timestamp, cfg.train_days, cfg.score_days
    )
    warnings.extend(schedule.warnings)

    # Corpus-long folds: tag novelty, author activity.
    tag_scores = tagnov.score_stream(s.tags for s in shots)
    first_seen: dict[str, datetime] = {}
    prev_count: dict[str, int] = {}
    activity: list[tuple[float, int]] = []
    for s in shots:
        start = first_seen.setdefault(s.user_id, s.timestamp)
        days = (s.timestamp - start).total_seconds() / 86400.0
        k = prev_count.get(s.user_id, 0)
        activity.append((days, k))
        prev_count[s.user_id] = k + 1

    # Network metrics at each shot's timestamp via a forward sweep.
    graph = TemporalGraph.from_edges(follows)
    snap = Snapshot(graph.nodes)
    edge_idx = 0
    net: list[NetworkFeatures] = []
    for s in shots:
        while edge_idx < len(graph.edges) and graph.edges[edge_idx][2] < s.timestamp:
            src, dst, _ = graph.edges[edge_idx]
            snap.add_edge(src, dst)
            edge_idx += 1
        net.append(metrics_for(snap, s.user_id))

    # Visual novelty per feature kind, window by window.
    visual: dict[str, dict[str, tuple[float, float, float, float]]] = {}
    for kind, pack in packs.items():
        index = pack.index()
        missing = [s.shot_id for s in shots if s.shot_id not in index]
        if missing:
            warnings.append(
                f"{len(missing)} shots missing from {kind} pack "
                f"(first: {missing[:3]}); excluded from {kind} scoring"
            )
        kind_scores: dict[str, tuple[float, float, float, float]] = {}
        fit_cfg = cfg.fit_config(kind)
        for win in schedule.windows:
            train_ids = [
                s.shot_id
                for s in shots
                if win.train_start <= s.timestamp < win.train_end
                and s.shot_id in index
            ]
            target = [
                s.shot_id
                for s in shots
                if win.score_start <= s.timestamp < win.score_end
                and s.shot_id in index
            ]
            if not target:
                continue
            if len(train_ids) < fit_cfg.n_components:
                warnings.append(
                    f"{kind}: window scoring {win.score_start:%Y-%m-%d} has "
                    f"{len(train_ids)} training rows < {fit_cfg.n_components}; skipped"
                )
                continue
            train_rows = pack.data[[index[i] for i in train_ids]]
            gm = fit_gmm(train_rows, fit_cfg)
            train_proj = gm.project(train_rows)
            norm_stats = fisher.fvgmm_norm_stats(gm, train_proj)
            mrf = fisher.build_mrf_reference(gm, train_proj)
            X = gm.project(pack.data[[index[i] for i in target]])
            raws = _chunked_map(lambda rows: fisher.fvgmm_raw_many(gm, rows), X, cfg.threads)
            mrf_scores = _chunked_map(lambda rows: fisher.fvmrf_score_many(mrf, rows), X, cfg.threads)
            aics = np.atleast_1d(aic_per_image(gm, X))
            for sid, raw, ms, aic in zip(target, raws, mrf_scores, aics):
                kind_scores[sid] = (
                    float(raw),
                    norm_stats.scale(float(raw)),
                    float(ms),
                    float(aic),
                )
        visual[kind] = kind_scores

    rows: list[ShotScores] = []
    scoring_starts = schedule.windows[0].score_start if schedule.windows else None
    for i, s in enumerate(shots):
        if scoring_starts is None or s.timestamp < scoring_starts:
            continue
        row = ShotScores(
            shot_id=s.shot_id,
            user_id=s.user_id,
            timestamp=s.timestamp,
            likes=s.likes,
            views=s.views,
            days_active=activity[i][0],
            n_prev_shots=activity[i][1],
            tagnov_raw=tag_scores[i][0],
            tagnov_norm=tag_scores[i][1],
            in_deg=net[i].in_degree,
            out_deg=net[i].out_degree,
            closeness=net[i].closeness,
            constraint=net[i].constraint,
            density=net[i].density,
        )
        comp = visual.get(COMP_KIND, {}).get(s.shot_id)
        if comp:
            row.comp_fvgmm_raw, row.comp_fvgmm_scaled, row.comp_fvmrf, row.comp_aic = comp
        embed = visual.get(EMBED_KIND, {}).get(s.shot_id)
        if embed:
            (
                row.incep_fvgmm_raw,
                row.incep_fvgmm_scaled,
                row.incep_fvmrf,
                row.incep_aic,
            ) = embed
        rows.append(row)
    return RunResult(scores=rows, warnings=warnings, schedule=schedule)


def _fmt_cell(value: object) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    if isinstance(value, datetime):
        return format_timestamp(value)
    return str(value)


def write_scores(rows: Iterable[ShotScores], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORE_COLUMNS)
        for row in rows:
            record = row.as_row()
            writer.writerow([_fmt_cell(record[col]) for col in SCORE_COLUMNS])


def read_scores(path: str | Path) -> list[dict]:
    """Read scores.csv back into typed row dicts (empty cells become NaN)."""
    out: list[dict] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for record in reader:
            row: dict = {}
            for key, value in record.items():
                if key in ("shot_id", "user_id", "timestamp"):
                    row[key] = value
                elif key in ("likes", "views", "n_prev_shots", "in_deg", "out_deg"):
                    row[key] = int(value)
                else:
                    row[key] = float(value) if value != "" else math.nan
            out.append(row)
    return out


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------


@dataclass
class SynthConfig:
    seed: int = 7
    n_users: int = 40
    n_shots: int = 500
    start: datetime = datetime(2013, 1, 1, tzinfo=timezone.utc)
    span_days: int = 730
    trend_at: datetime | None = None
    planted_tag: str = "planted-trend"
    trend_tag_prob: float = 0.25  # post-trend shots carrying the planted tag
    comp_dim: int = 47
    embed_dim: int = 256
    n_base_components: int = 3
    # Planted-component offset in units of sqrt(dim): the per-shot noise has
    # RMS radius sqrt(dim), so the shift must scale with it to stay an outlier.
    shift_scale: float = 1.5
    vocab_size: int = 40
    follows_per_user: int = 4


@dataclass
class SynthCorpus:
    shots: list[ShotRecord]
    follows: list[tuple[str, str, datetime]]
    packs: dict[str, FeaturePack]
    planted_tag: str | None
    trend_at: datetime | None
    planted_ids: list[str]


def synth_corpus(cfg: SynthConfig) -> SynthCorpus:
    """Fully seeded synthetic corpus with an optional planted trend.

    Users follow earlier users with preferential attachment; features are
    drawn from a fixed Gaussian mixture per feature kind.  When
    ``trend_at`` is set, a fraction of later shots carry ``planted_tag``
    and draw their features from a component far outside the base
    mixture, emulating the arrival of a genuinely new kind of design.
    """
    if cfg.n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    users = [f"u{i:04d}" for i in range(cfg.n_users)]

    # Follow edges: each user (after the first) follows earlier users,
    # preferring already-followed ones.
    follows: list[tuple[str, str, datetime]] = []
    in_deg = np.zeros(cfg.n_users)
    span_secs = cfg.span_days * 86400
    for i in range(1, cfg.n_users):
        k = min(i, 1 + int(rng.integers(cfg.follows_per_user)))
        weights = in_deg[:i] + 1.0
        targets = rng.choice(i, size=k, replace=False, p=weights / weights.sum())
        for t in targets:
            in_deg[t] += 1
            ts = cfg.start + timedelta(seconds=int(rng.integers(span_secs)))
            follows.append((users[i], users[int(t)], ts))
    follows.sort(key=lambda e: e[2])

    # Shot times, authors, tags.
    offsets = np.sort(rng.integers(span_secs, size=cfg.n_shots))
    times = [cfg.start + timedelta(seconds=int(o)) for o in offsets]
    authors = rng.integers(cfg.n_users, size=cfg.n_shots)
    vocab = [f"tag{j:03d}" for j in range(cfg.vocab_size)]
    vocab_weights = 1.0 / np.arange(1, cfg.vocab_size + 1)
    vocab_weights /= vocab_weights.sum()

    # Feature mixtures: shared component assignment across kinds so the two
    # packs describe the same underlying "design".
    dims = {COMP_KIND: cfg.comp_dim, EMBED_KIND: cfg.embed_dim}
    base_means = {
        kind: rng.normal(0.0, 3.0, size=(cfg.n_base_components, d))
        for kind, d in dims.items()
    }
    shift_dir = {kind: rng.normal(size=d) for kind, d in dims.items()}
    planted_mean = {
        kind: base_means[kind][0]
        + cfg.shift_scale
        * math.sqrt(dims[kind])
        * shift_dir[kind]
        / np.linalg.norm(shift_dir[kind])
        for kind in dims
    }

    shots: list[ShotRecord] = []
    data = {kind: np.empty((cfg.n_shots, d)) for kind, d in dims.items()}
    planted_ids: list[str] = []
    components = rng.integers(cfg.n_base_components, size=cfg.n_shots)
    for i in range(cfg.n_shots):
        sid = f"s{i:06d}"
        ts = times[i]
        is_planted = (
            cfg.trend_at is not None
            and ts >= cfg.trend_at
            and rng.random() < cfg.trend_tag_prob
        )
        n_tags = 2 + int(rng.integers(3))
        tags = list(
            rng.choice(cfg.vocab_size, size=n_tags, replace=False, p=vocab_weights)
        )
        tag_names = [vocab[t] for t in tags]
        if is_planted:
            tag_names.append(cfg.planted_tag)
            planted_ids.append(sid)
        for kind, d in dims.items():
            mean = planted_mean[kind] if is_planted else base_means[kind][components[i]]
            data[kind][i] = mean + rng.standard_normal(d)
        views = int(rng.integers(10, 2000))
        likes = int(rng.binomial(views, 0.08))
        shots.append(
            ShotRecord(
                shot_id=sid,
                user_id=users[int(authors[i])],
                timestamp=ts,
                tags=tuple(sorted(set(tag_names))),
                likes=likes,
                views=views,
            )
        )

    packs = {
        kind: FeaturePack(
            ids=[s.shot_id for s in shots],
            data=data[kind],
            kind="compositional" if kind == COMP_KIND else "embedding",
        )
        for kind in dims
    }
    return SynthCorpus(
        shots=shots,
        follows=follows,
        packs=packs,
        planted_tag=cfg.planted_tag if cfg.trend_at is not None else None,
        trend_at=cfg.trend_at,
        planted_ids=planted_ids,
    )
