"""The ``novelty`` command line: one binary, subcommand per pipeline stage.

Exit codes: 0 success, 2 usage error, 1 runtime/validation error.  Report
paths (run, correlate, validate-emerging, pca) render PNG figures next to
their delimited outputs unless --no-fig is given.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import shutil
import sys
from functools import wraps
from pathlib import Path

import click
import numpy as np

from . import fisher, gmm, imgfeat, netmet, pipeline, stats, tagnov
from .feature_store import (
    FeaturePack,
    ValidationError,
    format_timestamp,
    load_follows,
    load_shots,
    parse_timestamp,
    read_pack,
    write_follows,
    write_pack,
    write_shots,
)

log = logging.getLogger("novelty")

CORR_COLUMNS = (
    "tagnov_norm",
    "incep_fvgmm_scaled",
    "comp_fvgmm_scaled",
    "log_likes",
    "log_views",
)


def _runtime_errors(fn):
    """Map domain failures to exit code 1 with a clean message."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, ValueError, KeyError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


@click.group()
@click.option("--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool) -> None:
    """Score the visual and textual novelty of a time-ordered image stream."""
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main() -> None:
    cli(prog_name="novelty")


def _load_config(path: str | None) -> pipeline.PipelineConfig:
    """Parse a key=value config file into a PipelineConfig."""
    cfg = pipeline.PipelineConfig()
    if path is None:
        return cfg
    int_keys = {
        "n_components",
        "max_iters",
        "seed",
        "pca_dim_embed",
        "train_days",
        "score_days",
        "min_user_shots",
        "threads",
    }
    float_keys = {"rel_tol", "variance_floor"}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in int_keys:
            setattr(cfg, key, int(value) if value.lower() != "none" else None)
        elif key in float_keys:
            setattr(cfg, key, float(value))
        else:
            raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
    return cfg


# ---------------------------------------------------------------------------
# feature extraction and pack handling
# ---------------------------------------------------------------------------


@cli.command("extract-compositional")
@click.option("--shots", "shots_file", required=True, type=click.Path(exists=True))
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path())
@_runtime_errors
def extract_compositional_cmd(shots_file: str, images_dir: str, out_dir: str) -> None:
    """Extract the 47 compositional features for every shot's image."""
    from PIL import Image, UnidentifiedImageError

    shots = load_shots(shots_file)
    ids: list[str] = []
    rows: list[np.ndarray] = []
    errors: list[str] = []
    for shot in shots:
        if not shot.media_ref:
            errors.append(f"{shot.shot_id}\tno media_ref")
            continue
        img_path = Path(images_dir) / shot.media_ref
        try:
            with Image.open(img_path) as im:
                rgb = np.asarray(im.convert("RGB"))
            rows.append(imgfeat.extract_compositional(rgb))
            ids.append(shot.shot_id)
        except (FileNotFoundError, UnidentifiedImageError, ValueError, OSError) as exc:
            errors.append(f"{shot.shot_id}\t{exc}")
    data = np.vstack(rows) if rows else np.zeros((0, imgfeat.N_FEATURES))
    pack = FeaturePack(ids=ids, data=data, kind="compositional")
    write_pack(pack, out_dir)
    if errors:
        (Path(out_dir) / "errors.txt").write_text("\n".join(errors) + "\n")
        log.warning("%d images skipped; see errors.txt", len(errors))
    click.echo(f"wrote pack n={pack.n} dim={pack.dim} to {out_dir}")


@cli.command("ingest-embeddings")
@click.option("--pack", "src", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "dst", required=True, type=click.Path())
@_runtime_errors
def ingest_embeddings_cmd(src: str, dst: str) -> None:
    """Validate an externally produced embedding pack and copy it in."""
    pack = read_pack(src)
    if pack.dim != 2048:
        log.warning("embedding pack has dim=%d, expected 2048", pack.dim)
    Path(dst).mkdir(parents=True, exist_ok=True)
    for name in ("meta", "ids.txt", "data.f32le"):
        shutil.copyfile(Path(src) / name, Path(dst) / name)
    click.echo(f"validated and copied pack n={pack.n} dim={pack.dim} to {dst}")


# ---------------------------------------------------------------------------
# model fitting and scoring
# ---------------------------------------------------------------------------


def _model_stats(gm_model: gmm.GaussianMixture, train_rows: np.ndarray) -> dict[str, np.ndarray]:
    proj = gm_model.project(train_rows)
    norms = fisher.fvgmm_raw_many(gm_model, proj)
    mrf = fisher.build_mrf_reference(gm_model, proj)
    mrf_scores = fisher.fvmrf_score_many(mrf, proj)
    aics = np.atleast_1d(gmm.aic_per_image(gm_model, proj))
    return {
        "fvgmm_minmax": np.array([norms.min(), norms.max()]),
        "mrf_mean": mrf.dist_mean,
        "mrf_std": mrf.dist_std,
        "fvmrf_minmax": np.array([mrf_scores.min(), mrf_scores.max()]),
        "aic_minmax": np.array([aics.min(), aics.max()]),
    }


@cli.command("fit")
@click.option("--pack", "pack_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--n", "n_components", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--pca-dim", default=None, type=int, help="Project to this many dims first.")
@click.option("--max-iters", default=200, show_default=True)
@click.option("--rel-tol", default=1e-6, show_default=True)
@click.option("--variance-floor", default=1e-6, show_default=True)
@click.option("--out", "out_file", required=True, type=click.Path())
@_runtime_errors
def fit_cmd(
    pack_dir: str,
    n_components: int,
    seed: int,
    pca_dim: int | None,
    max_iters: int,
    rel_tol: float,
    variance_floor: float,
    out_file: str,
) -> None:
    """Fit a diagonal GMM to a feature pack and store scoring statistics."""
    pack = read_pack(pack_dir)
    cfg = gmm.FitConfig(
        n_components=n_components,
        max_iters=max_iters,
        rel_tol=rel_tol,
        variance_floor=variance_floor,
        seed=seed,
        pca_dim=pca_dim,
    )
    model = gmm.fit_gmm(pack.data, cfg)
    gmm.save_model(model, out_file, stats=_model_stats(model, pack.data))
    ll = model.em_log_likelihoods
    click.echo(
        f"fit n={n_components} dim={model.dim} on {pack.n} rows; "
        f"{len(ll)} EM iterations, final mean log-likelihood {ll[-1]:.4f}"
    )


@cli.command("score")
@click.option("--model", "model_file", required=True, type=click.Path(exists=True))
@click.option("--pack", "pack_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option(
    "--method",
    type=click.Choice(["fvgmm", "fvmrf", "aic"]),
    default="fvgmm",
    show_default=True,
)
@click.option("--out", "out_file", required=True, type=click.Path())
@_runtime_errors
def score_cmd(model_file: str, pack_dir: str, method: str, out_file: str) -> None:
    """Score a pack against a fitted model; writes shot_id, raw, scaled."""
    model, model_stats = gmm.load_model(model_file)
    pack = read_pack(pack_dir)
    X = model.project(pack.data)
    if method == "fvgmm":
        raw = fisher.fvgmm_raw_many(model, X)
        lo, hi = model_stats["fvgmm_minmax"]
    elif method == "fvmrf":
        mrf = fisher.MrfReference(
            means=model.means,
            dist_mean=model_stats["mrf_mean"],
            dist_std=model_stats["mrf_std"],
        )
        raw = fisher.fvmrf_score_many(mrf, X)
        lo, hi = model_stats["fvmrf_minmax"]
    else:
        raw = np.atleast_1d(gmm.aic_per_image(model, X))
        lo, hi = model_stats["aic_minmax"]
    norm = fisher.NormStats(lo=float(lo), hi=float(hi))
    with open(out_file, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["shot_id", "raw", "scaled"])
        for sid, value in zip(pack.ids, raw):
            writer.writerow([sid, repr(float(value)), repr(norm.scale(float(value)))])
    click.echo(f"scored {pack.n} rows with {method} -> {out_file}")


# ---------------------------------------------------------------------------
# per-signal tables
# ---------------------------------------------------------------------------


@cli.command("tag-novelty")
@click.option("--shots", "shots_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", required=True, type=click.Path())
@_runtime_errors
def tag_novelty_cmd(shots_file: str, out_file: str) -> None:
    """Tag-surprise novelty for every shot, in temporal order."""
    shots = load_shots(shots_file)
    scores = tagnov.score_stream(s.tags for s in shots)
    with open(out_file, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["shot_id", "raw", "normalized"])
        for shot, (raw, norm) in zip(shots, scores):
            writer.writerow([shot.shot_id, repr(raw), repr(norm)])
    click.echo(f"wrote tag novelty for {len(shots)} shots -> {out_file}")


@cli.command("net-metrics")
@click.option("--follows", "follows_file", required=True, type=click.Path(exists=True))
@click.option("--shots", "shots_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", required=True, type=click.Path())
@_runtime_errors
def net_metrics_cmd(follows_file: str, shots_file: str, out_file: str) -> None:
    """Author network position at each shot's timestamp."""
    shots = load_shots(shots_file)
    graph = netmet.TemporalGraph.from_edges(load_follows(follows_file))
    snap = netmet.Snapshot(graph.nodes)
    idx = 0
    with open(out_file, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["shot_id", "in_deg", "out_deg", "closeness", "constraint", "density"])
        for shot in shots:
            while idx < len(graph.edges) and graph.edges[idx][2] < shot.timestamp:
                src, dst, _ = graph.edges[idx]
                snap.add_edge(src, dst)
                idx += 1
            m = netmet.metrics_for(snap, shot.user_id)
            writer.writerow(
                [
                    shot.shot_id,
                    m.in_degree,
                    m.out_degree,
                    repr(m.closeness),
                    repr(m.constraint),
                    repr(m.density),
                ]
            )
    click.echo(f"wrote network metrics for {len(shots)} shots -> {out_file}")


# ---------------------------------------------------------------------------
# end-to-end run and analysis
# ---------------------------------------------------------------------------


@cli.command("run")
@click.option("--shots", "shots_file", required=True, type=click.Path(exists=True))
@click.option("--follows", "follows_file", required=True, type=click.Path(exists=True))
@click.option("--pack-comp", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--pack-embed", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_file", default=None, type=click.Path(exists=True))
@click.option("--seed", default=None, type=int, help="Overrides the config seed.")
@click.option("--threads", default=1, show_default=True)
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--no-fig", is_flag=True, help="Skip the distribution figure.")
@_runtime_errors
def run_cmd(
    shots_file: str,
    follows_file: str,
    pack_comp: str,
    pack_embed: str,
    config_file: str | None,
    seed: int | None,
    threads: int,
    out_file: str,
    no_fig: bool,
) -> None:
    """Full rolling-window scoring run; writes scores.csv and a figure."""
    cfg = _load_config(config_file)
    if seed is not None:
        cfg.seed = seed
    cfg.threads = threads
    shots = load_shots(shots_file)
    follows = load_follows(follows_file)
    packs = {
        pipeline.COMP_KIND: read_pack(pack_comp),
        pipeline.EMBED_KIND: read_pack(pack_embed),
    }
    result = pipeline.run(shots, follows, packs, cfg)
    for message in result.warnings:
        log.warning("%s", message)
    pipeline.write_scores(result.scores, out_file)
    click.echo(
        f"scored {len(result.scores)} of {len(shots)} shots across "
        f"{len(result.schedule.windows)} windows -> {out_file}"
    )
    if not no_fig and result.scores:
        from . import plots

        fig_path = Path(out_file).with_suffix(".dist.png")
        plots.score_distributions([r.as_row() for r in result.scores], fig_path)
        click.echo(f"figure -> {fig_path}")


def _augment_logs(rows: list[dict]) -> list[dict]:
    for row in rows:
        row["log_likes"] = math.log1p(row["likes"])
        row["log_views"] = math.log1p(row["views"])
    return rows


@cli.command("correlate")
@click.option("--scores", "scores_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--no-fig", is_flag=True)
@_runtime_errors
def correlate_cmd(scores_file: str, out_file: str, no_fig: bool) -> None:
    """Pearson correlation matrix of novelty and engagement columns."""
    rows = _augment_logs(pipeline.read_scores(scores_file))
    matrix = stats.correlation_matrix(rows, CORR_COLUMNS)
    with open(out_file, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([""] + list(CORR_COLUMNS))
        for name, line in zip(CORR_COLUMNS, matrix):
            writer.writerow([name] + [repr(float(v)) for v in line])
    click.echo(f"wrote {len(CORR_COLUMNS)}x{len(CORR_COLUMNS)} correlation matrix -> {out_file}")
    if not no_fig:
        from . import plots

        fig_path = Path(out_file).with_suffix(".png")
        plots.corr_heatmap(CORR_COLUMNS, matrix, fig_path)
        click.echo(f"figure -> {fig_path}")


@cli.command("validate-emerging")
@click.option("--scores", "scores_file", required=True, type=click.Path(exists=True))
@click.option("--shots", "shots_file", required=True, type=click.Path(exists=True))
@click.option("--cutoff", required=True, help="ISO date; tags first seen after it are emerging.")
@click.option("--topk", default=200, show_default=True)
@click.option("--frac", default=0.10, show_default=True)
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--no-fig", is_flag=True)
@_runtime_errors
def validate_emerging_cmd(
    scores_file: str,
    shots_file: str,
    cutoff: str,
    topk: int,
    frac: float,
    out_file: str,
    no_fig: bool,
) -> None:
    """Early-vs-late novelty comparison for emerging tags."""
    rows = pipeline.read_scores(scores_file)
    shots = load_shots(shots_file)
    cutoff_ts = parse_timestamp(cutoff if "T" in cutoff else cutoff + "T23:59:59Z")
    tags = stats.emerging_tags(shots, cutoff_ts, topk)
    if not tags:
        log.warning("no emerging tags found after %s", cutoff)
    reports: list[stats.EarlyLateReport] = []
    for tag in tags:
        try:
            reports.append(stats.early_late_test(rows, shots, tag, frac=frac))
        except ValueError as exc:
            log.warning("skipping tag %r: %s", tag, exc)
    with open(out_file, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["tag", "n_tagged", "group_size", "column", "u", "p", "early_mean", "late_mean"]
        )
        for report in reports:
            for col, c in report.columns.items():
                writer.writerow(
                    [
                        report.tag,
                        report.n_tagged,
                        report.group_size,
                        col,
                        repr(c.u),
                        repr(c.p),
                        repr(c.early_mean),
                        repr(c.late_mean),
                    ]
                )
    click.echo(f"tested {len(reports)} emerging tags -> {out_file}")
    if not no_fig and reports:
        from . import plots

        for report in reports:
            for col in report.columns:
                fig_path = Path(out_file).with_suffix(f".{report.tag}.{col}.png")
                plots.early_late_figure(report, rows, col, fig_path)
        click.echo(f"figures alongside {out_file}")


@cli.command("export")
@click.option("--scores", "scores_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", required=True, type=click.Path())
@_runtime_errors
def export_cmd(scores_file: str, out_file: str) -> None:
    """Analysis-ready table (fixed columns, ln(1+x) engagement) for external tools."""
    rows = pipeline.read_scores(scores_file)
    stats.export_analysis_table(rows, out_file)
    click.echo(f"exported {len(rows)} rows -> {out_file}")


@cli.command("pca")
@click.option("--pack", "pack_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--no-fig", is_flag=True)
@_runtime_errors
def pca_cmd(pack_dir: str, out_file: str, no_fig: bool) -> None:
    """2-D principal-component projection of a feature pack."""
    pack = read_pack(pack_dir)
    coords = stats.pca2d(pack.data)
    with open(out_file, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["shot_id", "pc1", "pc2"])
        for sid, (a, b) in zip(pack.ids, coords):
            writer.writerow([sid, repr(float(a)), repr(float(b))])
    click.echo(f"projected {pack.n} rows -> {out_file}")
    if not no_fig:
        from . import plots

        fig_path = Path(out_file).with_suffix(".png")
        plots.pca_scatter(coords, fig_path)
        click.echo(f"figure -> {fig_path}")


@cli.command("synth")
@click.option("--seed", default=7, show_default=True)
@click.option("--n-users", default=40, show_default=True)
@click.option("--n-shots", default=500, show_default=True)
@click.option("--span-days", default=730, show_default=True)
@click.option("--start", default="2013-01-01T00:00:00Z", show_default=True)
@click.option("--trend-at", default=None, help="ISO instant for a planted feature shift.")
@click.option("--embed-dim", default=256, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@_runtime_errors
def synth_cmd(
    seed: int,
    n_users: int,
    n_shots: int,
    span_days: int,
    start: str,
    trend_at: str | None,
    embed_dim: int,
    out_dir: str,
) -> None:
    """Generate a seeded synthetic corpus (shots, follows, both packs)."""
    start_ts = parse_timestamp(start)
    cfg = pipeline.SynthConfig(
        seed=seed,
        n_users=n_users,
        n_shots=n_shots,
        start=start_ts,
        span_days=span_days,
        trend_at=parse_timestamp(trend_at) if trend_at else None,
        embed_dim=embed_dim,
    )
    corpus = pipeline.synth_corpus(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_shots(corpus.shots, out / "shots.jsonl")
    write_follows(corpus.follows, out / "follows.csv")
    write_pack(corpus.packs[pipeline.COMP_KIND], out / "pack_comp", created=start_ts)
    write_pack(corpus.packs[pipeline.EMBED_KIND], out / "pack_embed", created=start_ts)
    truth = {
        "planted_tag": corpus.planted_tag,
        "trend_at": format_timestamp(corpus.trend_at) if corpus.trend_at else None,
        "planted_ids": corpus.planted_ids,
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    click.echo(
        f"synthesized {len(corpus.shots)} shots / {len(corpus.follows)} follows -> {out_dir}"
    )


if __name__ == "__main__":
    main()
