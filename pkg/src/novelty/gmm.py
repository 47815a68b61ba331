"""Diagonal-covariance Gaussian mixtures fit by EM.

The mixture p(x) = sum_i w_i g_i(x) over a feature space is the generative
model every visual novelty score is computed against.  Covariances are
diagonal throughout: the closed-form Fisher vector used downstream needs
them, and they keep 2048-dim packs tractable (optionally after a PCA cut).

Log-likelihoods reported by the fit are per-sample means, so convergence
and monotonicity tolerances do not scale with corpus size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

_MAGIC = "NOVGMM v1"
_WEIGHT_RESCUE_THRESHOLD = 1e-8


@dataclass
class FitConfig:
    n_components: int = 16
    max_iters: int = 200
    rel_tol: float = 1e-6
    variance_floor: float = 1e-6
    seed: int = 0
    pca_dim: int | None = None  # project before fitting when set

    def validate(self) -> None:
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.variance_floor <= 0:
            raise ValueError("variance_floor must be > 0")


@dataclass
class PcaProjection:
    """Linear reduction y = (x - mean) @ basis with orthonormal columns."""

    mean: np.ndarray   # (in_dim,)
    basis: np.ndarray  # (in_dim, out_dim)

    @property
    def in_dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def out_dim(self) -> int:
        return int(self.basis.shape[1])

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return (x - self.mean) @ self.basis


@dataclass
class GaussianMixture:
    weights: np.ndarray    # (N,) simplex
    means: np.ndarray      # (N, d)
    variances: np.ndarray  # (N, d) strictly positive
    pca: PcaProjection | None = None
    em_log_likelihoods: list[float] = field(default_factory=list, repr=False, compare=False)

    @property
    def n_components(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    def validate(self) -> None:
        if self.n_components < 1:
            raise ValueError("mixture needs at least one component")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {self.weights.sum()}, not 1")
        if (self.variances <= 0).any():
            raise ValueError("variances must be strictly positive")
        if self.means.shape != self.variances.shape:
            raise ValueError("means/variances shape mismatch")

    def project(self, x: np.ndarray) -> np.ndarray:
        """Map raw feature rows into model space (identity without PCA)."""
        if self.pca is None:
            return np.asarray(x, dtype=np.float64)
        return self.pca.apply(x)


def _check_dim(gm: GaussianMixture, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != gm.dim:
        raise ValueError(f"point has dim {x.shape[-1]}, model has dim {gm.dim}")
    return x


def component_log_pdf(gm: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """Per-component log g_i(x); accepts a single point or an (n, d) batch."""
    x = _check_dim(gm, x)
    single = x.ndim == 1
    X = x[None, :] if single else x
    # (n, N): -(1/2) sum_k [ ln(2 pi var_ik) + (x_k - mu_ik)^2 / var_ik ]
    diff = X[:, None, :] - gm.means[None, :, :]
    quad = (diff * diff / gm.variances[None, :, :]).sum(axis=2)
    norm = (np.log(2.0 * np.pi * gm.variances)).sum(axis=1)
    out = -0.5 * (quad + norm[None, :])
    return out[0] if single else out


def log_pdf(gm: GaussianMixture, x: np.ndarray) -> float | np.ndarray:
    """log p(x) = logsumexp_i [ln w_i + ln g_i(x)], max-shift stabilized."""
    comp = component_log_pdf(gm, x)
    return logsumexp(comp + np.log(gm.weights), axis=-1)


def responsibilities(gm: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """Posterior membership probabilities gamma_i(x); rows sum to 1."""
    comp = component_log_pdf(gm, x) + np.log(gm.weights)
    total = logsumexp(comp, axis=-1, keepdims=True)
    return np.exp(comp - total)


def n_free_parameters(gm: GaussianMixture) -> int:
    """Free parameters of a diagonal GMM: N*(2d+1) - 1 (simplex constraint)."""
    return gm.n_components * (2 * gm.dim + 1) - 1


def aic_per_image(gm: GaussianMixture, x: np.ndarray) -> float | np.ndarray:
    """AIC(x) = 2k - 2 log p(x) with k the free-parameter count."""
    return 2.0 * n_free_parameters(gm) - 2.0 * log_pdf(gm, x)


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ center selection (D^2 sampling, no Lloyd steps)."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))  # all points coincide with a center
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[i] = X[idx]
        closest = np.minimum(closest, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def fit_pca(X: np.ndarray, out_dim: int) -> PcaProjection:
    """Top-``out_dim`` principal directions of X (SVD, deterministic signs).

    Each column is flipped so its largest-magnitude loading is positive,
    making the projection reproducible across runs.
    """
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    centered = X - mean
    out_dim = min(out_dim, X.shape[0], X.shape[1])
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:out_dim].T.copy()
    for j in range(basis.shape[1]):
        pivot = int(np.argmax(np.abs(basis[:, j])))
        if basis[pivot, j] < 0:
            basis[:, j] = -basis[:, j]
    return PcaProjection(mean=mean, basis=basis)


def fit_gmm(data: np.ndarray, cfg: FitConfig) -> GaussianMixture:
    """Fit a diagonal GMM by EM with seeded k-means++ initialization.

    Stops when the per-sample mean log-likelihood changes by less than
    ``rel_tol`` relatively, or at ``max_iters``.  Variances are floored at
    ``variance_floor`` times the per-dimension data variance.  A component
    whose weight collapses below 1e-8 is re-seeded at the current
    lowest-likelihood point.  The per-iteration log-likelihood trace is on
    ``em_log_likelihoods`` of the returned model.
    """
    cfg.validate()
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"data must be 2-D, got shape {X.shape}")

    pca: PcaProjection | None = None
    if cfg.pca_dim is not None and cfg.pca_dim < X.shape[1]:
        pca = fit_pca(X, cfg.pca_dim)
        X = pca.apply(X)

    n, d = X.shape
    k = cfg.n_components
    if n < k:
        raise ValueError(f"need at least {k} samples to fit {k} components, got {n}")
    if not np.isfinite(X).all():
        raise ValueError("data contains non-finite values")

    data_var = X.var(axis=0)
    if (data_var <= 0).all():
        raise ValueError("zero variance in every dimension; nothing to fit")
    # Degenerate dimensions get the mean positive variance as their floor base.
    floor_base = np.where(data_var > 0, data_var, data_var[data_var > 0].mean())
    var_floor = cfg.variance_floor * floor_base

    rng = np.random.default_rng(cfg.seed)
    means = _kmeans_pp_init(X, k, rng)
    variances = np.tile(np.maximum(data_var, var_floor), (k, 1))
    weights = np.full(k, 1.0 / k)

    gm = GaussianMixture(weights=weights, means=means, variances=variances, pca=pca)
    ll_history: list[float] = []
    prev_ll = -np.inf
    for _ in range(cfg.max_iters):
        log_comp = component_log_pdf(gm, X) + np.log(gm.weights)  # (n, k)
        row_ll = logsumexp(log_comp, axis=1)
        ll = float(row_ll.mean())
        ll_history.append(ll)

        resp = np.exp(log_comp - row_ll[:, None])
        nk = resp.sum(axis=0)

        new_weights = nk / n
        safe_nk = np.maximum(nk, np.finfo(np.float64).tiny)
        new_means = (resp.T @ X) / safe_nk[:, None]
        ex2 = (resp.T @ (X * X)) / safe_nk[:, None]
        new_vars = np.maximum(ex2 - new_means**2, var_floor)

        collapsed = np.nonzero(new_weights < _WEIGHT_RESCUE_THRESHOLD)[0]
        if collapsed.size:
            worst = int(np.argmin(row_ll))
            for ci in collapsed:
                new_means[ci] = X[worst]
                new_vars[ci] = np.maximum(data_var, var_floor)
                new_weights[ci] = 1.0 / k
            new_weights = new_weights / new_weights.sum()

        gm = GaussianMixture(
            weights=new_weights, means=new_means, variances=new_vars, pca=pca
        )
        if np.isfinite(prev_ll) and abs(ll - prev_ll) <= cfg.rel_tol * abs(prev_ll):
            break
        prev_ll = ll

    gm.em_log_likelihoods = ll_history
    gm.validate()
    return gm


# ---------------------------------------------------------------------------
# serialization: versioned text header + little-endian float64 blocks
# ---------------------------------------------------------------------------


def save_model(
    gm: GaussianMixture,
    path: str | Path,
    stats: dict[str, np.ndarray] | None = None,
) -> None:
    """Write a model file: header, then f64le blocks.

    Block order: weights, means, variances, [pca mean, pca basis], then the
    named stats vectors in header order.  ``stats`` carries whatever the
    scorer needs alongside the mixture (training-window norm ranges, MRF
    distance statistics).
    """
    gm.validate()
    stats = stats or {}
    lines = [_MAGIC, f"n={gm.n_components}", f"dim={gm.dim}"]
    if gm.pca is not None:
        lines.append(f"pca_in={gm.pca.in_dim}")
    stat_items = [(name, np.asarray(vec, dtype=np.float64).ravel()) for name, vec in stats.items()]
    if stat_items:
        lines.append("stats=" + ",".join(f"{name}:{vec.size}" for name, vec in stat_items))
    lines.append("end")
    header = ("\n".join(lines) + "\n").encode("ascii")

    blocks = [gm.weights, gm.means, gm.variances]
    if gm.pca is not None:
        blocks.extend([gm.pca.mean, gm.pca.basis])
    blocks.extend(vec for _, vec in stat_items)

    with open(path, "wb") as fh:
        fh.write(header)
        for block in blocks:
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_model(path: str | Path) -> tuple[GaussianMixture, dict[str, np.ndarray]]:
    """Read a model file written by :func:`save_model`."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0 or raw[:nl].decode("ascii", "replace") != _MAGIC:
        raise ValueError(f"{path}: not a {_MAGIC} model file")
    fields: dict[str, str] = {}
    pos = nl + 1
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise ValueError(f"{path}: truncated header")
        line = raw[pos:nl].decode("ascii")
        pos = nl + 1
        if line == "end":
            break
        key, _, value = line.partition("=")
        fields[key] = value

    n = int(fields["n"])
    dim = int(fields["dim"])
    pca_in = int(fields["pca_in"]) if "pca_in" in fields else None
    stat_spec: list[tuple[str, int]] = []
    if fields.get("stats"):
        for item in fields["stats"].split(","):
            name, _, size = item.partition(":")
            stat_spec.append((name, int(size)))

    def take(count: int) -> np.ndarray:
        nonlocal pos
        nbytes = count * 8
        if pos + nbytes > len(raw):
            raise ValueError(f"{path}: truncated data block")
        block = np.frombuffer(raw, dtype="<f8", count=count, offset=pos)
        pos += nbytes
        return block.astype(np.float64)

    weights = take(n)
    means = take(n * dim).reshape(n, dim)
    variances = take(n * dim).reshape(n, dim)
    pca = None
    if pca_in is not None:
        pca_mean = take(pca_in)
        pca_basis = take(pca_in * dim).reshape(pca_in, dim)
        pca = PcaProjection(mean=pca_mean, basis=pca_basis)
    stats = {name: take(size) for name, size in stat_spec}
    if pos != len(raw):
        raise ValueError(f"{path}: {len(raw) - pos} trailing bytes")
    gm = GaussianMixture(weights=weights, means=means, variances=variances, pca=pca)
    gm.validate()
    return gm, stats
