"""Fisher scores, Fisher vectors, and the two visual novelty measures.

The Fisher vector of a point under a diagonal GMM is the gradient of its
log-likelihood, normalized by the closed-form diagonal approximation of
the inverse square-root Fisher information.  With responsibilities
gamma_i(x), per component i and dimension k:

    mean block       gamma_i (x_k - mu_ik) / sigma_ik / sqrt(w_i)
    variance block   gamma_i ((x_k - mu_ik)^2 / var_ik - 1) / sqrt(2 w_i)

The weight-gradient block is omitted, so the vector has dimension 2*N*d.

Two novelty scores come out of this model:

* FVGMM -- the Euclidean norm of the Fisher vector, optionally min-max
  scaled against the training window's own norms.
* FVMRF -- per-component distances d_i(x) = ||x - mu_i|| standardized by
  their training-window mean and standard deviation, aggregated as
  ||z|| / sqrt(N).  This sidesteps the peaked responsibilities that make
  the raw Fisher vector sparse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gmm import GaussianMixture, _check_dim, responsibilities

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class NormStats:
    """Min/max of a raw score over the model's training window."""

    lo: float
    hi: float

    def scale(self, raw: float) -> float:
        if self.hi <= self.lo:
            return 0.0
        return min(1.0, max(0.0, (raw - self.lo) / (self.hi - self.lo)))


@dataclass
class MrfReference:
    """Component means plus training-window statistics of the distances to them."""

    means: np.ndarray      # (N, d)
    dist_mean: np.ndarray  # (N,)
    dist_std: np.ndarray   # (N,) floored at 1e-12

    @property
    def n_components(self) -> int:
        return int(self.means.shape[0])


def score_gradient(gm: GaussianMixture, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized Fisher score: d log p(x) / d(mu, sigma).

    Returns ``(grad_mu, grad_sigma)``, each (N, d); sigma is the standard
    deviation, not the variance.
    """
    x = _check_dim(gm, x)
    gamma = responsibilities(gm, x)  # (N,)
    diff = x[None, :] - gm.means     # (N, d)
    sigma2 = gm.variances
    grad_mu = gamma[:, None] * diff / sigma2
    sigma = np.sqrt(sigma2)
    grad_sigma = gamma[:, None] * (diff * diff / (sigma2 * sigma) - 1.0 / sigma)
    return grad_mu, grad_sigma


def fisher_vector(gm: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """Normalized Fisher vector of a single point, length 2*N*d.

    Layout: the mean-gradient block (components in model order), then the
    variance-gradient block.
    """
    x = _check_dim(gm, x)
    return _fisher_vectors(gm, x[None, :])[0]


def _fisher_vectors(gm: GaussianMixture, X: np.ndarray) -> np.ndarray:
    """Batched Fisher vectors, shape (n, 2*N*d)."""
    gamma = responsibilities(gm, X)           # (n, N)
    diff = X[:, None, :] - gm.means[None]     # (n, N, d)
    sigma = np.sqrt(gm.variances)[None]       # (1, N, d)
    inv_sqrt_w = 1.0 / np.sqrt(gm.weights)    # (N,)
    g_mu = gamma[:, :, None] * (diff / sigma) * inv_sqrt_w[None, :, None]
    g_sigma = (
        gamma[:, :, None]
        * (diff * diff / gm.variances[None] - 1.0)
        * (inv_sqrt_w / np.sqrt(2.0))[None, :, None]
    )
    n = X.shape[0]
    return np.concatenate([g_mu.reshape(n, -1), g_sigma.reshape(n, -1)], axis=1)


def fisher_kernel(gm: GaussianMixture, x: np.ndarray, y: np.ndarray) -> float:
    """K(x, y) = <G(x), G(y)>, the scalar-product form of the Fisher kernel."""
    return float(np.dot(fisher_vector(gm, x), fisher_vector(gm, y)))


def fvgmm_raw(gm: GaussianMixture, x: np.ndarray) -> float:
    """Euclidean norm of the Fisher vector (the raw FVGMM novelty)."""
    return float(np.linalg.norm(fisher_vector(gm, x)))


def fvgmm_raw_many(gm: GaussianMixture, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.linalg.norm(_fisher_vectors(gm, X), axis=1)


def fvgmm_norm_stats(gm: GaussianMixture, train_rows: np.ndarray) -> NormStats:
    """Min/max FVGMM norms over the training window, for min-max scaling."""
    norms = fvgmm_raw_many(gm, train_rows)
    return NormStats(lo=float(norms.min()), hi=float(norms.max()))


def fvgmm_novelty(
    gm: GaussianMixture, x: np.ndarray, norm_stats: NormStats
) -> tuple[float, float]:
    """Raw Fisher-vector norm and its min-max scaled value in [0, 1]."""
    raw = fvgmm_raw(gm, x)
    return raw, norm_stats.scale(raw)


def build_mrf_reference(gm: GaussianMixture, train_rows: np.ndarray) -> MrfReference:
    """Estimate per-component distance statistics over the training window."""
    X = np.asarray(train_rows, dtype=np.float64)
    dists = _component_distances(gm.means, X)  # (n, N)
    return MrfReference(
        means=gm.means.copy(),
        dist_mean=dists.mean(axis=0),
        dist_std=np.maximum(dists.std(axis=0), _STD_FLOOR),
    )


def _component_distances(means: np.ndarray, X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - means[None]
    return np.sqrt((diff * diff).sum(axis=2))


def fvmrf_novelty(ref: MrfReference, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Standardized component distances and their aggregate score.

    vector_i = (||x - mu_i|| - E[d_i]) / Std[d_i];  score = ||vector|| / sqrt(N).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != ref.means.shape[1]:
        raise ValueError(
            f"point has dim {x.shape[-1]}, reference has dim {ref.means.shape[1]}"
        )
    d = np.linalg.norm(x[None, :] - ref.means, axis=1)
    vector = (d - ref.dist_mean) / ref.dist_std
    score = float(np.linalg.norm(vector) / np.sqrt(ref.n_components))
    return vector, score


def fvmrf_score_many(ref: MrfReference, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    d = _component_distances(ref.means, X)
    z = (d - ref.dist_mean[None]) / ref.dist_std[None]
    return np.linalg.norm(z, axis=1) / np.sqrt(ref.n_components)
