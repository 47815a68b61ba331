"""Compositional (aesthetic) features of a raster image: 47 values.

Groups, in output order:

* luminance contrast (1)
* mean hue/saturation/brightness, whole image (3) and central third (3)
* std of hue/saturation/brightness (3)
* pleasure / arousal / dominance (3)
* Itten histograms: hue 12 bins, saturation 5, brightness 3 (20)
* Itten contrasts: std of each histogram's bin-index distribution (3)
* saliency mean/max/std and salient-region count (4)
* horizontal symmetry (1)
* Haralick entropy/energy/homogeneity/contrast (4)
* colorfulness (1), unique-hue count (1)

Conventions (fixed so the vector is reproducible): hue statistics are
taken over chromatic pixels only (saturation > 0), with hue mean/std 0 and
the hue histogram collapsed to bin 0 when no pixel is chromatic; the
central region is the middle-third crop; saturation bins split at
.2/.4/.6/.8 and brightness at 1/3 and 2/3.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

HARALICK_LEVELS = 32
HARALICK_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))  # (row, col) steps
SALIENCY_SIZE = 64

ITTEN_HUE_BINS = 12
ITTEN_SAT_EDGES = (0.2, 0.4, 0.6, 0.8)
ITTEN_BRI_EDGES = (1.0 / 3.0, 2.0 / 3.0)

FEATURE_NAMES: tuple[str, ...] = (
    ("lum_contrast",)
    + ("hue_mean", "sat_mean", "bri_mean")
    + ("hue_mean_center", "sat_mean_center", "bri_mean_center")
    + ("hue_std", "sat_std", "bri_std")
    + ("pleasure", "arousal", "dominance")
    + tuple(f"itten_hue_{i:02d}" for i in range(ITTEN_HUE_BINS))
    + tuple(f"itten_sat_{i}" for i in range(5))
    + tuple(f"itten_bri_{i}" for i in range(3))
    + ("itten_contrast_hue", "itten_contrast_sat", "itten_contrast_bri")
    + ("saliency_mean", "saliency_max", "saliency_std", "salient_regions")
    + ("symmetry",)
    + ("haralick_entropy", "haralick_energy", "haralick_homogeneity", "haralick_contrast")
    + ("colorfulness", "unique_hues")
)
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 47


def _validate_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) RGB array, got shape {img.shape}")
    if img.shape[0] < 8 or img.shape[1] < 8:
        raise ValueError(f"image too small ({img.shape[0]}x{img.shape[1]}), need >= 8x8")
    return img.astype(np.float64) / 255.0


def rgb_to_hsv(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hexcone HSV from RGB in [0,1]; hue in [0,1), 0 for achromatic pixels."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        hr = np.where(c > 0, ((g - b) / np.where(c > 0, c, 1.0)) % 6.0, 0.0)
        hg = np.where(c > 0, (b - r) / np.where(c > 0, c, 1.0) + 2.0, 0.0)
        hb = np.where(c > 0, (r - g) / np.where(c > 0, c, 1.0) + 4.0, 0.0)
    h = np.where(v == r, hr, np.where(v == g, hg, hb)) / 6.0
    h = np.where(c > 0, h % 1.0, 0.0)
    return h, s, v


def luminance(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma in the input scale."""
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def emotional_dims(mean_s: float, mean_v: float) -> tuple[float, float, float]:
    """Pleasure/arousal/dominance as linear forms of saturation and brightness."""
    if not (0.0 <= mean_s <= 1.0 and 0.0 <= mean_v <= 1.0):
        raise ValueError(f"mean saturation/brightness must lie in [0,1], got {mean_s}, {mean_v}")
    pleasure = 0.69 * mean_v + 0.22 * mean_s
    arousal = -0.31 * mean_v + 0.60 * mean_s
    dominance = 0.76 * mean_v + 0.32 * mean_s
    return pleasure, arousal, dominance


def quantize_gray(gray: np.ndarray, levels: int = HARALICK_LEVELS) -> np.ndarray:
    """Quantize [0,255] gray values to integer levels 0..levels-1."""
    q = np.floor(np.asarray(gray, dtype=np.float64) * levels / 256.0).astype(np.int64)
    return np.clip(q, 0, levels - 1)


def glcm(
    quantized: np.ndarray,
    offsets: tuple[tuple[int, int], ...] = HARALICK_OFFSETS,
    levels: int = HARALICK_LEVELS,
) -> np.ndarray:
    """Symmetric normalized gray-level co-occurrence matrix.

    Each offset's raw count matrix is symmetrized and normalized to sum 1,
    then the per-offset matrices are averaged with equal weight.
    """
    q = np.asarray(quantized, dtype=np.int64)
    if q.size == 0:
        raise ValueError("empty matrix")
    h, w = q.shape
    acc = np.zeros((levels, levels), dtype=np.float64)
    used = 0
    for dr, dc in offsets:
        r0, r1 = max(0, -dr), min(h, h - dr)
        c0, c1 = max(0, -dc), min(w, w - dc)
        if r0 >= r1 or c0 >= c1:
            continue
        a = q[r0:r1, c0:c1].ravel()
        b = q[r0 + dr : r1 + dr, c0 + dc : c1 + dc].ravel()
        counts = np.bincount(a * levels + b, minlength=levels * levels).reshape(
            levels, levels
        ).astype(np.float64)
        sym = counts + counts.T
        acc += sym / sym.sum()
        used += 1
    if used == 0:
        raise ValueError("matrix too small for any co-occurrence offset")
    return acc / used


def haralick_features(
    quantized: np.ndarray,
    offsets: tuple[tuple[int, int], ...] = HARALICK_OFFSETS,
    levels: int = HARALICK_LEVELS,
) -> tuple[float, float, float, float]:
    """(entropy, energy, homogeneity, contrast) of the normalized GLCM.

    entropy = -sum P ln P (0 ln 0 := 0); energy = sum P^2;
    homogeneity = sum P / (1 + |i-j|); contrast = sum (i-j)^2 P.
    """
    p = glcm(quantized, offsets=offsets, levels=levels)
    nz = p[p > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    energy = float((p * p).sum())
    idx = np.arange(levels, dtype=np.float64)
    gap = np.abs(idx[:, None] - idx[None, :])
    homogeneity = float((p / (1.0 + gap)).sum())
    contrast = float((gap * gap * p).sum())
    return entropy, energy, homogeneity, contrast


def resize_bilinear(gray: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Deterministic bilinear resize (half-pixel centers, edges clamped)."""
    gray = np.asarray(gray, dtype=np.float64)
    h, w = gray.shape
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = gray[np.ix_(y0, x0)] * (1 - fx) + gray[np.ix_(y0, x1)] * fx
    bot = gray[np.ix_(y1, x0)] * (1 - fx) + gray[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def _gaussian_kernel_5x5(sigma: float = 2.5) -> np.ndarray:
    taps = np.exp(-(np.arange(-2, 3, dtype=np.float64) ** 2) / (2.0 * sigma * sigma))
    taps /= taps.sum()
    return np.outer(taps, taps)


def spectral_saliency(gray: np.ndarray) -> np.ndarray:
    """Spectral-residual saliency map, normalized to [0,1].

    Pipeline: 2-D FFT; log amplitude; residual = log amplitude minus its
    3x3 box filter; recombine with the original phase; inverse FFT;
    squared magnitude; 5x5 Gaussian blur (sigma 2.5); min-max normalize.
    A constant input (no spectrum beyond DC) maps to all zeros.
    """
    g = np.asarray(gray, dtype=np.float64)
    if g.size == 0:
        raise ValueError("empty image")
    if g.max() == g.min():
        return np.zeros_like(g)
    spectrum = np.fft.fft2(g)
    amplitude = np.abs(spectrum)
    log_amp = np.log(amplitude + 1e-12)
    residual = log_amp - ndimage.uniform_filter(log_amp, size=3, mode="reflect")
    rebuilt = spectrum * (np.exp(residual) / (amplitude + 1e-12))
    smap = np.abs(np.fft.ifft2(rebuilt)) ** 2
    smap = ndimage.convolve(smap, _gaussian_kernel_5x5(), mode="reflect")
    lo, hi = smap.min(), smap.max()
    if hi <= lo:
        return np.zeros_like(smap)
    return (smap - lo) / (hi - lo)


def salient_region_count(smap: np.ndarray) -> int:
    """Connected components (4-connectivity) above 3x the map mean."""
    threshold = 3.0 * float(smap.mean())
    mask = smap > threshold
    if not mask.any():
        return 0
    _, count = ndimage.label(mask)
    return int(count)


def horizontal_symmetry(gray: np.ndarray) -> float:
    """1 - mean |gray - mirror(gray)| / 255 over [0,255] gray values."""
    g = np.asarray(gray, dtype=np.float64)
    return 1.0 - float(np.abs(g - g[:, ::-1]).mean()) / 255.0


def colorfulness(rgb: np.ndarray) -> float:
    """Opponent-space colorfulness: sqrt(var_rg+var_yb) + 0.3 sqrt(mu_rg^2+mu_yb^2)."""
    rg = rgb[..., 0] - rgb[..., 1]
    yb = 0.5 * (rgb[..., 0] + rgb[..., 1]) - rgb[..., 2]
    sigma = np.sqrt(rg.var() + yb.var())
    mu = np.sqrt(rg.mean() ** 2 + yb.mean() ** 2)
    return float(sigma + 0.3 * mu)


def _index_std(hist: np.ndarray) -> float:
    """Std of the bin-index distribution described by a normalized histogram."""
    idx = np.arange(hist.size, dtype=np.float64)
    mean = float((idx * hist).sum())
    return float(np.sqrt(((idx - mean) ** 2 * hist).sum()))


def _central(region: np.ndarray) -> np.ndarray:
    h, w = region.shape[:2]
    r0, r1 = h // 3, -(-2 * h // 3)  # ceil(2h/3)
    c0, c1 = w // 3, -(-2 * w // 3)
    return region[r0:r1, c0:c1]


def extract_compositional(img: np.ndarray) -> np.ndarray:
    """The 47-value compositional feature vector of an RGB image.

    ``img`` is (h, w, 3) with 8-bit channel values; both dimensions must be
    at least 8.  Deterministic for identical pixels.
    """
    rgb = _validate_image(img)
    hue, sat, val = rgb_to_hsv(rgb)
    luma = luminance(rgb)
    chromatic = sat > 0
    n_chromatic = int(chromatic.sum())

    out = np.empty(N_FEATURES, dtype=np.float64)
    pos = 0

    out[pos] = float(luma.std())
    pos += 1

    hue_mean = float(hue[chromatic].mean()) if n_chromatic else 0.0
    out[pos : pos + 3] = (hue_mean, float(sat.mean()), float(val.mean()))
    pos += 3

    c_rgb = _central(rgb)
    c_hue, c_sat, c_val = rgb_to_hsv(c_rgb)
    c_chrom = c_sat > 0
    c_hue_mean = float(c_hue[c_chrom].mean()) if c_chrom.any() else 0.0
    out[pos : pos + 3] = (c_hue_mean, float(c_sat.mean()), float(c_val.mean()))
    pos += 3

    hue_std = float(hue[chromatic].std()) if n_chromatic else 0.0
    out[pos : pos + 3] = (hue_std, float(sat.std()), float(val.std()))
    pos += 3

    out[pos : pos + 3] = emotional_dims(float(sat.mean()), float(val.mean()))
    pos += 3

    if n_chromatic:
        bins = (np.floor(hue[chromatic] * ITTEN_HUE_BINS).astype(int)) % ITTEN_HUE_BINS
        hue_hist = np.bincount(bins, minlength=ITTEN_HUE_BINS) / n_chromatic
    else:
        hue_hist = np.zeros(ITTEN_HUE_BINS)
        hue_hist[0] = 1.0
    out[pos : pos + ITTEN_HUE_BINS] = hue_hist
    pos += ITTEN_HUE_BINS

    sat_hist = np.bincount(np.digitize(sat.ravel(), ITTEN_SAT_EDGES), minlength=5) / sat.size
    out[pos : pos + 5] = sat_hist
    pos += 5

    bri_hist = np.bincount(np.digitize(val.ravel(), ITTEN_BRI_EDGES), minlength=3) / val.size
    out[pos : pos + 3] = bri_hist
    pos += 3

    out[pos : pos + 3] = (_index_std(hue_hist), _index_std(sat_hist), _index_std(bri_hist))
    pos += 3

    gray255 = luma * 255.0
    smap = spectral_saliency(resize_bilinear(gray255, SALIENCY_SIZE, SALIENCY_SIZE))
    out[pos : pos + 4] = (
        float(smap.mean()),
        float(smap.max()),
        float(smap.std()),
        float(salient_region_count(smap)),
    )
    pos += 4

    out[pos] = horizontal_symmetry(gray255)
    pos += 1

    out[pos : pos + 4] = haralick_features(quantize_gray(gray255))
    pos += 4

    out[pos] = colorfulness(rgb)
    pos += 1

    unique_hues = 0
    if n_chromatic:
        bins = (np.floor(hue[chromatic] * ITTEN_HUE_BINS).astype(int)) % ITTEN_HUE_BINS
        unique_hues = int(np.unique(bins).size)
    out[pos] = float(unique_hues)
    pos += 1

    assert pos == N_FEATURES
    if not np.isfinite(out).all():
        raise ValueError("non-finite feature value computed")
    return out
