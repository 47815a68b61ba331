"""Independent reference implementations used to derive expected values.

Everything here deliberately takes a different computational path from the
package code: explicit pair enumeration instead of vectorized bincounts,
Floyd-Warshall instead of BFS, matrix DFT instead of FFT, relabeling
enumeration over raw values instead of rank arithmetic.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np


# -- tag novelty: two-pass brute force --------------------------------------


def tagnov_two_pass(tag_sets: list[set[str]]) -> list[tuple[float, float]]:
    """Per-image (raw, normalized) tag novelty by direct counting."""
    out = []
    for i, tags in enumerate(tag_sets):
        if not tags:
            out.append((0.0, 0.0))
            continue
        raw = 0.0
        for t in tags:
            count = sum(1 for j in range(i + 1) if t in tag_sets[j])
            raw -= math.log(count / (i + 1))
        raw /= len(tags)
        if i == 0:
            out.append((raw, 1.0))
        else:
            norm = raw / math.log(i + 1)
            out.append((raw, min(1.0, max(0.0, norm))))
    return out


# -- GLCM / Haralick: explicit pair enumeration ------------------------------


def glcm_pairs(quantized, offsets, levels):
    """Co-occurrence by looping over every pixel pair, one offset at a time."""
    q = np.asarray(quantized)
    h, w = q.shape
    acc = np.zeros((levels, levels))
    used = 0
    for dr, dc in offsets:
        counts = np.zeros((levels, levels))
        for r in range(h):
            for c in range(w):
                r2, c2 = r + dr, c + dc
                if 0 <= r2 < h and 0 <= c2 < w:
                    counts[q[r, c], q[r2, c2]] += 1
                    counts[q[r2, c2], q[r, c]] += 1  # symmetrize
        if counts.sum() > 0:
            acc += counts / counts.sum()
            used += 1
    return acc / used


def haralick_from_glcm(p):
    entropy = 0.0
    energy = 0.0
    homogeneity = 0.0
    contrast = 0.0
    levels = p.shape[0]
    for i in range(levels):
        for j in range(levels):
            v = p[i, j]
            if v > 0:
                entropy -= v * math.log(v)
            energy += v * v
            homogeneity += v / (1 + abs(i - j))
            contrast += (i - j) ** 2 * v
    return entropy, energy, homogeneity, contrast


# -- saliency: matrix DFT pipeline -------------------------------------------


def dft_saliency(gray: np.ndarray) -> np.ndarray:
    """Spectral-residual map via explicit DFT matrices (no np.fft)."""
    g = np.asarray(gray, dtype=np.complex128)
    n, m = g.shape
    wn = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    wm = np.exp(-2j * np.pi * np.outer(np.arange(m), np.arange(m)) / m)
    spectrum = wn @ g @ wm
    amp = np.abs(spectrum)
    log_amp = np.log(amp + 1e-12)
    # 3x3 box filter with edge-repeating padding (ndimage "reflect")
    padded = np.pad(log_amp, 1, mode="symmetric")
    box = np.zeros_like(log_amp)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            box += padded[1 + dr : 1 + dr + n, 1 + dc : 1 + dc + m]
    box /= 9.0
    residual = log_amp - box
    rebuilt = spectrum * np.exp(residual) / (amp + 1e-12)
    inv_n = np.conj(wn) / n
    inv_m = np.conj(wm) / m
    back = inv_n @ rebuilt @ inv_m
    smap = np.abs(back) ** 2
    # 5x5 gaussian, sigma 2.5, reflect padding
    taps = np.exp(-(np.arange(-2, 3) ** 2) / (2 * 2.5**2))
    taps = taps / taps.sum()
    kernel = np.outer(taps, taps)
    padded = np.pad(smap, 2, mode="symmetric")
    blurred = np.zeros_like(smap)
    for dr in range(5):
        for dc in range(5):
            blurred += kernel[dr, dc] * padded[dr : dr + n, dc : dc + m]
    lo, hi = blurred.min(), blurred.max()
    if hi <= lo:
        return np.zeros_like(blurred)
    return (blurred - lo) / (hi - lo)


# -- network metrics: Floyd-Warshall / set arithmetic -------------------------


def bf_metrics(nodes, edges, u):
    """(in_deg, out_deg, closeness, constraint, density) by brute force."""
    nodes = list(nodes)
    edge_set = set(edges)
    in_deg = sum(1 for a, b in edge_set if b == u)
    out_set = {b for a, b in edge_set if a == u}
    out_deg = len(out_set)

    # closeness: Floyd-Warshall over the undirected projection
    n = len(nodes)
    idx = {v: i for i, v in enumerate(nodes)}
    inf = float("inf")
    dist = [[inf] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = 0
    for a, b in edge_set:
        dist[idx[a]][idx[b]] = 1
        dist[idx[b]][idx[a]] = 1
    for k in range(n):
        dk = dist[k]
        for i in range(n):
            dik = dist[i][k]
            if dik == inf:
                continue
            di = dist[i]
            for j in range(n):
                alt = dik + dk[j]
                if alt < di[j]:
                    di[j] = alt
    iu = idx[u]
    finite = [dist[iu][j] for j in range(n) if j != iu and dist[iu][j] < inf]
    if not finite or n < 2:
        clo = 0.0
    else:
        r = len(finite)
        clo = (r / (n - 1)) * (r / sum(finite))

    # constraint: literal Burt formula on the ego subgraph
    if not out_set:
        con = 0.0
    else:
        ego = {u} | out_set
        und = {(a, b) for a, b in edge_set} | {(b, a) for a, b in edge_set}

        def p(i, j):
            if i == j:
                return 0.0
            num = 1.0 if (i, j) in und else 0.0
            den = sum(1.0 for k in ego if k != i and (i, k) in und)
            return num / den if den else 0.0

        con = 0.0
        for j in out_set:
            indirect = sum(p(u, q) * p(q, j) for q in ego if q != u and q != j)
            con += (p(u, j) + indirect) ** 2

    # density: directed ties among followees
    k = len(out_set)
    if k < 2:
        den = 0.0
    else:
        ties = sum(
            1 for a in out_set for b in out_set if a != b and (a, b) in edge_set
        )
        den = ties / (k * (k - 1))
    return in_deg, out_deg, clo, con, den


def all_digraphs(n):
    """Yield every labeled directed graph on n nodes as an edge list."""
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for mask in range(1 << len(pairs)):
        yield [pairs[b] for b in range(len(pairs)) if mask >> b & 1]


# -- Mann-Whitney: enumeration over raw values --------------------------------


def mwu_wins(a, b):
    """U for sample a by counting pairwise wins (ties count half)."""
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def mwu_exact(a, b):
    """(U, two-sided exact p) by enumerating every relabeling of the pool."""
    n1 = len(a)
    pooled = list(a) + list(b)
    u_obs = mwu_wins(a, b)
    mean_u = n1 * len(b) / 2.0
    observed = abs(u_obs - mean_u)
    count = total = 0
    indices = range(len(pooled))
    for subset in combinations(indices, n1):
        chosen = set(subset)
        ga = [pooled[i] for i in subset]
        gb = [pooled[i] for i in indices if i not in chosen]
        if abs(mwu_wins(ga, gb) - mean_u) >= observed - 1e-12:
            count += 1
        total += 1
    return u_obs, count / total


# -- pearson: direct formula ---------------------------------------------------


def pearson_direct(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    den = math.sqrt(sum((a - mx) ** 2 for a in x) * sum((b - my) ** 2 for b in y))
    return num / den
