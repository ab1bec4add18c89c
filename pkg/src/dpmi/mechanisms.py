"""Local randomizers and noise calibration.

Randomized response here is the generalized coin: keep the true bit with
probability rho, otherwise answer with a fair coin, so
P[keep] = rho + (1 - rho) / 2 and the per-invocation budget is
eps_i = ln((1 + rho) / (1 - rho)). The classic two-fair-coin scheme is the
rho = 0.5 special case (eps = ln 3). Budgets over a record compose
additively.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels


def rr_budget(rho: float) -> float:
    """Per-invocation epsilon of randomized response with retention rho."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"retention probability must be in [0, 1), got {rho}")
    return math.log((rho + (1 - rho) * 0.5) / ((1 - rho) * 0.5))


def rr_retention(eps_i: float) -> float:
    """Inverse of rr_budget: rho = (e^eps - 1) / (e^eps + 1)."""
    if eps_i < 0:
        raise ValueError(f"epsilon must be >= 0, got {eps_i}")
    return math.expm1(eps_i) / (math.exp(eps_i) + 1.0)


def rr_perturb_bit(bit: int, rho: float, rng: np.random.Generator) -> int:
    """Keep the bit w.p. rho, else answer a fair coin."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"retention probability must be in [0, 1), got {rho}")
    if rng.random() < rho:
        return bit
    return 1 if rng.random() < 0.5 else 0


def ldp_perturb_record(bits: np.ndarray, rho: float,
                       rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Randomize every bit of a record independently; returns (bits, composed eps)."""
    out = ldp_perturb_matrix(bits.reshape(1, -1), rho, rng)
    return out[0], bits.size * rr_budget(rho)


def ldp_perturb_matrix(bits: np.ndarray, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Randomized response applied elementwise to a 0/1 array."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"retention probability must be in [0, 1), got {rho}")
    arr = np.asarray(bits, dtype=np.float64)
    if arr.size and not np.isin(arr, (0.0, 1.0)).all():
        raise ValueError("randomized response needs binary input")
    if arr.size == 0:
        return arr.copy()
    u_keep = rng.random(arr.shape)
    u_bit = rng.random(arr.shape)
    return kernels.rr_bits(arr, rho, u_keep, u_bit)


def compose_local_budget(eps_list) -> float:
    """Composed budget of sequential local randomizers: the plain sum."""
    eps_list = list(eps_list)
    for e in eps_list:
        if e < 0:
            raise ValueError(f"negative budget {e}")
    return math.fsum(eps_list)


def laplace_scale(sensitivity: float, eps: float) -> float:
    """Laplace mechanism scale lambda = sensitivity / eps."""
    if eps <= 0 or sensitivity <= 0:
        raise ValueError("sensitivity and eps must be positive")
    return sensitivity / eps


def pixelation_scale(m: float, b: int, eps_i: float) -> float:
    """Per-pixel Laplace scale for image pixelation: 255 * m / (b^2 * eps_i)."""
    if m <= 0 or b < 1 or eps_i <= 0:
        raise ValueError("need m > 0, b >= 1, eps_i > 0")
    return 255.0 * m / (b * b * eps_i)


def pixelate_image(img: np.ndarray, m: float, b: int, eps_i: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Laplace-noise pixelation of a grayscale image with values in [0, 255].

    With b > 1 the image is first coarsened by b x b mean pooling (each cell
    replaced by its mean); b = 1 adds per-pixel noise without coarsening. The
    result is clamped back to [0, 255], which is safe post-processing.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2-d grayscale image")
    if img.min(initial=0.0) < 0 or img.max(initial=0.0) > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    h, w = img.shape
    if b > min(h, w):
        raise ValueError(f"cell width {b} exceeds image size {img.shape}")
    scale = pixelation_scale(m, b, eps_i)
    if b > 1:
        if h % b or w % b:
            raise ValueError(f"cell width {b} must divide image dims {img.shape}")
        blocks = img.reshape(h // b, b, w // b, b).mean(axis=(1, 3))
        img = np.repeat(np.repeat(blocks, b, axis=0), b, axis=1)
    noisy = img + rng.laplace(0.0, scale, size=img.shape)
    return np.clip(noisy, 0.0, 255.0)


def edge_rr_adjacency(adj: np.ndarray, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Edge-level randomized response on an adjacency matrix.

    Every upper-triangle entry is randomized and mirrored below the diagonal;
    the diagonal is zeroed; any node left isolated gets one symmetric edge to
    a uniformly chosen partner.
    """
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError(f"adjacency must be square, got {adj.shape}")
    n = adj.shape[0]
    iu = np.triu_indices(n, k=1)
    upper = ldp_perturb_matrix(adj[iu].reshape(1, -1), rho, rng)[0]
    out = np.zeros_like(adj)
    out[iu] = upper
    out += out.T
    if n >= 2:
        isolated = np.flatnonzero(out.sum(axis=1) == 0)
        for i in isolated:
            j = rng.integers(n - 1)
            if j >= i:
                j += 1
            out[i, j] = out[j, i] = 1.0
    return out


def gaussian_sigma_for(eps: float, delta: float, sensitivity: float) -> float:
    """Minimal Gaussian-mechanism sigma = sqrt(2 ln(1.25/delta)) * sens / eps.

    Valid for eps in (0, 1) only; the DP training path calibrates noise as
    sigma = z * C instead and is not limited to this range.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if sensitivity <= 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity}")
    return math.sqrt(2.0 * math.log(1.25 / delta)) * sensitivity / eps
