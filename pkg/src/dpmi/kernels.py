"""Hot inner-loop kernels with a numba fast path and a pure-numpy fallback.

The active path is chosen at import time: numba is used when it imports
cleanly and the env var DPMI_NUMBA is not set to 0/false/off. Both paths
take pre-drawn uniforms for anything random, so a given seed produces the
same perturbation on either path; purely numeric kernels may differ in the
last float ulps between paths (different summation order).

Run ``python3 benchmarks/bench_kernels.py`` to compare both paths.
"""

import os

import numpy as np

_flag = os.environ.get("DPMI_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "off", "no")


def _numpy_clip_rows_sum(grads, clip):
    """Clip each row of (L, P) grads to L2 norm <= clip, return (column sum, row norms)."""
    norms = np.sqrt(np.einsum("ij,ij->i", grads, grads))
    scale = np.ones_like(norms)
    over = norms > clip
    scale[over] = clip / norms[over]
    return grads.T @ scale, norms


def _numpy_sum_rows(grads):
    """Column sum of (L, P) grads."""
    return grads.sum(axis=0)


def _numpy_rr_bits(bits, rho, u_keep, u_bit):
    """Randomized response on a 0/1 array: keep w.p. rho, else uniform bit.

    u_keep and u_bit are uniforms of the same shape, drawn by the caller.
    """
    uniform = (u_bit < 0.5).astype(bits.dtype)
    return np.where(u_keep < rho, bits, uniform)


if NUMBA_REQUESTED:
    try:
        from numba import njit

        @njit(cache=True)
        def _numba_clip_rows_sum(grads, clip):
            n, p = grads.shape
            out = np.zeros(p)
            norms = np.empty(n)
            for i in range(n):
                s = 0.0
                for j in range(p):
                    s += grads[i, j] * grads[i, j]
                nrm = np.sqrt(s)
                norms[i] = nrm
                scale = 1.0 if nrm <= clip else clip / nrm
                for j in range(p):
                    out[j] += grads[i, j] * scale
            return out, norms

        @njit(cache=True)
        def _numba_sum_rows(grads):
            n, p = grads.shape
            out = np.zeros(p)
            for i in range(n):
                for j in range(p):
                    out[j] += grads[i, j]
            return out

        @njit(cache=True)
        def _numba_rr_bits(bits, rho, u_keep, u_bit):
            out = np.empty_like(bits)
            flat_b = bits.ravel()
            flat_o = out.ravel()
            flat_k = u_keep.ravel()
            flat_u = u_bit.ravel()
            for i in range(flat_b.size):
                if flat_k[i] < rho:
                    flat_o[i] = flat_b[i]
                else:
                    flat_o[i] = 1.0 if flat_u[i] < 0.5 else 0.0
            return out

        NUMBA_ACTIVE = True
        clip_rows_sum = _numba_clip_rows_sum
        sum_rows = _numba_sum_rows
        rr_bits = _numba_rr_bits
    except ImportError:
        NUMBA_ACTIVE = False
        clip_rows_sum = _numpy_clip_rows_sum
        sum_rows = _numpy_sum_rows
        rr_bits = _numpy_rr_bits
else:
    NUMBA_ACTIVE = False
    clip_rows_sum = _numpy_clip_rows_sum
    sum_rows = _numpy_sum_rows
    rr_bits = _numpy_rr_bits
