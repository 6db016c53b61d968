"""Pure-numpy implementations of the hot kernels.

Same call signatures as the compiled extension ``etmpc._kernels``; the
active implementation is chosen in :mod:`etmpc.kernels`.
"""
from __future__ import annotations

import numpy as np

IMPL = "python"

# Two-link arm constants: inertia offset and coupling coefficients.
_D0 = 31.0 / 36.0


def arm_rates(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Batched two-link-arm state derivatives.

    x: (N, 4) states [w_a, w_b, theta, beta]; u: (N, 2); returns (N, 4).
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    w_a, w_b, th = x[:, 0], x[:, 1], x[:, 2]
    u1, u2 = u[:, 0], u[:, 1]
    s, c = np.sin(th), np.cos(th)
    den = _D0 + 2.25 * s * s
    n1 = 2.25 * s * c * w_a**2 + 2.0 * w_b**2 + (4.0 / 3.0) * u1 - (4.0 / 3.0) * u2 - 1.5 * c * u2
    n2 = 2.25 * s * c * w_b**2 + 3.5 * w_a**2 - (7.0 / 3.0) * u2 + 1.5 * c * (u1 - u2)
    out = np.empty_like(x)
    out[:, 0] = n1 / den
    out[:, 1] = n2 / den
    out[:, 2] = w_a - w_b
    out[:, 3] = w_b
    return out


def poly_eval(coeffs: np.ndarray, breaks: np.ndarray, ts: np.ndarray, derivative: int = 0) -> np.ndarray:
    """Evaluate a piecewise polynomial (or a derivative) at sample times.

    coeffs: (K, n, d+1) ascending-power coefficients in local time s = t - breaks[k];
    breaks: (K+1,) segment boundaries; ts: (N,). Times at interior breaks use
    the right segment. Returns (N, n).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    breaks = np.asarray(breaks, dtype=float)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    nseg = coeffs.shape[0]
    idx = np.clip(np.searchsorted(breaks, ts, side="right") - 1, 0, nseg - 1)
    s = ts - breaks[idx]
    cs = coeffs[idx]  # (N, n, d+1)
    for _ in range(derivative):
        d = cs.shape[2] - 1
        if d == 0:
            cs = np.zeros((cs.shape[0], cs.shape[1], 1))
            continue
        cs = cs[:, :, 1:] * np.arange(1, d + 1)
    # Horner in local time.
    out = cs[:, :, -1].copy()
    for j in range(cs.shape[2] - 2, -1, -1):
        out = out * s[:, None] + cs[:, :, j]
    return out
