"""Closed-form and dense-grid references for the low-dimensional cases.

These share no code with the panel quadrature in ``oscquad`` beyond the
Gauss-Legendre nodes, so they serve as independent checks of it and of the
Monte Carlo shell estimates.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import fresnel

from .oscquad import panel_grid


def linear_integral(a) -> np.ndarray:
    """``int_0^1 e^{2 pi i a x} dx`` in closed form."""
    a = np.asarray(a, dtype=float)
    z = 2j * np.pi * a
    safe = np.where(a == 0, 1.0, z)
    return np.where(a == 0, 1.0 + 0j, np.expm1(safe) / safe)


def _fresnel_e(z) -> np.ndarray:
    s, c = fresnel(z)
    return c + 1j * s


def quadratic_integral(a1, a2) -> np.ndarray:
    """``int_0^1 e^{2 pi i (a1 x + a2 x^2)} dx`` via Fresnel integrals.

    Completing the square with ``c = a1 / (2 a2)`` gives
    ``e^{-2 pi i a2 c^2} (E(2 sqrt(a2) (1 + c)) - E(2 sqrt(a2) c)) / (2 sqrt(a2))``
    with ``E = C + iS``.  Negative ``a2`` uses ``I(a1, a2) = conj I(-a1, -a2)``;
    tiny ``|a2|``, where the difference cancels, falls back to a dense
    Gauss-Legendre sum.
    """
    a1, a2 = np.broadcast_arrays(np.asarray(a1, dtype=float), np.asarray(a2, dtype=float))
    flip = a2 < 0
    b1 = np.where(flip, -a1, a1)
    b2 = np.abs(a2)
    small = b2 < 1e-6 * np.maximum(1.0, np.abs(b1))
    out = np.empty(a1.shape, dtype=complex)

    big = ~small
    if big.any():
        q1, q2 = b1[big], b2[big]
        sq = np.sqrt(q2)
        c = q1 / (2.0 * q2)
        diff = _fresnel_e(2.0 * sq * (1.0 + c)) - _fresnel_e(2.0 * sq * c)
        # a2 c^2 = a1^2 / (4 a2); reduce the phase mod 1 before exponentiating
        ph = np.mod(q1 * q1 / (4.0 * q2), 1.0)
        out[big] = np.exp(-2j * np.pi * ph) * diff / (2.0 * sq)
    if small.any():
        q1, q2 = b1[small], b2[small]
        n = int(math.ceil(np.max(np.abs(q1) + q2))) + 4
        x, w = panel_grid(n, 16)
        ph = np.multiply.outer(q1, x) + np.multiply.outer(q2, x * x)
        out[small] = (np.exp(2j * np.pi * ph) * w).sum(axis=1)
    return np.where(flip, np.conj(out), out)


def linear_shell_integral(k2: int, R: float, R_outer: float | None = None) -> float:
    """``int_{R <= |a| < R_outer} |sin(pi a) / (pi a)|^k2 da`` (both signs of ``a``)."""
    Ro = 2.0 * R if R_outer is None else R_outer
    n = max(1, math.ceil(4 * (Ro - R)))
    t, w = panel_grid(n, 16)
    a = R + (Ro - R) * t
    return 2.0 * (Ro - R) * float(np.sum(w * np.abs(linear_integral(a)) ** k2))


def quadratic_shell_integral(
    k2: int, R: float, R_outer: float | None = None, nodes_per_unit: float = 16.0
) -> float:
    """``int_{R <= |a| < R_outer} |I(a1, a2)|^k2 da`` on a dense polar grid.

    Gauss panels in ``r`` and ``phi`` with about ``nodes_per_unit`` nodes per
    unit of arc length, which resolves the unit-scale oscillation of ``|I|``.
    The half-plane ``phi in [0, pi)`` is doubled by ``|I(-a)| = |I(a)|``.
    """
    Ro = 2.0 * R if R_outer is None else R_outer
    per_panel = 8
    nr = max(1, math.ceil(nodes_per_unit * (Ro - R) / per_panel))
    nphi = max(1, math.ceil(nodes_per_unit * math.pi * Ro / per_panel))
    tr, wr = panel_grid(nr, per_panel)
    tp, wp = panel_grid(nphi, per_panel)
    r = R + (Ro - R) * tr
    phi = math.pi * tp
    cos, sin = np.cos(phi), np.sin(phi)
    total = 0.0
    for ri, wi in zip(r, wr):
        vals = np.abs(quadratic_integral(ri * cos, ri * sin)) ** k2
        total += wi * ri * float(np.sum(wp * vals))
    return 2.0 * math.pi * (Ro - R) * total
