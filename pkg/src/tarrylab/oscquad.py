"""Oscillatory integrals of ``exp(2 pi i F)`` over the unit interval and square.

Composite Gauss-Legendre panels.  The panel count grows with a bound on the
total phase variation (``sum |a_k| * max|grad monomial_k|``), so cost is
linear in ``||a||_1``.  The error estimate is the difference between a run
and the same run with twice the panels; if that is above tolerance the panel
count doubles until it is not or the budget runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .phasepoly import PhasePolynomial

TWO_PI = 2.0 * math.pi
_EPS = np.finfo(float).eps
# upper bound on complex entries materialised at once
_CHUNK = 1 << 21


class BudgetExceeded(RuntimeError):
    """Required panel count exceeds ``QuadratureConfig.max_panels``."""

    def __init__(self, required: int, max_panels: int):
        super().__init__(f"quadrature needs {required} panels, budget is {max_panels}")
        self.required = required
        self.max_panels = max_panels


@dataclass(frozen=True)
class QuadratureConfig:
    base_points_per_panel: int = 16
    panels_per_unit_frequency: float = 0.5
    refinement_tolerance: float = 1e-8
    max_panels: int = 1 << 20
    absolute_tolerance: float = 1e-12

    def __post_init__(self):
        if self.base_points_per_panel < 4:
            raise ValueError("base_points_per_panel must be >= 4")
        if self.refinement_tolerance <= 0 or self.absolute_tolerance < 0:
            raise ValueError("tolerances must be positive")
        if self.panels_per_unit_frequency <= 0:
            raise ValueError("panels_per_unit_frequency must be positive")
        if self.max_panels < 2:
            raise ValueError("max_panels must be >= 2")


@dataclass(frozen=True)
class ComplexEstimate:
    value: complex
    abs_error_estimate: float

    def __abs__(self) -> float:
        return abs(self.value)


@lru_cache(maxsize=64)
def _gauss_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


def panel_grid(n_panels: int, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite rule on ``[0, 1]``, panel-major order."""
    t, w = _gauss_unit(n_points)
    left = np.arange(n_panels, dtype=float)[:, None]
    x = ((left + t[None, :]) / n_panels).reshape(-1)
    wt = np.broadcast_to(w / n_panels, (n_panels, n_points)).reshape(-1)
    return x, np.ascontiguousarray(wt)


def required_panels(variation, cfg: QuadratureConfig):
    """``max(1, ceil(c * variation))``, elementwise."""
    v = np.ceil(cfg.panels_per_unit_frequency * np.asarray(variation, dtype=float))
    return np.maximum(1, v).astype(np.int64)


def _rounding_floor(variation) -> np.ndarray:
    return 16.0 * _EPS * (1.0 + TWO_PI * np.asarray(variation, dtype=float))


# -- one dimension -----------------------------------------------------------


def _interval_sum(alphas: np.ndarray, exponents: np.ndarray, n_panels: int, n_points: int) -> np.ndarray:
    x, w = panel_grid(n_panels, n_points)
    xp = x[None, :] ** exponents[:, None]
    out = np.empty(alphas.shape[0], dtype=complex)
    rows = max(1, _CHUNK // x.size)
    for s in range(0, alphas.shape[0], rows):
        phase = (TWO_PI * alphas[s:s + rows]) @ xp
        out[s:s + rows] = np.cos(phase) @ w + 1j * (np.sin(phase) @ w)
    return out


def panel_buckets(need) -> np.ndarray:
    """Round panel counts up to ``2^k * (1 + j/4)`` so batches share grids."""
    need = np.asarray(need, dtype=np.int64)
    k = np.floor(np.log2(np.maximum(need, 1))).astype(np.int64)
    step = np.maximum(1, 1 << np.maximum(k - 2, 0))
    return -(-need // step) * step


def _refine_interval(alphas, exponents, n_panels, cfg):
    floor = _rounding_floor(np.abs(alphas) @ exponents)
    coarse = _interval_sum(alphas, exponents, n_panels, cfg.base_points_per_panel)
    while True:
        if 2 * n_panels > cfg.max_panels:
            raise BudgetExceeded(2 * n_panels, cfg.max_panels)
        fine = _interval_sum(alphas, exponents, 2 * n_panels, cfg.base_points_per_panel)
        err = np.maximum(np.abs(fine - coarse), floor)
        tol = np.maximum(cfg.refinement_tolerance * np.abs(fine), cfg.absolute_tolerance)
        if np.all(err <= np.maximum(tol, floor)):
            return fine, err, 2 * n_panels
        coarse = fine
        n_panels *= 2


def interval_integrals(alphas, exponents, cfg: QuadratureConfig | None = None):
    """Batch ``int_0^1 exp(2 pi i sum_k a_k x^e_k) dx``.

    ``alphas`` has shape ``(B, K)``; ``exponents`` has ``K`` positive integers.
    Samples are bucketed by power-of-two panel counts so small phases run on
    small grids.  Returns ``(values, errors, ok)``; ``ok`` is False (value
    NaN) for samples whose panel requirement exceeds the budget.
    """
    cfg = cfg or QuadratureConfig()
    alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
    exponents = np.asarray(exponents, dtype=float).reshape(-1)
    if alphas.shape[1] != exponents.size:
        raise ValueError("alphas and exponents disagree in length")
    need = required_panels(np.abs(alphas) @ exponents, cfg)
    bucket = panel_buckets(need)
    values = np.full(alphas.shape[0], np.nan + 0j)
    errors = np.full(alphas.shape[0], np.nan)
    ok = np.zeros(alphas.shape[0], dtype=bool)
    for b in np.unique(bucket):
        idx = np.flatnonzero(bucket == b)
        if 2 * int(b) > cfg.max_panels:
            continue
        try:
            v, e, _ = _refine_interval(alphas[idx], exponents, int(b), cfg)
        except BudgetExceeded:
            # refine sample by sample so one stubborn phase does not sink the bucket
            for i in idx:
                try:
                    v1, e1, _ = _refine_interval(alphas[i:i + 1], exponents, int(b), cfg)
                except BudgetExceeded:
                    continue
                values[i], errors[i], ok[i] = v1[0], e1[0], True
            continue
        values[idx], errors[idx], ok[idx] = v, e, True
    return values, errors, ok


def unit_interval_integral(coeffs_1d, cfg: QuadratureConfig | None = None) -> ComplexEstimate:
    """``int_0^1 exp(2 pi i (a_1 x + ... + a_n x^n)) dx``."""
    cfg = cfg or QuadratureConfig()
    coeffs = np.asarray(coeffs_1d, dtype=float).reshape(1, -1)
    if coeffs.shape[1] < 1:
        raise ValueError("need at least one coefficient")
    exps = np.arange(1, coeffs.shape[1] + 1, dtype=float)
    n = int(required_panels(np.abs(coeffs[0]) @ exps, cfg))
    if 2 * n > cfg.max_panels:
        raise BudgetExceeded(2 * n, cfg.max_panels)
    v, e, _ = _refine_interval(coeffs, exps, n, cfg)
    return ComplexEstimate(complex(v[0]), float(e[0]))


# -- unit square -------------------------------------------------------------


def _square_sum(poly_alpha, ex, ey, nx, ny, n_points) -> complex:
    # F(x, y) = sum_i x^i c_i(y) with c_i(y) = sum over monomials with x-degree i
    x, wx = panel_grid(nx, n_points)
    y, wy = panel_grid(ny, n_points)
    deg = int(ex.max()) + 1
    c = np.zeros((deg, y.size))
    for a, i, j in zip(poly_alpha, ex, ey):
        if a != 0.0:
            c[i] += TWO_PI * a * y**j
    xp = x[:, None] ** np.arange(deg)[None, :]
    rows = max(1, _CHUNK // y.size)
    row_sums = np.empty(x.size, dtype=complex)
    for s in range(0, x.size, rows):
        phase = xp[s:s + rows] @ c
        row_sums[s:s + rows] = np.cos(phase) @ wy + 1j * (np.sin(phase) @ wy)
    return complex(row_sums @ wx)


def unit_square_integral(poly: PhasePolynomial, cfg: QuadratureConfig | None = None) -> ComplexEstimate:
    """``int_0^1 int_0^1 exp(2 pi i F(x, y)) dx dy`` on a tensor panel grid."""
    cfg = cfg or QuadratureConfig()
    alpha = poly.coeffs.values
    ex = np.array([i for i, _ in poly.basis.exponents])
    ey = np.array([j for _, j in poly.basis.exponents])
    vx = float(np.abs(alpha) @ poly.basis.x_weights())
    vy = float(np.abs(alpha) @ poly.basis.y_weights())
    nx = int(required_panels(vx, cfg))
    ny = int(required_panels(vy, cfg))
    floor = float(_rounding_floor(vx + vy))
    n = cfg.base_points_per_panel
    coarse = _square_sum(alpha, ex, ey, nx, ny, n)
    while True:
        if 4 * nx * ny > cfg.max_panels:
            raise BudgetExceeded(4 * nx * ny, cfg.max_panels)
        fine = _square_sum(alpha, ex, ey, 2 * nx, 2 * ny, n)
        err = max(abs(fine - coarse), floor)
        if err <= max(cfg.refinement_tolerance * abs(fine), cfg.absolute_tolerance, floor):
            return ComplexEstimate(fine, err)
        coarse = fine
        nx *= 2
        ny *= 2


def modulus_power(est, two_k: int) -> float:
    """``|I|^(2k)``; accepts a ComplexEstimate or a bare complex."""
    if two_k < 2 or two_k % 2:
        raise ValueError("two_k must be a positive even integer")
    v = est.value if isinstance(est, ComplexEstimate) else complex(est)
    return abs(v) ** two_k
