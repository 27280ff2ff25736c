"""Surface integrals over level sets from slab volumes.

For a constraint map ``f: R^n -> R^r`` the weighted surface integral
``int_{f = u} g ds / sqrt(G)`` (``G`` the Gram determinant of the gradients)
is the limit of ``(2h)^-r * int_{|f - u| < h} g dx`` as ``h -> 0``.  The
volumes are Monte Carlo estimates from uniform samples of an axis-aligned box;
all slab widths are evaluated on one shared sample set, so the estimates are
nested in ``h`` and exactly reproducible from the seed.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from . import _random
from .momentmap import difference_system, gram_det, jacobian_A0

TARRY_ETA = 1e-6


class ExtrapolationUnstable(RuntimeError):
    pass


class ZeroAcceptance(RuntimeError):
    pass


@dataclass(frozen=True)
class ConstraintSystem:
    """``r`` constraints on an ``n``-dimensional box.

    ``eval`` maps ``(N, n)`` points to ``(N, r)`` values and ``jacobian`` to
    ``(N, r, n)``.  ``inside`` optionally restricts the domain further (used
    for pulled-back systems whose domain is not a box).
    """

    ambient_dim: int
    n_constraints: int
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    inside: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __post_init__(self):
        if not 0 < self.n_constraints < self.ambient_dim:
            raise ValueError("need 0 < r < n")
        if len(self.lower) != self.ambient_dim or len(self.upper) != self.ambient_dim:
            raise ValueError("box bounds must match ambient dimension")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("empty box")

    @property
    def box_volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))


@dataclass(frozen=True)
class SlabConfig:
    h: float = 0.05
    n_samples: int = 1_000_000
    eta: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


@dataclass(frozen=True)
class SurfaceEstimate:
    value: float
    stderr: float
    h_used: float
    n_accepted: int
    per_h: tuple[tuple[float, float, float, int], ...] = field(default=(), compare=False)

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "h_used": self.h_used,
            "n_accepted": self.n_accepted,
            "per_h": [list(t) for t in self.per_h],
        }


# -- oracle systems ------------------------------------------------------------


def hyperplane_system(dim: int = 3, lower: float = 0.0, upper: float = 1.0) -> ConstraintSystem:
    """``f(x) = x_1``; level sets are flat with ``|grad f| = 1``."""
    def ev(p):
        return p[:, :1]

    def jac(p):
        j = np.zeros((p.shape[0], 1, dim))
        j[:, 0, 0] = 1.0
        return j

    return ConstraintSystem(dim, 1, ev, jac, (lower,) * dim, (upper,) * dim, name=f"plane{dim}")


def sphere_system(dim: int = 2, lower: float = -2.0, upper: float = 2.0) -> ConstraintSystem:
    """``f(x) = |x|^2``; ``dim=2`` gives circles, ``dim=3`` spheres."""
    def ev(p):
        return np.sum(p * p, axis=1, keepdims=True)

    def jac(p):
        return 2.0 * p[:, None, :]

    return ConstraintSystem(dim, 1, ev, jac, (lower,) * dim, (upper,) * dim, name=f"sphere{dim}")


def tarry_system() -> ConstraintSystem:
    """The nine-equation difference system on ``[0, 1]^24``."""
    return ConstraintSystem(24, 9, difference_system, jacobian_A0, (0.0,) * 24, (1.0,) * 24, name="tarry")


# -- sampling core -----------------------------------------------------------------


def _box_blocks(sys: ConstraintSystem, n: int, seed: int, stream: int):
    lo = np.asarray(sys.lower, dtype=float)
    span = np.asarray(sys.upper, dtype=float) - lo
    for _, s in _random.uniform_blocks(n, sys.ambient_dim, seed, stream):
        pts = lo + s * span
        if sys.inside is not None:
            pts = pts[sys.inside(pts)]
        yield pts


def _gram_ok(sys: ConstraintSystem, pts: np.ndarray, eta: float) -> np.ndarray:
    if eta <= 0 or pts.shape[0] == 0:
        return np.ones(pts.shape[0], dtype=bool)
    return np.asarray(gram_det(sys.jacobian(pts))) >= eta


def _slab_sums(sys, u, hs, eta, n, seed, integrand=None, stream=_random.STREAM_BOX):
    """Per-h ``(sum w, sum w^2, count)`` over samples with ``max_j |f_j - u_j| < h``."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != sys.n_constraints:
        raise ValueError(f"level has {u.size} components, system has {sys.n_constraints}")
    hs = np.asarray(hs, dtype=float)
    s1 = np.zeros(hs.size)
    s2 = np.zeros(hs.size)
    cnt = np.zeros(hs.size, dtype=np.int64)
    hmax = hs.max()
    for pts in _box_blocks(sys, n, seed, stream):
        dev = np.max(np.abs(sys.eval(pts) - u), axis=1)
        near = dev < hmax
        pts, dev = pts[near], dev[near]
        keep = _gram_ok(sys, pts, eta)
        pts, dev = pts[keep], dev[keep]
        w = np.ones(pts.shape[0]) if integrand is None else np.asarray(integrand(pts), dtype=float)
        for k, h in enumerate(hs):
            m = dev < h
            s1[k] += w[m].sum()
            s2[k] += (w[m] ** 2).sum()
            cnt[k] += int(m.sum())
    return s1, s2, cnt


def _mc_mean(s1, s2, n, volume):
    mean = s1 / n
    var = np.maximum(s2 / n - mean**2, 0.0)
    return volume * mean, volume * np.sqrt(var / n)


def slab_volume(sys: ConstraintSystem, u, cfg: SlabConfig) -> tuple[float, float]:
    """Volume of ``{|f_j - u_j| < h for all j, G >= eta}`` and its binomial standard error."""
    s1, s2, _ = _slab_sums(sys, u, [cfg.h], cfg.eta, cfg.n_samples, cfg.seed)
    v, e = _mc_mean(s1, s2, cfg.n_samples, sys.box_volume)
    return float(v[0]), float(e[0])


def _check_sequence(h_sequence) -> np.ndarray:
    hs = np.asarray(h_sequence, dtype=float).reshape(-1)
    if hs.size == 0 or np.any(hs <= 0) or np.any(np.diff(hs) >= 0):
        raise ValueError("h_sequence must be positive and strictly decreasing")
    return hs


def extrapolate_linear(hs, values, errors) -> tuple[float, float]:
    """Intercept of a weighted straight-line fit ``value ~ c0 + c1 h``."""
    hs, values, errors = (np.asarray(a, dtype=float) for a in (hs, values, errors))
    if hs.size == 1:
        return float(values[0]), float(errors[0])
    X = np.column_stack([np.ones_like(hs), hs])
    if np.all(errors > 0):
        W = 1.0 / errors**2
    else:
        W = np.ones_like(hs)
    XtW = X.T * W
    cov = np.linalg.inv(XtW @ X)
    coef = cov @ (XtW @ values)
    if not np.all(errors > 0):
        return float(coef[0]), 0.0
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


def _stability(values, errors, label=""):
    for a, b, ea, eb in zip(values[:-1], values[1:], errors[:-1], errors[1:]):
        comb = math.hypot(ea, eb)
        if abs(a - b) > 5.0 * comb and abs(a - b) > 1e-12 * max(abs(a), abs(b)):
            raise ExtrapolationUnstable(
                f"{label}successive slab estimates {a:.6g} and {b:.6g} differ by more than 5x "
                f"their combined standard error {comb:.3g}"
            )


def surface_measure(
    sys: ConstraintSystem,
    u,
    cfg: SlabConfig,
    h_sequence: Sequence[float],
    integrand: Callable[[np.ndarray], np.ndarray] | None = None,
) -> SurfaceEstimate:
    """``int_{f = u} g ds / sqrt(G)`` (``g = 1`` unless ``integrand`` is given).

    Slab estimates at each ``h`` are extrapolated to ``h = 0`` linearly.
    """
    hs = _check_sequence(h_sequence)
    s1, s2, cnt = _slab_sums(sys, u, hs, cfg.eta, cfg.n_samples, cfg.seed, integrand)
    vol, err = _mc_mean(s1, s2, cfg.n_samples, sys.box_volume)
    scale = (2.0 * hs) ** sys.n_constraints
    est, est_err = vol / scale, err / scale
    _stability(est, est_err)
    value, stderr = extrapolate_linear(hs, est, est_err)
    per_h = tuple((float(h), float(v), float(e), int(c)) for h, v, e, c in zip(hs, est, est_err, cnt))
    return SurfaceEstimate(value, stderr, float(hs[-1]), int(cnt[-1]), per_h)


# -- coarea ------------------------------------------------------------------------


@dataclass(frozen=True)
class CoareaResult:
    lhs: float
    rhs: float
    lhs_stderr: float
    rhs_stderr: float

    @property
    def combined_stderr(self) -> float:
        return math.hypot(self.lhs_stderr, self.rhs_stderr)


def volume_integral(sys: ConstraintSystem, integrand, n: int, seed: int) -> tuple[float, float]:
    """Plain Monte Carlo ``int_Omega g dx`` on the box (own sample stream)."""
    s1 = s2 = 0.0
    for pts in _box_blocks(sys, n, seed, _random.STREAM_VOLUME):
        w = np.ones(pts.shape[0]) if integrand is None else np.asarray(integrand(pts), dtype=float)
        s1 += w.sum()
        s2 += (w * w).sum()
    v, e = _mc_mean(np.array([s1]), np.array([s2]), n, sys.box_volume)
    return float(v[0]), float(e[0])


def coarea_check(
    sys: ConstraintSystem,
    integrand,
    u_grid: Sequence[tuple[float, float, int]],
    cfg: SlabConfig,
    fractions: Sequence[float] = (1.0, 0.5, 0.25),
) -> CoareaResult:
    """Compare ``int_Omega g dx`` with ``int du int_{f=u} g ds/sqrt(G)``.

    ``u_grid`` gives one uniform ``(lo, hi, cells)`` grid per constraint and
    should cover the image of ``f``.  Each cell's surface integral is taken at
    the cell centre with slab half-widths ``fraction * cell half-width`` and
    extrapolated to zero; the outer integral is the midpoint rule.
    """
    if len(u_grid) != sys.n_constraints:
        raise ValueError("need one grid per constraint")
    fr = _check_sequence(fractions)
    if fr[0] > 1.0:
        raise ValueError("fractions must not exceed 1 (slabs would overlap)")
    lo = np.array([g[0] for g in u_grid], dtype=float)
    hi = np.array([g[1] for g in u_grid], dtype=float)
    cells = np.array([int(g[2]) for g in u_grid])
    width = (hi - lo) / cells
    n_cells = int(np.prod(cells))
    s1 = np.zeros((fr.size, n_cells))
    s2 = np.zeros((fr.size, n_cells))

    for pts in _box_blocks(sys, cfg.n_samples, cfg.seed, _random.STREAM_BOX):
        f = sys.eval(pts)
        idx = np.floor((f - lo) / width).astype(np.int64)
        valid = np.all((idx >= 0) & (idx < cells), axis=1)
        keep = valid & _gram_ok(sys, pts, cfg.eta)
        pts, f, idx = pts[keep], f[keep], idx[keep]
        centre = lo + (idx + 0.5) * width
        rel = np.max(np.abs(f - centre) / (0.5 * width), axis=1)
        flat = np.ravel_multi_index(idx.T, cells) if idx.size else np.zeros(0, dtype=np.int64)
        w = np.ones(pts.shape[0]) if integrand is None else np.asarray(integrand(pts), dtype=float)
        for k, c in enumerate(fr):
            m = rel < c
            s1[k] += np.bincount(flat[m], weights=w[m], minlength=n_cells)
            s2[k] += np.bincount(flat[m], weights=w[m] ** 2, minlength=n_cells)

    vol, err = _mc_mean(s1, s2, cfg.n_samples, sys.box_volume)
    slab = np.prod(width)  # (2h)^r at fraction 1
    cell_vol = np.prod(width)
    rhs = 0.0
    rhs_var = 0.0
    for c in range(n_cells):
        scale = slab * fr**sys.n_constraints
        est, est_err = vol[:, c] / scale, err[:, c] / scale
        _stability(est, est_err, label=f"cell {c}: ")
        v, e = extrapolate_linear(fr, est, est_err)
        rhs += cell_vol * v
        rhs_var += (cell_vol * e) ** 2
    lhs, lhs_err = volume_integral(sys, integrand, cfg.n_samples, cfg.seed)
    return CoareaResult(lhs, rhs, lhs_err, math.sqrt(rhs_var))


# -- change of variables -------------------------------------------------------------


def pull_back(sys: ConstraintSystem, Q) -> ConstraintSystem:
    """The system ``xi -> f(Q xi)`` on the preimage of the box."""
    Q = np.asarray(Q, dtype=float)
    n = sys.ambient_dim
    if Q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}")
    Qinv = np.linalg.inv(Q)
    lo = np.asarray(sys.lower)
    hi = np.asarray(sys.upper)
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(n, -1).T
    pre = corners @ Qinv.T
    plo, phi = pre.min(axis=0), pre.max(axis=0)
    axis_aligned = np.count_nonzero(Q - np.diag(np.diag(Q))) == 0

    def inside(xi):
        x = xi @ Q.T
        ok = np.all((x >= lo) & (x <= hi), axis=1)
        if sys.inside is not None:
            ok &= sys.inside(x)
        return ok

    return ConstraintSystem(
        n,
        sys.n_constraints,
        lambda xi: sys.eval(xi @ Q.T),
        lambda xi: sys.jacobian(xi @ Q.T) @ Q,
        tuple(plo),
        tuple(phi),
        None if axis_aligned and sys.inside is None else inside,
        name=f"{sys.name}@Q",
    )


def change_of_variables_check(sys: ConstraintSystem, Q, u, cfg: SlabConfig, h_sequence):
    """``(direct, transformed)`` surface integrals; equal when the change of
    variables formula holds.  ``transformed`` uses ``|det Q|`` times the
    surface integral of the pulled-back system with Gram ``det(J Q Q^T J^T)``."""
    Q = np.asarray(Q, dtype=float)
    direct = surface_measure(sys, u, cfg, h_sequence)
    pulled = pull_back(sys, Q)
    # slab widths refer to values of f, so the same h_sequence applies
    t = surface_measure(pulled, u, cfg, h_sequence)
    jac = abs(float(np.linalg.det(Q)))
    transformed = replace(t, value=jac * t.value, stderr=jac * t.stderr,
                          per_h=tuple((h, jac * v, jac * e, c) for h, v, e, c in t.per_h))
    return direct, transformed


# -- the 24-dimensional probe ----------------------------------------------------------


def tarry_surface_probe(cfg: SlabConfig) -> SurfaceEstimate:
    """Slab estimate at ``h = cfg.h`` of the surface integral of ``1/sqrt(G0)``
    over the zero set of the difference system, samples with ``G0 < eta`` excluded."""
    sys = tarry_system()
    s1, s2, cnt = _slab_sums(sys, np.zeros(9), [cfg.h], cfg.eta, cfg.n_samples, cfg.seed)
    if cnt[0] == 0:
        raise ZeroAcceptance(f"no sample within h={cfg.h} of the variety; increase h or n_samples")
    vol, err = _mc_mean(s1, s2, cfg.n_samples, 1.0)
    scale = (2.0 * cfg.h) ** 9
    return SurfaceEstimate(float(vol[0] / scale), float(err[0] / scale), cfg.h, int(cnt[0]))


def tarry_probe_report(cfg: SlabConfig, h_sequence: Sequence[float]) -> dict:
    """Estimates over a decreasing ``h`` sequence; instability is recorded, not raised."""
    hs = _check_sequence(h_sequence)
    sys = tarry_system()
    s1, s2, cnt = _slab_sums(sys, np.zeros(9), hs, cfg.eta, cfg.n_samples, cfg.seed)
    vol, err = _mc_mean(s1, s2, cfg.n_samples, 1.0)
    scale = (2.0 * hs) ** 9
    est, est_err = vol / scale, err / scale
    warnings = []
    accepted = cnt > 0
    if not accepted.all():
        warnings.append("zero acceptance at h=" + ",".join(repr(float(h)) for h in hs[~accepted]))
    try:
        _stability(est[accepted], est_err[accepted])
    except ExtrapolationUnstable as exc:
        warnings.append(str(exc))
    if accepted.any():
        extrapolated, stderr = extrapolate_linear(hs[accepted], est[accepted], est_err[accepted])
    else:
        extrapolated, stderr = float("nan"), float("nan")
    return {
        "system_id": sys.name,
        "u": [0.0] * 9,
        "h_sequence": [float(h) for h in hs],
        "eta": cfg.eta,
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "estimates": [
            {"h": float(h), "value": float(v), "stderr": float(e), "n_accepted": int(c)}
            for h, v, e, c in zip(hs, est, est_err, cnt)
        ],
        "extrapolated": extrapolated,
        "stderr": stderr,
        "warnings": warnings,
    }
