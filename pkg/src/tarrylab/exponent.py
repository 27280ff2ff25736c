"""Dyadic-shell tail estimates in coefficient space and decay fits.

``theta = int |I(a)|^(2k) da`` over all coefficient vectors converges iff
the dyadic-shell contributions ``S(R) = int_{R <= |a| < 2R} |I|^(2k)`` are
summable over ``R = 2^m R0``.  Each shell is estimated by uniform Monte Carlo
in the annulus, and the sign of the fitted log-log slope of ``S`` against
``R`` gives the verdict.
"""

from __future__ import annotations

import enum
import hashlib
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import _random
from .oscquad import (
    BudgetExceeded,
    QuadratureConfig,
    interval_integrals,
    panel_grid,
    unit_square_integral,
)
from .phasepoly import PhasePolynomial, canonical_tarry_basis


class InsufficientShells(ValueError):
    pass


@dataclass(frozen=True)
class PhaseFamily:
    """A coefficient space: 1D exponents, or the bivariate cubic basis."""

    name: str
    exponents: tuple[int, ...] = ()
    bivariate: bool = False

    @property
    def dim(self) -> int:
        return len(canonical_tarry_basis()) if self.bivariate else len(self.exponents)


FAMILIES = {
    "linear": PhaseFamily("linear", (1,)),
    "quadratic": PhaseFamily("quadratic", (1, 2)),
    "cubic": PhaseFamily("cubic", (1, 2, 3)),
    "x3": PhaseFamily("x3", (3,)),
    "tarry": PhaseFamily("tarry", bivariate=True),
}


def get_family(name: str | PhaseFamily) -> PhaseFamily:
    if isinstance(name, PhaseFamily):
        return name
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown phase family {name!r}; known: {sorted(FAMILIES)}") from None


@dataclass
class TailShell:
    R: float
    k2: int
    estimate: float
    stderr: float
    n_samples: int
    dropped: int = 0
    R_outer: float | None = None
    family: str = ""
    strata: dict = field(default_factory=dict)

    @property
    def outer(self) -> float:
        return 2.0 * self.R if self.R_outer is None else self.R_outer

    def as_dict(self) -> dict:
        return {
            "R": self.R,
            "R_outer": self.outer,
            "k2": self.k2,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n": self.n_samples,
            "dropped": self.dropped,
            "family": self.family,
            "strata": self.strata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TailShell:
        return cls(
            R=d["R"], k2=d["k2"], estimate=d["estimate"], stderr=d["stderr"], n_samples=d["n"],
            dropped=d.get("dropped", 0), R_outer=d.get("R_outer"), family=d.get("family", ""),
            strata=d.get("strata", {}),
        )


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    slope_stderr: float
    shells_used: int

    def __post_init__(self):
        if self.shells_used < 3:
            raise InsufficientShells("a decay fit needs at least 3 shells")


class Status(str, enum.Enum):
    CONVERGES = "Converges"
    DIVERGES = "Diverges"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Verdict:
    status: Status
    fitted_total_exponent: float
    margin: float


@dataclass(frozen=True)
class KnownExponent:
    case_id: str
    gamma: float
    provenance: str
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


# -- sampling ------------------------------------------------------------------------


def annulus_volume(dim: int, R: float, R_outer: float) -> float:
    vd = math.exp(0.5 * dim * math.log(math.pi) - math.lgamma(0.5 * dim + 1.0))
    return vd * (R_outer**dim - R**dim)


def _stream(dim: int, R: float, R_outer: float) -> int:
    key = f"{_random.STREAM_TAIL}:{dim}:{R!r}:{R_outer!r}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def annulus_samples(dim: int, R: float, R_outer: float, n: int, seed: int) -> np.ndarray:
    """Uniform points of ``{R <= |a| < R_outer}`` in ``R^dim``.

    Radius has density proportional to ``r^(dim-1)``, direction is a
    normalised Gaussian.  Sample ``i`` depends only on ``(seed, dim, R,
    R_outer, i)``.
    """
    if not 0 < R < R_outer:
        raise ValueError("need 0 < R < R_outer")
    stream = _stream(dim, R, R_outer)
    out = np.empty((n, dim))
    for start in range(0, n, _random.BLOCK):
        rng = _random.block_generator(seed, stream, start // _random.BLOCK)
        g = rng.standard_normal((_random.BLOCK, dim))
        u = rng.random(_random.BLOCK)
        m = min(_random.BLOCK, n - start)
        g, u = g[:m], u[:m]
        r = (R**dim + u * (R_outer**dim - R**dim)) ** (1.0 / dim)
        out[start:start + m] = g / np.linalg.norm(g, axis=1, keepdims=True) * r[:, None]
    return out


def _moduli(family: PhaseFamily, alphas: np.ndarray, cfg: QuadratureConfig) -> tuple[np.ndarray, np.ndarray]:
    """``|I(a)|`` per sample and a mask of samples that stayed within budget."""
    if not family.bivariate:
        values, _, ok = interval_integrals(alphas, family.exponents, cfg)
        return np.abs(values), ok
    mod = np.full(alphas.shape[0], np.nan)
    ok = np.zeros(alphas.shape[0], dtype=bool)
    for i, a in enumerate(alphas):
        try:
            mod[i] = abs(unit_square_integral(PhasePolynomial.tarry(a), cfg).value)
        except BudgetExceeded:
            continue
        ok[i] = True
    return mod, ok


def tail_shells(
    family,
    k2s: Sequence[int],
    R: float,
    n_samples: int,
    seed: int,
    quad_cfg: QuadratureConfig | None = None,
    R_outer: float | None = None,
) -> dict[int, TailShell]:
    """Shell estimates for several exponents from one sample set."""
    fam = get_family(family)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    for k2 in k2s:
        if k2 < 0 or k2 % 2:
            raise ValueError("k2 must be a non-negative even integer")
    cfg = quad_cfg or QuadratureConfig()
    Ro = 2.0 * R if R_outer is None else float(R_outer)
    alphas = annulus_samples(fam.dim, R, Ro, n_samples, seed)
    vol = annulus_volume(fam.dim, R, Ro)
    if all(k2 == 0 for k2 in k2s):
        mod, ok = np.ones(n_samples), np.ones(n_samples, dtype=bool)
    else:
        mod, ok = _moduli(fam, alphas, cfg)
    kept = int(ok.sum())
    dropped = n_samples - kept
    out = {}
    for k2 in k2s:
        vals = mod[ok] ** k2
        if kept:
            est = vol * float(vals.mean())
            err = vol * float(vals.std(ddof=1)) / math.sqrt(kept) if kept > 1 else float("inf")
        else:
            est, err = float("nan"), float("inf")
        strata = {}
        if fam.bivariate and kept:
            dom = np.argmax(np.abs(alphas[ok]), axis=1)
            for j in range(fam.dim):
                sel = dom == j
                if sel.any():
                    strata[str(j + 1)] = {"n": int(sel.sum()), "estimate": vol * float(vals[sel].mean())}
        out[k2] = TailShell(float(R), int(k2), est, err, n_samples, dropped, Ro, fam.name, strata)
    return out


def tail_shell(
    dim: int,
    family,
    k2: int,
    R: float,
    n_samples: int,
    seed: int,
    quad_cfg: QuadratureConfig | None = None,
    R_outer: float | None = None,
) -> TailShell:
    """Monte Carlo ``int_{R <= |a| < R_outer} |I(a)|^k2 da`` (``R_outer = 2R`` by default).

    ``dim`` must match the coefficient count of ``family``.
    """
    fam = get_family(family)
    if dim != fam.dim:
        raise ValueError(f"family {fam.name!r} has {fam.dim} coefficients, not {dim}")
    return tail_shells(family, [k2], R, n_samples, seed, quad_cfg, R_outer)[k2]


# -- fitting -------------------------------------------------------------------------


def decay_fit(shells: Sequence[TailShell]) -> DecayFit:
    """Weighted least squares of ``log S`` on ``log R``.

    Weights are ``(S / stderr)^2``; with any zero stderr the fit is unweighted.
    The slope error is inflated by the reduced chi-square when that exceeds 1.
    """
    good = [s for s in shells if np.isfinite(s.estimate) and s.estimate > 0]
    if len(good) < len(shells):
        warnings.warn(f"dropped {len(shells) - len(good)} shells with non-positive estimates", stacklevel=2)
    if len(good) < 3:
        raise InsufficientShells(f"need >= 3 usable shells, got {len(good)}")
    x = np.log([s.R for s in good])
    y = np.log([s.estimate for s in good])
    sig = np.array([s.stderr / s.estimate for s in good])
    weighted = bool(np.all(sig > 0) and np.all(np.isfinite(sig)))
    w = 1.0 / sig**2 if weighted else np.ones_like(x)
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    coef = cov @ (XtW @ y)
    resid = y - X @ coef
    dof = len(good) - 2
    chi2 = float(np.sum(w * resid**2))
    if weighted:
        cov = cov * max(1.0, chi2 / dof)
    else:
        cov = cov * (chi2 / dof)
    return DecayFit(float(coef[1]), float(coef[0]), float(math.sqrt(max(cov[1, 1], 0.0))), len(good))


def verdict(fit: DecayFit) -> Verdict:
    """Converges if the slope is below zero by more than two standard errors,
    Diverges if above zero by as much, Inconclusive otherwise."""
    s, e = fit.slope, fit.slope_stderr
    if s + 2.0 * e < 0:
        status = Status.CONVERGES
    elif s - 2.0 * e > 0:
        status = Status.DIVERGES
    else:
        status = Status.INCONCLUSIVE
    return Verdict(status, s, abs(s) - 2.0 * e)


# -- reference exponents ---------------------------------------------------------------


def full_polynomial_exponent(n: int) -> float:
    """``1 + n(n+1)/2`` for a complete degree-``n`` polynomial, ``n >= 2``."""
    if n < 2:
        raise ValueError("the complete-polynomial formula is stated for n >= 2")
    return 1.0 + 0.5 * (n * n + n)


def incomplete_polynomial_exponent(exponents: Sequence[int]) -> float:
    """Sum of the degrees present, for a polynomial missing some degree."""
    exps = sorted(set(int(e) for e in exponents))
    if not exps or exps[0] < 1:
        raise ValueError("exponents must be positive integers")
    if exps == list(range(1, exps[-1] + 1)):
        raise ValueError(f"{exps} is a complete polynomial; use full_polynomial_exponent")
    return float(sum(exps))


def known_exponent_table() -> list[KnownExponent]:
    table = [
        KnownExponent(f"1d-full-n{n}", full_polynomial_exponent(n), "complete 1D polynomial: 1 + n(n+1)/2")
        for n in (2, 3, 4)
    ]
    table += [
        KnownExponent("1d-incomplete-x3", incomplete_polynomial_exponent([3]), "incomplete 1D: sum of degrees"),
        KnownExponent("1d-incomplete-x1-x3", incomplete_polynomial_exponent([1, 3]), "incomplete 1D: sum of degrees"),
        KnownExponent(
            "2d-cubic-9",
            11.0,
            "bivariate 9-monomial cubic: converges at 12, diverges at 10, expected 11",
            lower=10.0,
            upper=12.0,
        ),
    ]
    return table


# -- Plancherel -------------------------------------------------------------------------

PLANCHEREL_QUAD = QuadratureConfig(base_points_per_panel=12, refinement_tolerance=1e-4)


def plancherel_check_1d(k2: int, T: float, quad_cfg: QuadratureConfig | None = None) -> tuple[float, float]:
    """``(int_{-T}^{T} |int_0^1 e^{2 pi i a x} dx|^2 da, 1)``.

    The second entry is the squared L2 norm of the indicator of ``[0, 1]``.
    The outer integral uses 10-point Gauss panels of width 2 (the integrand
    has period 1 in ``a`` times a smooth envelope) and ``|I(-a)| = |I(a)|``.
    """
    if k2 != 2:
        raise ValueError("only k2 = 2 has an exact Plancherel partner")
    if not T > 0:
        raise ValueError("T must be positive")
    cfg = quad_cfg or PLANCHEREL_QUAD
    n_panels = max(1, math.ceil(0.5 * T))
    t, w = panel_grid(n_panels, 10)
    values, _, ok = interval_integrals((T * t)[:, None], [1], cfg)
    if not ok.all():
        raise BudgetExceeded(-1, cfg.max_panels)
    return 2.0 * T * float(np.sum(w * np.abs(values) ** 2)), 1.0
