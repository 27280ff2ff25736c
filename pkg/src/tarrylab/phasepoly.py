"""Bivariate phase polynomials and their one-variable analogues.

A phase is ``F(x, y) = sum_k a_k x^i_k y^j_k`` over a monomial basis without a
constant term.  The canonical basis for the cubic problem is

    x^3, x^2 y, x y^2, y^3, x^2, x y, y^2, x, y

in exactly that order, so a coefficient vector of length 9 is unambiguous.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TARRY_EXPONENTS: tuple[tuple[int, int], ...] = (
    (3, 0), (2, 1), (1, 2), (0, 3),
    (2, 0), (1, 1), (0, 2),
    (1, 0), (0, 1),
)


class CoefficientFileError(ValueError):
    """Raised for malformed coefficient files; the message carries line/column."""


@dataclass(frozen=True)
class MonomialBasis:
    exponents: tuple[tuple[int, int], ...]

    def __post_init__(self):
        exps = tuple((int(i), int(j)) for i, j in self.exponents)
        if len(set(exps)) != len(exps):
            raise ValueError("duplicate monomials in basis")
        for i, j in exps:
            if i < 0 or j < 0 or i + j < 1:
                raise ValueError(f"invalid monomial exponent ({i}, {j})")
        object.__setattr__(self, "exponents", exps)

    def __len__(self) -> int:
        return len(self.exponents)

    def degrees(self) -> tuple[int, ...]:
        return tuple(i + j for i, j in self.exponents)

    def x_weights(self) -> np.ndarray:
        """Max of |d/dx x^i y^j| on the unit square, per monomial."""
        return np.array([i for i, _ in self.exponents], dtype=float)

    def y_weights(self) -> np.ndarray:
        return np.array([j for _, j in self.exponents], dtype=float)


def canonical_tarry_basis() -> MonomialBasis:
    return MonomialBasis(TARRY_EXPONENTS)


def general_basis(n: int, m: int) -> MonomialBasis:
    """All ``x^i y^j`` with ``0 <= i <= n``, ``0 <= j <= m``, constant excluded."""
    exps = [(i, j) for i in range(n + 1) for j in range(m + 1) if i + j > 0]
    return MonomialBasis(tuple(exps))


@dataclass(frozen=True)
class CoefficientVector:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("coefficients must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class PhasePolynomial:
    basis: MonomialBasis
    coeffs: CoefficientVector

    def __post_init__(self):
        if not isinstance(self.coeffs, CoefficientVector):
            object.__setattr__(self, "coeffs", CoefficientVector(self.coeffs))
        if len(self.coeffs) != len(self.basis):
            raise ValueError(
                f"{len(self.coeffs)} coefficients for a basis of {len(self.basis)} monomials"
            )

    @classmethod
    def tarry(cls, alpha) -> PhasePolynomial:
        return cls(canonical_tarry_basis(), CoefficientVector(alpha))

    def __call__(self, x, y):
        return eval_phase(self, x, y)


def eval_phase(poly: PhasePolynomial, x, y):
    """``F(x, y)``; broadcasts over array arguments."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = np.zeros(np.broadcast(x, y).shape)
    for a, (i, j) in zip(poly.coeffs.values, poly.basis.exponents):
        if a != 0.0:
            total = total + a * x**i * y**j
    return total if total.ndim else float(total)


def eval_phase_1d(coeffs, x):
    """``sum_i a_i x^i`` for ``i = 1..n`` (``coeffs[0]`` multiplies ``x``)."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for i, a in enumerate(np.asarray(coeffs, dtype=float), start=1):
        if a != 0.0:
            total = total + a * x**i
    return total if total.ndim else float(total)


def _load_json_array(path: Path) -> list:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CoefficientFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in data
    ):
        raise CoefficientFileError(f"{path}:1:1: expected a JSON array of numbers")
    return data


def load_coefficients(path) -> PhasePolynomial:
    """Read a canonical 9-coefficient file."""
    data = _load_json_array(path)
    if len(data) != len(TARRY_EXPONENTS):
        raise CoefficientFileError(
            f"{path}:1:1: expected {len(TARRY_EXPONENTS)} coefficients, got {len(data)}"
        )
    return PhasePolynomial.tarry(data)


def load_coefficients_1d(path) -> np.ndarray:
    data = _load_json_array(path)
    if not data:
        raise CoefficientFileError(f"{path}:1:1: empty coefficient array")
    return np.asarray(data, dtype=float)


def dump_coefficients(values, path) -> None:
    Path(path).write_text(json.dumps([float(v) for v in np.asarray(values).reshape(-1)]))
