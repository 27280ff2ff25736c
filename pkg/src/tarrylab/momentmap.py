"""The nine power-sum moments of six planar points and their Jacobians.

Points are flat coordinate vectors ``(x1, y1, x2, y2, ...)``.  For six points
the moment map is

    f = (sum x, sum y, sum x^2, sum xy, sum y^2,
         sum x^3, sum x^2 y, sum x y^2, sum y^3)

and the difference system on twelve points is ``f(first six) - f(last six)``.
All functions accept a trailing coordinate axis and broadcast over leading
axes, so a batch of points is an array of shape ``(N, 12)`` or ``(N, 24)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _random

N_MOMENTS = 9
# columns 1,3,5,7,9,6,8,10,12 (one-based) of the 9x12 Jacobian
SELECTED_COLUMNS = (0, 2, 4, 6, 8, 5, 7, 9, 11)


class DimensionError(ValueError):
    pass


def _split(p) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] % 2:
        raise DimensionError("coordinate vector must have even length")
    return p[..., 0::2], p[..., 1::2]


def moments(p) -> np.ndarray:
    """``(f1, ..., f9)`` for a point (or batch) of six planar points."""
    x, y = _split(p)
    terms = (x, y, x * x, x * y, y * y, x**3, x * x * y, x * y * y, y**3)
    return np.stack([t.sum(axis=-1) for t in terms], axis=-1)


def difference_system(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 24:
        raise DimensionError("difference system needs 24 coordinates")
    return moments(p[..., :12]) - moments(p[..., 12:])


def jacobian_A(p) -> np.ndarray:
    """``d f_i / d(x_j, y_j)``; shape ``(..., 9, 2n)`` for ``n`` points."""
    x, y = _split(p)
    one = np.ones_like(x)
    zero = np.zeros_like(x)
    rows = (
        (one, zero),
        (zero, one),
        (2 * x, zero),
        (y, x),
        (zero, 2 * y),
        (3 * x * x, zero),
        (2 * x * y, x * x),
        (y * y, 2 * x * y),
        (zero, 3 * y * y),
    )
    out = np.empty(x.shape[:-1] + (N_MOMENTS, 2 * x.shape[-1]))
    for i, (dx, dy) in enumerate(rows):
        out[..., i, 0::2] = dx
        out[..., i, 1::2] = dy
    return out


def jacobian_A0(p) -> np.ndarray:
    """Jacobian of the difference system, ``(..., 9, 24)``."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 24:
        raise DimensionError("difference system needs 24 coordinates")
    return np.concatenate([jacobian_A(p[..., :12]), -jacobian_A(p[..., 12:])], axis=-1)


def gram_det(m) -> np.ndarray | float:
    """``det(M M^T)`` for ``r x n`` matrices with ``r <= n``.

    Computed as the squared product of the diagonal of ``R`` in ``M^T = QR``,
    which keeps small determinants accurate where forming ``M M^T`` would
    square the condition number.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim < 2:
        raise DimensionError("need a matrix")
    r, n = m.shape[-2:]
    if r > n:
        raise DimensionError(f"Gram determinant of {r}x{n} rows is identically zero; need r <= n")
    rr = np.linalg.qr(np.swapaxes(m, -1, -2), mode="r")
    d = np.diagonal(rr, axis1=-2, axis2=-1)
    g = np.prod(d * d, axis=-1)
    return g if g.ndim else float(g)


def selected_minor_det(p12) -> np.ndarray | float:
    """Determinant of the 9x9 minor on columns 1,3,5,7,9,6,8,10,12."""
    a = jacobian_A(p12)
    d = np.linalg.det(a[..., :, SELECTED_COLUMNS])
    return d if np.ndim(d) else float(d)


def block_B(p12) -> np.ndarray:
    """Rows ``3x^2, y^2, 2x, y, 2xy`` over the first five points."""
    x, y = _split(p12)
    x, y = x[..., :5], y[..., :5]
    return np.stack([3 * x * x, y * y, 2 * x, y, 2 * x * y], axis=-2)


def block_B_det(p12) -> np.ndarray | float:
    d = np.linalg.det(block_B(p12))
    return d if np.ndim(d) else float(d)


@dataclass(frozen=True)
class ScanReport:
    n_samples: int
    threshold: float
    fraction_gram: float
    fraction_minor: float
    seed: int

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ScanReport:
        return cls(**json.loads(text))


def degeneracy_scan(n_samples: int, threshold: float, seed: int) -> ScanReport:
    """Fraction of uniform points of ``[0,1]^12`` with ``G < threshold``
    (and with ``|selected minor| < sqrt(threshold)``)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    low_g = 0
    low_minor = 0
    cut = np.sqrt(threshold)
    for _, pts in _random.uniform_blocks(n_samples, 12, seed):
        low_g += int(np.count_nonzero(gram_det(jacobian_A(pts)) < threshold))
        low_minor += int(np.count_nonzero(np.abs(selected_minor_det(pts)) < cut))
    return ScanReport(
        n_samples=n_samples,
        threshold=float(threshold),
        fraction_gram=low_g / n_samples,
        fraction_minor=low_minor / n_samples,
        seed=seed,
    )
