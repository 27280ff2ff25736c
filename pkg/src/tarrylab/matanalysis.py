"""Dyadic Gram shells, homogeneity of the selected minor, and matrix bounds."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import _random
from .momentmap import gram_det, jacobian_A0, selected_minor_det

GRAM_CEILING_LOG2 = 52
# row degrees of the moment Jacobian: 0,0,1,1,1,2,2,2,2
MINOR_DEGREE = 11
RANK_RTOL = 1e-13


class NonPositive(ValueError):
    pass


class DegenerateSpectrum(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ShellIndex:
    p: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("shell index must be >= 1")

    def bounds(self) -> tuple[float, float]:
        """``[2^(52-2p), 2^(54-2p))``."""
        return math.ldexp(1.0, GRAM_CEILING_LOG2 - 2 * self.p), math.ldexp(1.0, GRAM_CEILING_LOG2 + 2 - 2 * self.p)


def shell_index(g0: float) -> ShellIndex:
    """Smallest ``p >= 1`` with ``g0 >= 2^(52 - 2p)``.

    Shells are half-open, ``[2^(52-2p), 2^(54-2p))``, and ties go to the
    smaller ``p``; ``p = 1`` also absorbs ``[2^52, 2^54]``.
    """
    g0 = float(g0)
    if not g0 > 0:
        raise NonPositive(f"shell index undefined for G0 = {g0!r}")
    if not g0 <= math.ldexp(1.0, GRAM_CEILING_LOG2 + 2):
        raise ValueError(f"G0 = {g0!r} exceeds 2^54")
    # frexp gives floor(log2 g0) exactly: g0 = m * 2^e with m in [0.5, 1)
    floor_log2 = math.frexp(g0)[1] - 1
    p = max(1, -((floor_log2 - GRAM_CEILING_LOG2) // 2))
    return ShellIndex(p)


@dataclass
class ShellHistogram:
    counts: dict[int, int]
    n_samples: int
    seed: int
    unclassifiable: int = 0
    max_g0: float = 0.0
    above_ceiling: int = 0

    def rows(self) -> list[tuple[int, int, float]]:
        return [(p, c, c / self.n_samples) for p, c in sorted(self.counts.items())]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "count", "fraction"])
        for p, c, f in self.rows():
            w.writerow([p, c, repr(f)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "counts": {str(p): c for p, c in sorted(self.counts.items())},
                "n_samples": self.n_samples,
                "seed": self.seed,
                "unclassifiable": self.unclassifiable,
                "max_g0": self.max_g0,
                "above_ceiling": self.above_ceiling,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> ShellHistogram:
        d = json.loads(text)
        d["counts"] = {int(p): c for p, c in d["counts"].items()}
        return cls(**d)


def shell_histogram(n_samples: int, seed: int) -> ShellHistogram:
    """Classify uniform points of ``[0,1]^24`` by the shell of ``G0``.

    Points with ``G0 <= 0`` (numerically singular) are counted as
    unclassifiable; ``above_ceiling`` counts points with ``G0 > 2^52``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    counts: dict[int, int] = {}
    bad = 0
    above = 0
    gmax = 0.0
    ceiling = math.ldexp(1.0, GRAM_CEILING_LOG2)
    for _, pts in _random.uniform_blocks(n_samples, 24, seed):
        g = np.asarray(gram_det(jacobian_A0(pts)))
        gmax = max(gmax, float(g.max()))
        above += int(np.count_nonzero(g > ceiling))
        pos = g > 0
        bad += int(np.count_nonzero(~pos))
        floor_log2 = np.frexp(g[pos])[1] - 1
        p = np.maximum(1, -((floor_log2 - GRAM_CEILING_LOG2) // 2))
        for val, c in zip(*np.unique(p, return_counts=True)):
            counts[int(val)] = counts.get(int(val), 0) + int(c)
    return ShellHistogram(counts, n_samples, seed, bad, gmax, above)


def homogeneity_check(p12, lam: float) -> tuple[float, float]:
    """``(minor(lam * p), lam^11 * minor(p))``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    p12 = np.asarray(p12, dtype=float)
    return selected_minor_det(lam * p12), lam**MINOR_DEGREE * selected_minor_det(p12)


def schur_bound(m) -> float:
    """``sqrt(max row abs-sum * max column abs-sum)``, an upper bound on the
    largest singular value (equal to the max row sum for symmetric ``m``)."""
    a = np.abs(np.atleast_2d(np.asarray(m, dtype=float)))
    return float(math.sqrt(a.sum(axis=1).max() * a.sum(axis=0).max()))


def max_row_sum(m) -> float:
    return float(np.abs(np.atleast_2d(np.asarray(m, dtype=float))).sum(axis=1).max())


def hadamard_bound(m) -> float:
    """Product of row norms; bounds ``|det m|``."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("hadamard_bound needs a square matrix")
    return float(np.prod(np.linalg.norm(m, axis=1)))


@dataclass(frozen=True)
class SingularSpectrum:
    values: tuple[float, ...]

    def __post_init__(self):
        v = tuple(float(s) for s in self.values)
        if any(s < 0 for s in v) or any(a < b for a, b in zip(v, v[1:])):
            raise ValueError("singular values must be non-negative and non-increasing")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def singular_values(m) -> SingularSpectrum:
    """Non-increasing singular values; those below ``1e-13 * s_1`` are set to zero."""
    s = np.linalg.svd(np.atleast_2d(np.asarray(m, dtype=float)), compute_uv=False)
    if s.size and s[0] > 0:
        s = np.where(s < RANK_RTOL * s[0], 0.0, s)
    return SingularSpectrum(tuple(s))


def unit_ball_volume(d: int) -> float:
    return math.exp(0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0))


def ellipsoid_volume(s) -> float:
    """Volume of ``{u : sum s_i^2 u_i^2 <= 1}``, i.e. ``V_d / prod s_i``."""
    vals = np.asarray(tuple(s), dtype=float)
    if vals.size == 0:
        raise DegenerateSpectrum("empty spectrum")
    if np.any(vals <= 0):
        raise DegenerateSpectrum("spectrum has a zero singular value")
    return unit_ball_volume(vals.size) / float(np.prod(vals))


def ellipsoid_volume_mc(s, n: int, seed: int) -> tuple[float, float]:
    """Rejection estimate of the same volume from the bounding box."""
    vals = np.asarray(tuple(s), dtype=float)
    half = 1.0 / vals
    hits = 0
    for _, u in _random.uniform_blocks(n, vals.size, seed, _random.STREAM_ELLIPSOID):
        x = (2.0 * u - 1.0) * half
        hits += int(np.count_nonzero(np.sum((x * vals) ** 2, axis=1) <= 1.0))
    box = float(np.prod(2.0 * half))
    p = hits / n
    return box * p, box * math.sqrt(p * (1 - p) / n)


def kron(u, v) -> np.ndarray:
    """``(u_1 v_1, ..., u_1 v_m, u_2 v_1, ...)``."""
    return np.kron(np.asarray(u, dtype=float).reshape(-1), np.asarray(v, dtype=float).reshape(-1))
