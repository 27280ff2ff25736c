import math
import warnings

import numpy as np
import pytest

from tarrylab.exponent import (
    FAMILIES,
    DecayFit,
    InsufficientShells,
    KnownExponent,
    Status,
    TailShell,
    annulus_samples,
    annulus_volume,
    decay_fit,
    full_polynomial_exponent,
    incomplete_polynomial_exponent,
    known_exponent_table,
    plancherel_check_1d,
    tail_shell,
    tail_shells,
    verdict,
)
from tarrylab.oracles import linear_shell_integral, quadratic_shell_integral


def synthetic(values, radii=(1.0, 2.0, 4.0, 8.0), rel=0.01):
    return [TailShell(R, 2, v, rel * v, 100) for R, v in zip(radii, values)]


def test_k2_zero_is_annulus_volume():
    for fam, dim in (("linear", 1), ("quadratic", 2), ("cubic", 3)):
        s = tail_shell(dim, fam, 0, 3.0, 100, 0)
        assert s.estimate == annulus_volume(dim, 3.0, 6.0)
        assert s.stderr == 0.0
    assert annulus_volume(1, 10, 20) == pytest.approx(20.0)
    assert annulus_volume(2, 1, 2) == pytest.approx(3 * math.pi)


def test_linear_shell_matches_sinc_block():
    s = tail_shell(1, "linear", 2, 10.0, 20_000, 0)
    exact = linear_shell_integral(2, 10.0)
    assert exact == pytest.approx(0.00507, rel=0.01)
    assert s.estimate == pytest.approx(0.00507, rel=0.10)
    assert abs(s.estimate - exact) <= 4 * s.stderr


def test_shell_determinism():
    a = tail_shell(2, "quadratic", 4, 10.0, 500, 3)
    b = tail_shell(2, "quadratic", 4, 10.0, 500, 3)
    assert a == b
    assert tail_shell(2, "quadratic", 4, 10.0, 500, 4).estimate != a.estimate


def test_dim_must_match_family():
    with pytest.raises(ValueError):
        tail_shell(3, "quadratic", 2, 1.0, 10, 0)
    with pytest.raises(ValueError):
        tail_shell(2, "nope", 2, 1.0, 10, 0)
    with pytest.raises(ValueError):
        tail_shell(2, "quadratic", 3, 1.0, 10, 0)
    assert FAMILIES["tarry"].dim == 9


def test_annulus_samples_radii_and_directions():
    pts = annulus_samples(3, 2.0, 4.0, 50_000, 0)
    r = np.linalg.norm(pts, axis=1)
    assert r.min() >= 2.0 and r.max() < 4.0
    # uniform in volume: P(r < rho) = (rho^3 - 8) / 56
    rho = 3.0
    assert np.mean(r < rho) == pytest.approx((rho**3 - 8) / 56, abs=0.01)
    assert np.allclose(pts.mean(axis=0), 0.0, atol=0.05)
    one = annulus_samples(1, 1.0, 2.0, 10_000, 0)
    assert np.mean(one > 0) == pytest.approx(0.5, abs=0.03)


def test_annulus_samples_prefix_stable():
    a = annulus_samples(2, 1.0, 2.0, 70_000, 3)
    b = annulus_samples(2, 1.0, 2.0, 100, 3)
    assert np.array_equal(a[:100], b)


def test_monotone_in_k2():
    shells = tail_shells("quadratic", [0, 2, 4, 6, 8], 5.0, 2000, 1)
    est = [shells[k].estimate for k in (0, 2, 4, 6, 8)]
    assert est == sorted(est, reverse=True)


def test_shell_additivity():
    n = 20_000
    whole = tail_shell(1, "linear", 2, 5.0, n, 0, R_outer=20.0)
    a = tail_shell(1, "linear", 2, 5.0, n, 0)
    b = tail_shell(1, "linear", 2, 10.0, n, 0)
    assert abs(whole.estimate - (a.estimate + b.estimate)) <= 3 * math.sqrt(
        whole.stderr**2 + a.stderr**2 + b.stderr**2
    )


def test_quadratic_shells_match_dense_oracle():
    shells = tail_shells("quadratic", [2, 6], 10.0, 4000, 2)
    for k2 in (2, 6):
        dense = quadratic_shell_integral(k2, 10.0)
        assert abs(shells[k2].estimate - dense) <= 4 * shells[k2].stderr


def test_dense_oracle_resolution_converged():
    a = quadratic_shell_integral(6, 20.0, nodes_per_unit=6.0)
    b = quadratic_shell_integral(6, 20.0, nodes_per_unit=12.0)
    assert a == pytest.approx(b, rel=1e-6)


def test_decay_fit_exact_power_law():
    radii = (1.0, 2.0, 4.0, 8.0, 16.0)
    fit = decay_fit(synthetic([R**-2 for R in radii], radii))
    assert fit.slope == pytest.approx(-2.0, abs=1e-12)
    assert fit.shells_used == 5
    flat = decay_fit(synthetic([3.0] * 4))
    assert flat.slope == pytest.approx(0.0, abs=1e-12)


def test_decay_fit_unweighted_when_stderr_zero():
    shells = [TailShell(R, 0, R**1.5, 0.0, 10) for R in (1.0, 2.0, 4.0)]
    assert decay_fit(shells).slope == pytest.approx(1.5, abs=1e-12)


def test_decay_fit_drops_nonpositive():
    shells = synthetic([1.0, 0.5, 0.25, 0.125])
    shells.append(TailShell(16.0, 2, 0.0, 0.0, 10))
    with pytest.warns(UserWarning, match="dropped 1"):
        fit = decay_fit(shells)
    assert fit.shells_used == 4
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(InsufficientShells):
            decay_fit(synthetic([1.0, 0.5, 0.0, -1.0]))
    with pytest.raises(InsufficientShells):
        DecayFit(1.0, 0.0, 0.1, 2)


def test_linear_k4_slope():
    shells = [tail_shell(1, "linear", 4, R, 4000, 0) for R in (10.0, 20.0, 40.0, 80.0)]
    assert decay_fit(shells).slope == pytest.approx(-3.0, abs=0.2)


@pytest.mark.parametrize("slope, err, status", [(-2, 0.1, Status.CONVERGES), (1, 0.1, Status.DIVERGES),
                                                (-0.05, 0.2, Status.INCONCLUSIVE)])
def test_verdict_examples(slope, err, status):
    v = verdict(DecayFit(slope, 0.0, err, 4))
    assert v.status is status
    assert v.fitted_total_exponent == slope
    assert v.margin == pytest.approx(abs(slope) - 2 * err)


def test_known_exponents():
    assert full_polynomial_exponent(2) == 4.0
    assert full_polynomial_exponent(3) == 7.0
    assert incomplete_polynomial_exponent([3]) == 3.0
    assert incomplete_polynomial_exponent([1, 3]) == 4.0
    with pytest.raises(ValueError):
        full_polynomial_exponent(1)
    with pytest.raises(ValueError):
        incomplete_polynomial_exponent([1, 2])
    table = {k.case_id: k for k in known_exponent_table()}
    assert table["1d-full-n2"].gamma == 4.0
    assert table["1d-incomplete-x3"].gamma == 3.0
    two_d = table["2d-cubic-9"]
    assert (two_d.lower, two_d.upper, two_d.gamma) == (10.0, 12.0, 11.0)
    with pytest.raises(ValueError):
        KnownExponent("bad", 0.0, "")


def test_plancherel():
    small, u = plancherel_check_1d(2, 0.5)
    assert u == 1.0 and small < 1.0
    a100, _ = plancherel_check_1d(2, 100.0)
    assert a100 == pytest.approx(1.0, rel=0.01)
    # tail of the sinc^2 integral is about 1 / (pi^2 T)
    assert 1 - a100 == pytest.approx(1 / (math.pi**2 * 100), rel=0.05)
    seq = [plancherel_check_1d(2, T)[0] for T in (1.0, 4.0, 16.0, 64.0)]
    assert seq == sorted(seq)
    with pytest.raises(ValueError):
        plancherel_check_1d(4, 10.0)


def test_tarry_shell_reports_strata():
    s = tail_shell(9, "tarry", 12, 1.0, 20, 0)
    assert s.dropped == 0
    assert sum(v["n"] for v in s.strata.values()) == 20
    assert 0 <= s.estimate <= annulus_volume(9, 1.0, 2.0)


def test_tail_shell_dict_roundtrip():
    s = tail_shell(2, "quadratic", 2, 4.0, 100, 0)
    assert TailShell.from_dict(s.as_dict()) == s
