import math

import numpy as np
import pytest
from scipy import integrate

from tarrylab.oracles import linear_integral, quadratic_integral
from tarrylab.oscquad import (
    BudgetExceeded,
    ComplexEstimate,
    QuadratureConfig,
    interval_integrals,
    modulus_power,
    panel_buckets,
    unit_interval_integral,
    unit_square_integral,
)
from tarrylab.phasepoly import PhasePolynomial


def tarry(**kw):
    a = np.zeros(9)
    for k, v in kw.items():
        a[int(k[1:]) - 1] = v
    return PhasePolynomial.tarry(a)


def test_zero_phase():
    est = unit_square_integral(tarry())
    assert est.value == pytest.approx(1.0, abs=1e-14)
    assert est.abs_error_estimate < 1e-12


def test_full_period():
    assert abs(unit_square_integral(tarry(a8=1.0)).value) < 1e-10


def test_half_period_closed_form():
    est = unit_square_integral(tarry(a8=0.5))
    assert est.value == pytest.approx(2j / math.pi, abs=1e-12)
    assert modulus_power(est, 4) == pytest.approx((2 / math.pi) ** 4, rel=1e-12)


@pytest.mark.parametrize("m", [1, -3, 7, 50])
def test_interval_integer_frequency(m):
    assert abs(unit_interval_integral([m]).value) < 1e-10


def test_interval_trivial_and_quadratic():
    assert unit_interval_integral([0.0]).value == pytest.approx(1.0)
    est = unit_interval_integral([0.0, 400.0])
    assert abs(est.value) == pytest.approx(0.3536 / math.sqrt(400), rel=0.05)
    assert abs(est.value) == pytest.approx(abs(quadratic_integral(0.0, 400.0)), rel=1e-9)


def test_modulus_power():
    assert modulus_power(ComplexEstimate(1.0, 0.0), 12) == 1.0
    assert modulus_power(ComplexEstimate(0.5, 0.0), 2) == 0.25
    for bad in (0, 3, -2):
        with pytest.raises(ValueError):
            modulus_power(ComplexEstimate(1.0, 0.0), bad)


def test_batch_matches_sinc_closed_form():
    a = np.linspace(0.0, 1000.0, 3001)
    vals, errs, ok = interval_integrals(a[:, None], [1])
    assert ok.all()
    assert np.max(np.abs(vals - linear_integral(a))) < 1e-10
    assert np.all(errs >= 0)


def test_batch_matches_fresnel_closed_form():
    rng = np.random.default_rng(3)
    a = rng.uniform(-300, 300, size=(500, 2))
    vals, _, ok = interval_integrals(a, [1, 2])
    assert ok.all()
    assert np.max(np.abs(vals - quadratic_integral(a[:, 0], a[:, 1]))) < 1e-10


def test_square_factorises_against_scipy():
    # no mixed terms: I = I_x * I_y, each checked with adaptive scipy quadrature
    a = dict(a1=2.3, a5=-1.7, a8=4.1, a4=-0.9, a7=3.3, a9=-2.2)
    est = unit_square_integral(tarry(**a))

    def one_d(c3, c2, c1):
        f = lambda x: 2 * math.pi * (c3 * x**3 + c2 * x**2 + c1 * x)
        re = integrate.quad(lambda x: math.cos(f(x)), 0, 1, epsabs=1e-13, limit=200)[0]
        im = integrate.quad(lambda x: math.sin(f(x)), 0, 1, epsabs=1e-13, limit=200)[0]
        return complex(re, im)

    ref = one_d(a["a1"], a["a5"], a["a8"]) * one_d(a["a4"], a["a7"], a["a9"])
    assert est.value == pytest.approx(ref, abs=1e-11)


def test_mixed_terms_against_dense_grid():
    rng = np.random.default_rng(5)
    alpha = rng.uniform(-6, 6, size=9)
    est = unit_square_integral(PhasePolynomial.tarry(alpha))
    x, w = np.polynomial.legendre.leggauss(400)
    x, w = 0.5 * (x + 1), 0.5 * w
    F = PhasePolynomial.tarry(alpha)(x[:, None], x[None, :])
    ref = np.sum(np.exp(2j * np.pi * F) * w[:, None] * w[None, :])
    assert est.value == pytest.approx(ref, abs=1e-11)


def test_modulus_bounded_and_conjugate_symmetric():
    rng = np.random.default_rng(7)
    for _ in range(15):
        alpha = rng.normal(scale=15.0, size=9)
        est = unit_square_integral(PhasePolynomial.tarry(alpha))
        neg = unit_square_integral(PhasePolynomial.tarry(-alpha))
        assert abs(est.value) <= 1 + est.abs_error_estimate
        assert abs(neg.value - est.value.conjugate()) <= 1e-9 * max(abs(est.value), 1e-3)


def test_refinement_consistency():
    rng = np.random.default_rng(11)
    coarse_cfg = QuadratureConfig(base_points_per_panel=6, refinement_tolerance=1e-6)
    fine_cfg = QuadratureConfig(base_points_per_panel=12, refinement_tolerance=1e-6)
    for _ in range(100):
        alpha = rng.normal(size=9)
        alpha *= rng.uniform(0, 100) / np.linalg.norm(alpha)
        a = unit_square_integral(PhasePolynomial.tarry(alpha), coarse_cfg)
        b = unit_square_integral(PhasePolynomial.tarry(alpha), fine_cfg)
        assert abs(a.value - b.value) <= 10 * max(a.abs_error_estimate, 1e-13)


def test_budget_exceeded():
    cfg = QuadratureConfig(max_panels=64)
    with pytest.raises(BudgetExceeded):
        unit_square_integral(tarry(a1=1e4), cfg)
    with pytest.raises(BudgetExceeded):
        unit_interval_integral([1e6], cfg)
    vals, _, ok = interval_integrals(np.array([[1.0], [1e6]]), [1], cfg)
    assert ok.tolist() == [True, False]
    assert np.isnan(vals[1])


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(base_points_per_panel=3)
    with pytest.raises(ValueError):
        QuadratureConfig(refinement_tolerance=0.0)


def test_panel_buckets_cover_need():
    need = np.arange(1, 5000)
    b = panel_buckets(need)
    assert np.all(b >= need)
    assert np.all(b <= 1.25 * need + 1)


def test_stationary_phase_slope():
    a = np.geomspace(10.0, 1e4, 200)
    vals, _, ok = interval_integrals(a[:, None], [2])
    assert ok.all()
    slope = np.polyfit(np.log(a), np.log(np.abs(vals)), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)
