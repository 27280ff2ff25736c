import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tarrylab.phasepoly import (
    CoefficientFileError,
    CoefficientVector,
    MonomialBasis,
    PhasePolynomial,
    canonical_tarry_basis,
    dump_coefficients,
    eval_phase,
    eval_phase_1d,
    general_basis,
    load_coefficients,
    load_coefficients_1d,
)

coef = st.floats(-1e3, 1e3, allow_nan=False)
coords = st.floats(-2.0, 2.0, allow_nan=False)


def test_canonical_basis_degree_split():
    b = canonical_tarry_basis()
    assert len(b) == 9
    degrees = b.degrees()
    assert [degrees.count(d) for d in (3, 2, 1)] == [4, 3, 2]
    assert b.exponents[0] == (3, 0)
    assert b.exponents[-1] == (0, 1)
    assert b.exponents == ((3, 0), (2, 1), (1, 2), (0, 3), (2, 0), (1, 1), (0, 2), (1, 0), (0, 1))


def test_general_basis_n1_m1():
    b = general_basis(1, 1)
    assert set(b.exponents) == {(1, 0), (0, 1), (1, 1)}
    assert len(b) == 3


@pytest.mark.parametrize("bad", [[(1, 0), (1, 0)], [(0, 0)], [(-1, 2)]])
def test_basis_rejects_invalid(bad):
    with pytest.raises(ValueError):
        MonomialBasis(tuple(bad))


def test_coefficients_validated():
    with pytest.raises(ValueError):
        CoefficientVector([1.0, np.inf])
    with pytest.raises(ValueError):
        PhasePolynomial(canonical_tarry_basis(), CoefficientVector([1.0, 2.0]))
    assert CoefficientVector([3.0, 4.0]).norm == pytest.approx(5.0)


def test_eval_examples():
    assert eval_phase(PhasePolynomial.tarry(np.zeros(9)), 0.3, -0.7) == 0.0
    e1 = np.zeros(9)
    e1[0] = 1.0
    assert eval_phase(PhasePolynomial.tarry(e1), 1.0, 0.0) == 1.0
    assert eval_phase(PhasePolynomial.tarry(np.ones(9)), 1.0, 1.0) == 9.0


def test_eval_1d_examples():
    assert eval_phase_1d([1.0], 0.5) == 0.5
    assert eval_phase_1d([0.0, 1.0], 2.0) == 4.0
    assert eval_phase_1d([1.0, 1.0], 1.0) == 2.0


def test_eval_broadcasts():
    poly = PhasePolynomial.tarry(np.arange(1.0, 10.0))
    xs = np.linspace(0, 1, 5)
    out = eval_phase(poly, xs[:, None], xs[None, :])
    assert out.shape == (5, 5)
    assert out[2, 3] == pytest.approx(eval_phase(poly, xs[2], xs[3]), rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 9, elements=coef), arrays(np.float64, 9, elements=coef), coords, coords)
def test_linearity(a, b, x, y):
    lhs = eval_phase(PhasePolynomial.tarry(a + b), x, y)
    rhs = eval_phase(PhasePolynomial.tarry(a), x, y) + eval_phase(PhasePolynomial.tarry(b), x, y)
    scale = eval_phase(PhasePolynomial.tarry(np.abs(a) + np.abs(b)), abs(x), abs(y)) + 1e-300
    assert abs(lhs - rhs) <= 1e-12 * scale


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 8), coords, coords, st.floats(0.1, 10.0))
def test_monomial_homogeneity(k, x, y, lam):
    a = np.zeros(9)
    a[k] = 1.0
    poly = PhasePolynomial.tarry(a)
    d = canonical_tarry_basis().degrees()[k]
    base = eval_phase(poly, x, y)
    assert eval_phase(poly, lam * x, lam * y) == pytest.approx(lam**d * base, rel=1e-12, abs=1e-300)


def test_coefficient_file_roundtrip(tmp_path):
    vals = np.random.default_rng(0).normal(size=9)
    path = tmp_path / "c.json"
    dump_coefficients(vals, path)
    assert np.array_equal(load_coefficients(path).coeffs.values, vals)
    dump_coefficients([1.0, 2.0], path)
    assert np.array_equal(load_coefficients_1d(path), [1.0, 2.0])


@pytest.mark.parametrize(
    "text, where",
    [("[1, 2,\n 3,,]", ":2:"), ('{"a": 1}', ":1:1:"), ("[1,2,3]", "expected 9"), ("[true,1,1,1,1,1,1,1,1]", ":1:1:")],
)
def test_coefficient_file_diagnostics(tmp_path, text, where):
    path = tmp_path / "bad.json"
    path.write_text(text)
    with pytest.raises(CoefficientFileError, match=where):
        load_coefficients(path)


def test_dump_is_plain_json(tmp_path):
    path = tmp_path / "c.json"
    dump_coefficients([0.1, 1e-300], path)
    assert json.loads(path.read_text()) == [0.1, 1e-300]
