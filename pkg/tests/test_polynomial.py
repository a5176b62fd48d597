import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgelab.errors import NonPerturbativeError
from edgelab.polynomial import CorrectionPolynomial

coef = st.floats(-0.4, 0.4, allow_nan=False)


def test_construction_and_indexing():
    Q = CorrectionPolynomial.from_powers({4: 0.01, 2: -0.02})
    assert Q.coeffs == (-0.02, 0.01)
    assert Q[2] == -0.02 and Q[4] == 0.01 and Q[3] == 0.0 and Q[6] == 0.0
    assert Q.L == 2 and Q.degree2L == 4
    assert CorrectionPolynomial.zero(3).is_zero()
    with pytest.raises(ValueError):
        CorrectionPolynomial.from_powers({3: 0.1})
    with pytest.raises(ValueError):
        CorrectionPolynomial((math.nan,))


def test_perturbative_guard():
    CorrectionPolynomial((0.5,)).check_perturbative()
    with pytest.raises(NonPerturbativeError):
        CorrectionPolynomial((0.0, -0.6)).check_perturbative()


@given(st.lists(coef, min_size=1, max_size=4), st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_evaluation_matches_numpy_polyval(c, m):
    Q = CorrectionPolynomial(tuple(c))
    dense = np.zeros(2 * len(c) + 1)
    for l, a in enumerate(c, start=1):
        dense[2 * l] = a
    poly = np.polynomial.Polynomial(dense)
    assert Q(m) == pytest.approx(poly(m), abs=1e-12)
    assert Q.deriv(m) == pytest.approx(poly.deriv()(m), abs=1e-11)
    assert Q.deriv2(m) == pytest.approx(poly.deriv(2)(m), abs=1e-10)
    assert Q(-m) == pytest.approx(Q(m), abs=1e-12)


@given(st.lists(coef, min_size=1, max_size=3), st.floats(0, 5), st.floats(0, 5), st.floats(-2, 2))
def test_evolution_is_a_rescaling_semigroup(c, s, t, m):
    Q = CorrectionPolynomial(tuple(c))
    assert Q.evolved(t)(m) == pytest.approx(Q(math.exp(-t / 2) * m), abs=1e-14)
    a = Q.evolved(s).evolved(t).coeffs
    b = Q.evolved(s + t).coeffs
    assert np.allclose(a, b, rtol=1e-12, atol=1e-300)


def test_evolution_edge_cases():
    Q = CorrectionPolynomial((0.02, 0.01))
    assert Q.evolved(0) is Q
    assert Q.evolved(60).is_zero() and Q.evolved(60).L == 2
    assert Q.evolved(-0.5)[4] == pytest.approx(0.01 * math.e)


@settings(max_examples=50)
@given(st.lists(coef, min_size=1, max_size=4), st.complex_numbers(max_magnitude=4, allow_nan=False, allow_infinity=False))
def test_self_consistent_coefficients(c, z):
    Q = CorrectionPolynomial(tuple(c))
    m = 0.3 - 0.7j
    coeffs = Q.self_consistent_coeffs(z)
    assert np.polyval(coeffs, m) == pytest.approx(1 + z * m + m * m + Q(m), abs=1e-12)
