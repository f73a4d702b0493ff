import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from fracfie.special import DomainError, gamma

# int_0^inf z^(1/3) e^(-z) dz, adaptive quadrature to ~1e-14
GAMMA_4_3 = 0.8929795115692493


def test_integral_oracle_for_gamma_4_3():
    v, err = quad(lambda z: z ** (1 / 3) * math.exp(-z), 0, math.inf, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert v == pytest.approx(GAMMA_4_3, abs=1e-10)


@pytest.mark.parametrize(
    "x, expected",
    [
        (1.0, 1.0),
        (0.5, 1.7724538509055160),
        (1.5, 0.8862269254527580),
        (4 / 3, GAMMA_4_3),
        (5.0, 24.0),
    ],
)
def test_known_values(x, expected):
    assert gamma(x) == pytest.approx(expected, rel=1e-12)


def test_relative_error_on_range():
    xs = np.linspace(0.1, 20.0, 2001)
    ref = np.array([math.gamma(x) for x in xs])
    assert np.max(np.abs(gamma(xs) / ref - 1.0)) <= 1e-12


@pytest.mark.parametrize("x", [0.1, 0.5, 1.3, 2.7, 5.0])
def test_recurrence(x):
    assert abs(gamma(x + 1) - x * gamma(x)) <= 1e-10 * gamma(x + 1)


def test_reflection_spot_check():
    assert gamma(0.5) ** 2 == pytest.approx(math.pi, abs=1e-10)


@given(st.floats(1.5, 20.0), st.floats(1.5, 20.0))
def test_monotone_above_1_5(a, b):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    assert gamma(lo) < gamma(hi)


@pytest.mark.parametrize("bad", [0.0, -1.0, -0.5, math.inf, math.nan])
def test_domain(bad):
    with pytest.raises(DomainError):
        gamma(bad)


def test_array_input_keeps_shape():
    out = gamma(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert out.shape == (2, 2)
    np.testing.assert_allclose(out, [[1, 1], [2, 6]], rtol=1e-13)
