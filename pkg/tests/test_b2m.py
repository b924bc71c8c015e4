import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsbnet.b2m import (B2MSurrogateParams, Mode, bitcom_rate, link_rate, re_derivative,
                        re_eval, re_inverse, semantic_rate, spectral_efficiency)

P = B2MSurrogateParams(scale=100.0, knee=1e6)


def test_re_zero_and_closed_form():
    assert re_eval(0.0, P) == 0.0
    assert re_eval(1e6, P) == pytest.approx(100 * math.log(2), rel=1e-15)
    assert re_eval(1e6, P) == pytest.approx(69.3147, abs=1e-4)


def test_params_reject_nonpositive():
    with pytest.raises(ValueError):
        B2MSurrogateParams(0.0, 1e6)
    with pytest.raises(ValueError):
        B2MSurrogateParams(10.0, -1.0)


def test_re_concave_on_random_pairs():
    rng = np.random.default_rng(0)
    r1, r2 = np.sort(rng.uniform(0, 1e8, (2, 1000)), axis=0)
    mid = re_eval(0.5 * (r1 + r2), P)
    assert np.all(mid >= 0.5 * (re_eval(r1, P) + re_eval(r2, P)) - 1e-9)


def test_re_inverse_and_derivative():
    r = np.array([0.0, 1e3, 5e6, 3e7])
    np.testing.assert_allclose(re_inverse(re_eval(r, P), P), r, rtol=1e-12, atol=1e-6)
    h = 1.0
    fd = (re_eval(r + h, P) - re_eval(r, P)) / h
    np.testing.assert_allclose(re_derivative(r, P), fd, rtol=1e-5)


def test_semantic_rate_frozen_value():
    # 100 * ln(1 + 15 log2 11), evaluated at 30 digits
    assert semantic_rate(15e6, 10.0, 1.0, P) == pytest.approx(396.82421591374929, rel=1e-13)
    assert semantic_rate(15e6, 10.0, 0.7, P) == pytest.approx(277.77695113962451, rel=1e-13)


def test_semantic_rate_linear_in_tau():
    assert semantic_rate(2e6, 3.0, 1.0, P) == pytest.approx(2 * semantic_rate(2e6, 3.0, 0.5, P))
    assert semantic_rate(0.0, 3.0, 1.0, P) == 0.0


def test_bitcom_rate_examples():
    gamma_db = 10 * math.log10(3.0)  # linear 3 -> log2(4) = 2
    assert bitcom_rate(1e6, gamma_db, 1e-4) == pytest.approx(200.0, rel=1e-12)
    assert bitcom_rate(2e6, gamma_db, 1e-4) == pytest.approx(2 * bitcom_rate(1e6, gamma_db, 1e-4))
    assert bitcom_rate(0.0, gamma_db, 1e-4) == 0.0


def test_link_rate_dispatch():
    assert link_rate(Mode.SEM, 1e6, 5.0, 0.8, 1e-4, P) == semantic_rate(1e6, 5.0, 0.8, P)
    assert link_rate("bit", 1e6, 5.0, 0.8, 1e-4, P) == bitcom_rate(1e6, 5.0, 1e-4)
    assert link_rate("sem", 0.0, 5.0, 0.8, 1e-4, P) == 0.0
    assert link_rate("bit", 0.0, 5.0, 0.8, 1e-4, P) == 0.0


def test_spectral_efficiency_at_zero_db():
    assert spectral_efficiency(0.0) == pytest.approx(1.0)


def test_rates_strictly_increasing_on_random_points():
    rng = np.random.default_rng(1)
    z = rng.uniform(1e3, 2e7, 1000)
    g = rng.uniform(-10, 30, 1000)
    dz = 1e-3 * z
    assert np.all(semantic_rate(z + dz, g, 0.8, P) > semantic_rate(z, g, 0.8, P))
    assert np.all(bitcom_rate(z + dz, g, 1e-4) > bitcom_rate(z, g, 1e-4))


@settings(max_examples=200, deadline=None)
@given(z1=st.floats(0, 5e7), z2=st.floats(0, 5e7), g=st.floats(-10, 40),
       beta=st.floats(1, 1e3), c=st.floats(1e3, 1e8))
def test_semantic_rate_midpoint_concavity(z1, z2, g, beta, c):
    p = B2MSurrogateParams(beta, c)
    mid = semantic_rate(0.5 * (z1 + z2), g, 1.0, p)
    avg = 0.5 * (semantic_rate(z1, g, 1.0, p) + semantic_rate(z2, g, 1.0, p))
    assert mid >= avg - 1e-9 * max(1.0, abs(avg))
