from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from par1.errors import ConfigError, ZeroDenominator
from par1.estimators import (
    diagnostic_sums,
    estimate,
    estimate_online,
    lag_lse_phi,
    lse_periodic,
    product_estimator,
)
from par1.innovation import InnovationSpec, InnovationStream, generate, zero_stream
from par1.model import FAMILIES, PARModel, head_products, phi, tail_products
from par1.simulate import simulate_path, z_sequence


def naive_lse(x, P, n):
    """Plain double-loop reference."""
    a = []
    for r in range(1, P + 1):
        num = den = 0.0
        for j in range(n):
            num += x[j * P + r - 1] * x[j * P + r]
            den += x[j * P + r - 1] ** 2
        a.append(num / den)
    num = den = 0.0
    for k in range(P + 1, n * P + 1):
        num += x[k] * x[k - P]
        den += x[k - P] ** 2
    return np.array(a), num / den


def _path(fam, n, seed, m=0, x0=1.0):
    model = FAMILIES[fam]
    return simulate_path(model, generate(InnovationSpec(m=m), n * model.period, seed), x0, n)


def test_noiseless_example(two_three):
    path = simulate_path(two_three, zero_stream(None, 4), 1.0, 2)
    a_hat, b_r = lse_periodic(path)
    assert a_hat.tolist() == [2.0, 3.0]
    assert b_r.tolist() == [37.0, 148.0]
    assert lag_lse_phi(path) == 6.0
    rep = estimate(path)
    assert rep.phi_tilde == 6.0 and rep.b_total == 40.0


@pytest.mark.parametrize("fam", [1, 2, 3, 4])
def test_exact_recovery(fam):
    model = FAMILIES[fam]
    path = simulate_path(model, zero_stream(None, 60), 1.0, 10)
    rep = estimate(path)
    # responses are fl(a * x), so equality holds up to rounding of the data
    ulps = np.abs(rep.a_hat - model.a) / np.spacing(model.a)
    assert ulps.max() <= 4
    assert abs(rep.phi_hat - phi(model)) <= 4 * np.spacing(phi(model))
    assert abs(rep.phi_tilde - phi(model)) <= 8 * np.spacing(phi(model))


def test_zero_path_raises(two_three):
    path = simulate_path(two_three, zero_stream(None, 8), 0.0, 4)
    with pytest.raises(ZeroDenominator) as info:
        lse_periodic(path)
    assert info.value.phase == 1
    with pytest.raises(ZeroDenominator):
        lag_lse_phi(path)


def test_single_cycle_rejected(two_three):
    path = simulate_path(two_three, zero_stream(None, 2), 1.0, 1)
    with pytest.raises(ConfigError):
        estimate(path)


def test_product_estimator():
    assert product_estimator(FAMILIES[1].a) == pytest.approx(1.4256, abs=1e-12)
    assert product_estimator([1.0, 0.0, 3.0]) == 0.0
    assert product_estimator([2.0, 3.0]) == 6.0


@pytest.mark.parametrize("fam,n", [(1, 20), (2, 400)])
def test_matches_naive_reference(fam, n):
    path = _path(fam, n, seed=17)
    a_ref, phi_ref = naive_lse(path.x, 6, n)
    rep = estimate(path)
    np.testing.assert_allclose(rep.a_hat, a_ref, rtol=1e-12)
    assert rep.phi_hat == pytest.approx(phi_ref, rel=1e-12)
    assert rep.phi_tilde == pytest.approx(np.prod(a_ref), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3, 4]), st.integers(2, 20))
def test_online_matches_stored(seed, fam, n):
    model = FAMILIES[fam]
    s = generate(InnovationSpec(m=1), n * 6, seed)
    a = estimate(simulate_path(model, s, 1.0, n))
    b = estimate_online(model, s, 1.0, n)
    np.testing.assert_allclose(b.a_hat, a.a_hat, rtol=1e-12)
    assert b.phi_hat == pytest.approx(a.phi_hat, rel=1e-12)
    assert b.phi_tilde == pytest.approx(a.phi_tilde, rel=1e-12)


def test_online_runs_past_double_range():
    model = FAMILIES[1]
    n = 2000  # X reaches ~1e307, so its squares are far outside the double range
    s = generate(InnovationSpec(), n * 6, 3)
    rep = estimate_online(model, s, 1.0, n)
    assert np.all(np.isfinite(rep.a_hat))
    np.testing.assert_allclose(rep.a_hat, model.a, rtol=1e-12)
    assert rep.phi_hat == pytest.approx(phi(model), rel=1e-12)
    assert math.isinf(rep.b_total)


def test_rescaling_survives_large_values():
    model = FAMILIES[1]
    s = generate(InnovationSpec(), 120, 5)
    base = estimate(simulate_path(model, s, 1.0, 20))
    big = InnovationStream(s.values * 1e150, s.spec)
    scaled = estimate(simulate_path(model, big, 1e150, 20))  # squares overflow without rescaling
    np.testing.assert_allclose(scaled.a_hat, base.a_hat, rtol=1e-12)
    assert scaled.phi_hat == pytest.approx(base.phi_hat, rel=1e-12)


def test_degenerate_denominator_flagged():
    model = PARModel(1, (1.0,))
    path = simulate_path(model, zero_stream(None, 5), 1e-160, 5)
    rep = estimate(path)
    assert rep.degenerate_flags.tolist() == [True]
    assert math.isnan(rep.a_hat[0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3), st.booleans())
def test_scale_equivariance(seed, c, neg):
    c = -c if neg else c
    model = FAMILIES[1]
    s = generate(InnovationSpec(), 60, seed)
    a = estimate(simulate_path(model, s, 1.0, 10))
    b = estimate(simulate_path(model, InnovationStream(c * s.values, s.spec), c, 10))
    np.testing.assert_allclose(b.a_hat, a.a_hat, rtol=1e-12)
    assert b.phi_hat == pytest.approx(a.phi_hat, rel=1e-12)


def test_diagnostic_sums_zero_innovation():
    path = simulate_path(FAMILIES[1], zero_stream(InnovationSpec.zero(), 60), 1.0, 10)
    _, c_r, _, c_total = diagnostic_sums(path)
    assert np.all(c_r == 0) and c_total == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_error_identities(seed):
    model = FAMILIES[1]
    path = _path(1, 15, seed, m=2)
    rep = estimate(path, diagnostics=True)
    np.testing.assert_allclose(rep.a_hat, model.a + rep.c_r / rep.b_r, rtol=1e-10)
    assert rep.phi_hat == pytest.approx(phi(model) + rep.c_total / rep.b_total, rel=1e-10)
    assert np.all(rep.b_r >= 0) and rep.b_total >= 0


def test_denominator_limits():
    """phi^(-2n) B_n^(r) and phi^(-2n) B_n against their almost sure limits."""
    model = FAMILIES[1]
    ph = phi(model)
    n = 30
    head = head_products(model)[:-1]  # A_1^{r-1}
    inv_tail2 = float(np.sum(tail_products(model) ** -2.0))
    within = 0
    for seed in range(20):
        s = generate(InnovationSpec(), n * 6, seed)
        path = simulate_path(model, s, 1.0, n)
        amp = 1.0 + z_sequence(model, s, n).zeta_hat
        rep = estimate(path)
        lim_r = head**2 * amp**2 / (ph**2 - 1)
        lim = inv_tail2 * amp**2 / (ph**2 - 1)
        ok = np.all(np.abs(ph ** (-2 * n) * rep.b_r / lim_r - 1) < 0.05)
        ok &= abs(ph ** (-2 * n) * rep.b_total / lim - 1) < 0.05
        within += bool(ok)
    assert within >= 18
