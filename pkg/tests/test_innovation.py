from __future__ import annotations

import math

import numpy as np
import pytest

from par1 import rng
from par1.errors import ConfigError
from par1.innovation import (
    InnovationSpec,
    InnovationStream,
    block_U,
    block_U_matrix,
    block_V,
    block_V_matrix,
    covariance_K,
    exact_covariance_K,
    forward_values,
    generate,
    reversed_law_stream,
    zero_stream,
)
from par1.model import FAMILIES, PARModel, phi, tail_products
from par1.simulate import simulate_path


def test_modulation_values():
    spec = InnovationSpec()
    k = np.arange(1, 7)
    np.testing.assert_allclose(spec.modulation(k), np.cos(np.pi * k / 3), atol=1e-15)
    assert spec.modulation(3) == -1.0
    assert spec.modulation(6) == 1.0
    assert np.all(InnovationSpec(modulated=False).modulation(k) == 1.0)


def test_m0_stream_is_modulated_eps():
    spec = InnovationSpec(sd=2.0)
    s = generate(spec, 12, seed=5)
    eps = 2.0 * rng.generator(5, rng.FORWARD, 0).standard_normal(12)
    np.testing.assert_array_equal(s.values, eps * spec.modulation(np.arange(1, 13)))
    assert s.u(3) == -eps[2]


def test_moving_average_matches_direct_sum():
    spec = InnovationSpec(m=4, modulated=False)
    gen = rng.generator(1, 99)
    v = forward_values(spec, 30, gen)
    eps = rng.generator(1, 99).standard_normal(34)
    direct = np.array([eps[k : k + 5].sum() for k in range(30)]) / math.sqrt(5)
    np.testing.assert_allclose(v, direct, rtol=1e-12, atol=1e-12)


def test_generate_is_deterministic():
    spec = InnovationSpec(m=7)
    a, b = generate(spec, 500, 42), generate(spec, 500, 42)
    assert a.values.tobytes() == b.values.tobytes()
    assert generate(spec, 500, 43).values.tobytes() != a.values.tobytes()
    assert not a.values.flags.writeable


@pytest.mark.parametrize("m", [0, 5, 50])
def test_variance_of_v_equals_eps_variance(m):
    spec = InnovationSpec(law="uniform", lo=-3.0, hi=3.0, m=m, modulated=False)
    x = np.concatenate([generate(spec, 20_000, s).values for s in range(10)])
    # block means of squares give a dependence-robust standard error
    sq = (x**2).reshape(100, -1).mean(axis=1)
    assert abs(sq.mean() - spec.eps_var) < 4 * sq.std(ddof=1) / 10


def test_per_phase_variances():
    spec = InnovationSpec()
    u = generate(spec, 6 * 100_000, 7).values.reshape(-1, 6)
    for r in range(1, 7):
        x2 = u[:, r - 1] ** 2
        target = math.cos(math.pi * r / 3) ** 2
        assert abs(x2.mean() - target) < 4 * x2.std(ddof=1) / math.sqrt(x2.size)
        assert spec.phase_variance(r) == pytest.approx(target, abs=1e-15)


def test_m_dependence():
    m = 3
    spec = InnovationSpec(m=m)
    u = generate(spec, 300_000, 8).values
    for d in (m + 7, m + 20):
        prod = u[:-d] * u[d:]
        assert abs(prod.mean()) < 4 * prod.std(ddof=1) / math.sqrt(prod.size) * math.sqrt(2 * m + 1)
    # inside the window the lag-2 product has the exact cycle-averaged mean
    prod = u[:-2] * u[2:]
    exact = np.mean([spec.autocovariance(k, k + 2) for k in range(1, 7)])
    assert exact == pytest.approx(-0.125)
    assert abs(prod.mean() - exact) < 4 * prod.std(ddof=1) / math.sqrt(prod.size) * math.sqrt(2 * m + 1)


def test_reversed_stream_identity():
    spec = InnovationSpec(m=2)
    N = 20
    s = reversed_law_stream(spec, N, 3)
    M = 24  # N rounded up to the modulation period
    fwd = forward_values(spec, M, rng.generator(3, rng.REVERSED, 0))
    np.testing.assert_array_equal(s.values, fwd[::-1][:N])
    assert s.reversed and s.u(0) == fwd[-1]


def test_reversed_stream_is_independent_of_forward():
    spec = InnovationSpec()
    assert not np.array_equal(generate(spec, 50, 1).values, reversed_law_stream(spec, 50, 1).values)


def _lag1_batches(x: np.ndarray, batch: int) -> np.ndarray:
    return (x[:-1] * x[1:])[: (x.size - 1) // batch * batch].reshape(-1, batch).mean(axis=1)


def test_reversed_lag1_autocovariance_matches_forward_m2000():
    spec = InnovationSpec(m=2000)
    fb = np.concatenate([_lag1_batches(generate(spec, 100_002, s).values, 10_000) for s in range(8)])
    rb = np.concatenate([_lag1_batches(reversed_law_stream(spec, 100_002, s).values, 10_000) for s in range(8)])
    se = math.sqrt(fb.var(ddof=1) / fb.size + rb.var(ddof=1) / rb.size)
    assert abs(fb.mean() - rb.mean()) < 3 * se
    # both near the exact cycle-averaged lag-1 autocovariance
    exact = np.mean([spec.autocovariance(k, k + 1) for k in range(1, 7)])
    assert abs(fb.mean() - exact) < 4 * math.sqrt(fb.var(ddof=1) / fb.size)


def test_block_U_examples(two_three):
    s = InnovationStream(np.array([5.0, 7.0, 1.0, 2.0]), InnovationSpec())
    assert block_U(two_three, s, 0, 0) == 0.0
    assert block_U(two_three, s, 1, 1) == 1.0
    assert block_U(two_three, s, 0, 2) == 22.0
    with pytest.raises(IndexError):
        block_U(two_three, s, 2, 1)


def test_block_V_examples(two_three):
    m1 = PARModel(1, (2.0,))
    s = InnovationStream(np.arange(1.0, 9.0), InnovationSpec())
    for j in range(1, 7):
        assert block_V(m1, s, j, 1) == s.u(j + 1)
    assert block_V(two_three, zero_stream(None, 8), 1, 1) == 0.0
    with pytest.raises(IndexError):
        block_V(two_three, s, 0, 1)


@pytest.mark.parametrize("fam", [1, 3])
def test_lag_P_recursion(fam):
    model = FAMILIES[fam]
    P, n = model.period, 8
    stream = generate(InnovationSpec(m=2), n * P, 11)
    path = simulate_path(model, stream, 0.7, n)
    V = block_V_matrix(model, stream, n)
    for j in range(1, n):
        for r in range(1, P + 1):
            lhs = path.x[j * P + r]
            rhs = phi(model) * path.x[(j - 1) * P + r] + block_V(model, stream, j, r)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
            assert V[j - 1, r - 1] == pytest.approx(block_V(model, stream, j, r), rel=1e-13, abs=1e-13)


def test_block_U_matrix_matches_scalar():
    model = FAMILIES[2]
    stream = generate(InnovationSpec(), 30, 2)
    U = block_U_matrix(model, stream, 5)
    for n in range(5):
        for r in range(1, 7):
            assert U[n, r - 1] == pytest.approx(block_U(model, stream, n, r), rel=1e-13, abs=1e-13)


def test_covariance_disjoint_iid_blocks_vanish():
    model = FAMILIES[1]
    spec = InnovationSpec()
    for n in (1, 3):
        est, se = covariance_K(model, spec, n, 6, n_mc=20_000, seed=n)
        assert abs(est) < 4 * se
        assert exact_covariance_K(model, spec, n, 6) == 0.0


def test_K0_variance_form():
    model = FAMILIES[1]
    spec = InnovationSpec()
    var_u = np.array([spec.phase_variance(s) for s in range(1, 7)])
    closed = float(np.sum(tail_products(model) ** 2 * var_u))
    assert exact_covariance_K(model, spec, 0, 6) == pytest.approx(closed, rel=1e-12)
    est, se = covariance_K(model, spec, 0, 6, n_mc=40_000, seed=4)
    assert abs(est - closed) < 4 * se


def test_K0_scalar_case():
    est, se = covariance_K(PARModel(1, (2.0,)), InnovationSpec(modulated=False), 0, 1, n_mc=40_000, seed=5)
    assert abs(est - 1.0) < 4 * se


@pytest.mark.parametrize("n", [0, 1])
def test_exact_covariance_matches_mc_with_dependence(n):
    model = FAMILIES[1]
    spec = InnovationSpec(m=4)
    for r in (3, 6):
        est, se = covariance_K(model, spec, n, r, n_mc=40_000, seed=10 + r)
        assert abs(est - exact_covariance_K(model, spec, n, r)) < 4 * se


def test_block_vectors_are_stationary():
    model = FAMILIES[1]
    spec = InnovationSpec(m=3)
    u = forward_values(spec, 6 * 6, rng.generator(6, 1), rows=20_000)
    U = block_U_matrix(model, u, 6)
    c0, c4 = np.cov(U[:, 0, :].T), np.cov(U[:, 4, :].T)
    scale = np.sqrt(np.outer(np.diag(c0), np.diag(c0)))
    assert np.all(np.abs(c0 - c4) < 6 * np.sqrt(2 / 20_000) * scale + 1e-12)
    assert np.all(np.abs(U[:, 0, :].mean(0) - U[:, 4, :].mean(0)) < 6 * np.sqrt(2 * np.diag(c0) / 20_000))


@pytest.mark.parametrize(
    "kw",
    [dict(sd=0.0), dict(sd=-1.0), dict(law="uniform", lo=1.0, hi=1.0), dict(m=-1), dict(law="cauchy")],
)
def test_invalid_specs(kw):
    with pytest.raises(ConfigError):
        InnovationSpec(**kw)


def test_spec_dict_round_trip():
    spec = InnovationSpec(law="uniform", lo=-1000, hi=1000, m=3)
    assert InnovationSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ConfigError):
        InnovationSpec.from_dict({"law": "gaussian", "mu": 1})


def test_zero_spec_gives_zero_stream():
    s = generate(InnovationSpec.zero(m=3), 40, 1)
    assert np.all(s.values == 0.0)
