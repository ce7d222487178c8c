"""Noise models, tail bounds, batch-size solver, and metered oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forsample.core import make_gaussian_potential
from forsample.errors import DimensionError, UnsupportedCombinationError
from forsample.oracles import (GradientOracle, NOISE_FAMILIES, NoiseModel,
                               QueryLedger, ValueOracle, eps_tail, make_rng,
                               phi)

FAMILIES = {
    "exact": NoiseModel.exact(),
    "subgaussian": NoiseModel.subgaussian(0.7),
    "subweibull": NoiseModel.subweibull(zeta=1.0, sigma_g=0.4),
    "polymoment": NoiseModel.polymoment(k=2, sigma_2k=0.8),
    "twopoint": NoiseModel.twopoint(p=0.2, m_shift=1.5),
}


# ---------------------------------------------------------------------------
# rng streams
# ---------------------------------------------------------------------------

def test_make_rng_is_deterministic_and_path_sensitive():
    a = make_rng(7, 1, 2).random(5)
    b = make_rng(7, 1, 2).random(5)
    c = make_rng(7, 1, 3).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# noise model construction and analytic moments
# ---------------------------------------------------------------------------

def test_noise_family_listing():
    assert set(NOISE_FAMILIES) == set(FAMILIES)


def test_noise_validation_errors():
    with pytest.raises(ValueError):
        NoiseModel("mystery")
    with pytest.raises(ValueError):
        NoiseModel.subgaussian(-1.0)
    with pytest.raises(ValueError):
        NoiseModel.subweibull(zeta=0.0, sigma_g=1.0)
    with pytest.raises(ValueError):
        NoiseModel.polymoment(k=0, sigma_2k=1.0)
    with pytest.raises(ValueError):
        NoiseModel.twopoint(p=0.0, m_shift=1.0)
    with pytest.raises(ValueError):
        NoiseModel.twopoint(p=0.5, m_shift=-1.0)


@pytest.mark.parametrize("label", sorted(FAMILIES))
def test_first_moment_matches_monte_carlo(label):
    noise = FAMILIES[label]
    dim = 1 if label == "twopoint" else 3
    draws = noise.sample_batch_rows(200_000, 1, dim, make_rng(0, 5))
    norms = np.linalg.norm(draws, axis=1)
    se = norms.std() / math.sqrt(norms.size)
    assert abs(norms.mean() - noise.m1(dim)) <= 5 * se + 1e-12


@pytest.mark.parametrize("label", ["subgaussian", "subweibull", "polymoment",
                                   "twopoint"])
def test_second_moment_matches_monte_carlo(label):
    noise = FAMILIES[label]
    dim = 1 if label == "twopoint" else 2
    draws = noise.sample_batch_rows(200_000, 1, dim, make_rng(1, 5))
    sq = np.sum(draws ** 2, axis=1)
    se = sq.std() / math.sqrt(sq.size)
    assert abs(sq.mean() - noise.second_moment(dim)) <= 5 * se


def test_polymoment_declared_2k_moment():
    # the Pareto radius is built so E R^{2k} equals sigma_2k^{2k} exactly
    noise = NoiseModel.polymoment(k=1, sigma_2k=1.0)
    draws = noise.sample_batch_rows(400_000, 1, 1, make_rng(2, 5))[:, 0]
    second = float(np.mean(draws ** 2))
    assert second == pytest.approx(1.0, rel=0.05)


def test_twopoint_draw_support_and_mean():
    noise = NoiseModel.twopoint(p=0.25, m_shift=2.0)
    draws = noise.sample_batch_rows(100_000, 1, 1, make_rng(3, 5))[:, 0]
    support = {round(v, 12) for v in np.unique(draws)}
    # additive offsets m_shift*p (clean) and m_shift*(p-1) (corrupted)
    assert support == {0.5, -1.5}
    assert abs(draws.mean()) <= 5 * draws.std() / math.sqrt(draws.size)
    with pytest.raises(DimensionError):
        noise.sample_batch_rows(2, 1, 3, make_rng(0, 0))


# ---------------------------------------------------------------------------
# eps_tail: frozen values and monotonicity
# ---------------------------------------------------------------------------

def test_eps_tail_polymoment_frozen_value():
    # (2k)! sigma^{2k} / (n^k M^{2k}) with k=1, sigma=1, n=1, M=10
    noise = NoiseModel.polymoment(k=1, sigma_2k=1.0)
    assert eps_tail(noise, 1, 10.0) == pytest.approx(0.02)


def test_eps_tail_exact_and_twopoint():
    assert eps_tail(NoiseModel.exact(), 1, 0.0) == 0.0
    noise = NoiseModel.twopoint(p=0.3, m_shift=1.0)
    assert eps_tail(noise, 1, 1.0) == 0.0          # bounded support
    assert eps_tail(noise, 1, 0.5) > 0.0


def test_eps_tail_input_validation():
    noise = NoiseModel.subgaussian(1.0)
    with pytest.raises(ValueError):
        eps_tail(noise, 0, 1.0)
    with pytest.raises(ValueError):
        eps_tail(noise, 1, -1.0)
    assert eps_tail(noise, 1, 0.0) == math.inf


def test_eps_tail_subweibull_batching_unsupported():
    noise = NoiseModel.subweibull(zeta=1.0, sigma_g=1.0)
    eps_tail(noise, 1, 2.0)   # n = 1 fine
    with pytest.raises(UnsupportedCombinationError):
        eps_tail(noise, 2, 2.0)


@settings(max_examples=60, deadline=None)
@given(label=st.sampled_from(["subgaussian", "subweibull", "polymoment",
                              "twopoint"]),
       n=st.integers(min_value=1, max_value=64),
       m=st.floats(min_value=0.05, max_value=20.0),
       bump=st.floats(min_value=0.01, max_value=5.0))
def test_eps_tail_monotone(label, n, m, bump):
    noise = FAMILIES[label]
    if noise.family == "subweibull" and noise.zeta != 2.0:
        n = 1
    base = eps_tail(noise, n, m)
    assert eps_tail(noise, n, m + bump) <= base + 1e-15
    if not (noise.family == "subweibull" and noise.zeta != 2.0):
        assert eps_tail(noise, n + 1, m) <= base + 1e-15


# ---------------------------------------------------------------------------
# phi: frozen values and minimality
# ---------------------------------------------------------------------------

def test_phi_polymoment_frozen_value():
    # invert 2 sigma^2/(n M^2) <= delta/10 at sigma=1, M=1, delta=0.1
    noise = NoiseModel.polymoment(k=1, sigma_2k=1.0)
    assert phi(noise, 1.0, 0.1) == 200


def test_phi_exact_is_one():
    assert phi(NoiseModel.exact(), 1.0, 0.01) == 1


def test_phi_subgaussian_frozen_value():
    assert phi(NoiseModel.subgaussian(0.5), 1.0, 0.01) == 8


def test_phi_subgaussian_linear_in_log_inverse_delta():
    # n grows affinely in log(1/delta) with slope 1/c_rate = 4: the tail
    # bound is 2 exp(-n/4) at M = sigma_g = 1, so n = ceil(4 log(20/delta))
    noise = NoiseModel.subgaussian(1.0)
    deltas = [10.0 ** -k for k in range(2, 8)]
    ns = np.asarray([phi(noise, 1.0, d) for d in deltas], dtype=float)
    logs = np.log(1.0 / np.asarray(deltas))
    slope, intercept = np.polyfit(logs, ns, 1)
    assert slope == pytest.approx(4.0, rel=0.05)
    resid = ns - (slope * logs + intercept)
    assert float(np.abs(resid).max()) <= 1.0   # ceil rounding only


def test_phi_subweibull_refuses_when_one_draw_is_not_enough():
    noise = NoiseModel.subweibull(zeta=1.0, sigma_g=1.0)
    with pytest.raises(UnsupportedCombinationError):
        phi(noise, 2.0, 1e-6)
    # a high enough truncation level brings it back to n = 1
    assert phi(noise, 80.0, 1e-6) == 1


def test_phi_respects_cap():
    noise = NoiseModel.polymoment(k=1, sigma_2k=1.0)
    with pytest.raises(UnsupportedCombinationError):
        phi(noise, 1.0, 1e-6, cap=100)


@settings(max_examples=40, deadline=None)
@given(label=st.sampled_from(["subgaussian", "polymoment"]),
       m=st.floats(min_value=0.8, max_value=5.0),
       delta=st.floats(min_value=1e-3, max_value=0.5))
def test_phi_minimality(label, m, delta):
    noise = FAMILIES[label]
    n = phi(noise, m, delta)
    assert eps_tail(noise, n, m) <= delta / 10.0
    if n > 1:
        assert eps_tail(noise, n - 1, m) > delta / 10.0


# ---------------------------------------------------------------------------
# metered oracles
# ---------------------------------------------------------------------------

def test_exact_gradient_oracle_and_ledger():
    pot = make_gaussian_potential([0.0], precision=1.0)
    oracle = GradientOracle(pot, NoiseModel.exact(), make_rng(0, 1))
    out = oracle.draw_batch([2.0], 7)
    assert out[0] == pytest.approx(2.0)
    assert oracle.ledger.grad_queries == 7
    rows = oracle.draw_batch_rows(np.array([[1.0], [3.0]]), 5)
    np.testing.assert_allclose(rows[:, 0], [1.0, 3.0])
    assert oracle.ledger.grad_queries == 17


@pytest.mark.parametrize("label", ["subgaussian", "subweibull", "polymoment"])
def test_gradient_oracle_unbiasedness(label):
    pot = make_gaussian_potential([0.0, 0.0], precision=1.0)
    noise = FAMILIES[label]
    rng_pts = make_rng(9, 0)
    for point_idx in range(10):
        x = rng_pts.standard_normal(2)
        oracle = GradientOracle(pot, noise, make_rng(9, 1, point_idx))
        draws = oracle.draw_batch_rows(np.tile(x, (100_000, 1)), 1)
        err = draws - pot.grad_at(x)
        se = err.std(axis=0) / math.sqrt(draws.shape[0])
        assert np.all(np.abs(err.mean(axis=0)) <= 5 * se)


def test_gradient_oracle_batch_variance_scaling():
    pot = make_gaussian_potential([0.0], precision=1.0)
    oracle = GradientOracle(pot, NoiseModel.subgaussian(1.0), make_rng(4, 0))
    draws = oracle.draw_batch_rows(np.zeros((100_000, 1)), 100)[:, 0]
    assert draws.var() == pytest.approx(1.0 / 100.0, rel=0.1)


def test_gradient_oracle_determinism():
    pot = make_gaussian_potential([0.0], precision=1.0)
    a = GradientOracle(pot, NoiseModel.subgaussian(1.0), make_rng(5, 0))
    b = GradientOracle(pot, NoiseModel.subgaussian(1.0), make_rng(5, 0))
    xs = np.linspace(-1, 1, 10)[:, None]
    np.testing.assert_array_equal(a.draw_batch_rows(xs, 3),
                                  b.draw_batch_rows(xs, 3))


def test_single_draw_equals_batch_of_one():
    pot = make_gaussian_potential([0.0], precision=1.0)
    a = GradientOracle(pot, NoiseModel.subgaussian(1.0), make_rng(6, 0))
    b = GradientOracle(pot, NoiseModel.subgaussian(1.0), make_rng(6, 0))
    np.testing.assert_array_equal(a.draw([0.3]), b.draw_batch([0.3], 1))


def test_twopoint_oracle_requires_1d():
    pot = make_gaussian_potential([0.0, 0.0], precision=1.0)
    with pytest.raises(DimensionError):
        GradientOracle(pot, NoiseModel.twopoint(0.1, 1.0), make_rng(0, 0))


def test_value_oracle_exact_and_noisy():
    pot = make_gaussian_potential([0.0], precision=1.0)
    oracle = ValueOracle(pot, NoiseModel.exact(), make_rng(0, 2))
    assert oracle.draw([1.0]) == pytest.approx(0.5)
    assert oracle.draw_batch([1.0], 4) == pytest.approx(0.5)
    assert oracle.ledger.value_queries == 5

    noisy = ValueOracle(pot, NoiseModel.subgaussian(1.0), make_rng(0, 3))
    vals = noisy.draw_batch_rows(np.zeros((200_000, 1)), 1)
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - pot.value_at([0.0])) <= 4 * se


def test_batch_size_must_be_positive():
    pot = make_gaussian_potential([0.0], precision=1.0)
    oracle = GradientOracle(pot, NoiseModel.exact(), make_rng(0, 4))
    with pytest.raises(ValueError):
        oracle.draw_batch([0.0], 0)


def test_ledger_merge_adds_counters():
    a = QueryLedger(grad_queries=3, w_draws=2)
    b = QueryLedger(grad_queries=5, fors_attempts=7)
    a.merge(b)
    assert a.grad_queries == 8
    assert a.w_draws == 2
    assert a.fors_attempts == 7
    assert a.as_dict()["grad_queries"] == 8
