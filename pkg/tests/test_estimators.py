import numpy as np
import pytest

from conftest import sample_var_se
from rmlmc import streams
from rmlmc.errors import ContractViolation, DomainError, ShapeError
from rmlmc.estimators import (
    CoupledSumEstimator,
    IndependentSumEstimator,
    TruncationSampler,
    Verdict,
    check_coupled_condition,
    check_independent_condition,
    check_sufficient_condition,
    coupled_second_moment,
    coupled_sum_estimate,
    coupled_variance_formula,
    independent_sum_estimate,
    independent_variance_formula,
    mu_tilde_profile,
)
from rmlmc.schedule_opt import point_masses

N = 1_000_000
Q = np.array([1.0, 0.5])


def rngs(seed):
    return streams.stream(seed, 0), streams.stream(seed, 1)


def constant_bundles(c):
    def gen(top, size, rng):
        return np.full((size, top + 1), c), float(top + 1)
    return gen


def deterministic_deltas(cs):
    def gen(level, size, rng):
        prev = cs[level - 1] if level else 0.0
        return np.full(size, cs[level] - prev), 1.0
    return gen


# --- truncation sampler ------------------------------------------------------


def test_level_law():
    q = np.array([1.0, 0.6, 0.3, 0.1, 0.02])
    s = TruncationSampler(q, streams.stream(7, 0)).sample(N)
    for i, qi in enumerate(q):
        p_hat = np.mean(s >= i)
        se = np.sqrt(qi * (1 - qi) / N)
        assert abs(p_hat - qi) <= 4 * se + 1e-15
    counts = np.bincount(s, minlength=q.size)
    expected = N * point_masses(q)
    chi2 = np.sum((counts - expected) ** 2 / expected)
    assert chi2 < 18.47  # 99.9% quantile, 4 dof


def test_level_sampler_scalar_and_bounds():
    sampler = TruncationSampler([1.0, 1e-300], streams.stream(1, 0))
    assert sampler.sample() == 0
    assert sampler.m == 1
    draws = TruncationSampler([1.0, 1.0, 1.0], streams.stream(1, 0)).sample(1000)
    assert np.all(draws == 2)


# --- coupled sum -------------------------------------------------------------


def test_coupled_constant_model_exact():
    est = CoupledSumEstimator([1.0, 0.7, 0.2, 0.01], constant_bundles(0.3), *rngs(0))
    batch = est.sample_batch(10_000)
    assert np.all(batch.values == 0.3)
    assert est.sample().value == 0.3


def test_coupled_forced_level_zero():
    sampler = TruncationSampler([1.0, 1e-300], streams.stream(3, 0))
    out = coupled_sum_estimate(lambda top, size, rng: (np.array([[2.5, 9.0]])[:, : top + 1], 1.0),
                               sampler, streams.stream(3, 1))
    assert out.value == 2.5 and out.level == 0 and out.work == 1.0


def test_coupled_short_bundle_is_contract_violation():
    est = CoupledSumEstimator([1.0, 1.0], lambda top, size, rng: (np.zeros((size, 1)), 1.0), *rngs(0))
    with pytest.raises(ContractViolation):
        est.sample_batch(10)


def test_shared_stream_rejected(two_level):
    rng = streams.stream(5, 0)
    with pytest.raises(ValueError):
        CoupledSumEstimator(Q, two_level.bundle_gen, rng, rng)
    with pytest.raises(ValueError):
        IndependentSumEstimator(Q, two_level.delta_gen, streams.stream(5, 0), streams.stream(5, 0))


def test_coupled_unbiased_and_second_moment(two_level):
    est = CoupledSumEstimator(Q, two_level.bundle_gen, *rngs(11))
    z = est.sample_batch(N).values
    se = z.std(ddof=1) / np.sqrt(N)
    assert abs(z.mean() - two_level.mean_top) <= 4 * se

    m2 = np.mean(z ** 2)
    m2_se = np.std(z ** 2, ddof=1) / np.sqrt(N)
    tele = coupled_second_moment(Q, two_level.sq_dist, "telescoped")
    incr = coupled_second_moment(Q, two_level.sq_dist, "increments")
    assert tele == pytest.approx(incr, rel=1e-12)
    assert abs(m2 - tele) <= 3 * m2_se

    var, var_se = sample_var_se(z)
    assert abs(var - coupled_variance_formula(Q, two_level.eta_bar)) <= 3 * var_se


def test_coupled_work_accounting(two_level):
    q = np.array([1.0, 0.35])
    est = CoupledSumEstimator(q, two_level.bundle_gen, *rngs(12))
    w = est.sample_batch(200_000).work
    expected = np.sum(q * np.diff([0.0, 1.0, 2.0]))
    assert abs(w.mean() - expected) <= 3 * w.std(ddof=1) / np.sqrt(w.size)


# --- independent sum --------------------------------------------------------


def test_independent_deterministic_model():
    cs = [1.0, 1.5, 1.25, 1.3]
    q = np.array([1.0, 0.5, 0.25, 0.125])
    est = IndependentSumEstimator(q, deterministic_deltas(cs), *rngs(0))
    batch = est.sample_batch(1000)
    for s in range(4):
        expected = sum((cs[i] - (cs[i - 1] if i else 0.0)) / q[i] for i in range(s + 1))
        np.testing.assert_allclose(batch.values[batch.levels == s], expected, rtol=1e-15)
    # Abel summation: averaging over the level law recovers c_m exactly.
    p = point_masses(q)
    mean = sum(p[s] * sum((cs[i] - (cs[i - 1] if i else 0.0)) / q[i] for i in range(s + 1))
               for s in range(4))
    assert mean == pytest.approx(cs[-1], rel=1e-14)


def test_independent_forced_level_zero(two_level):
    sampler = TruncationSampler([1.0, 1e-300], streams.stream(4, 0))
    out = independent_sum_estimate(deterministic_deltas([0.75, 2.0]), sampler, streams.stream(4, 1))
    assert out.value == 0.75 and out.level == 0


def test_independent_unbiased_and_variance(two_level):
    est = IndependentSumEstimator(Q, two_level.delta_gen, *rngs(21))
    z = est.sample_batch(N).values
    se = z.std(ddof=1) / np.sqrt(N)
    assert abs(z.mean() - two_level.mean_top) <= 4 * se
    var, var_se = sample_var_se(z)
    assert abs(var - independent_variance_formula(Q, two_level.eta_tilde)) <= 3 * var_se


def test_independent_work_accounting(two_level):
    est = IndependentSumEstimator(Q, two_level.delta_gen, *rngs(22))
    w = est.sample_batch(200_000).work
    assert abs(w.mean() - 1.5) <= 3 * w.std(ddof=1) / np.sqrt(w.size)


def test_single_draw_api_matches_law(two_level):
    est = CoupledSumEstimator(Q, two_level.bundle_gen, *rngs(30))
    draws = [est.sample() for _ in range(2000)]
    assert {d.level for d in draws} == {0, 1}
    assert all(d.work == d.level + 1 for d in draws)
    ind = IndependentSumEstimator(Q, two_level.delta_gen, *rngs(31))
    draws = [ind.sample() for _ in range(2000)]
    assert all(d.work == d.level + 1 for d in draws)


# --- closed-form formulas ---------------------------------------------------


def test_variance_formula_examples():
    assert coupled_variance_formula([1.0, 1.0, 1.0], [5.0, 3.0, 1.0, 0.0]) == 5.0
    assert coupled_variance_formula([1.0, 0.5], [4.0, 2.0, 0.0]) == 6.0
    assert independent_variance_formula([1.0, 1.0], [1.75, 0.5, 0.0]) == 1.75
    with pytest.raises(DomainError):
        coupled_variance_formula([1.0, 0.5], [4.0, np.nan, 0.0])
    with pytest.raises(ShapeError):
        coupled_variance_formula([1.0, 0.5], [4.0, 0.0])


def test_mu_tilde_profile_examples():
    np.testing.assert_allclose(mu_tilde_profile([1.0, 0.5, 0.25], [0, 0, 0], 2), [1.75, 0.75, 0.25, 0.0])
    np.testing.assert_allclose(mu_tilde_profile([0, 0, 0], [0.5, -0.2, 0.0], 2), [0.0, 0.25, 0.04, 0.0])
    with pytest.raises(DomainError):
        mu_tilde_profile([-1.0, 0, 0], [0, 0, 0], 2)


def test_deterministic_eta_tilde_reduces_to_coupled_shape():
    cs = np.array([1.0, 1.5, 1.25, 1.3])
    bias = cs - cs[-1]
    eta_t = mu_tilde_profile(np.zeros(4), bias, 3)
    np.testing.assert_allclose(eta_t[1:4], (cs[:3] - cs[3]) ** 2)


# --- condition checkers ----------------------------------------------------


def toy_q(i):
    return (i + 1.0) ** -2


def toy_gamma(i):
    return (i + 1.0) ** -3


def test_toy_example_new_condition_converges():
    rep = check_coupled_condition(toy_q, toy_gamma)
    assert rep.verdict is Verdict.CONVERGING
    assert np.all(np.diff(rep.partial_sums) >= 0)
    assert rep.tail_exponent == pytest.approx(2.0, abs=0.05)


def test_toy_example_old_condition_diverges():
    rep = check_sufficient_condition(toy_q, toy_gamma)
    assert rep.verdict is Verdict.DIVERGING
    assert rep.partial_sums[-1] > 5
    assert rep.partial_sums[-1] == pytest.approx(np.log(rep.n_terms), abs=6)


def test_zero_gamma_converges():
    rep = check_coupled_condition(toy_q, lambda i: 0.0)
    assert rep.verdict is Verdict.CONVERGING
    assert np.all(rep.partial_sums == 0)
    rep = check_independent_condition(toy_q, lambda i: 0.0, lambda i: 0.0)
    assert rep.verdict is Verdict.CONVERGING


def test_independent_condition_toy():
    rep = check_independent_condition(toy_q, lambda i: 0.0, toy_gamma)
    assert rep.verdict is Verdict.CONVERGING
    assert np.all(np.diff(rep.partial_sums) >= 0)


def test_independent_condition_geometric_regime():
    rep = check_independent_condition(lambda i: 2.0 ** (-1.5 * i),
                                      lambda i: 2.0 ** (-2 * i), lambda i: 2.0 ** (-2 * i))
    assert rep.verdict is Verdict.CONVERGING
    # summand_i = 2**1.5 * 2**(-i/2): geometric series with ratio 2**-0.5
    limit = 2 ** 1.5 / (1 - 2 ** -0.5)
    assert rep.partial_sums[-1] == pytest.approx(limit, rel=1e-10)


def test_slow_series_inconclusive_below_bound():
    rep = check_coupled_condition(toy_q, toy_gamma, n_terms=50, bound=100.0, margin=5.0)
    assert rep.verdict is Verdict.INCONCLUSIVE


@pytest.mark.parametrize("q", [lambda i: 1.0 if i == 0 else 0.5 * (1 + (i == 3)),
                               lambda i: 1.0 if i == 0 else 0.0,
                               lambda i: 0.9 ** i if i else 0.5])
def test_checker_rejects_q_outside_set(q):
    with pytest.raises(DomainError):
        check_coupled_condition(q, toy_gamma, n_terms=10)
