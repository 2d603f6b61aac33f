import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from htlearn.designs import DesignSpec
from htlearn.errors import InvalidDesignError, NumericInstabilityError, SolverError
from htlearn.inclusion import (
    InclusionProbs,
    bias_lemma_bound,
    exact_pi_from_p,
    hajek_p_from_pi,
    hajek_pi_from_p,
    normalize_odds,
    poisson_diagnostics,
    solve_canonical_p,
)

from .conftest import P4, PI4


def test_equal_p_gives_n_over_N():
    pi = exact_pi_from_p(np.full(9, 3 / 9), 3).pi
    assert np.all(pi == 3 / 9)


def test_n4_example_exact():
    ip = exact_pi_from_p(P4, 2)
    np.testing.assert_allclose(ip.pi, PI4, rtol=0, atol=1e-15)
    np.testing.assert_allclose(ip.pi, [0.13755, 0.34201, 0.65799, 0.86245], atol=5e-6)
    assert ip.n == pytest.approx(2.0, abs=1e-12)


def test_degenerate_sizes():
    assert np.all(exact_pi_from_p(P4, 0).pi == 0)
    assert np.all(exact_pi_from_p(P4, 4).pi == 1)
    with pytest.raises(InvalidDesignError):
        exact_pi_from_p(P4, 5)
    with pytest.raises(InvalidDesignError):
        exact_pi_from_p([0.2, 1.0], 1)


@pytest.mark.parametrize("seed", range(5))
def test_matches_enumeration_n12(seed):
    rng = np.random.default_rng(seed)
    for N in range(2, 13):
        p = rng.uniform(0.02, 0.98, N)
        n = int(rng.integers(1, N))
        marg = DesignSpec.rejective(p, n).enumerate().marginals()
        np.testing.assert_allclose(exact_pi_from_p(p, n).pi, marg, atol=1e-10)


def test_sum_and_kappa():
    rng = np.random.default_rng(3)
    for _ in range(50):
        N = int(rng.integers(2, 200))
        n = int(rng.integers(1, N))
        ip = exact_pi_from_p(rng.uniform(0.01, 0.99, N), n)
        assert ip.n == pytest.approx(n, abs=1e-9)
        assert ip.kappa >= 1 - 1e-12


def test_monotone_in_own_p():
    rng = np.random.default_rng(4)
    for _ in range(20):
        N = int(rng.integers(3, 30))
        n = int(rng.integers(1, N))
        p = rng.uniform(0.05, 0.95, N)
        base = exact_pi_from_p(p, n).pi
        i = int(rng.integers(N))
        q = p.copy()
        q[i] += 1e-6
        assert exact_pi_from_p(q, n).pi[i] > base[i]


def test_extreme_odds_survive_via_log_domain():
    rng = np.random.default_rng(8)
    logits = rng.normal(0, 12, 2000)
    p = 1 / (1 + np.exp(-np.clip(logits, -30, 30)))
    ip = exact_pi_from_p(p, 300)
    assert ip.n == pytest.approx(300, abs=1e-7)


def test_inclusion_probs_readonly():
    ip = InclusionProbs([0.5, 0.5])
    with pytest.raises(ValueError):
        ip.pi[0] = 0.1
    with pytest.raises(InvalidDesignError):
        InclusionProbs([0.5, 1.5])
    assert np.isinf(InclusionProbs([0.0, 1.0]).kappa)


def test_numeric_instability_is_arithmetic_error():
    assert issubclass(NumericInstabilityError, ArithmeticError)


# --------------------------------------------------------------------- solver


def test_solver_equal_pi_fixed_point():
    p = solve_canonical_p(np.full(8, 0.25))
    assert np.all(p == 0.25)


def test_solver_round_trip_n4():
    p = solve_canonical_p(PI4)
    assert p.sum() == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(p, P4, atol=1e-8)
    # odds ratios agree with the input's
    o = p / (1 - p)
    np.testing.assert_allclose(o / o[0], (P4 / (1 - P4)) / 0.25, rtol=1e-7)


def test_solver_log_uniform_n50():
    rng = np.random.default_rng(50)
    raw = np.exp(rng.uniform(np.log(0.02), np.log(0.9), 50))
    pi = np.clip(raw * 10 / raw.sum(), 0, 1)
    # rescaling can push a unit past 1; redistribute so the target stays valid
    while pi.max() >= 0.95:
        pi = np.minimum(pi, 0.95)
        pi *= 10 / pi.sum()
    assert pi.sum() == pytest.approx(10, abs=1e-12)
    p = solve_canonical_p(pi)
    assert p.sum() == pytest.approx(10, abs=1e-9)
    assert np.max(np.abs(exact_pi_from_p(p, 10).pi - pi)) < 1e-8


def test_solver_identity_on_canonical_p():
    rng = np.random.default_rng(51)
    for _ in range(20):
        N = int(rng.integers(3, 40))
        n = int(rng.integers(1, N))
        p = normalize_odds(rng.uniform(0.05, 0.95, N), n)
        assert p.sum() == pytest.approx(n, abs=1e-9)
        back = solve_canonical_p(exact_pi_from_p(p, n), tol=1e-12)
        np.testing.assert_allclose(back, p, atol=1e-8)


def test_solver_failure_carries_residual():
    with pytest.raises(SolverError) as ei:
        solve_canonical_p(PI4, tol=1e-30, max_iter=3)
    assert ei.value.residual is not None and ei.value.residual > 0


def test_solver_rejects_non_integer_total():
    with pytest.raises(InvalidDesignError):
        solve_canonical_p([0.3, 0.3, 0.3])


def test_normalize_odds_keeps_ratios():
    q = normalize_odds(P4 * 0.5, 2)
    o = q / (1 - q)
    w = P4 * 0.5 / (1 - P4 * 0.5)
    np.testing.assert_allclose(o / w, (o / w)[0], rtol=1e-12)
    assert q.sum() == pytest.approx(2, abs=1e-12)


# --------------------------------------------------------------------- hajek


def test_hajek_equal_p_exact():
    p = np.full(12, 0.3)
    np.testing.assert_allclose(hajek_pi_from_p(p), p, atol=1e-15)
    np.testing.assert_allclose(hajek_p_from_pi(p), p, atol=1e-15)


def test_hajek_n4_value_and_warning():
    # d_N = 0.8 and p_tilde = 0.5 give odds(pi_1) = 0.25 * 0.625, i.e. pi_1 = 5/37
    with pytest.warns(RuntimeWarning):
        h = hajek_pi_from_p(P4)
    np.testing.assert_allclose(h, [5 / 37, 7 / 19, 27 / 43, 11 / 13], atol=1e-15)
    err = np.abs(h - PI4).max()
    assert err > 0
    assert err == pytest.approx(0.030085588311575928, rel=1e-10)


def test_hajek_error_shrinks_with_tiling():
    errs = []
    for m in (1, 5, 25):
        p = np.tile(P4, m)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            errs.append(np.abs(hajek_pi_from_p(p) - exact_pi_from_p(p, 2 * m).pi).max())
    assert errs[0] > errs[1] > errs[2]
    np.testing.assert_allclose(errs, [0.030085588311575928, 9.710788968967377e-4, 4.1010754157744245e-5], rtol=1e-8)


def test_hajek_inverse_direction_improves_on_identity():
    p = np.tile(P4, 25)
    pi = exact_pi_from_p(p, 50).pi
    approx = hajek_p_from_pi(pi)
    assert np.abs(approx - p).max() < 0.1 * np.abs(pi - p).max()


def test_diagnostics_ranges():
    rng = np.random.default_rng(9)
    for _ in range(30):
        N = int(rng.integers(2, 60))
        p = rng.uniform(0.01, 0.99, N)
        pi = exact_pi_from_p(p, int(rng.integers(1, N))).pi
        dg = poisson_diagnostics(p, pi)
        assert 0 <= dg.p_tilde <= 1 and 0 <= dg.pi_tilde <= 1
        assert dg.d_N <= N / 4


# --------------------------------------------------------------------- bias lemma


def test_bias_equal_weights_zero():
    p = np.full(10, 0.4)
    b = bias_lemma_bound(p, p)
    assert b.aggregate == 0 and b.ok


def test_bias_tiled_m25():
    p = np.tile(P4, 25)
    pi = exact_pi_from_p(p, 50).pi
    b = bias_lemma_bound(p, pi)
    assert b.d_N == pytest.approx(20.0)
    assert b.violations.size == 0
    assert b.aggregate <= b.aggregate_bound
    assert b.aggregate == pytest.approx(0.018962657079048206, rel=1e-9)
    assert b.aggregate_bound == pytest.approx(1.5183150722656042, rel=1e-12)


def test_bias_lemma_against_enumeration():
    rng = np.random.default_rng(10)
    checked = 0
    while checked < 40:
        N = int(rng.integers(4, 13))
        p = rng.uniform(0.1, 0.9, N)
        if np.sum(p * (1 - p)) < 1:
            continue
        n = int(rng.integers(1, N))
        p = normalize_odds(p, n)
        if np.sum(p * (1 - p)) < 1:
            continue
        pi = DesignSpec.rejective(p, n).enumerate().marginals()
        assert bias_lemma_bound(p, pi).ok
        checked += 1


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 14), st.integers(0, 2**31))
def test_property_sum_equals_n(N, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, N))
    ip = exact_pi_from_p(rng.uniform(0.01, 0.99, N), n)
    assert abs(ip.n - n) <= 1e-9
    assert np.all((ip.pi > 0) & (ip.pi < 1))
