import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from htlearn.bounds import (
    C_UNSPECIFIED_NOTE,
    BernsteinInputs,
    BoundInputs,
    bernstein_tail,
    bound_report,
    prop1_deviation_bound,
    prop1_excess_bound,
    prop1_tail,
    report_json,
    smallest_valid_C,
    theorem2_bound,
)
from htlearn.designs import DesignSpec
from htlearn.estimators import Population, exact_tail, sup_deviation_distribution
from htlearn.inclusion import InclusionProbs, exact_pi_from_p, normalize_odds
from htlearn.learners import stump_class


def test_inputs_validation():
    for bad in (dict(delta=0.0), dict(delta=1.0), dict(kappa=0.5), dict(tv=1.5), dict(n=0), dict(n=11), dict(V=0)):
        with pytest.raises(ValueError):
            BoundInputs(**{"N": 10, "n": 4, **bad})
    for bad in (dict(c=0.0, sigma_sq=[1.0]), dict(c=1.0, sigma_sq=[-1.0]), dict(c=1.0, sigma_sq=[1.0], t=0.0)):
        with pytest.raises(ValueError):
            BernsteinInputs(**bad)


def test_prop1_edge_substitution():
    inp = BoundInputs(N=1, n=1, V=1, delta=0.5, kappa=1.0)
    L = math.log(2 / 0.5) + math.log(2)
    assert prop1_deviation_bound(inp) == pytest.approx(2 * L / 3 + math.sqrt(2 * L), rel=1e-15)
    assert L == pytest.approx(math.log(8))


def test_prop1_doubling_n_decreases():
    for N in (100, 1000, 10_000):
        for n in (1, 5, 20, 50):
            if 2 * n > N:
                continue
            a = prop1_deviation_bound(BoundInputs(N, n, kappa=1.3))
            b = prop1_deviation_bound(BoundInputs(N, 2 * n, kappa=1.3))
            assert b < a


def test_prop1_slope():
    ns = np.array([1e2, 1e3, 1e4, 1e5])
    vals = [prop1_deviation_bound(BoundInputs(int(n * n), int(n), V=1, delta=0.05, kappa=1.0)) for n in ns]
    slope = np.polyfit(np.log(ns), np.log(vals), 1)[0]
    assert abs(slope + 0.5) <= 0.05


def test_prop1_excess_terms():
    inp = BoundInputs(1000, 50, V=3, delta=0.1, kappa=1.5, bias_gap=0.02)
    t = prop1_excess_bound(inp)
    assert set(t.terms) == {"ht_deviation_sqrt", "ht_deviation_linear", "vc_population", "mcdiarmid_population", "approximation"}
    assert all(v >= 0 for v in t.terms.values())
    assert t.total == pytest.approx(sum(t.terms.values()), rel=1e-15)
    L = math.log(4 / 0.1) + 3 * math.log(1001)
    assert t.terms["ht_deviation_sqrt"] == pytest.approx(2 * math.sqrt(2 * 1.5 * L / 50))
    assert t.terms["ht_deviation_linear"] == pytest.approx(4 * 1.5 * L / 150)
    assert t.terms["mcdiarmid_population"] == pytest.approx(2 * math.sqrt(2 * math.log(20) / 1000))


def test_prop1_excess_limit_large_N():
    # with n fixed, the population terms vanish and only the n-terms (with log N growth) remain
    inp = BoundInputs(10**12, 50, V=1, log_class_size=2.0)
    t = prop1_excess_bound(inp)
    assert t.terms["vc_population"] < 1e-5 and t.terms["mcdiarmid_population"] < 1e-5
    assert t.total == pytest.approx(t.terms["ht_deviation_sqrt"] + t.terms["ht_deviation_linear"], rel=1e-4)


def test_srswor_rate_envelope():
    # kappa = 1, n = sqrt(N): the excess bound tracks sqrt(log N / n)
    ns = np.array([1e2, 1e3, 1e4, 1e5])
    vals = np.array([prop1_excess_bound(BoundInputs(int(n * n), int(n), kappa=1.0)).total for n in ns])
    env = np.sqrt(np.log(ns**2) / ns)
    ratio = vals / env
    assert ratio.max() / ratio.min() < 1.5
    slope = np.polyfit(np.log(ns), np.log(vals), 1)[0]
    assert abs(slope + 0.5) <= 0.05


def test_bernstein_values():
    b = BernsteinInputs(1.0, [1.0], 1.0)
    assert bernstein_tail(b) == pytest.approx(math.exp(-0.375), rel=1e-15)
    assert bernstein_tail(b, 1e-9) == pytest.approx(1.0, abs=1e-8)
    assert bernstein_tail(b, 1e4) < 1e-300
    assert bernstein_tail(b, two_sided=True) == pytest.approx(2 * math.exp(-0.375))
    grid = np.linspace(0.01, 5, 50)
    v = bernstein_tail(b, grid)
    assert np.all(v <= 1) and np.all(np.diff(v) < 0)


def test_bernstein_exact_validity_n10():
    rng = np.random.default_rng(0)
    for n in (3, 4, 5):
        for _ in range(4):
            N = 10
            p = normalize_odds(rng.uniform(0.1, 0.9, N), n)
            design = DesignSpec.rejective(p, n).enumerate()
            pi = exact_pi_from_p(p, n).pi
            a = (rng.random(N) < 0.5).astype(float)
            B = design.bits().astype(float)
            Z = (B / pi - 1.0) * a / N
            total = Z.sum(1)
            var = ((1 - pi) / pi) * a**2 / N**2
            c = float(np.max(np.maximum(1 / pi - 1, 1) * a / N)) or 1.0 / N
            inp = BernsteinInputs(c, var)
            grid = np.linspace(1e-3, max(total.max(), 1e-3) * 1.2, 50)
            tail = exact_tail(total, design.probs, grid)
            assert np.all(tail <= bernstein_tail(inp, grid) + 1e-15)


def test_prop1_validity_finite_class():
    rng = np.random.default_rng(1)
    N, n = 10, 4
    X = np.round(rng.normal(size=(N, 1)), 3)
    pop = Population(X, np.where(rng.random(N) < 0.5, 1, -1))
    G = stump_class(X)[:11]
    p = normalize_odds(rng.uniform(0.2, 0.8, N), n)
    spec = DesignSpec.rejective(p, n)
    design = spec.enumerate()
    assert len(design) == 210
    ip = spec.inclusion_probabilities()
    vals, probs = sup_deviation_distribution(pop, design, G, ip)
    inp = BoundInputs(N, n, delta=0.05, kappa=ip.kappa, log_class_size=math.log(len(G)))
    b = prop1_deviation_bound(inp)
    assert exact_tail(vals, probs, [b])[0] <= 0.05
    ts = np.linspace(0.01, 2.0, 40)
    assert np.all(exact_tail(vals, probs, ts) <= prop1_tail(inp, ts) + 1e-15)


def test_theorem2_reduces_and_affine():
    base = BoundInputs(200, 20, V=2, kappa=1.2, kappa_star=1.2)
    t0 = theorem2_bound(base)
    assert t0.terms["coupling"] == 0
    assert t0.total == pytest.approx(
        t0.terms["ht_deviation_sqrt"] + t0.terms["ht_deviation_linear"] + t0.terms["vc_population"]
    )
    tvs = np.array([0.0, 0.1, 0.2, 0.5])
    vals = [theorem2_bound(BoundInputs(200, 20, V=2, kappa=1.2, kappa_star=1.5, tv=tv)).total for tv in tvs]
    slopes = np.diff(vals) / np.diff(tvs)
    np.testing.assert_allclose(slopes, 2 * (1.5 + 1.2) * 200 / 20, rtol=1e-12)


def test_smallest_valid_C():
    inp = BoundInputs(5, 2, V=2, kappa=1.0)
    rest = theorem2_bound(inp)
    without = rest.total - rest.terms["vc_population"]
    assert smallest_valid_C(inp, without - 0.1) == 0.0
    c = smallest_valid_C(inp, without + 0.3)
    assert c == pytest.approx(0.3 / math.sqrt(2 / 5))
    tight = BoundInputs(5, 2, V=2, kappa=1.0, C_universal=c)
    assert theorem2_bound(tight).total == pytest.approx(without + 0.3)


def test_theorem2_exact_on_small_instances():
    from htlearn.validation import theorem2_instance

    rng = np.random.default_rng(2)
    for _ in range(3):
        r = theorem2_instance(rng)
        assert r["observed"] <= r["bound"]
        assert 0 <= r["smallest_valid_C"] <= 10
        assert 0 < r["tv"] < 1


def test_monotonicity_grid():
    for N in (50, 500):
        for n in (5, 10, 20):
            for k in (1.0, 2.0):
                for V in (1, 3):
                    a = BoundInputs(N, n, V=V, kappa=k, tv=0.1)
                    for f in (prop1_deviation_bound, lambda i: prop1_excess_bound(i).total, lambda i: theorem2_bound(i).total):
                        assert f(BoundInputs(N, n + 1, V=V, kappa=k, tv=0.1)) <= f(a)
                        assert f(BoundInputs(N, n, V=V, kappa=k + 0.1, tv=0.1)) >= f(a)
                        assert f(BoundInputs(N, n, V=V + 1, kappa=k, tv=0.1)) >= f(a)
                        assert f(BoundInputs(N, n, V=V, kappa=k, tv=0.2)) >= f(a)


def test_report_structure():
    inp = BoundInputs(10, 4, V=1, delta=0.05, kappa=1.234567890123, tv=0.01)
    rep = bound_report(inp)
    assert rep["empirical"] == {}
    assert rep["inputs"]["kappa"] == 1.234567890123
    assert C_UNSPECIFIED_NOTE in rep["notes"]
    back = json.loads(report_json(rep))
    assert back["inputs"] == rep["inputs"]
    assert back["theorem2"]["total"] == theorem2_bound(inp).total


def test_report_bernstein_flags():
    rng = np.random.default_rng(3)
    N, n = 10, 4
    p = normalize_odds(rng.uniform(0.1, 0.9, N), n)
    d = DesignSpec.rejective(p, n).enumerate()
    pi = exact_pi_from_p(p, n).pi
    a = np.ones(N)
    total = ((d.bits() / pi - 1) * a / N).sum(1)
    binp = BernsteinInputs(float(np.max(1 / pi - 1)) / N, (1 - pi) / pi / N**2)
    ts = np.linspace(0.01, 0.5, 10)
    tails = dict(zip(ts.tolist(), exact_tail(total, d.probs, ts).tolist()))
    rep = bound_report(BoundInputs(N, n, kappa=InclusionProbs(pi).kappa), binp, bernstein_tails=tails)
    assert len(rep["empirical"]["bernstein"]) == 10
    assert all(r["valid"] for r in rep["empirical"]["bernstein"])
    assert rep["all_valid"]
    with pytest.raises(ValueError):
        bound_report(BoundInputs(N, n), bernstein_tails=tails)


def test_report_observed_excess():
    rep = bound_report(BoundInputs(5, 2, V=2), observed_excess=10.0)
    assert rep["empirical"]["theorem2"]["valid"] is False
    assert rep["all_valid"] is False
    assert rep["empirical"]["theorem2"]["smallest_valid_C"] > 1


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 10), st.floats(0.0, 5), st.floats(0.001, 20))
def test_property_bernstein_in_unit_interval(c, s, t):
    v = bernstein_tail(BernsteinInputs(c, [s]), t)
    assert 0 <= v <= 1
