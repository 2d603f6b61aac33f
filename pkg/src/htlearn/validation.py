"""Exact small-population checks of the sampling, estimation and bound machinery.

Every suite enumerates designs over at most ``max_N`` units and records
pass/fail per instance; nothing here raises on a failed check.
"""

from __future__ import annotations

import itertools
import math
import warnings

import numpy as np

from .bounds import BernsteinInputs, BoundInputs, bernstein_tail, prop1_deviation_bound, prop1_tail, smallest_valid_C, theorem2_bound
from .designs import DesignSpec, second_order_probs
from .estimators import Population, design_expectation_of_ht, exact_tail, losses, maximal_coupling, sup_deviation_distribution, tv_distance
from .inclusion import InclusionProbs, bias_lemma_bound, exact_pi_from_p, hajek_p_from_pi, hajek_pi_from_p, normalize_odds, solve_canonical_p
from .learners import Stump, stump_class

KINDS = ("poisson", "srswor", "rejective", "stratified", "rao_sampford")
UNBIASED_TOL = 1e-12
NA_TOL = 1e-12


def random_canonical_p(rng, N: int, n: int, spread: float = 1.5) -> np.ndarray:
    logit = rng.normal(0.0, spread, N)
    return normalize_odds(1.0 / (1.0 + np.exp(-logit)), n)


def random_design(rng, kind: str, N: int) -> DesignSpec:
    n = int(rng.integers(1, N))
    if kind == "poisson":
        return DesignSpec.poisson(rng.uniform(0.05, 0.95, N))
    if kind == "srswor":
        return DesignSpec.srswor(N, n)
    if kind == "rejective":
        return DesignSpec.rejective(random_canonical_p(rng, N, n))
    if kind == "stratified":
        K = int(rng.integers(1, min(3, N) + 1))
        cuts = np.sort(rng.choice(np.arange(1, N), size=K - 1, replace=False)) if K > 1 else []
        perm = rng.permutation(N)
        strata = [sorted(s.tolist()) for s in np.split(perm, cuts)]
        # every stratum contributes, so all units have positive inclusion probability
        sizes = [int(rng.integers(1, len(s) + 1)) for s in strata]
        return DesignSpec.stratified(strata, sizes)
    pi = exact_pi_from_p(random_canonical_p(rng, N, n), n).pi
    return DesignSpec.rao_sampford(pi)


def _random_loss(rng, N):
    pop = Population(rng.normal(size=(N, 1)), rng.choice([-1, 1], size=N))
    g = Stump(0, float(rng.normal()), int(rng.choice([-1, 1])))
    return losses(pop, g)


def _suite(name, results, extra=None):
    fails = [r for r in results if not r["ok"]]
    out = {"name": name, "passed": not fails, "instances": len(results), "failures": len(fails), "examples": fails[:3]}
    worst = [r["worst"] for r in results if "worst" in r]
    if worst:
        out["worst"] = float(max(worst))
    if extra:
        out.update(extra)
    return out


def suite_unbiasedness(rng, max_N, instances, corrupt_pi=False):
    res = []
    for k in range(instances):
        kind = KINDS[k % len(KINDS)]
        N = int(rng.integers(3, max_N + 1))
        spec = random_design(rng, kind, N)
        ed = spec.enumerate()
        pi = spec.inclusion_probabilities().pi.copy()
        if corrupt_pi:
            j = int(np.argmax(pi))
            pi[j] = pi[j] * 0.9
        a = _random_loss(rng, N)
        if corrupt_pi:
            a[int(np.argmax(spec.inclusion_probabilities().pi))] = 1.0
        err = abs(design_expectation_of_ht(a, ed, np.where(pi > 0, pi, 1.0)) - a.mean())
        res.append({"kind": kind, "N": N, "worst": err, "ok": err <= UNBIASED_TOL})
    return _suite("unbiasedness", res)


def suite_inclusion(rng, max_N, instances):
    res = []
    for _ in range(instances):
        N = int(rng.integers(3, max_N + 1))
        n = int(rng.integers(1, N))
        p = random_canonical_p(rng, N, n)
        pi = exact_pi_from_p(p, n).pi
        marg = DesignSpec.rejective(p, n).enumerate().marginals()
        e1 = float(np.max(np.abs(pi - marg)))
        q = solve_canonical_p(pi, tol=1e-13)
        e2 = float(np.max(np.abs(q - p)))
        res.append({"N": N, "n": n, "worst": max(e1, e2), "dp_vs_enum": e1, "round_trip": e2, "ok": e1 <= 1e-10 and e2 <= 1e-8})
    return _suite("inclusion", res)


def _covariance(B, probs, f, g):
    return math.fsum((probs * f * g).tolist()) - math.fsum((probs * f).tolist()) * math.fsum((probs * g).tolist())


def suite_negative_association(rng, max_N, instances):
    res = []
    for _ in range(instances):
        N = int(rng.integers(3, max_N + 1))
        n = int(rng.integers(1, N))
        spec = DesignSpec.rejective(random_canonical_p(rng, N, n), n)
        ed = spec.enumerate()
        P2 = second_order_probs(ed)
        pi = np.diag(P2)
        off = P2 - np.outer(pi, pi)
        np.fill_diagonal(off, -np.inf)
        worst = float(off.max())
        B = ed.bits().astype(np.float64)
        perm = rng.permutation(N)
        k1 = int(rng.integers(1, N))
        k2 = int(rng.integers(1, N - k1 + 1))
        A1, A2 = perm[:k1], perm[k1 : k1 + k2]
        covs = [
            _covariance(B, ed.probs, B[:, A1].sum(1), B[:, A2].sum(1)),
            _covariance(B, ed.probs, B[:, A1].prod(1), B[:, A2].prod(1)),
        ]
        worst = max(worst, *covs)
        res.append({"N": N, "n": n, "worst": worst, "ok": worst <= NA_TOL})
    return _suite("negative_association", res)


def tile(p, m):
    return np.tile(np.asarray(p, dtype=np.float64), m)


def suite_hajek(rng, base_instances=10, ms=(1, 5, 25)):
    res = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for _ in range(base_instances):
            N0 = int(rng.integers(3, 7))
            n0 = int(rng.integers(1, N0))
            p0 = random_canonical_p(rng, N0, n0, spread=1.0)
            e_pi, e_p = [], []
            for m in ms:
                p = tile(p0, m)
                pi = exact_pi_from_p(p, n0 * m).pi
                e_pi.append(float(np.max(np.abs(hajek_pi_from_p(p) - pi))))
                e_p.append(float(np.max(np.abs(hajek_p_from_pi(pi) - p))))
            ok = all(a > b for a, b in zip(e_pi, e_pi[1:])) and all(a > b for a, b in zip(e_p, e_p[1:]))
            res.append({"N0": N0, "errors_pi": e_pi, "errors_p": e_p, "ok": ok})
    return _suite("hajek_trend", res)


def suite_bias_lemma(rng, max_N, instances, tiled_max_N=200):
    res = []
    tries = 0
    while len(res) < instances and tries < 100 * instances:
        tries += 1
        N = int(rng.integers(4, max_N + 1))
        n = int(rng.integers(1, N))
        p = random_canonical_p(rng, N, n, spread=1.0)
        if np.sum(p * (1 - p)) < 1.0:
            continue
        pi = DesignSpec.rejective(p, n).enumerate().marginals()
        r = bias_lemma_bound(p, pi)
        res.append({"N": N, "worst": float(np.max(r.per_unit_gap / r.per_unit_bound)), "ok": r.ok})
    n_small = len(res)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for _ in range(max(1, instances // 10)):
            N0 = int(rng.integers(3, 9))
            n0 = int(rng.integers(1, N0))
            p0 = random_canonical_p(rng, N0, n0, spread=1.0)
            for m in range(1, tiled_max_N // N0 + 1):
                p = tile(p0, m)
                if np.sum(p * (1 - p)) < 1.0:
                    continue
                pi = exact_pi_from_p(p, n0 * m).pi
                r = bias_lemma_bound(p, pi)
                res.append({"N": N0 * m, "worst": float(np.max(r.per_unit_gap / r.per_unit_bound)), "ok": r.ok})
    return _suite("bias_lemma", res, {"enumerated": n_small, "tiled": len(res) - n_small})


def centered_ht_terms(pi, a, N):
    """Bounds ``c`` and ``sigma_i^2`` for ``Z_i = (eps_i / pi_i - 1) a_i / N``."""
    a = np.asarray(a, dtype=np.float64)
    c = float(np.max(np.maximum(1.0, 1.0 / pi - 1.0) * a) / N)
    sig = a * (1 - pi) / (N**2 * pi)
    return c, sig


def suite_bernstein(rng, instances=20, N=10, sizes=(3, 4, 5), grid=50):
    res = []
    for k in range(instances):
        n = sizes[k % len(sizes)]
        p = random_canonical_p(rng, N, n)
        ed = DesignSpec.rejective(p, n).enumerate()
        pi = exact_pi_from_p(p, n).pi
        a = (rng.random(N) < 0.6).astype(np.float64)
        a[int(rng.integers(N))] = 1.0
        Z = (ed.bits() / pi - 1.0) * a / N
        S = Z.sum(1)
        c, sig = centered_ht_terms(pi, a, N)
        ts = np.linspace(S.max() / grid, S.max() * 1.02, grid)
        tail = exact_tail(S, ed.probs, ts)
        bound = bernstein_tail(BernsteinInputs(c, sig, 1.0), ts)
        ratio = float(np.max(tail / bound))
        res.append({"n": n, "worst": ratio, "ok": bool(np.all(tail <= bound + 1e-15))})
    return _suite("bernstein", res)


def suite_prop1(rng, instances=20, N=10, n=4, delta=0.05, grid=50):
    res = []
    for _ in range(instances):
        pop = Population(rng.integers(0, 6, size=(N, 1)).astype(float), rng.choice([-1, 1], size=N))
        G = stump_class(pop.features)
        p = random_canonical_p(rng, N, n, spread=0.8)
        ed = DesignSpec.rejective(p, n).enumerate()
        ip = exact_pi_from_p(p, n)
        vals, probs = sup_deviation_distribution(pop, ed, G, ip.pi)
        inp = BoundInputs(N, n, 1, delta, ip.kappa, log_class_size=math.log(len(G)))
        ts = np.linspace(max(vals.max(), 1e-6) / grid, max(vals.max(), 1e-6) * 1.02, grid)
        tail = exact_tail(vals, probs, ts)
        ok = bool(np.all(tail <= prop1_tail(inp, ts)))
        at_bound = float(exact_tail(vals, probs, [prop1_deviation_bound(inp)])[0])
        ok = ok and at_bound <= delta
        res.append({"class_size": len(G), "kappa": ip.kappa, "tail_at_bound": at_bound, "ok": ok})
    return _suite("prop1", res)


def _stump_truth(px, eta, stumps):
    xs = np.arange(px.shape[0], dtype=np.float64)
    out = []
    for g in stumps:
        lab = g.predict(xs[:, None])
        out.append(float(np.sum(px * np.where(lab > 0, 1 - eta, eta))))
    return np.array(out)


def theorem2_instance(rng, N=5, n=2, support=3):
    """Exact expected excess risk of the Rao-Sampford HT minimiser over stumps.

    (X, Y) has finite support, so every dataset of N units and every sample
    can be enumerated. Returns a dict with the observed value, the bound and
    the smallest valid constant.
    """
    px = rng.dirichlet(np.ones(support))
    eta = rng.uniform(0.05, 0.95, support)
    stumps = [Stump(0, -math.inf, 1), Stump(0, -math.inf, -1)]
    for t in np.arange(support - 1) + 0.5:
        stumps += [Stump(0, float(t), 1), Stump(0, float(t), -1)]
    truth = _stump_truth(px, eta, stumps)

    pi = exact_pi_from_p(random_canonical_p(rng, N, n, spread=0.8), n).pi
    rs = DesignSpec.rao_sampford(pi).enumerate()
    rej = DesignSpec.rejective(solve_canonical_p(pi), n).enumerate()
    tv = tv_distance(rs, rej)

    outcomes = [(x, y) for x in range(support) for y in (-1, 1)]
    w_out = np.array([px[x] * (eta[x] if y > 0 else 1 - eta[x]) for x, y in outcomes])
    # per stump, per outcome: loss
    L = np.array([[float(g.predict(np.array([[x]], dtype=float))[0] != y) for x, y in outcomes] for g in stumps])
    data = np.array(list(itertools.product(range(len(outcomes)), repeat=N)))
    pdata = np.prod(w_out[data], axis=1)
    loss = L[:, data]  # (G, D, N)
    B = rs.bits().astype(np.float64) / pi  # (S, N)
    risks = np.einsum("gdn,sn->dsg", loss, B) / N
    chosen = np.argmax(risks <= risks.min(axis=2, keepdims=True) + 1e-12, axis=2)
    excess = truth[chosen] - truth.min()
    observed = math.fsum((pdata[:, None] * rs.probs[None, :] * excess).ravel().tolist())

    ip = InclusionProbs(pi)
    inp = BoundInputs(N, n, V=2, delta=0.5, kappa=ip.kappa, kappa_star=ip.kappa, tv=tv)
    bound = theorem2_bound(inp)
    # coupling terms of the decomposition, exact under the maximal coupling
    cp = maximal_coupling(rej, rs)
    Ba = ((cp.masks_a[:, None] >> np.arange(N)) & 1).astype(np.float64)
    Bb = ((cp.masks_b[:, None] >> np.arange(N)) & 1).astype(np.float64)
    s2 = math.fsum((cp.probs * (np.abs(Bb - Ba) / pi).sum(1) / N).tolist())
    return {
        "observed": observed,
        "bound": bound.total,
        "terms": bound.terms,
        "tv": tv,
        "kappa": ip.kappa,
        "smallest_valid_C": smallest_valid_C(inp, observed),
        "coupling_S2": s2,
        "coupling_S2_bound": ip.kappa * (N / n) * tv,
    }


def suite_theorem2(rng, instances=10, C_max=10.0):
    res = []
    for _ in range(instances):
        r = theorem2_instance(rng)
        ok = r["observed"] <= r["bound"] and math.isfinite(r["smallest_valid_C"]) and r["smallest_valid_C"] <= C_max
        ok = ok and r["coupling_S2"] <= r["coupling_S2_bound"] + 1e-12
        r = {k: v for k, v in r.items() if k != "terms"}
        r["ok"] = bool(ok)
        res.append(r)
    return _suite("theorem2", res, {"smallest_valid_C": max(r["smallest_valid_C"] for r in res)})


def run_validation_suite(max_N: int = 8, instances: int = 100, seed: int = 0, corrupt_pi: bool = False, suites=None) -> dict:
    """Run the exact oracles; ``max_N`` caps the enumerated population size (<= 12).

    Each suite gets its own child of ``SeedSequence(seed)`` so results do not
    depend on which other suites run.
    """
    if not 3 <= max_N <= 12:
        raise ValueError("max_N must lie in [3, 12]")
    names = ["unbiasedness", "inclusion", "negative_association", "hajek_trend", "bias_lemma", "bernstein", "prop1", "theorem2"]
    chosen = names if suites is None else [s for s in names if s in suites]
    rngs = dict(zip(names, (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(names)))))
    runners = {
        "unbiasedness": lambda r: suite_unbiasedness(r, max_N, instances, corrupt_pi),
        "inclusion": lambda r: suite_inclusion(r, max_N, instances),
        "negative_association": lambda r: suite_negative_association(r, max_N, instances),
        "hajek_trend": lambda r: suite_hajek(r),
        "bias_lemma": lambda r: suite_bias_lemma(r, max_N, instances),
        "bernstein": lambda r: suite_bernstein(r),
        "prop1": lambda r: suite_prop1(r),
        "theorem2": lambda r: suite_theorem2(r),
    }
    out = {name: runners[name](rngs[name]) for name in chosen}
    return {"max_N": max_N, "instances": instances, "seed": seed, "corrupt_pi": corrupt_pi, "passed": all(s["passed"] for s in out.values()), "suites": out}
