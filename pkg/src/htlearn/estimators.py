"""Risk functionals over a finite labelled population and a drawn sample."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .designs import EnumeratedDesign, as_bits
from .errors import IncompatibleDesignsError, WeightUndefinedError
from .inclusion import as_pi


@dataclass(frozen=True, eq=False)
class Population:
    """Labelled dataset ``(X_i, Y_i)``, labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.labels)
        if X.shape[0] != y.shape[0] or X.shape[0] < 1:
            raise ValueError("features and labels must have the same nonzero length")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("labels must be -1 or +1")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain missing or infinite values")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(np.int64))

    @property
    def N(self) -> int:
        return self.labels.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Population":
        return Population(self.features[idx], self.labels[idx])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow([f"f_{j}" for j in range(self.d)] + ["label"])
            for x, y in zip(self.features, self.labels):
                wr.writerow([repr(float(v)) for v in x] + [int(y)])

    @classmethod
    def from_csv(cls, path) -> "Population":
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            rows = list(rd)
        li = header.index("label")
        fcols = [k for k, h in enumerate(header) if h != "label"]
        data = np.array([[float(r[k]) for k in fcols] for r in rows]).reshape(len(rows), len(fcols))
        return cls(data, np.array([int(float(r[li])) for r in rows]))


class RiskKind(str, Enum):
    TRUE = "true"
    EMPIRICAL = "empirical"
    HT = "ht"
    BIASED_HT = "biased_ht"
    MIXED = "mixed"


@dataclass(frozen=True)
class RiskValue:
    value: float
    kind: RiskKind
    std_error: float | None = None

    def __float__(self):
        return self.value

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "value": self.value}
        if self.std_error is not None:
            d["std_error"] = self.std_error
        return d


Classifier = Callable[[np.ndarray], np.ndarray]


def predict_labels(clf, X) -> np.ndarray:
    """Labels in {-1, +1} from a model with ``predict`` or a plain callable."""
    out = clf.predict(X) if hasattr(clf, "predict") else clf(X)
    out = np.asarray(out)
    if out.ndim == 0:
        out = np.full(np.asarray(X).shape[0], out)
    return np.where(out >= 0, 1, -1)


def losses(pop: Population, clf) -> np.ndarray:
    """0-1 loss vector ``1{clf(X_i) != Y_i}`` as floats."""
    return (predict_labels(clf, pop.features) != pop.labels).astype(np.float64)


def _weights(bits, probs, what) -> np.ndarray:
    probs = as_pi(probs)
    if probs.shape[0] != bits.shape[0]:
        raise ValueError(f"{what} has length {probs.shape[0]}, sample has {bits.shape[0]}")
    bad = bits & (probs <= 0)
    if bad.any():
        raise WeightUndefinedError(f"sampled unit {int(np.flatnonzero(bad)[0])} has zero {what}")
    w = np.zeros(bits.shape[0])
    w[bits] = 1.0 / probs[bits]
    return w


def ht_weights(sample, pi) -> np.ndarray:
    """``eps_i / pi_i`` with 0/0 = 0 on excluded units."""
    return _weights(as_bits(sample), pi, "inclusion probability")


def weighted_risk(loss_vec, sample, probs) -> float:
    """``(1/N) sum eps_i a_i / probs_i`` for a precomputed loss vector."""
    w = _weights(as_bits(sample), probs, "weight")
    return float(np.dot(w, loss_vec) / w.shape[0])


def empirical_risk(pop: Population, clf) -> RiskValue:
    return RiskValue(float(losses(pop, clf).mean()), RiskKind.EMPIRICAL)


def test_risk(test_pop: Population, clf) -> RiskValue:
    """Held-out estimate of the true risk, with its binomial standard error."""
    a = losses(test_pop, clf)
    m = a.mean()
    return RiskValue(float(m), RiskKind.TRUE, float(math.sqrt(m * (1 - m) / a.size)))


test_risk.__test__ = False  # keep pytest from collecting it


def ht_risk(pop: Population, clf, sample, pi) -> RiskValue:
    return RiskValue(weighted_risk(losses(pop, clf), sample, pi), RiskKind.HT)


def biased_ht_risk(pop: Population, clf, sample, p) -> RiskValue:
    """HT risk computed with the canonical parameters in place of the marginals."""
    return RiskValue(weighted_risk(losses(pop, clf), sample, p), RiskKind.BIASED_HT)


def mixed_risk(pop: Population, clf, sample, pi_star) -> RiskValue:
    """Rejective sample reweighted with another design's marginals."""
    return RiskValue(weighted_risk(losses(pop, clf), sample, pi_star), RiskKind.MIXED)


def poisson_variance(pop: Population, clf, p) -> float:
    """Conditional variance of the HT risk under Poisson(p) sampling."""
    p = as_pi(p)
    a = losses(pop, clf)
    return float(np.sum((1 - p) / p * a) / pop.N**2)


def tv_distance(a: EnumeratedDesign, b: EnumeratedDesign) -> float:
    """Total variation distance ``(1/2) sum_s |a(s) - b(s)|``."""
    if a.n_pop != b.n_pop:
        raise IncompatibleDesignsError(f"designs on N={a.n_pop} and N={b.n_pop}")
    masks = np.union1d(a.masks, b.masks)
    pa = np.zeros(masks.shape[0])
    pb = np.zeros(masks.shape[0])
    pa[np.searchsorted(masks, a.masks)] = a.probs
    pb[np.searchsorted(masks, b.masks)] = b.probs
    return 0.5 * math.fsum(np.abs(pa - pb).tolist())


@dataclass(frozen=True, eq=False)
class Coupling:
    """Joint mass over pairs of subsets with prescribed marginals."""

    n_pop: int
    masks_a: np.ndarray
    masks_b: np.ndarray
    probs: np.ndarray

    def disagreement(self) -> float:
        return math.fsum(self.probs[self.masks_a != self.masks_b].tolist())


def maximal_coupling(a: EnumeratedDesign, b: EnumeratedDesign) -> Coupling:
    """Coupling with ``P(S != S*) = d_TV(a, b)``.

    The common part ``min(a, b)`` sits on the diagonal; the residual masses
    are paired by the product (independent) coupling.
    """
    if a.n_pop != b.n_pop:
        raise IncompatibleDesignsError(f"designs on N={a.n_pop} and N={b.n_pop}")
    masks = np.union1d(a.masks, b.masks)
    pa = np.zeros(masks.shape[0])
    pb = np.zeros(masks.shape[0])
    pa[np.searchsorted(masks, a.masks)] = a.probs
    pb[np.searchsorted(masks, b.masks)] = b.probs
    common = np.minimum(pa, pb)
    ra, rb = pa - common, pb - common
    tv = ra.sum()
    ma, mb, pr = [masks], [masks], [common]
    if tv > 0:
        ia, ib = np.flatnonzero(ra > 0), np.flatnonzero(rb > 0)
        A, B = np.meshgrid(ia, ib, indexing="ij")
        ma.append(masks[A.ravel()])
        mb.append(masks[B.ravel()])
        pr.append(np.outer(ra[ia], rb[ib]).ravel() / tv)
    ma, mb, pr = np.concatenate(ma), np.concatenate(mb), np.concatenate(pr)
    keep = pr > 0
    return Coupling(a.n_pop, ma[keep], mb[keep], pr[keep])


def loss_matrix(pop: Population, clf_class: Sequence) -> np.ndarray:
    """``(len(class), N)`` matrix of 0-1 losses."""
    if len(clf_class) == 0:
        raise ValueError("classifier class is empty")
    return np.vstack([losses(pop, g) for g in clf_class])


def sup_deviation(pop: Population, sample, clf_class: Sequence, pi) -> float:
    """``max_g |HT risk(g) - empirical risk(g)|`` for one drawn sample."""
    A = loss_matrix(pop, clf_class)
    w = ht_weights(sample, pi)
    return float(np.max(np.abs(A @ w / pop.N - A.mean(axis=1))))


def ht_risk_table(A: np.ndarray, design: EnumeratedDesign, pi) -> np.ndarray:
    """HT risks of every row of ``A`` on every subset of ``design``.

    Returns an array of shape ``(len(design), A.shape[0])``.
    """
    pi = as_pi(pi)
    B = design.bits().astype(np.float64)
    W = np.where(B > 0, 1.0 / np.where(pi > 0, pi, 1.0), 0.0)
    if np.any((B > 0) & (pi <= 0)):
        raise WeightUndefinedError("a subset with positive mass contains a unit with zero weight")
    return W @ A.T / A.shape[1]


def sup_deviation_distribution(
    pop: Population, design: EnumeratedDesign, clf_class: Sequence, pi
) -> tuple[np.ndarray, np.ndarray]:
    """Exact law of the sup-deviation: ``(values, probabilities)`` per subset."""
    A = loss_matrix(pop, clf_class)
    R = ht_risk_table(A, design, pi)
    return np.max(np.abs(R - A.mean(axis=1)), axis=1), design.probs.copy()


def exact_tail(values, probs, t) -> np.ndarray:
    """``P{value >= t}`` for every ``t`` (vectorised, compensated sums)."""
    values = np.asarray(values)
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    return np.array([math.fsum(probs[values >= ti].tolist()) for ti in t])


def design_expectation_of_ht(loss_vec, design: EnumeratedDesign, pi) -> float:
    """Exact ``E[HT risk | D_N]`` under an enumerated design."""
    R = ht_risk_table(np.asarray(loss_vec, dtype=np.float64)[None, :], design, pi)[:, 0]
    return design.expectation(R)


def monte_carlo_expectation(fn, draw, rng, reps: int) -> RiskValue:
    """Mean of ``fn(draw(rng))`` over ``reps`` draws, with its standard error."""
    vals = np.array([fn(draw(rng)) for _ in range(reps)])
    se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else None
    return RiskValue(float(vals.mean()), RiskKind.HT, se)

