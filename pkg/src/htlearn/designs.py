"""Fixed- and random-size sampling designs over a finite population.

Every design can be drawn from with an explicit ``numpy.random.Generator``
and, for populations of at most ``MAX_ENUM_N`` units, enumerated exactly as a
probability mass over subsets encoded as integer bitmasks (bit ``i`` set means
unit ``i`` is sampled).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import EnumerationTooLargeError, InvalidDesignError, RejectionBudgetError
from .inclusion import InclusionProbs, exact_pi_from_p, solve_canonical_p

MAX_ENUM_N = 20
DEFAULT_MAX_REJECTIONS = 10**6
FIXED_SIZE_TOL = 1e-9


class DesignKind(str, Enum):
    POISSON = "poisson"
    SRSWOR = "srswor"
    REJECTIVE = "rejective"
    STRATIFIED = "stratified"
    RAO_SAMPFORD = "rao_sampford"


@dataclass(frozen=True, eq=False)
class SampleIndicator:
    """Binary inclusion vector of a drawn sample."""

    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool).copy())

    @property
    def N(self) -> int:
        return self.bits.shape[0]

    @property
    def size(self) -> int:
        return int(self.bits.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    @property
    def mask(self) -> int:
        return int(sum(1 << int(i) for i in self.indices))

    @classmethod
    def from_indices(cls, N: int, indices) -> "SampleIndicator":
        bits = np.zeros(N, dtype=bool)
        bits[np.asarray(indices, dtype=int)] = True
        return cls(bits)

    @classmethod
    def from_mask(cls, mask: int, N: int) -> "SampleIndicator":
        return cls(np.array([(mask >> i) & 1 for i in range(N)], dtype=bool))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["index", "epsilon"])
            for i, b in enumerate(self.bits):
                wr.writerow([i, int(b)])

    @classmethod
    def from_csv(cls, path) -> "SampleIndicator":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rows.sort(key=lambda r: int(r["index"]))
        return cls(np.array([int(r["epsilon"]) for r in rows], dtype=bool))


def as_bits(sample) -> np.ndarray:
    if isinstance(sample, SampleIndicator):
        return sample.bits
    return np.asarray(sample, dtype=bool)


def _check_open_unit(name, v):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidDesignError(f"{name} must be a non-empty vector")
    if not np.all((v > 0.0) & (v < 1.0)):
        raise InvalidDesignError(f"all {name} must lie in the open interval (0, 1)")
    return v


def _integer_size(total: float, N: int, what: str) -> int:
    n = int(round(total))
    if abs(total - n) > FIXED_SIZE_TOL * max(1.0, N):
        raise InvalidDesignError(f"{what} sums to {total!r}, not an integer sample size")
    return n


# --------------------------------------------------------------------------
# draws


def poisson_draw(p, rng: np.random.Generator) -> SampleIndicator:
    p = _check_open_unit("p", p)
    return SampleIndicator(rng.random(p.shape[0]) < p)


def srswor_draw(N: int, n: int, rng: np.random.Generator) -> SampleIndicator:
    if not 1 <= n <= N:
        raise InvalidDesignError(f"SRSWOR needs 1 <= n <= N, got n={n}, N={N}")
    return SampleIndicator.from_indices(N, rng.choice(N, size=n, replace=False))


def rejective_draw(
    p, n: int, rng: np.random.Generator, max_rejections: int = DEFAULT_MAX_REJECTIONS
) -> SampleIndicator:
    """Poisson draws with parameters ``p`` until exactly ``n`` units come up."""
    p = _check_open_unit("p", p)
    if not 1 <= n <= p.shape[0]:
        raise InvalidDesignError(f"rejective size n={n} outside [1, N]")
    for _ in range(max_rejections + 1):
        bits = rng.random(p.shape[0]) < p
        if bits.sum() == n:
            return SampleIndicator(bits)
    rate = rejective_acceptance_probability(p, n)
    raise RejectionBudgetError(
        f"no size-{n} Poisson sample in {max_rejections} rejections "
        f"(acceptance rate {rate:.3g})",
        acceptance_rate=rate,
    )


def _check_strata(strata, sizes, N=None):
    strata = [tuple(int(i) for i in s) for s in strata]
    sizes = [int(k) for k in sizes]
    if len(strata) != len(sizes) or not strata:
        raise InvalidDesignError("need one sample size per stratum")
    flat = sorted(i for s in strata for i in s)
    N = len(flat) if N is None else N
    if flat != list(range(N)):
        raise InvalidDesignError("strata must partition the population indices 0..N-1")
    for s, k in zip(strata, sizes):
        if not 0 <= k <= len(s):
            raise InvalidDesignError(f"stratum of size {len(s)} cannot yield {k} units")
    return strata, sizes, N


def stratified_draw(strata, sizes, rng: np.random.Generator) -> SampleIndicator:
    strata, sizes, N = _check_strata(strata, sizes)
    bits = np.zeros(N, dtype=bool)
    for s, k in zip(strata, sizes):
        if k:
            bits[rng.choice(np.array(s), size=k, replace=False)] = True
    return SampleIndicator(bits)


def rao_sampford_draw(
    pi_rs, rng: np.random.Generator, max_rejections: int = DEFAULT_MAX_REJECTIONS
) -> SampleIndicator:
    """Rao-Sampford draw by the three-step accept-reject procedure.

    One unit is picked with probability ``pi_i / n``, then ``n - 1`` units with
    replacement with probabilities proportional to ``pi_j / (1 - pi_j)``; the
    draw is kept only if all ``n`` units are distinct.
    """
    pi_rs = _check_open_unit("pi_rs", pi_rs)
    N = pi_rs.shape[0]
    n = _integer_size(pi_rs.sum(), N, "pi_rs")
    first = pi_rs / n
    odds = pi_rs / (1.0 - pi_rs)
    rest = odds / odds.sum()
    for _ in range(max_rejections + 1):
        units = np.empty(n, dtype=np.intp)
        units[0] = rng.choice(N, p=first)
        if n > 1:
            units[1:] = rng.choice(N, size=n - 1, replace=True, p=rest)
        if np.unique(units).size == n:
            return SampleIndicator.from_indices(N, units)
    raise RejectionBudgetError(f"no distinct Rao-Sampford draw in {max_rejections} rejections")


def rejective_acceptance_probability(p, n: int) -> float:
    """Probability that a Poisson(p) sample has exactly ``n`` units."""
    p = _check_open_unit("p", p)
    N = p.shape[0]
    log_q = float(np.log1p(-p).sum())
    if n == 0:
        return math.exp(log_q)
    if n == N:
        return math.exp(float(np.log(p).sum()))
    from . import _backend

    _, log_en = _backend.inclusion_dp(p / (1.0 - p), n)
    return math.exp(log_en + log_q)


# --------------------------------------------------------------------------
# enumeration


def _popcount(masks: np.ndarray) -> np.ndarray:
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(masks).astype(np.int64)
    out = np.zeros(masks.shape, dtype=np.int64)
    m = masks.copy()
    while np.any(m):
        out += m & 1
        m >>= 1
    return out


def subset_bits(masks, N: int) -> np.ndarray:
    """``(len(masks), N)`` 0/1 matrix of the subsets encoded by ``masks``."""
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(N, dtype=np.int64)) & 1).astype(np.uint8)


def _all_masks(N: int, size: int | None = None) -> np.ndarray:
    masks = np.arange(1 << N, dtype=np.int64)
    if size is not None:
        masks = masks[_popcount(masks) == size]
    return masks


def _member_sum(masks, values) -> np.ndarray:
    """``sum_{i in s} values_i`` for every mask, one pass per unit."""
    out = np.zeros(masks.shape[0])
    for i, v in enumerate(values):
        out += v * ((masks >> i) & 1)
    return out


@dataclass(frozen=True, eq=False)
class EnumeratedDesign:
    """Exact mass over subsets of ``{0, ..., n_pop - 1}``.

    ``masks`` is sorted and lists every subset carrying positive mass.
    """

    n_pop: int
    masks: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        order = np.argsort(self.masks, kind="stable")
        object.__setattr__(self, "masks", np.asarray(self.masks, dtype=np.int64)[order])
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=np.float64)[order])

    def __len__(self):
        return self.masks.shape[0]

    def bits(self) -> np.ndarray:
        return subset_bits(self.masks, self.n_pop)

    def mass(self, subset) -> float:
        if isinstance(subset, SampleIndicator):
            key = subset.mask
        elif isinstance(subset, (int, np.integer)):
            key = int(subset)
        else:
            key = int(sum(1 << int(i) for i in subset))
        k = np.searchsorted(self.masks, key)
        if k < len(self.masks) and self.masks[k] == key:
            return float(self.probs[k])
        return 0.0

    def marginals(self) -> np.ndarray:
        return self.probs @ self.bits()

    def sizes(self) -> np.ndarray:
        return _popcount(self.masks)

    def expectation(self, values) -> float:
        """Exact design expectation of per-subset ``values`` (compensated sum)."""
        values = np.asarray(values, dtype=np.float64)
        return math.fsum((self.probs * values).tolist())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["subset_bitmask", "probability"])
            for m, p in zip(self.masks, self.probs):
                wr.writerow([int(m), repr(float(p))])

    @classmethod
    def from_csv(cls, path, n_pop: int) -> "EnumeratedDesign":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(
            n_pop,
            np.array([int(r["subset_bitmask"]) for r in rows], dtype=np.int64),
            np.array([float(r["probability"]) for r in rows]),
        )


def second_order_probs(design: EnumeratedDesign) -> np.ndarray:
    """Joint inclusion probabilities; the diagonal holds the marginals."""
    B = design.bits().astype(np.float64)
    return (B * design.probs[:, None]).T @ B


# --------------------------------------------------------------------------
# design specification


@dataclass(frozen=True, eq=False)
class DesignSpec:
    """Immutable description of one sampling design.

    Use the ``poisson``, ``srswor``, ``rejective``, ``rejective_from_pi``,
    ``stratified`` and ``rao_sampford`` constructors rather than the raw
    initialiser; they validate parameters.
    """

    kind: DesignKind
    N: int
    n: int | None = None
    p: np.ndarray | None = None
    pi: np.ndarray | None = None
    strata: tuple | None = None
    n_k: tuple | None = None

    @classmethod
    def poisson(cls, p) -> "DesignSpec":
        p = _check_open_unit("p", p)
        return cls(DesignKind.POISSON, p.shape[0], p=p)

    @classmethod
    def srswor(cls, N: int, n: int) -> "DesignSpec":
        if not 1 <= n <= N:
            raise InvalidDesignError(f"SRSWOR needs 1 <= n <= N, got n={n}, N={N}")
        return cls(DesignKind.SRSWOR, int(N), n=int(n))

    @classmethod
    def rejective(cls, p, n: int | None = None, pi=None) -> "DesignSpec":
        """Conditional Poisson design from (canonical or not) parameters ``p``.

        With ``n`` omitted, ``p`` must be canonical, i.e. sum to an integer.
        """
        p = _check_open_unit("p", p)
        if n is None:
            n = _integer_size(p.sum(), p.shape[0], "canonical p")
        if not 1 <= n <= p.shape[0]:
            raise InvalidDesignError(f"rejective size n={n} outside [1, N]")
        if pi is not None:
            pi = np.asarray(pi, dtype=np.float64)
        return cls(DesignKind.REJECTIVE, p.shape[0], n=int(n), p=p, pi=pi)

    @classmethod
    def rejective_from_pi(cls, pi, tol: float = 1e-9, max_iter: int = 10_000) -> "DesignSpec":
        pi = _check_open_unit("pi", pi)
        p = solve_canonical_p(pi, tol=tol, max_iter=max_iter)
        return cls.rejective(p, pi=pi)

    @classmethod
    def stratified(cls, strata, n_k) -> "DesignSpec":
        strata, n_k, N = _check_strata(strata, n_k)
        return cls(DesignKind.STRATIFIED, N, n=sum(n_k), strata=tuple(strata), n_k=tuple(n_k))

    @classmethod
    def rao_sampford(cls, pi) -> "DesignSpec":
        pi = _check_open_unit("pi", pi)
        n = _integer_size(pi.sum(), pi.shape[0], "pi_rs")
        return cls(DesignKind.RAO_SAMPFORD, pi.shape[0], n=n, pi=pi)

    @property
    def fixed_size(self) -> bool:
        return self.kind is not DesignKind.POISSON

    def inclusion_probabilities(self) -> InclusionProbs:
        """First-order inclusion probabilities this design realises."""
        k = self.kind
        if k is DesignKind.POISSON:
            return InclusionProbs(self.p)
        if k is DesignKind.SRSWOR:
            return InclusionProbs(np.full(self.N, self.n / self.N))
        if k is DesignKind.REJECTIVE:
            return exact_pi_from_p(self.p, self.n)
        if k is DesignKind.STRATIFIED:
            pi = np.empty(self.N)
            for s, nk in zip(self.strata, self.n_k):
                pi[list(s)] = nk / len(s)
            return InclusionProbs(pi)
        return InclusionProbs(self.pi)

    def draw(self, rng: np.random.Generator, max_rejections: int = DEFAULT_MAX_REJECTIONS) -> SampleIndicator:
        k = self.kind
        if k is DesignKind.POISSON:
            return poisson_draw(self.p, rng)
        if k is DesignKind.SRSWOR:
            return srswor_draw(self.N, self.n, rng)
        if k is DesignKind.REJECTIVE:
            return rejective_draw(self.p, self.n, rng, max_rejections)
        if k is DesignKind.STRATIFIED:
            return stratified_draw(self.strata, self.n_k, rng)
        return rao_sampford_draw(self.pi, rng, max_rejections)

    def enumerate(self) -> EnumeratedDesign:
        return enumerate_design(self)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind.value}
        if self.kind is DesignKind.SRSWOR:
            d.update(N=self.N, n=self.n)
        elif self.kind is DesignKind.POISSON:
            d["p"] = self.p.tolist()
        elif self.kind is DesignKind.REJECTIVE:
            d.update(p=self.p.tolist(), n=self.n)
            if self.pi is not None:
                d["pi"] = self.pi.tolist()
        elif self.kind is DesignKind.STRATIFIED:
            d.update(strata=[list(s) for s in self.strata], n_k=list(self.n_k))
        else:
            d["pi"] = self.pi.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpec":
        try:
            kind = DesignKind(d["kind"])
        except (KeyError, ValueError) as exc:
            raise InvalidDesignError(f"unknown design kind in {d!r}") from exc
        if kind is DesignKind.SRSWOR:
            return cls.srswor(int(d["N"]), int(d["n"]))
        if kind is DesignKind.POISSON:
            return cls.poisson(d["p"])
        if kind is DesignKind.REJECTIVE:
            if "p" not in d and "pi" in d:
                return cls.rejective_from_pi(d["pi"])
            return cls.rejective(d["p"], d.get("n"), d.get("pi"))
        if kind is DesignKind.STRATIFIED:
            return cls.stratified(d["strata"], d["n_k"])
        return cls.rao_sampford(d.get("pi", d.get("p")))

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "DesignSpec":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def enumerate_design(spec: DesignSpec) -> EnumeratedDesign:
    """Exact probability of every subset under ``spec`` (N <= 20)."""
    N = spec.N
    if N > MAX_ENUM_N:
        raise EnumerationTooLargeError(f"exact enumeration is capped at N={MAX_ENUM_N}, got N={N}")
    k = spec.kind
    if k is DesignKind.POISSON:
        masks = _all_masks(N)
        lp, lq = np.log(spec.p), np.log1p(-spec.p)
        logw = _member_sum(masks, lp - lq) + lq.sum()
        return EnumeratedDesign(N, masks, np.exp(logw))

    if k is DesignKind.SRSWOR:
        masks = _all_masks(N, spec.n)
        return EnumeratedDesign(N, masks, np.full(masks.shape[0], 1.0 / math.comb(N, spec.n)))

    if k is DesignKind.REJECTIVE:
        masks = _all_masks(N, spec.n)
        logw = _member_sum(masks, np.log(spec.p) - np.log1p(-spec.p))
        w = np.exp(logw - logw.max())
        return EnumeratedDesign(N, masks, w / math.fsum(w.tolist()))

    if k is DesignKind.STRATIFIED:
        masks = _all_masks(N, spec.n)
        keep = np.ones(masks.shape[0], dtype=bool)
        mass = 1.0
        for s, nk in zip(spec.strata, spec.n_k):
            smask = sum(1 << i for i in s)
            keep &= _popcount(masks & smask) == nk
            mass /= math.comb(len(s), nk)
        masks = masks[keep]
        return EnumeratedDesign(N, masks, np.full(masks.shape[0], mass))

    # Rao-Sampford: mass proportional to prod_{j in s} odds_j * sum_{i in s} (1 - pi_i)
    masks = _all_masks(N, spec.n)
    pi = spec.pi
    logw = _member_sum(masks, np.log(pi) - np.log1p(-pi))
    w = np.exp(logw - logw.max()) * (spec.n - _member_sum(masks, pi))
    return EnumeratedDesign(N, masks, w / math.fsum(w.tolist()))


def spawn_rngs(master_seed: int, count: int) -> list[np.random.Generator]:
    """Independent generators for ``count`` replications.

    Splitting rule: child ``k`` is ``SeedSequence(master_seed).spawn(count)[k]``.
    """
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master_seed).spawn(count)]


def design_from_any(obj) -> DesignSpec:
    if isinstance(obj, DesignSpec):
        return obj
    if isinstance(obj, dict):
        return DesignSpec.from_dict(obj)
    return DesignSpec.from_json(obj)


def strata_from_labels(labels: Sequence) -> list[list[int]]:
    """Group unit indices by label value, in order of first appearance."""
    groups: dict = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    return list(groups.values())
