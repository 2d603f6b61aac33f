"""Canonical parameters and first-order inclusion probabilities of rejective sampling."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from . import _backend
from .errors import InvalidDesignError, NumericInstabilityError, SolverError

SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class InclusionProbs:
    """First-order inclusion probabilities with their implied sample size."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64).copy()
        if pi.ndim != 1 or pi.size == 0:
            raise InvalidDesignError("pi must be a non-empty vector")
        if not np.all((pi >= 0.0) & (pi <= 1.0)):
            raise InvalidDesignError("inclusion probabilities must lie in [0, 1]")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @property
    def N(self) -> int:
        return self.pi.shape[0]

    @property
    def n(self) -> float:
        return float(self.pi.sum())

    @property
    def kappa(self) -> float:
        """Weight-imbalance factor ``(n / N) / min_i pi_i``."""
        m = float(self.pi.min())
        return np.inf if m == 0.0 else (self.n / self.N) / m

    def __array__(self, dtype=None, copy=None):
        return self.pi if dtype is None else self.pi.astype(dtype)

    def __len__(self):
        return self.N


def as_pi(pi) -> np.ndarray:
    if isinstance(pi, InclusionProbs):
        return pi.pi
    return np.asarray(pi, dtype=np.float64)


@dataclass(frozen=True)
class PoissonDiagnostics:
    d_N: float
    d_N_star: float
    p_tilde: float
    pi_tilde: float


def poisson_diagnostics(p, pi=None) -> PoissonDiagnostics:
    """Variance scales of the Poisson design ``p`` and its rejective version.

    When ``pi`` is omitted the exact conditional inclusion probabilities are
    computed from ``p``.
    """
    p = np.asarray(p, dtype=np.float64)
    pi = exact_pi_from_p(p).pi if pi is None else as_pi(pi)
    d = float(np.sum(p * (1 - p)))
    ds = float(np.sum(pi * (1 - pi)))
    pt = float(np.sum(p**2 * (1 - p)) / d) if d > 0 else 0.0
    it = float(np.sum(pi**2 * (1 - pi)) / ds) if ds > 0 else 0.0
    return PoissonDiagnostics(d, ds, pt, it)


def _check_p(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDesignError("p must be a non-empty vector")
    if not np.all((p > 0.0) & (p < 1.0)):
        raise InvalidDesignError("all p must lie in the open interval (0, 1)")
    return p


def exact_pi_from_p(p, n: int | None = None) -> InclusionProbs:
    """Exact inclusion probabilities of Poisson(p) conditioned on size ``n``.

    Uses ``pi_i = w_i e_{n-1}(w_{-i}) / e_n(w)`` with odds ``w = p / (1 - p)``;
    ``n`` defaults to the rounded sum of ``p``.
    """
    p = _check_p(p)
    N = p.shape[0]
    if n is None:
        n = int(round(p.sum()))
    if not 0 <= n <= N:
        raise InvalidDesignError(f"sample size n={n} outside [0, {N}]")
    if n == 0:
        return InclusionProbs(np.zeros(N))
    if n == N:
        return InclusionProbs(np.ones(N))
    if np.all(p == p[0]):
        return InclusionProbs(np.full(N, n / N))
    try:
        pi, _ = _backend.inclusion_dp(p / (1.0 - p), n)
    except (ArithmeticError, FloatingPointError) as exc:
        raise NumericInstabilityError(str(exc)) from exc
    if not np.all(np.isfinite(pi)) or abs(pi.sum() - n) > SUM_TOL * max(1.0, n):
        raise NumericInstabilityError(
            f"symmetric-function recursion lost precision (sum pi = {pi.sum()!r}, n = {n})"
        )
    return InclusionProbs(np.clip(pi, 0.0, 1.0))


def _shift_to_size(logw, n: int) -> np.ndarray:
    """Add the constant to log-odds that makes ``sum(expit(logw + c)) = n``."""
    N = logw.shape[0]
    target = float(logit(n / N))
    lo, hi = target - logw.max(), target - logw.min()
    if hi - lo < 1e-300:
        return np.full(N, target)
    c = brentq(lambda c: expit(logw + c).sum() - n, lo, hi, xtol=1e-14, maxiter=500)
    return logw + c


def normalize_odds(p, n: int) -> np.ndarray:
    """Canonical representative of ``p``: same odds ratios, sum equal to ``n``."""
    p = _check_p(p)
    return expit(_shift_to_size(logit(p), n))


def solve_canonical_p(pi_target, tol: float = 1e-9, max_iter: int = 10_000) -> np.ndarray:
    """Canonical Poisson parameters whose rejective design has marginals ``pi_target``.

    Damped fixed point on log-odds: ``logit p += step * (logit pi_target - logit pi(p))``
    followed by renormalisation to ``sum p = n``. The step is halved whenever the
    residual grows.
    """
    pi_t = _check_p(as_pi(pi_target))
    N = pi_t.shape[0]
    total = float(pi_t.sum())
    n = int(round(total))
    if abs(total - n) > SUM_TOL * max(1.0, N) or not 1 <= n <= N - 1:
        raise InvalidDesignError(f"target pi sums to {total!r}, not an integer size in [1, N-1]")
    if np.all(pi_t == pi_t[0]):
        return pi_t.copy()
    target = logit(pi_t)
    logw = _shift_to_size(target.copy(), n)
    step = 1.0
    prev = np.inf
    resid = np.inf
    for _ in range(max_iter):
        pi = exact_pi_from_p(expit(logw), n).pi
        resid = float(np.max(np.abs(pi - pi_t)))
        if resid <= tol:
            return expit(logw)
        if resid > prev:
            step *= 0.5
        prev = resid
        logw = _shift_to_size(logw + step * (target - logit(np.clip(pi, 1e-300, 1 - 1e-16))), n)
    raise SolverError(f"canonical solver stalled after {max_iter} iterations (residual {resid:.3g})", resid)


def _warn_regime(d):
    if d < 1.0:
        warnings.warn(
            f"d_N = {d:.3g} < 1: the first-order approximation is outside its regime",
            RuntimeWarning,
            stacklevel=3,
        )


def hajek_pi_from_p(p, diagnostics: PoissonDiagnostics | None = None) -> np.ndarray:
    """First-order approximation of rejective marginals from canonical ``p``.

    ``odds(pi_i) = odds(p_i) * (1 - (p_tilde - p_i) / d_N)``, remainder dropped.
    """
    p = _check_p(p)
    d = float(np.sum(p * (1 - p)))
    pt = float(np.sum(p**2 * (1 - p)) / d)
    if diagnostics is not None:
        d, pt = diagnostics.d_N, diagnostics.p_tilde
    _warn_regime(d)
    odds = p / (1 - p) * (1 - (pt - p) / d)
    return odds / (1 + odds)


def hajek_p_from_pi(pi, diagnostics: PoissonDiagnostics | None = None) -> np.ndarray:
    """First-order approximation of canonical ``p`` from target marginals.

    ``odds(p_i) = odds(pi_i) / (1 - (pi_tilde - pi_i) / d_N_star)``, remainder dropped.
    """
    pi = _check_p(as_pi(pi))
    d = float(np.sum(pi * (1 - pi)))
    it = float(np.sum(pi**2 * (1 - pi)) / d)
    if diagnostics is not None:
        d, it = diagnostics.d_N_star, diagnostics.pi_tilde
    _warn_regime(d)
    odds = pi / (1 - pi) / (1 - (it - pi) / d)
    return odds / (1 + odds)


@dataclass(frozen=True, eq=False)
class BiasBound:
    per_unit_bound: np.ndarray
    per_unit_gap: np.ndarray
    violations: np.ndarray
    aggregate: float
    aggregate_bound: float
    d_N: float

    @property
    def ok(self) -> bool:
        return self.violations.size == 0 and self.aggregate <= self.aggregate_bound

    def to_dict(self) -> dict:
        return {
            "d_N": self.d_N,
            "aggregate": self.aggregate,
            "aggregate_bound": self.aggregate_bound,
            "violations": self.violations.tolist(),
            "max_ratio": float(np.max(self.per_unit_gap / self.per_unit_bound))
            if np.all(self.per_unit_bound > 0)
            else 0.0,
        }


def bias_lemma_bound(p, pi, diagnostics: PoissonDiagnostics | None = None) -> BiasBound:
    """Per-unit and averaged gaps between ``1/pi`` and ``1/p`` against their bounds.

    Per unit: ``|1/pi_i - 1/p_i| <= (6 / d_N) (1 - pi_i) / pi_i``; averaged:
    ``(1/N) sum |1/pi_i - 1/p_i| <= 6 N kappa / (n d_N)``.
    """
    p = _check_p(p)
    pi = as_pi(pi)
    d = diagnostics.d_N if diagnostics is not None else float(np.sum(p * (1 - p)))
    _warn_regime(d)
    N = p.shape[0]
    ip = InclusionProbs(pi)
    b = (6.0 / d) * (1 - pi) / pi
    gap = np.abs(1 / pi - 1 / p)
    viol = np.flatnonzero(gap > b * (1 + 1e-12) + 1e-15)
    agg = float(gap.mean())
    agg_b = 6.0 * N * ip.kappa / (ip.n * d)
    return BiasBound(b, gap, viol, agg, agg_b, d)
