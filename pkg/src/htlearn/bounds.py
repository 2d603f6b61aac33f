"""Closed-form deviation and excess-risk bounds for HT risk minimisation.

All logarithms are natural. The universal constant ``C`` of the excess-risk
bounds is not specified by the theory; it is an input defaulting to 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

C_UNSPECIFIED_NOTE = "universal constant C is unspecified by the theory; value supplied by caller"


@dataclass(frozen=True)
class BoundInputs:
    N: int
    n: int
    V: int = 1
    delta: float = 0.05
    kappa: float = 1.0
    kappa_star: float | None = None
    C_universal: float = 1.0
    tv: float = 0.0
    bias_gap: float = 0.0
    log_class_size: float | None = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.kappa < 1.0 - 1e-12 or (self.kappa_star is not None and self.kappa_star < 1.0 - 1e-12):
            raise ValueError("kappa must be at least 1")
        if not 0.0 <= self.tv <= 1.0:
            raise ValueError("tv must lie in [0, 1]")
        if self.N < 1 or not 1 <= self.n <= self.N:
            raise ValueError("need 1 <= n <= N")
        if self.V < 1:
            raise ValueError("V must be a positive integer")
        if self.log_class_size is not None and self.log_class_size < 0:
            raise ValueError("log_class_size must be nonnegative")

    @property
    def ks(self) -> float:
        return self.kappa if self.kappa_star is None else self.kappa_star

    def complexity(self) -> float:
        """``V log(N + 1)``, or ``log |G|`` for an explicit finite class."""
        if self.log_class_size is not None:
            return self.log_class_size
        return self.V * math.log(self.N + 1)

    @classmethod
    def from_dict(cls, d: dict) -> "BoundInputs":
        names = cls.__dataclass_fields__
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class BernsteinInputs:
    c: float
    sigma_sq: np.ndarray
    t: float = 1.0

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.sigma_sq, dtype=np.float64))
        object.__setattr__(self, "sigma_sq", s)
        if not self.c > 0:
            raise ValueError("c must be positive")
        if np.any(s < 0):
            raise ValueError("variance bounds must be nonnegative")
        if not np.all(np.asarray(self.t) > 0):
            raise ValueError("t must be positive")

    @property
    def N(self) -> int:
        return self.sigma_sq.shape[0]


@dataclass
class BoundTerms:
    terms: dict
    total: float = field(init=False)

    def __post_init__(self):
        self.total = math.fsum(self.terms.values())

    def to_dict(self) -> dict:
        return {"terms": dict(self.terms), "total": self.total}


def prop1_deviation_bound(inputs: BoundInputs) -> float:
    """High-probability bound on ``sup_g |HT risk - empirical risk|``."""
    L = math.log(2.0 / inputs.delta) + inputs.complexity()
    k, n = inputs.kappa, inputs.n
    return 2.0 * k * L / (3.0 * n) + math.sqrt(2.0 * k * L / n)


def prop1_tail(inputs: BoundInputs, t) -> np.ndarray:
    """``P{sup_g |HT - empirical| >= t} <= 2 (N+1)^V exp(-n t^2 / ((2/3) kappa t + 2 kappa))``.

    With ``log_class_size`` set, ``(N+1)^V`` becomes the class size. Values
    above 1 are returned unclipped.
    """
    t = np.asarray(t, dtype=np.float64)
    k, n = inputs.kappa, inputs.n
    expo = -n * t**2 / ((2.0 / 3.0) * k * t + 2.0 * k)
    return 2.0 * np.exp(inputs.complexity() + expo)


def prop1_excess_bound(inputs: BoundInputs) -> BoundTerms:
    L = math.log(4.0 / inputs.delta) + inputs.complexity()
    k, n, N = inputs.kappa, inputs.n, inputs.N
    return BoundTerms(
        {
            "ht_deviation_sqrt": 2.0 * math.sqrt(2.0 * k * L / n),
            "ht_deviation_linear": 4.0 * k * L / (3.0 * n),
            "vc_population": inputs.C_universal * math.sqrt(inputs.V / N),
            "mcdiarmid_population": 2.0 * math.sqrt(2.0 * math.log(2.0 / inputs.delta) / N),
            "approximation": inputs.bias_gap,
        }
    )


def bernstein_tail(inputs: BernsteinInputs, t=None, two_sided: bool = False) -> np.ndarray | float:
    """``exp(-t^2 / ((2/3) c t + 2 sum sigma_i^2))``, doubled for two-sided tails."""
    t = inputs.t if t is None else t
    t_arr = np.asarray(t, dtype=np.float64)
    v = 2.0 * float(np.sum(inputs.sigma_sq))
    out = np.exp(-(t_arr**2) / ((2.0 / 3.0) * inputs.c * t_arr + v))
    if two_sided:
        out = 2.0 * out
    return float(out) if out.ndim == 0 else out


def theorem2_bound(inputs: BoundInputs) -> BoundTerms:
    """Expected excess risk bound for a general design coupled to a rejective one."""
    k, ks, n, N = inputs.kappa, inputs.ks, inputs.n, inputs.N
    VL = inputs.complexity()
    return BoundTerms(
        {
            "ht_deviation_sqrt": 2.0 * math.sqrt(2.0 * k * VL / n),
            "ht_deviation_linear": 4.0 * k * VL / (3.0 * n),
            "vc_population": inputs.C_universal * math.sqrt(inputs.V / N),
            "coupling": 2.0 * (ks + k) * (N / n) * inputs.tv,
        }
    )


def smallest_valid_C(inputs: BoundInputs, observed: float, bound=theorem2_bound) -> float:
    """Least ``C >= 0`` for which ``bound(inputs) >= observed``."""
    rest = bound(inputs)
    without = rest.total - rest.terms["vc_population"]
    scale = math.sqrt(inputs.V / inputs.N)
    return max(0.0, (observed - without) / scale)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def bound_report(
    inputs: BoundInputs,
    bernstein: BernsteinInputs | None = None,
    empirical_tails: dict | None = None,
    bernstein_tails: dict | None = None,
    observed_excess: float | None = None,
) -> dict:
    """Every bound term, every input, and validity flags for supplied tails.

    ``empirical_tails`` maps thresholds ``t`` to exact or estimated
    ``P{sup deviation >= t}`` and is checked against ``prop1_tail``;
    ``bernstein_tails`` maps ``t`` to ``P{sum Z >= t}`` and is checked against
    ``bernstein_tail``.
    """
    rep: dict = {
        "inputs": {k: _jsonable(v) for k, v in asdict(inputs).items()},
        "notes": [C_UNSPECIFIED_NOTE],
        "prop1_deviation": prop1_deviation_bound(inputs),
        "prop1_excess": prop1_excess_bound(inputs).to_dict(),
        "theorem2": theorem2_bound(inputs).to_dict(),
        "empirical": {},
    }
    if bernstein is not None:
        rep["bernstein_inputs"] = {"c": bernstein.c, "sigma_sq": bernstein.sigma_sq.tolist(), "t": _jsonable(bernstein.t)}
        rep["bernstein_tail"] = _jsonable(bernstein_tail(bernstein))
    emp = rep["empirical"]
    if empirical_tails:
        rows = []
        for t, p in sorted(empirical_tails.items()):
            b = float(prop1_tail(inputs, t))
            rows.append({"t": float(t), "tail": float(p), "bound": b, "valid": bool(p <= b)})
        emp["prop1"] = rows
    if bernstein_tails:
        if bernstein is None:
            raise ValueError("bernstein_tails need bernstein inputs")
        rows = []
        for t, p in sorted(bernstein_tails.items()):
            b = float(bernstein_tail(bernstein, t))
            rows.append({"t": float(t), "tail": float(p), "bound": b, "valid": bool(p <= b)})
        emp["bernstein"] = rows
    if observed_excess is not None:
        thm = theorem2_bound(inputs)
        emp["theorem2"] = {
            "observed": observed_excess,
            "bound": thm.total,
            "valid": bool(observed_excess <= thm.total),
            "smallest_valid_C": smallest_valid_C(inputs, observed_excess),
        }
    emp_rows = [r for k in ("prop1", "bernstein") for r in emp.get(k, [])]
    if emp_rows or "theorem2" in emp:
        rep["all_valid"] = all(r["valid"] for r in emp_rows) and emp.get("theorem2", {}).get("valid", True)
    return rep


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2)
