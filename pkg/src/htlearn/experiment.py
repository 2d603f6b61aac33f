"""Two-Gaussian replication study: weighted vs unweighted learners on a rejective sample."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .designs import DesignSpec, srswor_draw
from .estimators import Population, test_risk
from .learners import LAMBDA_GRID, select_lambda_cv, train_weighted_svm, train_weighted_tree


@dataclass(frozen=True)
class ExperimentConfig:
    dims: int = 10
    pos_mean: float = 0.0
    neg_mean: float = 1.0
    pos_scale: float = 1.0
    neg_scale: float = 10.0
    n_pos: int = 10_000
    n_neg: int = 10_000
    test_pos: int = 1_000
    test_neg: int = 1_000
    pi_pos: float = 0.01
    pi_neg: float = 0.1
    learners: tuple = ("svm", "tree")
    degree: int = 2
    lambda_grid: tuple = LAMBDA_GRID
    cv_folds: int = 5
    weighted_validation: bool = True
    solver: str = "dual"
    max_depth: int = 8
    min_leaf_weight: float = 1.0
    srswor_comparison: bool = True
    replications: int = 50
    master_seed: int = 0
    workers: int = 1
    rows_csv: str | None = None
    summary_json: str | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.pos_scale <= 0 or self.neg_scale <= 0:
            raise ValueError("covariance scales must be positive")
        if not (0 < self.pi_pos < 1 and 0 < self.pi_neg < 1):
            raise ValueError("inclusion probabilities must lie in (0, 1)")
        for name in self.learners:
            if name not in ("svm", "tree"):
                raise ValueError(f"unknown learner {name!r}")

    @classmethod
    def full(cls, **kw) -> "ExperimentConfig":
        return cls(**kw)

    @classmethod
    def desk(cls, **kw) -> "ExperimentConfig":
        """Four times smaller than the full setting, 20 replications."""
        base = dict(n_pos=2_500, n_neg=2_500, test_pos=1_000, test_neg=1_000, replications=20)
        base.update(kw)
        return cls(**base)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        for k in ("learners", "lambda_grid"):
            if k in d:
                d[k] = tuple(d[k])
        names = cls.__dataclass_fields__
        unknown = set(d) - set(names)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["learners"] = list(self.learners)
        d["lambda_grid"] = list(self.lambda_grid)
        return d


def gen_gaussian_population(config: ExperimentConfig, rng: np.random.Generator) -> tuple[Population, Population]:
    """Training and test populations from the two-class Gaussian mixture.

    Positive class ``N(pos_mean 1, pos_scale I)``, negative class
    ``N(neg_mean 1, neg_scale I)``. Training units come positives first.
    """
    if config.pos_scale <= 0 or config.neg_scale <= 0:
        raise ValueError("covariance scales must be positive")

    def draw(npos, nneg):
        Xp = config.pos_mean + math.sqrt(config.pos_scale) * rng.standard_normal((npos, config.dims))
        Xn = config.neg_mean + math.sqrt(config.neg_scale) * rng.standard_normal((nneg, config.dims))
        y = np.r_[np.ones(npos, dtype=np.int64), -np.ones(nneg, dtype=np.int64)]
        return Population(np.vstack([Xp, Xn]), y)

    train = draw(config.n_pos, config.n_neg)
    test = draw(config.test_pos, config.test_neg)
    return train, test


def build_rejective_training_design(pop: Population, pi_pos: float, pi_neg: float) -> DesignSpec:
    """Rejective design with marginals ``pi_pos`` on positives and ``pi_neg`` on negatives."""
    pi = np.where(pop.labels > 0, pi_pos, pi_neg)
    if pi_pos == pi_neg:
        n = int(round(pi.sum()))
        return DesignSpec.srswor(pop.N, n)
    return DesignSpec.rejective_from_pi(pi)


def _fit(name, pop, sample, pi, cfg, rng):
    if name == "tree":
        return train_weighted_tree(pop, sample, pi, cfg.max_depth, cfg.min_leaf_weight), None
    lam, _ = select_lambda_cv(
        pop,
        sample,
        pi,
        grid=cfg.lambda_grid,
        folds=cfg.cv_folds,
        degree=cfg.degree,
        rng=rng,
        weighted_validation=cfg.weighted_validation,
        solver=cfg.solver,
    )
    return train_weighted_svm(pop, sample, pi, lam, cfg.degree, solver=cfg.solver), lam


def run_replication(cfg: ExperimentConfig, rep: int, rng: np.random.Generator) -> list[dict]:
    """One replication: fresh populations, one rejective and one SRSWOR sample."""
    rows = []
    try:
        pop, test = gen_gaussian_population(cfg, rng)
        design = build_rejective_training_design(pop, cfg.pi_pos, cfg.pi_neg)
        pi = design.inclusion_probabilities().pi
        sample = design.draw(rng)
        variants = [("weighted", sample, pi), ("unweighted", sample, np.ones(pop.N))]
        if cfg.srswor_comparison:
            srs = srswor_draw(pop.N, sample.size, rng)
            variants.append(("srswor", srs, np.full(pop.N, sample.size / pop.N)))
    except Exception as exc:  # recorded, not raised
        return [{"replication": rep, "learner": "", "variant": "", "error": math.nan, "lambda": math.nan, "failure": repr(exc)}]
    for name in cfg.learners:
        for variant, s, w in variants:
            row = {"replication": rep, "learner": name, "variant": variant, "sample_size": s.size}
            try:
                model, lam = _fit(name, pop, s, w, cfg, rng)
                row.update(error=test_risk(test, model).value, failure="")
                row["lambda"] = math.nan if lam is None else lam
            except Exception as exc:
                row.update(error=math.nan, failure=repr(exc))
                row["lambda"] = math.nan
            rows.append(row)
    return rows


def _rep_job(args):
    cfg, rep, seed_seq = args
    return run_replication(cfg, rep, np.random.default_rng(seed_seq))


@dataclass
class ExperimentReport:
    config: dict
    rows: list
    summary: dict = field(default_factory=dict)
    runtime_seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return any(r.get("failure") for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "summary": self.summary,
            "runtime_seconds": self.runtime_seconds,
            "partial_failure": self.failed,
        }

    def write(self, rows_csv=None, summary_json=None) -> None:
        if rows_csv:
            cols = ["replication", "learner", "variant", "sample_size", "lambda", "error", "failure"]
            with open(rows_csv, "w", newline="") as fh:
                wr = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
                wr.writeheader()
                for r in self.rows:
                    wr.writerow({k: r.get(k, "") for k in cols})
        if summary_json:
            with open(summary_json, "w") as fh:
                json.dump(self.to_dict(), fh, indent=2)

    def table(self) -> str:
        lines = [f"{'learner':<8} {'variant':<11} {'mean':>8} {'std':>8} {'reps':>5}"]
        for key, s in self.summary.items():
            if key == "gaps":
                continue
            learner, variant = key.split("/")
            lines.append(f"{learner:<8} {variant:<11} {s['mean']:>8.4f} {s['std']:>8.4f} {s['count']:>5d}")
        for learner, g in self.summary.get("gaps", {}).items():
            lines.append(f"{learner}: weighted better in {g['weighted_better']}/{g['paired']} replications")
        return "\n".join(lines)


def summarize(rows: list) -> dict:
    """Mean and sample standard deviation (ddof=1) per learner and variant."""
    out: dict = {}
    order = ["weighted", "unweighted", "srswor"]
    keys = sorted({(r["learner"], r["variant"]) for r in rows if r["learner"]}, key=lambda k: (k[0], order.index(k[1])))
    for learner, variant in keys:
        # rows arrive sorted by replication
        arr = np.array([r["error"] for r in rows if r["learner"] == learner and r["variant"] == variant and not math.isnan(r["error"])])
        out[f"{learner}/{variant}"] = {
            "mean": float(arr.mean()) if arr.size else math.nan,
            "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
            "count": int(arr.size),
            "errors": arr.tolist(),
        }
    gaps = {}
    for learner in sorted({k[0] for k in keys}):
        by = {}
        for r in rows:
            if r["learner"] == learner and r["variant"] in ("weighted", "unweighted") and not math.isnan(r["error"]):
                by.setdefault(r["replication"], {})[r["variant"]] = r["error"]
        paired = [v for v in by.values() if len(v) == 2]
        gaps[learner] = {
            "paired": len(paired),
            "weighted_better": sum(v["unweighted"] - v["weighted"] > 0 for v in paired),
        }
    out["gaps"] = gaps
    return out


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentReport:
    """Run all replications; replication ``k`` uses child ``k`` of the master seed."""
    t0 = time.perf_counter()
    seqs = np.random.SeedSequence(config.master_seed).spawn(config.replications)
    jobs = [(config, k, seqs[k]) for k in range(config.replications)]
    rows: list = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            for res in ex.map(_rep_job, jobs):
                rows.extend(res)
                if progress:
                    progress(res)
    else:
        for job in jobs:
            res = _rep_job(job)
            rows.extend(res)
            if progress:
                progress(res)
    rows.sort(key=lambda r: (r["replication"], r["learner"], r["variant"]))
    report = ExperimentReport(config.to_dict(), rows, summarize(rows), time.perf_counter() - t0)
    if config.rows_csv or config.summary_json:
        report.write(config.rows_csv, config.summary_json)
    return report


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})

