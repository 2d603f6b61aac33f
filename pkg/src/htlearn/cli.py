"""Command line entry point: ``htlearn <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import _backend
from .bounds import BoundInputs, bound_report
from .designs import DesignSpec, DesignKind, SampleIndicator
from .errors import InvalidDesignError
from .estimators import Population, biased_ht_risk, empirical_risk, ht_risk, mixed_risk, poisson_variance, test_risk
from .experiment import ExperimentConfig, run_experiment, with_overrides
from .inclusion import solve_canonical_p
from .learners import load_model, save_model, select_lambda_cv, train_weighted_svm, train_weighted_tree
from .validation import run_validation_suite


def read_vector_csv(path, column: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["index"]))
    return np.array([float(r[column]) for r in rows])


def write_vector_csv(path, column: str, values) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", column])
        for i, v in enumerate(values):
            wr.writerow([i, repr(float(v))])


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _emit(obj, path):
    text = json.dumps(obj, indent=2, default=_plain)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_sample(args) -> int:
    spec = DesignSpec.from_json(args.design)
    s = spec.draw(np.random.default_rng(args.seed), args.max_rejections)
    if args.out:
        s.to_csv(args.out)
    else:
        print(" ".join(str(int(b)) for b in s.bits))
    return 0


def cmd_solve_pi(args) -> int:
    pi = read_vector_csv(args.pi, "pi")
    p = solve_canonical_p(pi, tol=args.tol, max_iter=args.max_iter)
    if args.out:
        write_vector_csv(args.out, "p", p)
    else:
        print(json.dumps(p.tolist()))
    if args.design_out:
        DesignSpec.rejective(p, pi=pi).to_json(args.design_out)
    return 0


def cmd_estimate(args) -> int:
    pop = Population.from_csv(args.population)
    clf = load_model(args.classifier)
    if args.kind in ("empirical", "true"):
        rv = empirical_risk(pop, clf) if args.kind == "empirical" else test_risk(pop, clf)
        _emit(rv.to_dict(), args.out)
        return 0
    spec = DesignSpec.from_json(args.design)
    sample = SampleIndicator.from_csv(args.sample)
    if args.kind == "ht":
        rv = ht_risk(pop, clf, sample, spec.inclusion_probabilities())
    elif args.kind == "biased_ht":
        if spec.p is None:
            raise InvalidDesignError("biased HT risk needs a design with canonical parameters p")
        rv = biased_ht_risk(pop, clf, sample, spec.p)
    else:
        if not args.pi_star:
            raise InvalidDesignError("mixed risk needs --pi-star")
        rv = mixed_risk(pop, clf, sample, read_vector_csv(args.pi_star, "pi"))
    out = rv.to_dict()
    if spec.kind is DesignKind.POISSON:
        out["poisson_variance"] = poisson_variance(pop, clf, spec.p)
    _emit(out, args.out)
    return 0


def cmd_train(args) -> int:
    pop = Population.from_csv(args.population)
    sample = SampleIndicator.from_csv(args.sample)
    pi = read_vector_csv(args.pi, "pi") if args.pi else np.ones(pop.N)
    rng = np.random.default_rng(args.seed)
    if args.learner == "tree":
        model = train_weighted_tree(pop, sample, pi, args.max_depth, args.min_leaf_weight)
    else:
        lam = args.lam
        if lam is None:
            lam, _ = select_lambda_cv(pop, sample, pi, degree=args.degree, rng=rng, solver=args.solver)
        model = train_weighted_svm(pop, sample, pi, lam, args.degree, rng=rng, solver=args.solver, epochs=args.epochs)
    save_model(model, args.out)
    return 0


def cmd_bound(args) -> int:
    with open(args.inputs) as fh:
        inputs = BoundInputs.from_dict(json.load(fh))
    rep = bound_report(inputs)
    code = 0
    if args.validate:
        if inputs.N > 12:
            rep["validation"] = {"skipped": f"exact oracles need N <= 12, got N={inputs.N}"}
        else:
            v = run_validation_suite(max_N=max(3, inputs.N), instances=args.instances, seed=args.seed)
            rep["validation"] = v
            code = 0 if v["passed"] else 1
    _emit(rep, args.out)
    return code


def cmd_experiment(args) -> int:
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_dict(json.load(fh))
    else:
        cfg = ExperimentConfig.full() if args.full else ExperimentConfig.desk()
    cfg = with_overrides(
        cfg,
        master_seed=args.seed,
        replications=args.replications,
        workers=args.workers,
        rows_csv=args.rows,
        summary_json=args.summary,
    )
    report = run_experiment(cfg)
    print(report.table())
    print(f"backend={_backend.BACKEND} runtime={report.runtime_seconds:.1f}s")
    return 1 if report.failed else 0


def cmd_validate(args) -> int:
    rep = run_validation_suite(args.max_n, args.instances, args.seed, args.corrupt_pi)
    for name, s in rep["suites"].items():
        print(f"{'PASS' if s['passed'] else 'FAIL'} {name} ({s['instances']} instances, {s['failures']} failures)", file=sys.stderr)
    _emit(rep, args.out)
    return 0 if rep["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="htlearn", description="Learning from survey samples with HT-weighted risks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw one sample from a design JSON")
    p.add_argument("--design", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-rejections", type=int, default=10**6)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("solve-pi", help="canonical rejective parameters for a pi CSV")
    p.add_argument("--pi", required=True, help="CSV with columns index, pi")
    p.add_argument("--out", help="CSV with columns index, p")
    p.add_argument("--design-out", help="also write the rejective design JSON")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.set_defaults(func=cmd_solve_pi)

    p = sub.add_parser("estimate", help="risk of a classifier on a population/sample")
    p.add_argument("--population", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--kind", choices=["empirical", "true", "ht", "biased_ht", "mixed"], default="ht")
    p.add_argument("--design")
    p.add_argument("--sample")
    p.add_argument("--pi-star")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("train", help="fit a weighted SVM or tree")
    p.add_argument("--population", required=True)
    p.add_argument("--sample", required=True)
    p.add_argument("--pi", help="CSV with columns index, pi (omit for unit weights)")
    p.add_argument("--learner", choices=["svm", "tree"], default="svm")
    p.add_argument("--lambda", dest="lam", type=float, help="fixed lambda; cross-validated when omitted")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--solver", choices=["dual", "subgradient"], default="dual")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--min-leaf-weight", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bound", help="evaluate every bound for a BoundInputs JSON")
    p.add_argument("--inputs", required=True)
    p.add_argument("--validate", action="store_true", help="also run the exact oracles (N <= 12)")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("experiment", help="replicated two-Gaussian study")
    p.add_argument("--config", help="ExperimentConfig JSON")
    p.add_argument("--full", action="store_true", help="full-scale config (20000 units, 50 replications)")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--rows", help="per-replication CSV")
    p.add_argument("--summary", help="aggregate JSON")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validate", help="run the exact enumeration suites")
    p.add_argument("--max-n", type=int, default=8)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt-pi", action="store_true", help="negative control: perturb declared pi")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, ArithmeticError, OSError) as exc:
        print(f"htlearn {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
