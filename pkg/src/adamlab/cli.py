"""Command-line entry point.

Exit codes: 0 success, 1 failed certificate/inequality/aborted fit,
2 configuration errors (including unknown flags and missing files).
"""

import argparse
import json
import sys

import numpy as np

from . import analysis, harness, noise, objectives
from .errors import (
    AdamLabError,
    ConfigurationError,
    DivergedRunError,
    InvalidParameterError,
)
from .optimizers import HyperParams, Schedule, run_trajectory


def _print(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, default=float))


def _parse_kv(pairs) -> dict:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigurationError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = float(v)
    return out


def cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    records = harness.run_experiment(cfg, workers=args.workers)
    manifest = harness.persist(records, {}, cfg.outdir, cfg)
    _print({"manifest": str(manifest), "records": len(records)})
    return 0


def cmd_certify(args) -> int:
    params = _parse_kv(args.params)
    obj = objectives.from_id(args.objective, params)
    l0 = params.get("cert_l0")
    l1 = params.get("cert_l1")
    cert = objectives.certify_smoothness(
        obj,
        n_pairs=args.pairs,
        radius=args.radius,
        seed=args.seed,
        box=(args.box_lo, args.box_hi),
        l0=l0,
        l1=l1,
    )
    _print(
        {
            "objective": obj.name,
            "pairs_tested": cert.pairs_tested,
            "max_violation": cert.max_violation,
            "passed": cert.passed,
        }
    )
    return 0 if cert.passed else 1


def _lemma45_trajectory():
    obj = objectives.build_f1(1.0, 1.0)
    w1 = objectives.init_point_for_gap(obj, 10.0)
    hyper = HyperParams(eta=0.001, beta1=0.5, beta2=0.9, nu0=1.0)
    sched = Schedule(kind="constant", inputs={}, eta0=hyper.eta, beta2_0=hyper.beta2)
    traj = run_trajectory(
        "adam", obj, noise.OracleConfig(kind="deterministic"), sched, hyper,
        w1, 10_000, record_every=1,
    )
    return traj, obj, hyper


def cmd_check_lemmas(args) -> int:
    wanted = args.lemma
    reports = []
    if wanted in (None, 1):
        reports.append(analysis.check_lemma1_random(args.instances, args.seed))
    if wanted in (None, 2):
        reports.append(
            analysis.check_lemma2(objectives.build_f1(1.0, 1.0), args.instances, args.seed)
        )
        reports.append(
            analysis.check_lemma2(
                objectives.build_quadratic(1.0), args.instances, args.seed + 1
            )
        )
    if wanted in (None, 3):
        reports.append(analysis.check_lemma3(args.instances, 100, args.seed))
    if wanted in (None, 4, 5):
        traj, obj, hyper = _lemma45_trajectory()
        reports.append(analysis.check_lemma45(traj, obj, hyper))
    if not reports:
        raise ConfigurationError(f"unknown lemma {wanted}")
    _print([r.to_dict() for r in reports])
    return 0 if all(r.passed for r in reports) else 1


def cmd_sweep(args) -> int:
    cfg = harness.load_config(args.config)
    metric = {"mean": "mean_grad", "min": "min_grad"}[args.metric]
    records = harness.run_experiment(cfg, workers=args.workers)
    try:
        fit = harness.sweep_rate(cfg, metric, records=records)
    except DivergedRunError as exc:
        harness.persist(records, {}, cfg.outdir, cfg)
        _print({"error": str(exc), "divergence_summary": exc.summary})
        return 1
    harness.persist(records, {f"rate_{args.metric}": fit}, cfg.outdir, cfg)
    _print(fit.to_dict())
    return 0


def cmd_tune(args) -> int:
    cfg = harness.load_config(args.config)
    tune = cfg.raw.get("tune", {})
    if "epsilon" not in tune:
        raise ConfigurationError("missing config field 'tune.epsilon'")
    obj, oracle, w1, _, _ = harness.resolve(cfg)
    eta_grid = tune.get("eta_grid", analysis.DEFAULT_ETA_GRID)
    beta_grid = tune.get("beta_grid", analysis.DEFAULT_BETA_GRID)
    (eta, beta), steps = analysis.tune_best(
        cfg.optimizer_id,
        obj,
        oracle,
        w1,
        int(tune.get("T", max(cfg.T_list))),
        float(tune["epsilon"]),
        eta_grid=eta_grid,
        beta_grid=beta_grid,
        workers=args.workers,
    )
    _print({"eta": eta, "beta": beta, "steps": steps if steps is not None else "never"})
    return 0


def cmd_diverge_cert(args) -> int:
    cfg = harness.load_config(args.config)
    div = cfg.raw.get("divergence", {})
    obj, _, w1, _, _ = harness.resolve(cfg)
    sigma0 = cfg.sigma0
    c = noise.calibrate_c(sigma0)
    threshold = float(div.get("threshold", 1e6))
    results = []
    ok = True
    for eta in div.get("etas", [1.0, 0.1, 0.01]):
        for beta in div.get("betas", [0.0, 0.9]):
            windows = div.get(
                "windows",
                noise.default_windows(obj, float(w1[0]), eta, beta, c, threshold=threshold),
            )
            cert = noise.divergence_certificate(
                obj, float(w1[0]), eta, beta, 0.0, windows, c=c, threshold=threshold
            )
            ok = ok and cert.verdict
            results.append({"eta": eta, "beta": beta, **cert.to_dict()})
    _print(results)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adamlab")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run an experiment config and persist records")
    sp.add_argument("config")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("certify", help="smoothness certificate for an objective")
    sp.add_argument("objective")
    sp.add_argument("params", nargs="*", help="key=value objective parameters")
    sp.add_argument("--pairs", type=int, default=100_000)
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--box-lo", type=float, default=-5.0)
    sp.add_argument("--box-hi", type=float, default=5.0)
    sp.set_defaults(fn=cmd_certify)

    sp = sub.add_parser("check-lemmas", help="numerical lemma suites")
    sp.add_argument("--lemma", type=int, default=None)
    sp.add_argument("--instances", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_check_lemmas)

    sp = sub.add_parser("sweep", help="rate-exponent fit across T")
    sp.add_argument("config")
    sp.add_argument("--metric", choices=("mean", "min"), required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("tune", help="grid-tune (eta, beta) by steps-to-epsilon")
    sp.add_argument("config")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(fn=cmd_tune)

    sp = sub.add_parser("diverge-cert", help="momentum-method divergence certificate")
    sp.add_argument("config")
    sp.set_defaults(fn=cmd_diverge_cert)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigurationError, InvalidParameterError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AdamLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
