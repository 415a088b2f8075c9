"""Experiment configuration, seeded multi-replica sweeps, and persistence.

A config plus its master seed determines every output byte: replica (T, r)
cells draw from independent Philox streams keyed by (master_seed, T-index,
replica), cells are isolated, and results are reduced in sorted cell order
so worker count cannot change any artifact.
"""

import csv
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import analysis, noise, objectives
from .errors import ConfigurationError, DivergedRunError
from .optimizers import HyperParams, Schedule, make_schedule, run_trajectory

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    objective_id: str
    objective_params: dict
    oracle_kind: str
    sigma0: float
    sigma1: float
    optimizer_id: str
    schedule_kind: str
    schedule_inputs: dict
    beta1: float
    lam: float
    nu0: Optional[float]  # None = auto: sigma0^2 for stochastic runs, else 1.0
    init_delta1: Optional[float]
    init_point: Optional[tuple]
    init_side: Optional[int]
    T_list: tuple
    replicas: int
    master_seed: int
    record_every: int
    outdir: str
    guard: float = 1e12
    raw: dict = field(default_factory=dict)

    def fingerprint(self) -> str:
        blob = canonical_json(
            {k: v for k, v in self.__dict__.items() if k != "raw"}
        ).encode()
        return hashlib.sha256(blob).hexdigest()


def canonical_json(payload) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, tuple):
            return list(o)
        raise TypeError(f"not serializable: {type(o)}")

    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=default)


_SENTINEL = object()


def _get(section: dict, name: str, field_path: str, default=_SENTINEL):
    if name in section:
        return section[name]
    if default is _SENTINEL:
        raise ConfigurationError(f"missing config field {field_path!r}")
    return default


def config_from_dict(doc: dict) -> ExperimentConfig:
    exp = doc.get("experiment", {})
    obj = doc.get("objective", {})
    ora = doc.get("oracle", {})
    opt = doc.get("optimizer", {})
    sch = doc.get("schedule", {})
    ini = doc.get("init", {})

    T_raw = _get(exp, "T", "experiment.T")
    T_list = tuple(int(t) for t in (T_raw if isinstance(T_raw, list) else [T_raw]))
    if any(t < 1 for t in T_list):
        raise ConfigurationError("experiment.T entries must be >= 1")

    objective_id = _get(obj, "id", "objective.id")
    objective_params = {k: float(v) for k, v in obj.items() if k != "id"}

    oracle_kind = _get(ora, "kind", "oracle.kind", "deterministic")
    if oracle_kind not in noise.KINDS:
        raise ConfigurationError(f"unknown oracle.kind {oracle_kind!r}")

    nu0 = opt.get("nu0", "auto")
    nu0 = None if nu0 == "auto" else float(nu0)

    point = ini.get("point")
    delta1 = ini.get("delta1")
    if point is None and delta1 is None:
        raise ConfigurationError("init needs either init.delta1 or init.point")

    cfg = ExperimentConfig(
        experiment_id=str(_get(exp, "id", "experiment.id")),
        objective_id=objective_id,
        objective_params=objective_params,
        oracle_kind=oracle_kind,
        sigma0=float(ora.get("sigma0", 1.0)),
        sigma1=float(ora.get("sigma1", 1.0)),
        optimizer_id=_get(opt, "id", "optimizer.id"),
        schedule_kind=_get(sch, "kind", "schedule.kind"),
        schedule_inputs={k: v for k, v in sch.items() if k != "kind"},
        beta1=float(opt.get("beta1", 0.0)),
        lam=float(opt.get("lam", 0.0)),
        nu0=nu0,
        init_delta1=None if delta1 is None else float(delta1),
        init_point=None if point is None else tuple(float(x) for x in point),
        init_side=ini.get("side"),
        T_list=T_list,
        replicas=int(exp.get("replicas", 1)),
        master_seed=int(exp.get("master_seed", 0)),
        record_every=int(exp.get("record_every", 1)),
        outdir=str(exp.get("outdir", "out")),
        guard=float(exp.get("guard", 1e12)),
        raw=doc,
    )
    resolve(cfg)  # validate eagerly so errors name their field before any run
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))


def resolve(cfg: ExperimentConfig):
    """(objective, oracle, w1, hyper template, schedule-inputs template)."""
    obj = objectives.from_id(cfg.objective_id, cfg.objective_params)
    oracle = noise.OracleConfig(
        kind=cfg.oracle_kind,
        sigma0=cfg.sigma0,
        sigma1=cfg.sigma1,
        seed=cfg.master_seed,
    )
    if cfg.init_point is not None:
        w1 = np.asarray(cfg.init_point, dtype=float)
        if len(w1) != obj.dim:
            raise ConfigurationError("init.point dimension mismatch")
    else:
        w1 = objectives.init_point_for_gap(obj, cfg.init_delta1, cfg.init_side)
    nu0 = cfg.nu0
    if nu0 is None:
        nu0 = cfg.sigma0**2 if oracle.is_stochastic else 1.0
    sch_inputs = dict(cfg.schedule_inputs)
    # auto-fill schedule inputs from the rest of the config
    sch_inputs.setdefault("l0", obj.l0)
    sch_inputs.setdefault("l1", obj.l1)
    sch_inputs.setdefault("sigma0", cfg.sigma0)
    sch_inputs.setdefault("sigma1", cfg.sigma1)
    sch_inputs.setdefault("beta1", cfg.beta1)
    if sch_inputs.get("delta1", "auto") == "auto":
        sch_inputs["delta1"] = float(obj.value(w1) - obj.f_star)
    return obj, oracle, w1, nu0, sch_inputs


def _schedule_for(cfg: ExperimentConfig, sch_inputs: dict, T: int) -> Schedule:
    inputs = dict(sch_inputs)
    inputs.setdefault("T", T)
    if cfg.schedule_kind in ("constant",):
        inputs = {k: inputs[k] for k in ("eta", "beta2") if k in inputs}
    return make_schedule(cfg.schedule_kind, inputs)


def _run_cell(args):
    cfg, t_index, replica = args
    obj, oracle, w1, nu0, sch_inputs = resolve(cfg)
    T = cfg.T_list[t_index]
    schedule = _schedule_for(cfg, sch_inputs, T)
    # the kernel takes (eta, beta2) from the schedule; hyper carries the rest
    hyper = HyperParams(
        eta=schedule.eta_at(1),
        beta1=cfg.beta1,
        beta2=schedule.beta2_at(T),
        lam=cfg.lam,
        nu0=nu0,
    )
    rng = noise.make_rng((cfg.master_seed, t_index, replica))
    meta = {
        "T": T,
        "replica": replica,
        "oracle_kind": oracle.kind,
        "schedule_kind": schedule.kind,
        "schedule_formula_valid": schedule.formula_valid,
        "objective": obj.name,
    }
    return run_trajectory(
        cfg.optimizer_id,
        obj,
        oracle,
        schedule,
        hyper,
        w1,
        T,
        record_every=cfg.record_every,
        rng=rng,
        guard=cfg.guard,
        fingerprint=f"{cfg.fingerprint()}:T{T}:r{replica}",
        meta=meta,
    )


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list:
    """One record per (T value, replica), in deterministic cell order."""
    cells = [
        (cfg, ti, r)
        for ti in range(len(cfg.T_list))
        for r in range(cfg.replicas)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells))
    else:
        records = [_run_cell(c) for c in cells]
    return records


METRICS = ("mean_grad", "min_grad")


def sweep_rate(
    cfg: ExperimentConfig, metric: str, workers: int = 1, records=None
) -> analysis.RateFit:
    """Fit log(replica-averaged metric) against log T across cfg.T_list."""
    if metric not in METRICS:
        raise ConfigurationError(f"metric must be one of {METRICS}")
    if len(cfg.T_list) < 4:
        raise ConfigurationError("sweep needs at least 4 T values")
    if records is None:
        records = run_experiment(cfg, workers=workers)
    bad = [r for r in records if r.diverged]
    if bad:
        summary = [
            {"T": r.meta.get("T"), "replica": r.meta.get("replica"),
             "diverged_at": r.diverged_at}
            for r in bad
        ]
        raise DivergedRunError(
            f"{len(bad)} trajectories diverged; rate fit aborted", summary
        )
    by_T = {}
    for r in records:
        by_T.setdefault(r.meta["T"], []).append(r)
    points = []
    for T in sorted(by_T):
        vals = [
            r.running_mean_grad if metric == "mean_grad" else r.running_min_grad
            for r in by_T[T]
        ]
        points.append((T, float(np.mean(vals))))
    return analysis.fit_rate_exponent(points)


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def persist(records, fits: dict, outdir, cfg: Optional[ExperimentConfig] = None) -> Path:
    """Write trajectory CSVs, fit/certificate JSONs, gnuplot data, and a manifest.

    CSV floats use shortest round-trip formatting so reruns are
    byte-identical. Returns the manifest path.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    rec_entries = []
    for rec in records:
        T = rec.meta.get("T", rec.T)
        r = rec.meta.get("replica", 0)
        name = f"traj_T{T}_r{r}.csv"
        path = out / name
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "grad_norm", "gap", "step_norm", "nu"])
            for row in rec.rows:
                writer.writerow([int(row[0])] + [_fmt(v) for v in row[1:]])
        files.append(name)
        rec_entries.append(
            {
                "file": name,
                "T": T,
                "replica": r,
                "status": rec.status,
                "diverged_at": rec.diverged_at,
                "running_min_grad": rec.running_min_grad,
                "running_mean_grad": rec.running_mean_grad,
                "fingerprint": rec.fingerprint,
            }
        )
    for name, payload in fits.items():
        jname = f"{name}.json"
        with open(out / jname, "w") as fh:
            fh.write(canonical_json(payload if isinstance(payload, dict)
                                    else payload.to_dict()))
        files.append(jname)
        if isinstance(payload, analysis.RateFit):
            dname = f"{name}.dat"
            with open(out / dname, "w") as fh:
                for a, b in payload.points:
                    fh.write(f"{_fmt(a)} {_fmt(b)}\n")
            files.append(dname)
    manifest = {
        "tool_version": __version__,
        "config_fingerprint": cfg.fingerprint() if cfg else None,
        "files": [{"name": n, "sha256": _sha256(out / n)} for n in sorted(files)],
        "records": rec_entries,
    }
    mpath = out / "manifest.json"
    with open(mpath, "w") as fh:
        fh.write(canonical_json(manifest))
    return mpath


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()
