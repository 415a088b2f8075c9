"""Optimizer step functions, hyperparameter schedules, and the trajectory runner.

The Adam here is the norm variant: a single scalar conditioner tracks the
exponential moving average of squared gradient norms, there is no bias
correction, and all analysis-facing defaults use lam = 0.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._backend import kernels
from . import _kernels_py as _codes
from . import noise as noise_mod
from .errors import (
    ConfigurationError,
    DivisionGuardError,
    InvalidParameterError,
    NumericError,
)
from .objectives import ObjectiveSpec

OPTIMIZER_IDS = ("adam", "sgdm", "gd", "adagrad")
SCHEDULE_KINDS = (
    "constant",
    "thm1_deterministic",
    "thm3_stochastic",
    "thm5_stochastic",
    "thm6_agnostic",
)

T_CAP = 2**26
DEFAULT_GUARD = 1e12


@dataclass(frozen=True)
class HyperParams:
    eta: float = 0.1
    beta1: float = 0.0
    beta2: float = 0.999
    lam: float = 0.0
    nu0: float = 1.0
    m0: Optional[np.ndarray] = None

    def validate(self, need_thm1_regime: bool = False) -> None:
        if self.eta <= 0:
            raise InvalidParameterError("eta must be positive")
        if not 0.0 <= self.beta1 < 1.0:
            raise InvalidParameterError("beta1 must lie in [0, 1)")
        if not 0.0 < self.beta2 < 1.0:
            raise InvalidParameterError("beta2 must lie in (0, 1)")
        if self.lam < 0:
            raise InvalidParameterError("lam must be nonnegative")
        if self.nu0 <= 0:
            raise InvalidParameterError("nu0 must be positive")
        if need_thm1_regime and not self.beta1**2 < self.beta2:
            raise InvalidParameterError("deterministic regime needs beta1^2 < beta2")


@dataclass
class AdamState:
    w: np.ndarray
    m: np.ndarray
    nu: float
    t: int = 0


@dataclass
class SgdmState:
    w: np.ndarray
    m: np.ndarray
    t: int = 0


@dataclass
class AdaGradState:
    w: np.ndarray
    v_sum: float = 0.0
    t: int = 0


def _check_finite(g: np.ndarray, t: int) -> None:
    if not np.all(np.isfinite(g)):
        raise NumericError("nonfinite gradient sample", step=t)


def adam_step(state: AdamState, hyper: HyperParams, g) -> AdamState:
    g = np.atleast_1d(np.asarray(g, dtype=float))
    _check_finite(g, state.t + 1)
    nu = hyper.beta2 * state.nu + (1.0 - hyper.beta2) * float(g @ g)
    m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g
    w = state.w - hyper.eta * m / (hyper.lam + math.sqrt(nu))
    return AdamState(w=w, m=m, nu=nu, t=state.t + 1)


def sgdm_step(state: SgdmState, eta: float, beta: float, g) -> SgdmState:
    if not 0.0 <= beta <= 1.0:
        raise InvalidParameterError("sgdm beta must lie in [0, 1]")
    g = np.atleast_1d(np.asarray(g, dtype=float))
    _check_finite(g, state.t + 1)
    m = beta * state.m + (1.0 - beta) * g
    w = state.w - eta * m
    return SgdmState(w=w, m=m, t=state.t + 1)


def adagrad_step(state: AdaGradState, eta: float, g) -> AdaGradState:
    g = np.atleast_1d(np.asarray(g, dtype=float))
    _check_finite(g, state.t + 1)
    v = state.v_sum + float(g @ g)
    if v <= 0.0:
        raise DivisionGuardError("adagrad step with all-zero squared-gradient history")
    w = state.w - eta * g / math.sqrt(v)
    return AdaGradState(w=w, v_sum=v, t=state.t + 1)


@dataclass(frozen=True)
class Schedule:
    """Per-step (eta_t, beta2_t). Constant kinds ignore t."""

    kind: str
    inputs: dict
    eta0: float = 0.0
    beta2_0: float = 0.0
    per_step: bool = False
    formula_valid: bool = True

    def eta_at(self, t: int) -> float:
        if self.per_step:
            return 1.0 / math.sqrt(t)
        return self.eta0

    def beta2_at(self, t: int) -> float:
        if self.per_step:
            return 1.0 - t ** -0.75
        return self.beta2_0

    def arrays(self, T: int):
        """(eta0, eta_arr, beta2_0, beta2_arr) in kernel form."""
        if not self.per_step:
            return self.eta0, np.empty(0), self.beta2_0, np.empty(0)
        ts = np.arange(1, T + 1, dtype=np.float64)
        return 0.0, 1.0 / np.sqrt(ts), 0.0, 1.0 - ts**-0.75


def _require(inputs: dict, kind: str, names) -> list:
    vals = []
    for n in names:
        if n not in inputs:
            raise ConfigurationError(f"schedule {kind!r} missing input {n!r}")
        vals.append(float(inputs[n]))
    return vals


def thm5_beta2_formula(T, delta1, l0, l1, sigma1, beta1) -> float:
    eta = (1.0 - beta1) * math.sqrt(l0 * delta1) / math.sqrt(T)
    return 1.0 - eta * eta * (256.0 * sigma1 * sigma1 * l1) ** 2 / (1.0 - beta1)


def thm3_beta2_formula(eta, l0, l1, sigma1, beta1, iters: int = 200):
    """Solve the self-referential beta2 relation by fixed-point iteration.

    beta2 appears on both sides; starting from the beta1=0 closed form, the
    iteration converges quickly whenever a valid root exists. Returns None
    when no iterate stays inside (beta1^2, 1).
    """
    k0 = 1024.0 * sigma1 * sigma1 * (l0 + l1)
    b2 = 1.0 - (eta * k0) ** 2
    if not beta1 * beta1 < b2 < 1.0:
        return None
    for _ in range(iters):
        denom = math.sqrt(1.0 - beta1 * beta1 / b2) * (1.0 - beta1 / math.sqrt(b2))
        nxt = 1.0 - (eta * k0 * (1.0 - beta1) / denom) ** 2
        if not beta1 * beta1 < nxt < 1.0:
            return None
        if abs(nxt - b2) < 1e-15:
            return nxt
        b2 = nxt
    return b2


def make_schedule(kind: str, inputs: dict) -> Schedule:
    """Theorem-prescribed or constant hyperparameter schedules.

    The stochastic-regime beta2 formulas carry proof constants (256^2 and
    1024^2) that push beta2 below 0 unless T exceeds roughly
    (256*sigma1^2*l1)^2 * l0 * delta1; below that horizon the schedule
    substitutes the enlarged-range prescription 1 - beta2 = 1/sqrt(T) and
    flags formula_valid=False.
    """
    if kind not in SCHEDULE_KINDS:
        raise ConfigurationError(f"unknown schedule kind {kind!r}")
    inputs = dict(inputs)
    if kind == "constant":
        eta, beta2 = _require(inputs, kind, ("eta", "beta2"))
        return Schedule(kind=kind, inputs=inputs, eta0=eta, beta2_0=beta2)
    if kind == "thm6_agnostic":
        return Schedule(kind=kind, inputs=inputs, per_step=True)
    if kind == "thm1_deterministic":
        T, delta1, l0, beta1, beta2 = _require(
            inputs, kind, ("T", "delta1", "l0", "beta1", "beta2")
        )
        if not beta1 * beta1 < beta2 < 1.0:
            raise ConfigurationError("thm1 schedule needs beta1^2 < beta2 < 1")
        eta = math.sqrt(delta1 * (1.0 - beta1 * beta1 / beta2)) / (
            math.sqrt(T * l0) * (1.0 - beta1)
        )
        return Schedule(kind=kind, inputs=inputs, eta0=eta, beta2_0=beta2)
    if kind == "thm5_stochastic":
        T, delta1, l0, l1, sigma1, beta1 = _require(
            inputs, kind, ("T", "delta1", "l0", "l1", "sigma1", "beta1")
        )
        eta = (1.0 - beta1) * math.sqrt(l0 * delta1) / math.sqrt(T)
        beta2 = thm5_beta2_formula(T, delta1, l0, l1, sigma1, beta1)
        valid = 0.0 < beta2 < 1.0
        if not valid:
            beta2 = 1.0 - 1.0 / math.sqrt(T)
        return Schedule(
            kind=kind, inputs=inputs, eta0=eta, beta2_0=beta2, formula_valid=valid
        )
    # thm3_stochastic
    T, delta1, l0, l1, sigma0, sigma1, beta1 = _require(
        inputs, kind, ("T", "delta1", "l0", "l1", "sigma0", "sigma1", "beta1")
    )
    eta = math.sqrt(delta1) / (
        math.sqrt(l0 + l1) * math.sqrt(T * sigma0 * sigma1 * sigma1)
    )
    beta2 = thm3_beta2_formula(eta, l0, l1, sigma1, beta1)
    valid = beta2 is not None
    if not valid:
        beta2 = 1.0 - 1.0 / math.sqrt(T)
    return Schedule(
        kind=kind, inputs=inputs, eta0=eta, beta2_0=beta2, formula_valid=valid
    )


_STATUS_NAMES = {
    _codes.STATUS_COMPLETED: "completed",
    _codes.STATUS_DIVERGED: "diverged",
}


@dataclass
class TrajectoryRecord:
    """Per-run metrics: sparse rows plus full-resolution running statistics."""

    fingerprint: str
    optimizer: str
    T: int
    record_every: int
    rows: np.ndarray  # columns: t, grad_norm, gap, step_norm, nu
    running_min_grad: float
    running_mean_grad: float
    status: str
    diverged_at: Optional[int]
    steps_run: int
    grad_norms: Optional[np.ndarray] = None
    first_below: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"


def _optimizer_code(optimizer: str):
    if optimizer == "adam":
        return _codes.OPT_ADAM
    if optimizer in ("sgdm", "gd"):
        return _codes.OPT_SGDM
    if optimizer == "adagrad":
        return _codes.OPT_ADAGRAD
    raise ConfigurationError(f"unknown optimizer id {optimizer!r}")


_NOISE_CODE = {
    "deterministic": _codes.NOISE_NONE,
    "gaussian_affine": _codes.NOISE_GAUSS,
    "heavy_sqrt_exp": _codes.NOISE_HEAVY,
}


def run_trajectory(
    optimizer: str,
    obj: ObjectiveSpec,
    oracle: noise_mod.OracleConfig,
    schedule: Schedule,
    hyper: HyperParams,
    w1,
    T: int,
    record_every: int = 1,
    rng: Optional[np.random.Generator] = None,
    guard: float = DEFAULT_GUARD,
    eps_stop: float = 0.0,
    record_full: Optional[bool] = None,
    fingerprint: str = "",
    meta: Optional[dict] = None,
) -> TrajectoryRecord:
    """Iterate T steps, one oracle draw per step, recording metrics.

    Gradient-norm running min/mean are tracked at every step regardless of
    record_every. Iterates escaping |coordinate| > guard (or overflowing the
    exponential tails) stop the run with status "diverged"; a nonfinite
    sampled gradient raises NumericError with its step index.
    """
    opt = _optimizer_code(optimizer)
    if T < 1:
        raise ConfigurationError("T must be at least 1")
    if T > T_CAP:
        raise ConfigurationError(f"T exceeds the run cap {T_CAP}")
    if record_every < 1:
        raise ConfigurationError("record_every must be at least 1")
    w1 = np.atleast_1d(np.asarray(w1, dtype=float))
    if len(w1) != obj.dim or not np.all(np.isfinite(w1)):
        raise ConfigurationError("w1 must be a finite point of the objective's dim")
    beta = 0.0 if optimizer == "gd" else hyper.beta1
    if optimizer == "adam" and not 0.0 <= beta < 1.0:
        raise ConfigurationError("adam needs beta1 in [0, 1)")
    if optimizer == "sgdm" and not 0.0 <= beta <= 1.0:
        raise ConfigurationError("sgdm needs beta in [0, 1]")
    m0 = (
        np.zeros(obj.dim)
        if hyper.m0 is None
        else np.atleast_1d(np.asarray(hyper.m0, dtype=float))
    )
    nu0 = 0.0 if opt == _codes.OPT_ADAGRAD else hyper.nu0

    if record_full is None:
        record_full = T <= 2**20
    if oracle.is_stochastic:
        if rng is None:
            rng = noise_mod.make_rng((oracle.seed,))
        noise_buf = noise_mod.pregenerate(oracle, T, obj.dim, rng)
    else:
        noise_buf = np.empty(0)

    eta0, eta_arr, beta2_0, beta2_arr = schedule.arrays(T)
    out = kernels.run_loop(
        opt,
        list(obj.codes),
        [list(p) for p in obj.piece_params],
        obj.f_star,
        w1,
        m0,
        nu0,
        T,
        eta0,
        eta_arr,
        beta,
        beta2_0,
        beta2_arr,
        hyper.lam,
        _NOISE_CODE[oracle.kind],
        oracle.sigma0,
        oracle.sigma1,
        noise_buf,
        record_every,
        guard,
        eps_stop,
        1 if record_full else 0,
    )
    if out["status"] == _codes.STATUS_NUMERIC:
        raise NumericError("nonfinite stochastic gradient", step=out["stop_t"])
    if out["status"] == _codes.STATUS_ZERO_DIV:
        raise DivisionGuardError(
            f"adagrad division guard at step {out['stop_t']}"
        )
    status = _STATUS_NAMES[out["status"]]
    full_meta = {"oracle_kind": oracle.kind, "schedule_kind": schedule.kind}
    if eps_stop > 0.0:
        full_meta["eps_stop"] = eps_stop
    full_meta.update(meta or {})
    return TrajectoryRecord(
        fingerprint=fingerprint,
        optimizer=optimizer,
        T=T,
        record_every=record_every,
        rows=out["rows"],
        running_min_grad=out["min_grad"],
        running_mean_grad=out["mean_grad"],
        status=status,
        diverged_at=out["stop_t"] if status == "diverged" else None,
        steps_run=out["steps_run"],
        grad_norms=out["grad_norms"],
        first_below=out["first_below"],
        meta=full_meta,
    )
