"""Numerical verification of the optimizer inequalities, rate fitting,
steps-to-epsilon measurement, hyperparameter grid tuning, and the
gradient-method regime probe.

All inequality checks use a relative tolerance of 1e-9: slack below
-1e-9 * max(1, RHS) counts as a violation; anything closer is float
accumulation over long telescoping sums.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import noise as noise_mod
from .errors import ConfigurationError, CoverageGapError, InvalidParameterError
from .objectives import ObjectiveSpec, init_point_for_gap
from .optimizers import HyperParams, Schedule, TrajectoryRecord, run_trajectory

REL_TOL = 1e-9

DEFAULT_ETA_GRID = tuple(np.geomspace(1e-4, 1e2, 25))
DEFAULT_BETA_GRID = (0.0, 0.5, 0.9, 0.99, 1.0 - 1e-4)


@dataclass(frozen=True)
class InequalityReport:
    name: str
    instances: int
    violations: int
    worst_slack: float
    witness: Optional[dict] = None
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "instances": self.instances,
            "violations": self.violations,
            "worst_slack": self.worst_slack,
            "skipped": self.skipped,
            "witness": self.witness,
        }


@dataclass(frozen=True)
class RateFit:
    points: tuple
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict:
        return {
            "points": [[float(a), float(b)] for a, b in self.points],
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
        }


def _rel_slack(lhs: float, rhs: float) -> float:
    return (lhs - rhs) / max(1.0, abs(rhs))


def lemma1_bound(eta: float, beta1: float, beta2: float) -> float:
    """Per-step displacement cap of norm-Adam with lam = 0."""
    if not beta1 * beta1 < beta2 < 1.0:
        raise ConfigurationError("lemma 1 needs beta1^2 < beta2 < 1")
    return (
        eta
        * (1.0 - beta1)
        / (math.sqrt(1.0 - beta2) * math.sqrt(1.0 - beta1 * beta1 / beta2))
    )


def check_lemma1(traj: TrajectoryRecord, hyper: HyperParams) -> InequalityReport:
    """Displacement bound along a recorded Adam trajectory (constant schedule)."""
    if traj.optimizer != "adam":
        raise ConfigurationError("lemma 1 checks Adam trajectories")
    if hyper.lam != 0.0:
        raise ConfigurationError("lemma 1 is stated for lam = 0")
    bound = lemma1_bound(hyper.eta, hyper.beta1, hyper.beta2)
    worst = -math.inf
    violations = 0
    witness = None
    for row in traj.rows:
        slack = _rel_slack(row[3], bound)
        if slack > worst:
            worst = slack
            if slack > REL_TOL:
                witness = {"t": int(row[0]), "step_norm": float(row[3]), "bound": bound}
        if slack > REL_TOL:
            violations += 1
    return InequalityReport(
        name="lemma1",
        instances=len(traj.rows),
        violations=violations,
        worst_slack=worst,
        witness=witness,
    )


def check_lemma1_random(n_steps: int, seed: int) -> InequalityReport:
    """Displacement bound over random single Adam steps with random history.

    Each instance draws valid (beta1, beta2), a random conditioner history
    consistent with the recursion (nu >= beta2^t * nu0 components), and a
    random gradient; the step it induces must respect the bound.
    """
    rng = noise_mod.make_rng((seed, 0x11))
    worst = -math.inf
    violations = 0
    witness = None
    for k in range(n_steps):
        beta2 = rng.uniform(0.05, 0.999)
        beta1 = rng.uniform(0.0, math.sqrt(beta2) * 0.999)
        eta = math.exp(rng.uniform(-4, 1))
        dim = int(rng.integers(1, 4))
        nu0 = math.exp(rng.uniform(-3, 3))
        # build a short history so (m, nu) are reachable states
        m = np.zeros(dim)
        nu = nu0
        steps = int(rng.integers(1, 30))
        scale = math.exp(rng.uniform(-2, 2))
        step_norm = 0.0
        for _ in range(steps):
            g = scale * rng.standard_normal(dim)
            nu = beta2 * nu + (1.0 - beta2) * float(g @ g)
            m = beta1 * m + (1.0 - beta1) * g
            step_norm = eta * float(np.linalg.norm(m)) / math.sqrt(nu)
        bound = lemma1_bound(eta, beta1, beta2)
        slack = _rel_slack(step_norm, bound)
        if slack > worst:
            worst = slack
            if slack > REL_TOL:
                witness = {
                "instance": k, "seed": seed, "step_norm": step_norm,
                "bound": bound, "eta": eta, "beta1": beta1, "beta2": beta2,
            }
        if slack > REL_TOL:
            violations += 1
    return InequalityReport(
        name="lemma1-random",
        instances=n_steps,
        violations=violations,
        worst_slack=worst,
        witness=witness,
    )


def check_lemma2(
    obj: ObjectiveSpec, n_triples: int, seed: int, box=(-4.0, 4.0)
) -> InequalityReport:
    """Three-point descent inequality over sampled conforming triples.

    Each triple is sampled as a center plus two offsets of length at most
    1/(2*l1); the reference point (whose gradient scales the curvature
    coefficient) is the one with the largest gradient norm, which is the
    regime the inequality provably covers for exponential-tail objectives.
    """
    rng = noise_mod.make_rng((seed, 0x22))
    l0, l1 = obj.l0, obj.l1
    r_cap = (box[1] - box[0]) if l1 == 0.0 else 1.0 / (2.0 * l1)
    worst = -math.inf
    violations = 0
    witness = None
    for k in range(n_triples):
        center = rng.uniform(box[0], box[1], size=obj.dim)
        pts = [center]
        for _ in range(2):
            d = rng.standard_normal(obj.dim)
            nn = np.linalg.norm(d)
            if nn == 0.0:
                d = np.ones(obj.dim)
                nn = np.linalg.norm(d)
            pts.append(center + d / nn * rng.uniform(0.0, r_cap))
        norms = [np.linalg.norm(obj.grad(p)) for p in pts]
        order = int(np.argmax(norms))
        w1 = pts[order]
        w2, w3 = [p for i, p in enumerate(pts) if i != order]
        lhs = obj.value(w2)
        rhs = (
            obj.value(w3)
            + float(obj.grad(w3) @ (w2 - w3))
            + 0.5
            * (l0 + l1 * norms[order])
            * np.linalg.norm(w2 - w3)
            * (np.linalg.norm(w1 - w3) + np.linalg.norm(w1 - w2))
        )
        slack = _rel_slack(lhs, rhs)
        if slack > worst:
            worst = slack
            if slack > REL_TOL:
                witness = {
                    "objective": obj.name,
                    "params": dict(obj.params),
                    "instance": k,
                    "w1": w1.tolist(),
                    "w2": w2.tolist(),
                    "w3": w3.tolist(),
                    "lhs": float(lhs),
                    "rhs": float(rhs),
                    "seed": seed,
                }
        if slack > REL_TOL:
            violations += 1
    return InequalityReport(
        name="lemma2",
        instances=n_triples,
        violations=violations,
        worst_slack=worst,
        witness=witness,
    )


def check_lemma3(n_sequences: int, length: int, seed: int) -> InequalityReport:
    """Weighted second-order sum bound over random scalar sequences."""
    rng = noise_mod.make_rng((seed, 0x33))
    worst = -math.inf
    violations = 0
    witness = None
    for k in range(n_sequences):
        beta2 = rng.uniform(0.05, 0.999)
        beta1 = rng.uniform(1e-6, math.sqrt(beta2) * 0.999)
        b0 = math.exp(rng.uniform(-3, 3))
        a = rng.standard_normal(length) * math.exp(rng.uniform(-2, 2))
        b, c, lhs = b0, 0.0, 0.0
        for n in range(length):
            b = beta2 * b + (1.0 - beta2) * a[n] * a[n]
            c = beta1 * c + (1.0 - beta1) * a[n]
            lhs += c * c / b
        coeff = (1.0 - beta1) ** 2 / (
            (1.0 - beta1 / math.sqrt(beta2)) ** 2 * (1.0 - beta2)
        )
        rhs = coeff * (math.log(b / b0) - length * math.log(beta2))
        slack = _rel_slack(lhs, rhs)
        if slack > worst:
            worst = slack
            if slack > REL_TOL:
                witness = {
                    "instance": k,
                    "beta1": beta1,
                    "beta2": beta2,
                    "b0": b0,
                    "seed": seed,
                }
        if slack > REL_TOL:
            violations += 1
    return InequalityReport(
        name="lemma3",
        instances=n_sequences,
        violations=violations,
        worst_slack=worst,
        witness=witness,
    )


def check_lemma45(
    traj: TrajectoryRecord, obj: ObjectiveSpec, hyper: HyperParams
) -> InequalityReport:
    """Momentum-sum bounds along a deterministic Adam trajectory.

    Needs record_every=1 (the bounds telescope over every step) and a
    deterministic oracle so sampled and true gradients coincide. Steps whose
    displacement exceeds (1 - beta1^(1/8))/(6*l1) fall outside the second
    bound's stated range; from the first such step on it is skipped (and
    counted), never asserted.
    """
    if traj.optimizer != "adam" or hyper.lam != 0.0:
        raise ConfigurationError("lemma 4/5 checks Adam trajectories with lam = 0")
    if traj.record_every != 1:
        raise ConfigurationError("lemma 4/5 needs record_every = 1")
    if traj.meta.get("oracle_kind", "deterministic") != "deterministic":
        raise ConfigurationError("lemma 4/5 needs a deterministic oracle")
    beta1, beta2, eta = hyper.beta1, hyper.beta2, hyper.eta
    if beta2 < beta1:
        raise ConfigurationError("lemma 4/5 needs beta2 >= beta1")
    l0, l1 = obj.l0, obj.l1
    if l1 <= 0:
        raise ConfigurationError("lemma 5 needs l1 > 0")
    disp_cap = (1.0 - beta1 ** 0.125) / (6.0 * l1)

    w4 = beta1**0.25
    w5 = beta1**0.125
    s4 = s5a = s5b = 0.0
    nu_prev = hyper.nu0
    worst = -math.inf
    violations = 0
    skipped = 0
    witness = None
    lemma5_live = True
    for row in traj.rows:
        t, gn, _, step_norm, nu = row
        m_norm = step_norm * math.sqrt(nu) / eta
        tele = 1.0 / math.sqrt(beta2 * nu_prev) - 1.0 / math.sqrt(nu)
        s4 = w4 * s4 + tele
        lhs4 = m_norm * m_norm / nu**1.5
        rhs4 = 4.0 * (1.0 - beta1) * (2.0 / (1.0 - beta2)) * s4
        slack = _rel_slack(lhs4, rhs4)
        if slack > worst:
            worst = slack
            if slack > REL_TOL:
                witness = {
                    "lemma": 4, "t": int(t), "objective": obj.name,
                    "eta": eta, "beta1": beta1, "beta2": beta2,
                    "nu0": hyper.nu0,
                }
        if slack > REL_TOL:
            violations += 1

        core = gn * gn * gn * gn / (nu * math.sqrt(beta2 * nu_prev))
        s5a = w5 * s5a + core
        s5b = w5 * s5b + tele
        if lemma5_live and step_norm > disp_cap:
            lemma5_live = False
        if lemma5_live:
            lhs5 = m_norm * m_norm * gn * gn / (nu * math.sqrt(beta2 * nu_prev))
            rhs5 = 4.0 * (1.0 - beta1) * s5a + (
                8.0 * (1.0 - beta1) / (1.0 - beta2) * (l1 * l1) / (l0 * l0) * s5b
            )
            slack = _rel_slack(lhs5, rhs5)
            if slack > worst:
                worst = slack
                if slack > REL_TOL:
                    witness = {
                        "lemma": 5, "t": int(t), "objective": obj.name,
                        "eta": eta, "beta1": beta1, "beta2": beta2,
                        "nu0": hyper.nu0,
                    }
            if slack > REL_TOL:
                violations += 1
        else:
            skipped += 1
        nu_prev = nu
    return InequalityReport(
        name="lemmas4-5",
        instances=2 * len(traj.rows) - skipped,
        violations=violations,
        worst_slack=worst,
        witness=witness,
        skipped=skipped,
    )


def fit_rate_exponent(points) -> RateFit:
    """Least-squares slope of log(metric) against log(T)."""
    pts = [(float(a), float(b)) for a, b in points]
    if len(pts) < 4:
        raise InvalidParameterError("rate fit needs at least 4 points")
    if any(b <= 0 for _, b in pts):
        raise InvalidParameterError("rate fit needs positive metrics")
    lx = np.log([a for a, _ in pts])
    ly = np.log([b for _, b in pts])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ np.array([slope, intercept])
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res <= 1e-28 else 1.0 - ss_res / max(ss_tot, 1e-300)
    return RateFit(
        points=tuple(pts),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=min(max(r2, 0.0), 1.0),
    )


def steps_to_epsilon(traj: TrajectoryRecord, epsilon: float) -> Optional[int]:
    """First step index with true gradient norm below epsilon; None if never."""
    if epsilon <= 0:
        raise InvalidParameterError("epsilon must be positive")
    if traj.grad_norms is None:
        if traj.meta.get("eps_stop") == epsilon:
            return traj.first_below if traj.first_below > 0 else None
        raise ConfigurationError("full-resolution gradient norms were not tracked")
    below = np.nonzero(traj.grad_norms < epsilon)[0]
    return int(below[0]) + 1 if len(below) else None


def tune_best(
    optimizer: str,
    obj: ObjectiveSpec,
    oracle: noise_mod.OracleConfig,
    w1,
    T: int,
    epsilon: float,
    eta_grid=DEFAULT_ETA_GRID,
    beta_grid=DEFAULT_BETA_GRID,
    workers: int = 1,
    m0_mode: str = "zero",
):
    """Best (eta, beta) over the grid by steps-to-epsilon within horizon T.

    Returns ((eta, beta), steps) with steps None when no cell reaches
    epsilon. Ties break lexicographically toward smaller eta, then beta.
    This realizes the tune-after-fixing-the-objective protocol the momentum
    lower bound quantifies over. m0_mode="first_grad" seeds the momentum
    buffer at the starting gradient, the initialization the counterexample
    lemmas analyze; "zero" is the plain cold start.
    """
    if not len(eta_grid) or not len(beta_grid):
        raise InvalidParameterError("grids must be nonempty")
    if m0_mode not in ("zero", "first_grad"):
        raise InvalidParameterError("m0_mode must be 'zero' or 'first_grad'")
    cells = [(float(e), float(b)) for e in eta_grid for b in beta_grid]
    results = []
    if workers > 1:
        args = [(optimizer, obj, oracle, tuple(np.atleast_1d(w1)), T, epsilon,
                 e, b, m0_mode) for e, b in cells]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (e, b), steps in zip(cells, pool.map(_tune_cell, args)):
                results.append((steps, e, b))
    else:
        cap = T
        for e, b in cells:
            steps = _tune_cell((optimizer, obj, oracle, tuple(np.atleast_1d(w1)),
                                cap, epsilon, e, b, m0_mode))
            results.append((steps, e, b))
            if steps is not None and steps < cap:
                cap = steps
    hits = sorted((s, e, b) for s, e, b in results if s is not None)
    if not hits:
        return (None, None), None
    s, e, b = hits[0]
    return (e, b), s


def _tune_cell(args):
    optimizer, obj, oracle, w1, T, epsilon, eta, beta, m0_mode = args
    m0 = obj.grad(np.asarray(w1)) if m0_mode == "first_grad" else None
    hyper = HyperParams(eta=eta, beta1=beta, beta2=0.999, m0=m0)
    sched = Schedule(kind="constant", inputs={}, eta0=eta, beta2_0=hyper.beta2)
    traj = run_trajectory(
        optimizer,
        obj,
        oracle,
        sched,
        hyper,
        np.asarray(w1),
        T,
        record_every=max(1, T),
        eps_stop=epsilon,
        record_full=False,
    )
    return traj.first_below if traj.first_below > 0 else None


def gdm_thresholds(l0: float, l1: float, epsilon: float, delta1: float):
    """(eta threshold, beta boundary) separating the three counterexample lemmas."""
    log_inv_eps = math.log(1.0 / epsilon)
    x1_num = 1.0 + math.log(0.5 + l1 * l1 * delta1 / l0)
    eta_thr = (5.0 + 8.0 * log_inv_eps) * x1_num / (
        l1 * l1 * (delta1 + l0 / (2.0 * l1 * l1))
    )
    expo = -4.0 * log_inv_eps - 2.0
    beta_boundary = 1.0 - 2.0 * ((l1 * l1 / l0) * math.e) ** expo * (
        delta1 + l0 / (2.0 * l1 * l1)
    ) ** expo
    return eta_thr, beta_boundary


_F1_RANGE = "f1 lemma needs delta1 >= (l0/l1^2)(e - 1/2) and epsilon <= 1"
_F2_RANGE = "f2 lemma needs delta1 >= epsilon/2 + l1/l0"
_F3_RANGE = (
    "f3 lemma needs delta1 >= (l0/l1^2)e + 4e + l0^2/(e^2 l1^2), l1 >= 1, "
    "epsilon <= 1/2"
)


def gdm_regime_probe(
    eta: float, beta: float, l0: float, l1: float, epsilon: float, delta1: float
) -> str:
    """Name the counterexample whose lemma covers (eta, beta).

    Small eta falls to the hinge (f2); large eta splits on beta against the
    momentum boundary: at or below it the two-sided exponential (f1) traps
    the oscillation, above it the asymmetric trap (f3) catches the drift.
    Boundary values classify to the large-eta side and, on the beta axis, to
    f1 (both lemmas include their boundary). Raises CoverageGapError when
    the classified lemma's stated parameter range does not hold.
    """
    if min(eta, l0, l1, epsilon, delta1) <= 0 or not 0.0 <= beta <= 1.0:
        raise InvalidParameterError("probe needs positive parameters, beta in [0,1]")
    eta_thr, beta_boundary = gdm_thresholds(l0, l1, epsilon, delta1)
    if eta < eta_thr:
        if delta1 < epsilon / 2.0 + l1 / l0:
            raise CoverageGapError(_F2_RANGE)
        return "f2_catches"
    if beta <= beta_boundary:
        if delta1 < (l0 / (l1 * l1)) * (math.e - 0.5) or epsilon > 1.0:
            raise CoverageGapError(_F1_RANGE)
        return "f1_catches"
    if (
        delta1 < (l0 / (l1 * l1)) * math.e + 4.0 * math.e + l0 * l0 / (math.e**2 * l1 * l1)
        or l1 < 1.0
        or epsilon > 0.5
    ):
        raise CoverageGapError(_F3_RANGE)
    return "f3_catches"


def regime_guarantee(
    regime: str,
    eta: float,
    beta: float,
    l0: float,
    l1: float,
    epsilon: float,
    delta1: float,
):
    """(guaranteed horizon or None, gradient-norm floor) for a probed regime.

    f1's guarantee holds for every step (horizon None: check until the
    divergence guard stops the run); f2's horizon is the hinge-crossing
    count; f3's is the momentum phase plus the proof's explicit return
    count (l1^2 delta1^2) / (16 epsilon^3).
    """
    if regime == "f1_catches":
        return None, l1 * delta1
    if regime == "f2_catches":
        y1 = delta1 / epsilon + 0.5
        return int(math.floor((y1 - 1.0) / (eta * epsilon))), epsilon
    if regime == "f3_catches":
        phase1 = int(math.floor(1.0 / (1.0 - beta))) if beta < 1.0 else None
        if phase1 is None:
            return None, epsilon
        extra = int(math.floor(l1 * l1 * delta1 * delta1 / (16.0 * epsilon**3)))
        return phase1 + extra, epsilon
    raise InvalidParameterError(f"unknown regime {regime!r}")


def regime_start(
    regime: str, obj_builders: dict, l0: float, l1: float, epsilon: float, delta1: float
):
    """Build the named objective and its gap-calibrated start for a probe run."""
    if regime == "f1_catches":
        obj = obj_builders["f1"](l0, l1)
    elif regime == "f2_catches":
        obj = obj_builders["f2"](epsilon)
    else:
        obj = obj_builders["f3"](l0, l1, epsilon)
    return obj, init_point_for_gap(obj, delta1)
