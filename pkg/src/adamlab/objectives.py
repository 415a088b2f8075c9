"""Piecewise analytic test objectives with exact gradients.

The four 1-D functions are the adversarial constructions used by the
gradient-method lower bounds: two-sided exponential-over-quadratic (f1),
linear-over-quadratic hinge (f2, and its AdaGrad twin g2), and the
asymmetric exponential/quadratic/linear hybrid (f3). All are C^1, lower
bounded, and satisfy the relaxed smoothness bound |f''| <= l0 + l1*|f'|
wherever twice differentiable.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels_py as _pk
from .errors import GapDomainError, InvalidParameterError

PIECE_F1 = _pk.PIECE_F1
PIECE_F2 = _pk.PIECE_F2
PIECE_F3 = _pk.PIECE_F3
PIECE_QUAD = _pk.PIECE_QUAD

# natural side of the gap-calibrated start, per piece kind
_DEFAULT_SIDE = {PIECE_F1: +1, PIECE_F2: +1, PIECE_F3: -1, PIECE_QUAD: +1}


@dataclass(frozen=True)
class ObjectiveSpec:
    """A separable objective: one analytic piece per coordinate."""

    name: str
    dim: int
    l0: float
    l1: float
    f_star: float
    params: dict = field(default_factory=dict)
    codes: tuple = ()
    piece_params: tuple = ()  # one (a, b, c) triple per coordinate

    def value(self, w) -> float:
        w = np.atleast_1d(np.asarray(w, dtype=float))
        total = 0.0
        for i in range(self.dim):
            a, b, c = self.piece_params[i]
            total += _pk.piece_value(self.codes[i], a, b, c, w[i])
        return total

    def grad(self, w) -> np.ndarray:
        w = np.atleast_1d(np.asarray(w, dtype=float))
        out = np.empty(self.dim)
        for i in range(self.dim):
            a, b, c = self.piece_params[i]
            out[i] = _pk.piece_grad(self.codes[i], a, b, c, w[i])
        return out

    def grad_norm(self, w) -> float:
        return float(np.linalg.norm(self.grad(w)))

    def kinks(self) -> list:
        """Branch-boundary locations, as a list per coordinate."""
        out = []
        for i in range(self.dim):
            code = self.codes[i]
            a, b, c = self.piece_params[i]
            if code == PIECE_F1:
                out.append([-1.0 / b, 1.0 / b])
            elif code == PIECE_F2:
                out.append([-1.0, 1.0])
            elif code == PIECE_F3:
                out.append([-1.0 / b, 0.0, 1.0 / b])
            else:
                out.append([])
        return out

    def parts(self) -> list:
        """Split a separable objective into its 1-D coordinate objectives."""
        return [
            ObjectiveSpec(
                name=f"{self.name}[{i}]",
                dim=1,
                l0=self.l0,
                l1=self.l1,
                f_star=float(
                    _pk.piece_value(self.codes[i], *self.piece_params[i], 0.0)
                ),
                params=dict(self.params),
                codes=(self.codes[i],),
                piece_params=(self.piece_params[i],),
            )
            for i in range(self.dim)
        ]


def build_f1(l0: float, l1: float) -> ObjectiveSpec:
    """Two-sided exponential with a quadratic cap: min value l0/(2*l1^2) at 0."""
    if l0 <= 0 or l1 <= 0:
        raise InvalidParameterError("build_f1 requires l0 > 0 and l1 > 0")
    return ObjectiveSpec(
        name="f1",
        dim=1,
        l0=l0,
        l1=l1,
        f_star=l0 / (2.0 * l1 * l1),
        params={"l0": l0, "l1": l1},
        codes=(PIECE_F1,),
        piece_params=((l0, l1, 0.0),),
    )


def build_f2(epsilon: float) -> ObjectiveSpec:
    """Symmetric hinge with slope epsilon; smoothness certified as (epsilon, 0)."""
    if epsilon <= 0:
        raise InvalidParameterError("build_f2 requires epsilon > 0")
    return ObjectiveSpec(
        name="f2",
        dim=1,
        l0=epsilon,
        l1=0.0,
        f_star=0.0,
        params={"epsilon": epsilon},
        codes=(PIECE_F2,),
        piece_params=((epsilon, 0.0, 0.0),),
    )


def build_g2(epsilon: float) -> ObjectiveSpec:
    """The AdaGrad counterexample; identical to f2 up to its name."""
    spec = build_f2(epsilon)
    return ObjectiveSpec(
        name="g2",
        dim=1,
        l0=spec.l0,
        l1=spec.l1,
        f_star=spec.f_star,
        params=dict(spec.params),
        codes=spec.codes,
        piece_params=spec.piece_params,
    )


def build_f3(l0: float, l1: float, epsilon: float) -> ObjectiveSpec:
    """Exponential left tail, quadratic well, epsilon-slope right tail.

    The linear branch is anchored at z = 1/l1 so the function stays C^1 for
    every l1 > 0; at l1 = 1 this is exactly the published four-branch form.
    """
    if l0 <= 0 or l1 <= 0 or epsilon <= 0:
        raise InvalidParameterError("build_f3 requires positive l0, l1, epsilon")
    return ObjectiveSpec(
        name="f3",
        dim=1,
        l0=l0,
        l1=l1,
        f_star=l0 / (2.0 * l1 * l1),
        params={"l0": l0, "l1": l1, "epsilon": epsilon},
        codes=(PIECE_F3,),
        piece_params=((l0, l1, epsilon),),
    )


def build_quadratic(l0: float) -> ObjectiveSpec:
    """l0-smooth quadratic bowl; handy as a control for the checkers."""
    if l0 <= 0:
        raise InvalidParameterError("build_quadratic requires l0 > 0")
    return ObjectiveSpec(
        name="quadratic",
        dim=1,
        l0=l0,
        l1=0.0,
        f_star=0.0,
        params={"l0": l0},
        codes=(PIECE_QUAD,),
        piece_params=((l0, 0.0, 0.0),),
    )


def build_composite(parts: list) -> ObjectiveSpec:
    """Separable sum of 1-D objectives, one per coordinate.

    Declared constants are the coordinatewise maxima, which the smoothness
    certificate then verifies rather than assumes.
    """
    if not parts:
        raise InvalidParameterError("build_composite requires at least one part")
    for p in parts:
        if p.dim != 1:
            raise InvalidParameterError("composite parts must be 1-D")
    name = "composite:" + "+".join(p.name for p in parts)
    merged_params = {}
    for p in parts:
        for k, v in p.params.items():
            merged_params.setdefault(k, v)
    return ObjectiveSpec(
        name=name,
        dim=len(parts),
        l0=max(p.l0 for p in parts),
        l1=max(p.l1 for p in parts),
        f_star=sum(p.f_star for p in parts),
        params=merged_params,
        codes=tuple(p.codes[0] for p in parts),
        piece_params=tuple(p.piece_params[0] for p in parts),
    )


def from_id(obj_id: str, params: dict) -> ObjectiveSpec:
    """Build an objective from its string id plus a parameter map.

    Ids: "f1", "f2", "f3", "g2", "quadratic", or "composite:<id>+<id>+...".
    """
    builders = {
        "f1": lambda p: build_f1(p["l0"], p["l1"]),
        "f2": lambda p: build_f2(p["epsilon"]),
        "f3": lambda p: build_f3(p["l0"], p["l1"], p["epsilon"]),
        "g2": lambda p: build_g2(p["epsilon"]),
        "quadratic": lambda p: build_quadratic(p["l0"]),
    }
    if obj_id.startswith("composite:"):
        part_ids = obj_id[len("composite:"):].split("+")
        try:
            return build_composite([builders[p](params) for p in part_ids])
        except KeyError as exc:
            raise InvalidParameterError(f"unknown composite part {exc}") from exc
    if obj_id in builders:
        try:
            return builders[obj_id](params)
        except KeyError as exc:
            raise InvalidParameterError(
                f"objective {obj_id!r} missing parameter {exc}"
            ) from exc
    raise InvalidParameterError(f"unknown objective id {obj_id!r}")


def _init_1d(code, a, b, c, delta1, side):
    if side is None:
        side = _DEFAULT_SIDE[code]
    if code == PIECE_F1:
        arg = 0.5 + b * b * delta1 / a
        if arg <= 1.0:
            raise GapDomainError(
                f"f1 gap {delta1} too small: needs delta1 > l0/(2 l1^2)"
            )
        return side * (1.0 + math.log(arg)) / b
    if code == PIECE_F2:
        if delta1 < a / 2.0:
            raise GapDomainError(f"f2 gap {delta1} below the hinge value eps/2")
        return side * (delta1 / a + 0.5)
    if code == PIECE_F3:
        if side < 0:
            arg = 0.5 + b * b * delta1 / a
            if arg <= 1.0:
                raise GapDomainError(
                    f"f3 gap {delta1} too small: needs delta1 > l0/(2 l1^2)"
                )
            return -(1.0 + math.log(arg)) / b
        if delta1 < c / (2.0 * b):
            raise GapDomainError(f"f3 gap {delta1} unreachable on the linear side")
        return 1.0 / b + (delta1 - c / (2.0 * b)) / c
    if code == PIECE_QUAD:
        return side * math.sqrt(2.0 * delta1 / a)
    raise InvalidParameterError(f"unknown piece code {code}")


def init_point_for_gap(
    obj: ObjectiveSpec, delta1: float, side: Optional[int] = None
) -> np.ndarray:
    """Starting point with value(w) - f_star == delta1, per coordinate.

    For composites each coordinate receives the full per-part gap delta1 on
    its natural side (exponential tails for f1/f3, the positive slope for
    f2/g2); pass side=+1/-1 to override for 1-D objectives.
    """
    if delta1 <= 0:
        raise InvalidParameterError("delta1 must be positive")
    out = np.empty(obj.dim)
    for i in range(obj.dim):
        a, b, c = obj.piece_params[i]
        out[i] = _init_1d(obj.codes[i], a, b, c, delta1, side if obj.dim == 1 else None)
    return out


@dataclass(frozen=True)
class SmoothnessCert:
    pairs_tested: int
    max_violation: float
    violating_pair: Optional[tuple] = None
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        return bool(self.max_violation <= self.tolerance)


def certify_smoothness(
    obj: ObjectiveSpec,
    n_pairs: int,
    radius: float,
    seed: int,
    box=(-5.0, 5.0),
    l0: Optional[float] = None,
    l1: Optional[float] = None,
) -> SmoothnessCert:
    """Sampled two-point check of the relaxed smoothness bound.

    Pairs are drawn inside `box` with separation at most min(radius, 1/l1);
    for each pair the reference gradient in the bound l0 + l1*||grad|| is
    taken at the endpoint with the larger gradient norm. (With the smaller
    endpoint as reference the two-point form is provably violated on
    exponential branches at finite separations; the larger-endpoint form is
    exactly what integrating the local bound along the segment yields for
    these objectives, whose gradient norm peaks at segment endpoints.)
    """
    if n_pairs < 1:
        raise InvalidParameterError("n_pairs must be >= 1")
    L0 = obj.l0 if l0 is None else l0
    L1 = obj.l1 if l1 is None else l1
    r_cap = radius if L1 == 0.0 else min(radius, 1.0 / L1)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    lo, hi = box

    worst = -math.inf
    worst_pair = None
    for _ in range(n_pairs):
        w1 = rng.uniform(lo, hi, size=obj.dim)
        direction = rng.standard_normal(obj.dim)
        nrm = np.linalg.norm(direction)
        if nrm == 0.0:
            continue
        w2 = w1 + direction / nrm * rng.uniform(0.0, r_cap)
        ga, gb = obj.grad(w1), obj.grad(w2)
        na, nb = np.linalg.norm(ga), np.linalg.norm(gb)
        gref = max(na, nb)
        d = np.linalg.norm(w1 - w2)
        lhs = np.linalg.norm(ga - gb)
        rhs = (L0 + L1 * gref) * d
        viol = (lhs - rhs) / max(1.0, rhs)
        if viol > worst:
            worst = viol
            worst_pair = (w1.copy(), w2.copy())
    tol = 1e-9
    return SmoothnessCert(
        pairs_tested=n_pairs,
        max_violation=float(worst),
        violating_pair=worst_pair if worst > tol else None,
        tolerance=tol,
    )
