"""Stochastic gradient oracles and the momentum-method divergence certificate.

Two noise models: zero-mean Gaussian scaled to meet the affine variance
budget sigma0^2 + sigma1^2*||G||^2 with equality, and the heavy-tailed
additive oracle with density K*exp(-sqrt(|z|)/c), K = 1/(4c^2). The latter
has all moments finite (variance 120*c^4), yet one gradient-method step on
an exponentially growing objective gives the next gradient an infinite
conditional expectation; divergence_certificate witnesses that numerically.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import (
    InvalidParameterError,
    NumericError,
    UnsupportedDimensionError,
)
from .objectives import PIECE_F1, ObjectiveSpec

KINDS = ("deterministic", "gaussian_affine", "heavy_sqrt_exp")


def calibrate_c(sigma0: float) -> float:
    """Density scale c giving the heavy-tailed oracle variance sigma0^2.

    With |z| = c^2*u^2, u ~ Gamma(2,1), E[z^2] = c^4*E[u^4] = 120*c^4.
    (tests cross-check this closed form against direct quadrature.)
    """
    if sigma0 <= 0:
        raise InvalidParameterError("sigma0 must be positive")
    return (sigma0 * sigma0 / 120.0) ** 0.25


@dataclass(frozen=True)
class OracleConfig:
    kind: str = "deterministic"
    sigma0: float = 1.0
    sigma1: float = 1.0
    seed: int = 0
    c: float = field(default=0.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown oracle kind {self.kind!r}")
        if self.sigma0 < 0:
            raise InvalidParameterError("sigma0 must be nonnegative")
        if self.kind != "deterministic" and self.sigma1 < 1.0:
            raise InvalidParameterError("sigma1 must be >= 1")
        if self.kind == "heavy_sqrt_exp" and self.c <= 0.0:
            object.__setattr__(self, "c", calibrate_c(self.sigma0))

    @property
    def is_stochastic(self) -> bool:
        return self.kind != "deterministic"


def make_rng(seed_parts) -> np.random.Generator:
    """Independent Philox stream keyed by a tuple of integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_parts)))


def sample(cfg: OracleConfig, true_grad, rng: np.random.Generator) -> np.ndarray:
    """One stochastic gradient; the caller owns the rng state."""
    G = np.atleast_1d(np.asarray(true_grad, dtype=float))
    if cfg.kind == "deterministic":
        return G.copy()
    if cfg.kind == "gaussian_affine":
        n2 = float(G @ G)
        s = math.sqrt(
            (cfg.sigma0 * cfg.sigma0 + (cfg.sigma1 * cfg.sigma1 - 1.0) * n2) / len(G)
        )
        return G + s * rng.standard_normal(len(G))
    if len(G) != 1:
        raise UnsupportedDimensionError("heavy_sqrt_exp oracle is 1-D only")
    return G + heavy_draws(cfg.c, 1, rng)


def heavy_draws(c: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws from density exp(-sqrt(|z|)/c)/(4c^2).

    Exact change of variables: u = sqrt(|z|)/c turns the density into the
    Gamma(2,1) law u*exp(-u), so |z| = c^2*u^2 with a uniform sign.
    """
    u = rng.gamma(2.0, 1.0, n)
    signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return signs * (c * c) * (u * u)


def pregenerate(cfg: OracleConfig, T: int, dim: int, rng: np.random.Generator):
    """Noise buffer consumed by the trajectory kernels, in draw order."""
    if cfg.kind == "deterministic":
        return np.empty(0)
    if cfg.kind == "gaussian_affine":
        return rng.standard_normal(T * dim)
    if dim != 1:
        raise UnsupportedDimensionError("heavy_sqrt_exp oracle is 1-D only")
    return heavy_draws(cfg.c, T, rng)


@dataclass(frozen=True)
class AffineVarianceReport:
    grads: list
    estimates: list
    bounds: list
    std_errors: list
    worst_slack: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "grad_norms": [float(np.linalg.norm(g)) for g in self.grads],
            "estimates": self.estimates,
            "bounds": self.bounds,
            "std_errors": self.std_errors,
            "worst_slack": self.worst_slack,
            "passed": self.passed,
        }


def verify_affine_variance(
    cfg: OracleConfig, grads, n_draws: int
) -> AffineVarianceReport:
    """Estimate E||g||^2 per test gradient; check it within 3 SE of the budget."""
    if n_draws < 10**4:
        raise InvalidParameterError("n_draws must be at least 1e4 per gradient")
    rng = make_rng((cfg.seed, 0xAFF1))
    ests, bounds, ses = [], [], []
    worst = -math.inf
    for G in grads:
        G = np.atleast_1d(np.asarray(G, dtype=float))
        n2 = float(G @ G)
        if cfg.kind == "deterministic":
            sq = np.full(n_draws, n2)
        elif cfg.kind == "gaussian_affine":
            s = math.sqrt(
                (cfg.sigma0**2 + (cfg.sigma1**2 - 1.0) * n2) / len(G)
            )
            draws = G[None, :] + s * rng.standard_normal((n_draws, len(G)))
            sq = np.einsum("ij,ij->i", draws, draws)
        else:
            if len(G) != 1:
                raise UnsupportedDimensionError("heavy_sqrt_exp oracle is 1-D only")
            draws = G[0] + heavy_draws(cfg.c, n_draws, rng)
            sq = draws * draws
        est = float(sq.mean())
        se = float(sq.std(ddof=1) / math.sqrt(n_draws))
        bound = cfg.sigma0**2 + cfg.sigma1**2 * n2
        ests.append(est)
        bounds.append(bound)
        ses.append(se)
        worst = max(worst, est - (bound + 3.0 * se))
    return AffineVarianceReport(
        grads=[np.atleast_1d(np.asarray(g, float)) for g in grads],
        estimates=ests,
        bounds=bounds,
        std_errors=ses,
        worst_slack=worst,
        passed=worst <= 0.0,
    )


@dataclass(frozen=True)
class DivergenceCertificate:
    window_bounds: list
    partial_integrals: list
    verdict: bool
    threshold: float

    def to_dict(self) -> dict:
        return {
            "window_bounds": [float(z) for z in self.window_bounds],
            "partial_integrals": [float(v) for v in self.partial_integrals],
            "verdict": self.verdict,
            "threshold": self.threshold,
        }


def _log_abs_grad(obj: ObjectiveSpec, x: float) -> float:
    a, b, _ = obj.piece_params[0]
    if x >= 1.0 / b:
        return math.log(a / b) + (b * x - 1.0)
    if x <= -1.0 / b:
        return math.log(a / b) + (-b * x - 1.0)
    ax = abs(a * x)
    return math.log(ax) if ax > 0.0 else -1e300


def default_windows(
    obj: ObjectiveSpec, w_t: float, eta: float, beta: float, c: float,
    threshold: float = 1e6,
) -> list:
    """Three nested windows [0, Z_k] with endpoints in the growth region.

    Each Z_k solves l1*b*Z - sqrt(Z)/c = target_k for exponent targets
    log(threshold) + {-14, +3.5, +21}, so consecutive partial integrals are
    separated by many orders of magnitude (no increment can underflow) and
    the last comfortably clears the threshold whenever b = eta*(1-beta) > 0.
    """
    b = eta * (1.0 - beta)
    if b <= 0.0:
        return [1e2, 1e3, 1e4]
    l1 = obj.piece_params[0][1]
    lb = l1 * b
    vertex = -1.0 / (4.0 * lb * c * c)  # minimum of the exponent over Z
    out = []
    for off in (-14.0, 3.5, 21.0):
        target = max(math.log(threshold) + off, 0.9 * vertex)
        disc = 1.0 / (c * c) + 4.0 * lb * target
        U = (1.0 / c + math.sqrt(disc)) / (2.0 * lb)
        out.append(U * U)
    return out


def divergence_certificate(
    obj: ObjectiveSpec,
    w_t: float,
    eta: float,
    beta: float,
    m_prev: float,
    windows,
    c: Optional[float] = None,
    sigma0: float = 1.0,
    threshold: float = 1e6,
) -> DivergenceCertificate:
    """Partial integrals of E[ |f'(w_next(z))| ] over z in [-Z, 0] per window.

    w_next(z) is one gradient-with-momentum step from w_t where the sampled
    gradient is f'(w_t) + z and z follows the heavy-tailed density. On the
    exponential branch the integrand grows like exp(l1*eta*(1-beta)*|z|),
    which dominates the exp(-sqrt(|z|)/c) tail for every eta*(1-beta) > 0;
    the verdict is true iff the partial integrals increase monotonically and
    the last one clears `threshold`.

    Integration runs in the substituted variable u = sqrt(|z|) with the
    integrand exponent-rescaled per segment, so spans of hundreds of orders
    of magnitude stay representable.
    """
    if obj.codes != (PIECE_F1,):
        raise InvalidParameterError("divergence_certificate expects an f1-kind objective")
    ws = [float(z) for z in windows]
    if any(z <= 0 for z in ws) or any(b <= a for a, b in zip(ws, ws[1:])):
        raise InvalidParameterError("windows must be positive and strictly increasing")
    if c is None:
        c = calibrate_c(sigma0)
    K = 1.0 / (4.0 * c * c)
    G = float(obj.grad([w_t])[0])
    a0 = w_t - eta * (1.0 - beta) * G - eta * beta * m_prev
    b0 = eta * (1.0 - beta)
    l1 = obj.piece_params[0][1]

    def log_phi(u: float) -> float:
        # integrand of int_0^U 2*K*u * e^{-u/c} * |f'(a0 + b0*u^2)| du
        x = a0 + b0 * u * u
        return math.log(2.0 * K * max(u, 1e-300)) - u / c + _log_abs_grad(obj, x)

    def seg_points(ua: float, ub: float) -> list:
        pts = []
        for kink in (1.0 / l1, -1.0 / l1):
            if b0 != 0.0:
                q = (kink - a0) / b0
                if q > 0:
                    u = math.sqrt(q)
                    if ua < u < ub:
                        pts.append(u)
        return sorted(pts)

    def integrate_segment(ua: float, ub: float) -> float:
        if ub <= ua:
            return 0.0
        probes = np.linspace(ua, ub, 257)
        M = max(log_phi(float(u)) for u in probes)
        if M == -1e300:
            return 0.0
        val, _ = integrate.quad(
            lambda u: math.exp(min(log_phi(u) - M, 700.0)),
            ua,
            ub,
            points=seg_points(ua, ub),
            limit=400,
        )
        if not math.isfinite(val):
            raise NumericError("divergence-certificate quadrature failed", step=0)
        logI = M + math.log(val) if val > 0.0 else -1e300
        return math.exp(logI) if logI < 690.0 else math.inf

    partials = []
    total = 0.0
    prev_u = 0.0
    for Z in ws:
        U = math.sqrt(Z)
        total += integrate_segment(prev_u, U)
        partials.append(total)
        prev_u = U

    increasing = all(
        later > earlier for earlier, later in zip(partials, partials[1:])
    )
    verdict = increasing and partials[-1] > threshold
    return DivergenceCertificate(
        window_bounds=ws,
        partial_integrals=partials,
        verdict=verdict,
        threshold=threshold,
    )

