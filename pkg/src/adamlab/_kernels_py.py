"""Pure-Python trajectory kernels.

This module is the semantic reference for the compiled extension in
``_kernels.pyx``: both implement the same arithmetic in the same order so
trajectories are bit-identical across backends (the extension is compiled
with FMA contraction disabled for this reason).
"""

import math

import numpy as np

# optimizer codes
OPT_ADAM = 0
OPT_SGDM = 1
OPT_ADAGRAD = 2

# piecewise-objective codes
PIECE_F1 = 1
PIECE_F2 = 2
PIECE_F3 = 3
PIECE_QUAD = 4

# noise codes
NOISE_NONE = 0
NOISE_GAUSS = 1
NOISE_HEAVY = 2

# terminal status codes
STATUS_COMPLETED = 0
STATUS_DIVERGED = 1
STATUS_NUMERIC = 2
STATUS_ZERO_DIV = 3

# exp() overflows double just above 709.78; both backends clamp at the same
# threshold so they saturate to inf on the same step.
_EXP_GUARD = 709.0

_INF = math.inf


def _pexp(t):
    return _INF if t > _EXP_GUARD else math.exp(t)


def piece_value(code, a, b, c, x):
    """Value of one 1-D piece. Params (a, b, c) by code:
    F1 (a=l0, b=l1), F2 (a=eps), F3 (a=l0, b=l1, c=eps), QUAD (a=l0)."""
    if code == PIECE_F1:
        if x >= 1.0 / b:
            return a * _pexp(b * x - 1.0) / (b * b)
        if x >= -1.0 / b:
            return a * x * x / 2.0 + a / (2.0 * b * b)
        return a * _pexp(-b * x - 1.0) / (b * b)
    if code == PIECE_F2:
        if x >= 1.0:
            return a * (x - 1.0) + a / 2.0
        if x >= -1.0:
            return a * x * x / 2.0
        return -a * (x + 1.0) + a / 2.0
    if code == PIECE_F3:
        if x >= 1.0 / b:
            return c * (x - 1.0 / b) + c / (2.0 * b) + a / (2.0 * b * b)
        if x >= 0.0:
            return c * b * x * x / 2.0 + a / (2.0 * b * b)
        if x >= -1.0 / b:
            return a * x * x / 2.0 + a / (2.0 * b * b)
        return a * _pexp(-b * x - 1.0) / (b * b)
    if code == PIECE_QUAD:
        return a * x * x / 2.0
    raise ValueError(f"unknown piece code {code}")


def piece_grad(code, a, b, c, x):
    """Derivative of one 1-D piece; boundary points take the right branch."""
    if code == PIECE_F1:
        if x >= 1.0 / b:
            return a * _pexp(b * x - 1.0) / b
        if x >= -1.0 / b:
            return a * x
        return -a * _pexp(-b * x - 1.0) / b
    if code == PIECE_F2:
        if x >= 1.0:
            return a
        if x >= -1.0:
            return a * x
        return -a
    if code == PIECE_F3:
        if x >= 1.0 / b:
            return c
        if x >= 0.0:
            return c * b * x
        if x >= -1.0 / b:
            return a * x
        return -a * _pexp(-b * x - 1.0) / b
    if code == PIECE_QUAD:
        return a * x
    raise ValueError(f"unknown piece code {code}")


def run_loop(
    opt,
    codes,
    pp,
    f_star,
    w0,
    m0,
    nu0,
    T,
    eta0,
    eta_arr,
    beta1,
    beta2_0,
    beta2_arr,
    lam,
    noise_kind,
    sigma0,
    sigma1,
    noise,
    record_every,
    guard,
    eps_stop,
    record_full,
):
    """Iterate one optimizer for up to T steps over a separable objective.

    codes/pp describe one piece per coordinate; nu0 doubles as the AdaGrad
    initial squared-norm accumulator. eta_arr/beta2_arr override the scalar
    values per step when nonempty. noise holds pregenerated draws: standard
    normals (T*dim) for the Gaussian oracle, additive values (T) for the
    heavy-tailed one. eps_stop > 0 stops the loop at the first iterate whose
    true gradient norm falls below it.

    Returns a dict with recorded rows (t, grad_norm, gap, step_norm, nu),
    optional full-resolution gradient norms, running min/mean, terminal
    status and final state.
    """
    dim = len(codes)
    codes = list(codes)
    pa = [float(pp[i][0]) for i in range(dim)]
    pb = [float(pp[i][1]) for i in range(dim)]
    pc = [float(pp[i][2]) for i in range(dim)]
    w = [float(v) for v in w0]
    m = [float(v) for v in m0]
    g = [0.0] * dim
    G = [0.0] * dim
    nu = float(nu0)

    have_eta = len(eta_arr) > 0
    have_b2 = len(beta2_arr) > 0
    etas = list(eta_arr) if have_eta else None
    b2s = list(beta2_arr) if have_b2 else None
    # python-list indexing is faster per step; skip it for huge buffers
    if noise_kind != NOISE_NONE:
        zs = noise.tolist() if len(noise) <= 2**22 else noise
    else:
        zs = None

    n_rows = T // record_every + 1
    rows = np.empty((n_rows, 5), dtype=np.float64)
    n_rec = 0
    gbuf = np.empty(T, dtype=np.float64) if record_full else None

    min_gn = _INF
    sum_gn = 0.0
    steps_run = 0
    status = STATUS_COMPLETED
    stop_t = 0
    first_below = 0

    for t in range(1, T + 1):
        s2 = 0.0
        for i in range(dim):
            Gi = piece_grad(codes[i], pa[i], pb[i], pc[i], w[i])
            G[i] = Gi
            s2 += Gi * Gi
        gn = math.sqrt(s2)
        if not math.isfinite(gn):
            # the exponential tails are the only way our objectives overflow
            status = STATUS_DIVERGED
            stop_t = t
            break
        steps_run = t
        sum_gn += gn
        if gn < min_gn:
            min_gn = gn
        if record_full:
            gbuf[t - 1] = gn
        if eps_stop > 0.0 and gn < eps_stop:
            first_below = t
            break

        if noise_kind == NOISE_NONE:
            for i in range(dim):
                g[i] = G[i]
            gsq = s2
        elif noise_kind == NOISE_GAUSS:
            s = math.sqrt((sigma0 * sigma0 + (sigma1 * sigma1 - 1.0) * s2) / dim)
            gsq = 0.0
            base = (t - 1) * dim
            for i in range(dim):
                gi = G[i] + s * zs[base + i]
                g[i] = gi
                gsq += gi * gi
        else:
            gi = G[0] + zs[t - 1]
            g[0] = gi
            gsq = gi * gi
        if not math.isfinite(gsq):
            status = STATUS_NUMERIC
            stop_t = t
            break

        eta = etas[t - 1] if have_eta else eta0
        beta2 = b2s[t - 1] if have_b2 else beta2_0

        need_row = t % record_every == 0
        gap = 0.0
        if need_row:
            val = 0.0
            for i in range(dim):
                val += piece_value(codes[i], pa[i], pb[i], pc[i], w[i])
            gap = val - f_star

        sn2 = 0.0
        if opt == OPT_ADAM:
            nu = beta2 * nu + (1.0 - beta2) * gsq
            denom = lam + math.sqrt(nu)
            for i in range(dim):
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
                d = eta * m[i] / denom
                w[i] -= d
                sn2 += d * d
            nu_rec = nu
        elif opt == OPT_SGDM:
            for i in range(dim):
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
                d = eta * m[i]
                w[i] -= d
                sn2 += d * d
            nu_rec = math.nan
        else:
            nu += gsq
            if nu <= 0.0:
                status = STATUS_ZERO_DIV
                stop_t = t
                break
            r = math.sqrt(nu)
            for i in range(dim):
                d = eta * g[i] / r
                w[i] -= d
                sn2 += d * d
            nu_rec = nu

        if need_row:
            rows[n_rec, 0] = t
            rows[n_rec, 1] = gn
            rows[n_rec, 2] = gap
            rows[n_rec, 3] = math.sqrt(sn2)
            rows[n_rec, 4] = nu_rec
            n_rec += 1

        bad = False
        for i in range(dim):
            if not math.isfinite(w[i]) or abs(w[i]) > guard:
                bad = True
                break
        if bad:
            status = STATUS_DIVERGED
            stop_t = t + 1
            break

    return {
        "rows": rows[:n_rec],
        "grad_norms": gbuf[:steps_run].copy() if record_full else None,
        "min_grad": min_gn,
        "mean_grad": sum_gn / steps_run if steps_run else math.nan,
        "steps_run": steps_run,
        "status": status,
        "stop_t": stop_t,
        "first_below": first_below,
        "w_final": np.array(w, dtype=np.float64),
        "m_final": np.array(m, dtype=np.float64),
        "nu_final": nu,
    }
