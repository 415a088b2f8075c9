# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernels; bit-identical mirror of _kernels_py.

Keep every arithmetic expression in the same form and order as the pure
implementation. The extension is built with -ffp-contract=off so the C
compiler cannot fuse multiply-adds and perturb results.
"""

import math

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isfinite, sqrt

cnp.import_array()

cdef enum:
    C_OPT_ADAM = 0
    C_OPT_SGDM = 1
    C_OPT_ADAGRAD = 2
    C_NOISE_NONE = 0
    C_NOISE_GAUSS = 1
    C_NOISE_HEAVY = 2
    C_STATUS_COMPLETED = 0
    C_STATUS_DIVERGED = 1
    C_STATUS_NUMERIC = 2
    C_STATUS_ZERO_DIV = 3

OPT_ADAM = 0
OPT_SGDM = 1
OPT_ADAGRAD = 2

PIECE_F1 = 1
PIECE_F2 = 2
PIECE_F3 = 3
PIECE_QUAD = 4

NOISE_NONE = 0
NOISE_GAUSS = 1
NOISE_HEAVY = 2

STATUS_COMPLETED = 0
STATUS_DIVERGED = 1
STATUS_NUMERIC = 2
STATUS_ZERO_DIV = 3

DEF MAX_DIM = 16
DEF EXP_GUARD = 709.0

cdef extern from "math.h":
    double INFINITY
    double NAN


cdef inline double _pexp(double t) nogil:
    if t > EXP_GUARD:
        return INFINITY
    return exp(t)


cdef double c_piece_value(long code, double a, double b, double c, double x) nogil:
    if code == 1:  # F1
        if x >= 1.0 / b:
            return a * _pexp(b * x - 1.0) / (b * b)
        if x >= -1.0 / b:
            return a * x * x / 2.0 + a / (2.0 * b * b)
        return a * _pexp(-b * x - 1.0) / (b * b)
    if code == 2:  # F2
        if x >= 1.0:
            return a * (x - 1.0) + a / 2.0
        if x >= -1.0:
            return a * x * x / 2.0
        return -a * (x + 1.0) + a / 2.0
    if code == 3:  # F3
        if x >= 1.0 / b:
            return c * (x - 1.0 / b) + c / (2.0 * b) + a / (2.0 * b * b)
        if x >= 0.0:
            return c * b * x * x / 2.0 + a / (2.0 * b * b)
        if x >= -1.0 / b:
            return a * x * x / 2.0 + a / (2.0 * b * b)
        return a * _pexp(-b * x - 1.0) / (b * b)
    # QUAD
    return a * x * x / 2.0


cdef double c_piece_grad(long code, double a, double b, double c, double x) nogil:
    if code == 1:
        if x >= 1.0 / b:
            return a * _pexp(b * x - 1.0) / b
        if x >= -1.0 / b:
            return a * x
        return -a * _pexp(-b * x - 1.0) / b
    if code == 2:
        if x >= 1.0:
            return a
        if x >= -1.0:
            return a * x
        return -a
    if code == 3:
        if x >= 1.0 / b:
            return c
        if x >= 0.0:
            return c * b * x
        if x >= -1.0 / b:
            return a * x
        return -a * _pexp(-b * x - 1.0) / b
    return a * x


def piece_value(code, a, b, c, x):
    return c_piece_value(code, a, b, c, x)


def piece_grad(code, a, b, c, x):
    return c_piece_grad(code, a, b, c, x)


def run_loop(
    int opt,
    codes,
    pp,
    double f_star,
    w0,
    m0,
    double nu0,
    long T,
    double eta0,
    eta_arr,
    double beta1,
    double beta2_0,
    beta2_arr,
    double lam,
    int noise_kind,
    double sigma0,
    double sigma1,
    noise,
    long record_every,
    double guard,
    double eps_stop,
    int record_full,
):
    """See _kernels_py.run_loop for the contract."""
    cdef int dim = len(codes)
    if dim > MAX_DIM:
        raise ValueError(f"kernel supports at most {MAX_DIM} coordinates")

    cdef long[16] kode
    cdef double[16] pa, pb, pc, w, m, g, G
    cdef int i
    for i in range(dim):
        kode[i] = codes[i]
        pa[i] = pp[i][0]
        pb[i] = pp[i][1]
        pc[i] = pp[i][2]
        w[i] = w0[i]
        m[i] = m0[i]

    cdef double[::1] etas_mv
    cdef double[::1] b2s_mv
    cdef double[::1] zs_mv
    cdef bint have_eta = len(eta_arr) > 0
    cdef bint have_b2 = len(beta2_arr) > 0
    cdef bint have_noise = noise_kind != NOISE_NONE
    etas_mv = np.ascontiguousarray(eta_arr, dtype=np.float64) if have_eta \
        else np.empty(0, dtype=np.float64)
    b2s_mv = np.ascontiguousarray(beta2_arr, dtype=np.float64) if have_b2 \
        else np.empty(0, dtype=np.float64)
    zs_mv = np.ascontiguousarray(noise, dtype=np.float64) if have_noise \
        else np.empty(0, dtype=np.float64)

    cdef long n_rows = T // record_every + 1
    rows_np = np.empty((n_rows, 5), dtype=np.float64)
    cdef double[:, ::1] rows = rows_np
    cdef long n_rec = 0
    gbuf_np = np.empty(T if record_full else 0, dtype=np.float64)
    cdef double[::1] gbuf = gbuf_np

    cdef double nu = nu0
    cdef double min_gn = INFINITY
    cdef double sum_gn = 0.0
    cdef long steps_run = 0
    cdef int status = STATUS_COMPLETED
    cdef long stop_t = 0
    cdef long first_below = 0

    cdef long t, base
    cdef double s2, gn, gsq, s, gi, eta, beta2, gap, val, sn2, denom, d, r, nu_rec
    cdef bint need_row, bad

    with nogil:
        for t in range(1, T + 1):
            s2 = 0.0
            for i in range(dim):
                gi = c_piece_grad(kode[i], pa[i], pb[i], pc[i], w[i])
                G[i] = gi
                s2 += gi * gi
            gn = sqrt(s2)
            if not isfinite(gn):
                status = C_STATUS_DIVERGED
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

            if noise_kind == C_NOISE_NONE:
                for i in range(dim):
                    g[i] = G[i]
                gsq = s2
            elif noise_kind == C_NOISE_GAUSS:
                s = sqrt((sigma0 * sigma0 + (sigma1 * sigma1 - 1.0) * s2) / dim)
                gsq = 0.0
                base = (t - 1) * dim
                for i in range(dim):
                    gi = G[i] + s * zs_mv[base + i]
                    g[i] = gi
                    gsq += gi * gi
            else:
                gi = G[0] + zs_mv[t - 1]
                g[0] = gi
                gsq = gi * gi
            if not isfinite(gsq):
                status = C_STATUS_NUMERIC
                stop_t = t
                break

            eta = etas_mv[t - 1] if have_eta else eta0
            beta2 = b2s_mv[t - 1] if have_b2 else beta2_0

            need_row = t % record_every == 0
            gap = 0.0
            if need_row:
                val = 0.0
                for i in range(dim):
                    val += c_piece_value(kode[i], pa[i], pb[i], pc[i], w[i])
                gap = val - f_star

            sn2 = 0.0
            if opt == C_OPT_ADAM:
                nu = beta2 * nu + (1.0 - beta2) * gsq
                denom = lam + sqrt(nu)
                for i in range(dim):
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
                    d = eta * m[i] / denom
                    w[i] -= d
                    sn2 += d * d
                nu_rec = nu
            elif opt == C_OPT_SGDM:
                for i in range(dim):
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
                    d = eta * m[i]
                    w[i] -= d
                    sn2 += d * d
                nu_rec = NAN
            else:
                nu += gsq
                if nu <= 0.0:
                    status = C_STATUS_ZERO_DIV
                    stop_t = t
                    break
                r = sqrt(nu)
                for i in range(dim):
                    d = eta * g[i] / r
                    w[i] -= d
                    sn2 += d * d
                nu_rec = nu

            if need_row:
                rows[n_rec, 0] = t
                rows[n_rec, 1] = gn
                rows[n_rec, 2] = gap
                rows[n_rec, 3] = sqrt(sn2)
                rows[n_rec, 4] = nu_rec
                n_rec += 1

            bad = False
            for i in range(dim):
                if not isfinite(w[i]) or fabs(w[i]) > guard:
                    bad = True
                    break
            if bad:
                status = C_STATUS_DIVERGED
                stop_t = t + 1
                break

    return {
        "rows": rows_np[:n_rec],
        "grad_norms": gbuf_np[:steps_run].copy() if record_full else None,
        "min_grad": min_gn,
        "mean_grad": sum_gn / steps_run if steps_run else math.nan,
        "steps_run": steps_run,
        "status": status,
        "stop_t": stop_t,
        "first_below": first_below,
        "w_final": np.array([w[i] for i in range(dim)], dtype=np.float64),
        "m_final": np.array([m[i] for i in range(dim)], dtype=np.float64),
        "nu_final": nu,
    }
