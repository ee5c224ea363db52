"""Numba kernels for the flow maps and the tangent cocycle loop.

Status codes returned by kernels: 0 ok, 1 integrator failure, 2 frame rank
collapse, 3 renormalization stride too long (log-stretch above 30).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

ROTATION = 0
TOP = 1

OK = 0
INTEGRATOR_FAILURE = 1
RANK_COLLAPSE = 2
STRIDE_OVERFLOW = 3

MAX_LOG_STRETCH = 30.0

# Dormand-Prince 5(4)
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

MAX_STEPS = 1_000_000
STEP_FLOOR = 1e-14


@njit(cache=True)
def _top_rhs(y, c0, c1, c2, ncomp, out):
    x0, x1, x2 = y[0], y[1], y[2]
    out[0] = c0 * x1 * x2
    out[1] = c1 * x0 * x2
    out[2] = c2 * x0 * x1
    if ncomp > 3:
        # dJ/dt = A(x) J, J stored row-major in y[3:12]
        a01, a02 = c0 * x2, c0 * x1
        a10, a12 = c1 * x2, c1 * x0
        a20, a21 = c2 * x1, c2 * x0
        for col in range(3):
            j0 = y[3 + col]
            j1 = y[6 + col]
            j2 = y[9 + col]
            out[3 + col] = a01 * j1 + a02 * j2
            out[6 + col] = a10 * j0 + a12 * j2
            out[9 + col] = a20 * j0 + a21 * j1


@njit(cache=True)
def top_integrate(y, c0, c1, c2, t, tol, ncomp, work):
    """Advance the Euler top in ``y`` (3 states, optionally 9 Jacobian entries) by ``t``.

    ``work`` is a (9, 12) scratch array.  Returns (status, last error norm).
    """
    if t == 0.0:
        return OK, 0.0
    k1, k2, k3, k4, k5, k6, k7 = work[0], work[1], work[2], work[3], work[4], work[5], work[6]
    ytmp = work[7]
    ynew = work[8]
    xs = max(abs(y[0]), abs(y[1]), abs(y[2]))
    if xs == 0.0:
        return OK, 0.0
    rate = max(abs(c0), abs(c1), abs(c2)) * xs
    direction = 1.0 if t > 0 else -1.0
    remaining = abs(t)
    h = remaining
    if rate > 0.0:
        h = min(h, 0.5 / rate)
    _top_rhs(y, c0, c1, c2, ncomp, k1)
    err = 0.0
    steps = 0
    while remaining > 0.0:
        if h > remaining:
            h = remaining
        hs = direction * h
        for i in range(ncomp):
            ytmp[i] = y[i] + hs * _A21 * k1[i]
        _top_rhs(ytmp, c0, c1, c2, ncomp, k2)
        for i in range(ncomp):
            ytmp[i] = y[i] + hs * (_A31 * k1[i] + _A32 * k2[i])
        _top_rhs(ytmp, c0, c1, c2, ncomp, k3)
        for i in range(ncomp):
            ytmp[i] = y[i] + hs * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _top_rhs(ytmp, c0, c1, c2, ncomp, k4)
        for i in range(ncomp):
            ytmp[i] = y[i] + hs * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        _top_rhs(ytmp, c0, c1, c2, ncomp, k5)
        for i in range(ncomp):
            ytmp[i] = y[i] + hs * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        _top_rhs(ytmp, c0, c1, c2, ncomp, k6)
        for i in range(ncomp):
            ynew[i] = y[i] + hs * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i])
        _top_rhs(ynew, c0, c1, c2, ncomp, k7)
        err = 0.0
        for i in range(ncomp):
            e = hs * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i])
            if i < 3:
                sc = tol * xs
            else:
                sc = tol * max(1.0, abs(y[i]), abs(ynew[i]))
            r = abs(e) / sc
            if r > err:
                err = r
        if err <= 1.0:
            for i in range(ncomp):
                y[i] = ynew[i]
                k1[i] = k7[i]
            remaining -= h
            if err == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * err ** (-0.2)))
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** (-0.2))
        steps += 1
        if remaining > 0.0 and (h < STEP_FLOOR * abs(t) or steps > MAX_STEPS):
            return INTEGRATOR_FAILURE, err
    return OK, err


@njit(cache=True)
def rotation_apply(x, p, q, r, c, t):
    """Rotate (x_p, x_q) by angle ``c * x_r * t``; returns (cos, sin)."""
    theta = c * x[r] * t
    cs = math.cos(theta)
    sn = math.sin(theta)
    xp = x[p]
    xq = x[q]
    x[p] = xp * cs + xq * sn
    x[q] = -xp * sn + xq * cs
    return cs, sn


@njit(cache=True)
def apply_field(kind, i0, i1, i2, c0, c1, c2, t, tol, x, Q, k, want_frame, y, work):
    """Flow one splitting field for time ``t``; update rows of ``Q`` if requested."""
    if t == 0.0:
        return OK
    if kind == ROTATION:
        cs, sn = rotation_apply(x, i0, i1, i2, c0, t)
        if want_frame:
            s_p = c0 * t * x[i1]
            s_q = -c0 * t * x[i0]
            for col in range(k):
                qp = Q[i0, col]
                qq = Q[i1, col]
                qr = Q[i2, col]
                Q[i0, col] = cs * qp + sn * qq + s_p * qr
                Q[i1, col] = -sn * qp + cs * qq + s_q * qr
        return OK
    y[0] = x[i0]
    y[1] = x[i1]
    y[2] = x[i2]
    ncomp = 3
    if want_frame:
        ncomp = 12
        for a in range(9):
            y[3 + a] = 0.0
        y[3] = 1.0
        y[7] = 1.0
        y[11] = 1.0
    status, err = top_integrate(y, c0, c1, c2, t, tol, ncomp, work)
    if status != OK:
        return status
    x[i0] = y[0]
    x[i1] = y[1]
    x[i2] = y[2]
    if want_frame:
        for col in range(k):
            q0 = Q[i0, col]
            q1 = Q[i1, col]
            q2 = Q[i2, col]
            Q[i0, col] = y[3] * q0 + y[4] * q1 + y[5] * q2
            Q[i1, col] = y[6] * q0 + y[7] * q1 + y[8] * q2
            Q[i2, col] = y[9] * q0 + y[10] * q1 + y[11] * q2
    return OK


@njit(cache=True)
def project_frame(x, Q, weights, proj_tol, N, P):
    """Remove components of Q along the orthonormalized conserved gradients.

    ``N`` (nc x D) and ``P`` (nc x k) are scratch.  Returns the largest leak
    found before projecting; nothing is changed if it is below ``proj_tol``.
    """
    nc = weights.shape[0]
    D = x.shape[0]
    k = Q.shape[1]
    for a in range(nc):
        for i in range(D):
            N[a, i] = weights[a, i] * x[i]
        for b in range(a):
            dot = 0.0
            for i in range(D):
                dot += N[a, i] * N[b, i]
            for i in range(D):
                N[a, i] -= dot * N[b, i]
        nrm = 0.0
        for i in range(D):
            nrm += N[a, i] * N[a, i]
        nrm = math.sqrt(nrm)
        if nrm > 0.0:
            for i in range(D):
                N[a, i] /= nrm
    leak = 0.0
    for a in range(nc):
        for col in range(k):
            dot = 0.0
            for i in range(D):
                dot += N[a, i] * Q[i, col]
            P[a, col] = dot
            if abs(dot) > leak:
                leak = abs(dot)
    if leak > proj_tol:
        for a in range(nc):
            for col in range(k):
                pa = P[a, col]
                for i in range(D):
                    Q[i, col] -= pa * N[a, i]
    return leak


@njit(cache=True)
def orthonormalize(Q, logd):
    """In-place thin QR by classical Gram-Schmidt with one reorthogonalization.

    ``logd[j]`` receives log R_jj (R_jj > 0).  Returns OK, RANK_COLLAPSE, or
    STRIDE_OVERFLOW when a column norm is no longer finite.
    """
    D, k = Q.shape
    for j in range(k):
        r_jj = 0.0
        for i in range(D):
            r_jj += Q[i, j] * Q[i, j]
        r_jj = math.sqrt(r_jj)
        for _ in range(2):
            for p in range(j):
                dot = 0.0
                for i in range(D):
                    dot += Q[i, p] * Q[i, j]
                for i in range(D):
                    Q[i, j] -= dot * Q[i, p]
        nrm = 0.0
        for i in range(D):
            nrm += Q[i, j] * Q[i, j]
        nrm = math.sqrt(nrm)
        if not (math.isfinite(r_jj) and math.isfinite(nrm)):
            return STRIDE_OVERFLOW
        if not nrm > 1e-300 * max(r_jj, 1.0):
            return RANK_COLLAPSE
        inv = 1.0 / nrm
        for i in range(D):
            Q[i, j] *= inv
        logd[j] = math.log(nrm)
    return OK


@njit(cache=True)
def cocycle_run(
    kinds, idx, coef, tol, x, Q, times, weights, c0vals, stride, proj_tol, want_frame, logs, drift, xs
):
    """Run ``times.shape[0]`` cycles.

    Per cycle ``c``: ``logs[c]`` gets log|R_ii| at renormalization cycles (else 0),
    ``drift[c]`` the relative drift of each conserved quantity, ``xs[c]`` the state.
    Returns (status, cycles completed, field index at failure, error norm).
    """
    m, nf = times.shape
    k = Q.shape[1]
    nc = weights.shape[0]
    D = x.shape[0]
    y = np.empty(12)
    work = np.empty((9, 12))
    Nbuf = np.empty((nc, D))
    Pbuf = np.empty((nc, k))
    logd = np.empty(k)
    for c in range(m):
        for f in range(nf):
            st = apply_field(
                kinds[f], idx[f, 0], idx[f, 1], idx[f, 2], coef[f, 0], coef[f, 1], coef[f, 2],
                times[c, f], tol, x, Q, k, want_frame, y, work,
            )
            if st != OK:
                return st, c, f, 0.0
        for a in range(nc):
            val = 0.0
            for i in range(D):
                val += weights[a, i] * x[i] * x[i]
            if c0vals[a] > 0.0:
                drift[c, a] = abs(val - c0vals[a]) / c0vals[a]
            else:
                drift[c, a] = abs(val - c0vals[a])
        for i in range(D):
            xs[c, i] = x[i]
        if want_frame:
            for col in range(k):
                logs[c, col] = 0.0
            if (c + 1) % stride == 0 or c == m - 1:
                project_frame(x, Q, weights, proj_tol, Nbuf, Pbuf)
                st = orthonormalize(Q, logd)
                if st == STRIDE_OVERFLOW:
                    return st, c, -1, math.inf
                if st != OK:
                    return st, c, -1, 0.0
                for col in range(k):
                    if logd[col] > MAX_LOG_STRETCH:
                        return STRIDE_OVERFLOW, c, -1, logd[col]
                    logs[c, col] = logd[col]
    return OK, m, -1, 0.0


@njit(cache=True)
def cycle_jacobians(kinds, idx, coef, tol, x, times, out):
    """Ambient Jacobian of each full cycle, written to ``out[c]`` (D x D)."""
    m, nf = times.shape
    D = x.shape[0]
    y = np.empty(12)
    work = np.empty((9, 12))
    for c in range(m):
        Q = np.eye(D)
        for f in range(nf):
            st = apply_field(
                kinds[f], idx[f, 0], idx[f, 1], idx[f, 2], coef[f, 0], coef[f, 1], coef[f, 2],
                times[c, f], tol, x, Q, D, True, y, work,
            )
            if st != OK:
                return st, c
        out[c] = Q
    return OK, m


@njit(cache=True)
def state_run(kinds, idx, coef, tol, x, times, sq_sums, sq_counts, batch_of):
    """State-only cycles accumulating per-batch sums of ``x_i**2``.

    ``batch_of[c]`` is the batch of cycle ``c`` (negative to skip).
    """
    m, nf = times.shape
    D = x.shape[0]
    y = np.empty(12)
    work = np.empty((9, 12))
    Qd = np.empty((1, 1))
    for c in range(m):
        for f in range(nf):
            st = apply_field(
                kinds[f], idx[f, 0], idx[f, 1], idx[f, 2], coef[f, 0], coef[f, 1], coef[f, 2],
                times[c, f], tol, x, Qd, 0, False, y, work,
            )
            if st != OK:
                return st, c
        b = batch_of[c]
        if b >= 0:
            for i in range(D):
                sq_sums[b, i] += x[i] * x[i]
            sq_counts[b] += 1
    return OK, m
