"""Compiled RK4 loops.

The native kernels are specialised by numba on the argument dtype: called
with ``np.float32`` scalars every operation is a binary32 operation, with
``np.float64`` scalars a binary64 one. No literal constants appear in the
arithmetic (a Python float literal would promote binary32 to binary64), so
all constants, including the RK4 weight 2, are passed in already typed.

Status codes: 0 ok, 1 non-finite state (divergence), 2 separation collapse.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._dd import dd_add, dd_div, dd_mul, dd_sub

OK = 0
DIVERGED = 1
COLLAPSED = 2


@njit(cache=True, nogil=True)
def rhs_native(sigma, r, b, x, y, z, variant):
    if variant == 2:
        dx = sigma * y - sigma * x
    else:
        dx = sigma * (y - x)
    if variant == 1:
        dy = (r * x - y) - x * z
    else:
        dy = (r * x - x * z) - y
    dz = x * y - b * z
    return dx, dy, dz


@njit(cache=True, nogil=True)
def rk4_native(sigma, r, b, x, y, z, half, dt, sixth, two, variant):
    k1x, k1y, k1z = rhs_native(sigma, r, b, x, y, z, variant)
    k2x, k2y, k2z = rhs_native(
        sigma, r, b, x + half * k1x, y + half * k1y, z + half * k1z, variant
    )
    k3x, k3y, k3z = rhs_native(
        sigma, r, b, x + half * k2x, y + half * k2y, z + half * k2z, variant
    )
    k4x, k4y, k4z = rhs_native(
        sigma, r, b, x + dt * k3x, y + dt * k3y, z + dt * k3z, variant
    )
    nx = x + sixth * (((k1x + two * k2x) + two * k3x) + k4x)
    ny = y + sixth * (((k1y + two * k2y) + two * k3y) + k4y)
    nz = z + sixth * (((k1z + two * k2z) + two * k3z) + k4z)
    return nx, ny, nz, k1x, k1y, k1z


@njit(cache=True, nogil=True)
def _settle_update(x, y, z, cp, eps, which, start, step):
    """Track which settling ball (0 none, 1 plus, 2 minus) holds the state."""
    dp = math.sqrt((x - cp[0]) ** 2 + (y - cp[1]) ** 2 + (z - cp[2]) ** 2)
    dm = math.sqrt((x + cp[0]) ** 2 + (y + cp[1]) ** 2 + (z - cp[2]) ** 2)
    now = 0
    if dp < eps:
        now = 1
    elif dm < eps:
        now = 2
    if now == 0:
        return 0, step
    if now != which:
        return now, step
    return which, start


@njit(cache=True, nogil=True)
def _finite3(x, y, z):
    return math.isfinite(x) and math.isfinite(y) and math.isfinite(z)


@njit(cache=True, nogil=True)
def integrate_native(
    sigma, r, b, x, y, z, half, dt, sixth, two, variant,
    n_steps, stride, stop_on_settle, cp, eps, hold_steps,
):
    n_max = n_steps // stride + 2
    steps = np.empty(n_max, dtype=np.int64)
    out = np.empty((n_max, 3), dtype=np.float64)
    steps[0] = 0
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = z
    n = 1
    scale = max(abs(float(x)), abs(float(y)), abs(float(z)))
    which, start = _settle_update(float(x), float(y), float(z), cp, eps, 0, 0, 0)
    status = OK
    fail_step = -1
    step = 0
    if stop_on_settle and which != 0 and hold_steps <= 0:
        return steps[:n], out[:n], status, fail_step, scale
    while step < n_steps:
        nx, ny, nz, k1x, k1y, k1z = rk4_native(
            sigma, r, b, x, y, z, half, dt, sixth, two, variant
        )
        scale = max(scale, abs(float(k1x)), abs(float(k1y)), abs(float(k1z)))
        step += 1
        if not _finite3(nx, ny, nz):
            status = DIVERGED
            fail_step = step
            break
        x, y, z = nx, ny, nz
        scale = max(scale, abs(float(x)), abs(float(y)), abs(float(z)))
        if step % stride == 0 or step == n_steps:
            steps[n] = step
            out[n, 0] = x
            out[n, 1] = y
            out[n, 2] = z
            n += 1
            which, start = _settle_update(
                float(x), float(y), float(z), cp, eps, which, start, step
            )
            if stop_on_settle and which != 0 and step - start >= hold_steps:
                break
    return steps[:n], out[:n], status, fail_step, scale


@njit(cache=True, nogil=True)
def rhs_dd(sh, sl, rh, rl, bh, bl, xh, xl, yh, yl, zh, zl, variant):
    if variant == 2:
        ah, al = dd_mul(sh, sl, yh, yl)
        ch, cl = dd_mul(sh, sl, xh, xl)
        dxh, dxl = dd_sub(ah, al, ch, cl)
    else:
        ah, al = dd_sub(yh, yl, xh, xl)
        dxh, dxl = dd_mul(sh, sl, ah, al)
    rxh, rxl = dd_mul(rh, rl, xh, xl)
    xzh, xzl = dd_mul(xh, xl, zh, zl)
    if variant == 1:
        ah, al = dd_sub(rxh, rxl, yh, yl)
        dyh, dyl = dd_sub(ah, al, xzh, xzl)
    else:
        ah, al = dd_sub(rxh, rxl, xzh, xzl)
        dyh, dyl = dd_sub(ah, al, yh, yl)
    ah, al = dd_mul(xh, xl, yh, yl)
    ch, cl = dd_mul(bh, bl, zh, zl)
    dzh, dzl = dd_sub(ah, al, ch, cl)
    return dxh, dxl, dyh, dyl, dzh, dzl


@njit(cache=True, nogil=True)
def _dd_axpy(xh, xl, ah, al, kh, kl):
    # x + a*k
    ph, pl = dd_mul(ah, al, kh, kl)
    return dd_add(xh, xl, ph, pl)


@njit(cache=True, nogil=True)
def _dd_combine(k1h, k1l, k2h, k2l, k3h, k3l, k4h, k4l):
    # ((k1 + 2*k2) + 2*k3) + k4
    ah, al = _dd_axpy(k1h, k1l, 2.0, 0.0, k2h, k2l)
    ah, al = _dd_axpy(ah, al, 2.0, 0.0, k3h, k3l)
    return dd_add(ah, al, k4h, k4l)


@njit(cache=True, nogil=True)
def rk4_dd(pr, s, half, dt, sixth, variant):
    """One RK4 step in double-double.

    ``pr`` holds (sigma, r, b) as hi/lo pairs, ``s`` and the result hold
    (x, y, z) as hi/lo pairs, ``half``/``dt``/``sixth`` are (hi, lo) tuples.
    Returns the new state and k1.
    """
    sh, sl, rh, rl, bh, bl = pr
    k1 = rhs_dd(sh, sl, rh, rl, bh, bl, s[0], s[1], s[2], s[3], s[4], s[5], variant)
    t = np.empty(6)
    for i in range(3):
        t[2 * i], t[2 * i + 1] = _dd_axpy(
            s[2 * i], s[2 * i + 1], half[0], half[1], k1[2 * i], k1[2 * i + 1]
        )
    k2 = rhs_dd(sh, sl, rh, rl, bh, bl, t[0], t[1], t[2], t[3], t[4], t[5], variant)
    for i in range(3):
        t[2 * i], t[2 * i + 1] = _dd_axpy(
            s[2 * i], s[2 * i + 1], half[0], half[1], k2[2 * i], k2[2 * i + 1]
        )
    k3 = rhs_dd(sh, sl, rh, rl, bh, bl, t[0], t[1], t[2], t[3], t[4], t[5], variant)
    for i in range(3):
        t[2 * i], t[2 * i + 1] = _dd_axpy(
            s[2 * i], s[2 * i + 1], dt[0], dt[1], k3[2 * i], k3[2 * i + 1]
        )
    k4 = rhs_dd(sh, sl, rh, rl, bh, bl, t[0], t[1], t[2], t[3], t[4], t[5], variant)
    new = np.empty(6)
    for i in range(3):
        j = 2 * i
        ch, cl = _dd_combine(
            k1[j], k1[j + 1], k2[j], k2[j + 1], k3[j], k3[j + 1], k4[j], k4[j + 1]
        )
        new[j], new[j + 1] = _dd_axpy(s[j], s[j + 1], sixth[0], sixth[1], ch, cl)
    return new, k1


@njit(cache=True, nogil=True)
def dd_step_constants(dth, dtl):
    half = dd_div(dth, dtl, 2.0, 0.0)
    sixth = dd_div(dth, dtl, 6.0, 0.0)
    return half, sixth


@njit(cache=True, nogil=True)
def integrate_dd(
    pr, s0, dt_h, n_steps, stride, stop_on_settle, cp, eps, hold_steps, variant,
):
    dt = (dt_h, 0.0)
    half, sixth = dd_step_constants(dt_h, 0.0)
    n_max = n_steps // stride + 2
    steps = np.empty(n_max, dtype=np.int64)
    out = np.empty((n_max, 3), dtype=np.float64)
    s = s0.copy()
    steps[0] = 0
    for i in range(3):
        out[0, i] = s[2 * i]
    n = 1
    scale = max(abs(s[0]), abs(s[2]), abs(s[4]))
    which, start = _settle_update(s[0], s[2], s[4], cp, eps, 0, 0, 0)
    status = OK
    fail_step = -1
    step = 0
    if stop_on_settle and which != 0 and hold_steps <= 0:
        return steps[:n], out[:n], s, status, fail_step, scale
    while step < n_steps:
        new, k1 = rk4_dd(pr, s, half, dt, sixth, variant)
        scale = max(scale, abs(k1[0]), abs(k1[2]), abs(k1[4]))
        step += 1
        ok = True
        for i in range(6):
            if not math.isfinite(new[i]):
                ok = False
        if not ok:
            status = DIVERGED
            fail_step = step
            break
        s = new
        scale = max(scale, abs(s[0]), abs(s[2]), abs(s[4]))
        if step % stride == 0 or step == n_steps:
            steps[n] = step
            for i in range(3):
                out[n, i] = s[2 * i]
            n += 1
            which, start = _settle_update(s[0], s[2], s[4], cp, eps, which, start, step)
            if stop_on_settle and which != 0 and step - start >= hold_steps:
                break
    return steps[:n], out[:n], s, status, fail_step, scale


@njit(cache=True, nogil=True)
def benettin_native(
    sigma, r, b, x, y, z, px, py, pz, half, dt, sixth, two, variant,
    steps_per_interval, n_intervals, d0,
):
    """Two-trajectory separation growth with periodic rescaling to ``d0``.

    Returns ln(d_i / d0) for each completed interval plus a status code.
    """
    logs = np.empty(n_intervals)
    for i in range(n_intervals):
        for _ in range(steps_per_interval):
            x, y, z, _a, _b, _c = rk4_native(
                sigma, r, b, x, y, z, half, dt, sixth, two, variant
            )
            px, py, pz, _a, _b, _c = rk4_native(
                sigma, r, b, px, py, pz, half, dt, sixth, two, variant
            )
        if not (_finite3(x, y, z) and _finite3(px, py, pz)):
            return logs[:i], DIVERGED
        ex = px - x
        ey = py - y
        ez = pz - z
        d = math.sqrt(ex * ex + ey * ey + ez * ez)
        if not d > 0.0:
            return logs[:i], COLLAPSED
        logs[i] = math.log(d / d0)
        f = d0 / d
        px = x + ex * f
        py = y + ey * f
        pz = z + ez * f
    return logs, OK
