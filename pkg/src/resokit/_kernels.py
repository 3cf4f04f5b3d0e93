"""Compiled integration kernels.

All heavy numerics go through these numba-jitted routines so the rest of the
package can stay plain Python.  Everything here is deterministic for fixed
inputs: fixed Dormand-Prince 5(4) step policy, no RNG, and raster cells are
written by index so the thread schedule cannot change results.

State layouts:
  2-vector  (x, v)                          plain trajectories
  7-vector  (x, v, m11, m21, m12, m22, w)   state + fundamental matrix columns
                                            + damping integral w = int gamma(x) dt

Error control for the 7-vector runs uses only the (x, v) components, so the
step sequence is identical to the plain run and the fundamental matrix is
evaluated along exactly the same discrete trajectory.
"""

import math

import numpy as np
from numba import njit, prange

MODEL_DUFFING = 0
MODEL_DVDP = 1

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1

CLASS_UNRESOLVED = 0
CLASS_PERIODIC = 1
CLASS_QUASIPERIODIC = 2

# Dormand-Prince 5(4) tableau.
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
# b - bhat, for the embedded error estimate
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_ORDER_EXP = 0.2  # 1/(4+1)


@njit(cache=True, inline="always")
def _damping(model, gamma, x):
    # Duffing-Van der Pol: self-sustained sign, energy input for |x| < 1.
    if model == MODEL_DVDP:
        return gamma * (x * x - 1.0)
    return gamma


@njit(cache=True, inline="always")
def _accel(model, A, omega, gamma, t, x, v):
    return -_damping(model, gamma, x) * v - x - x * x * x + A * math.cos(omega * t)


@njit(cache=True)
def _hinit2(model, A, omega, gamma, t0, x, v, span, rtol, atol, hmax):
    """Hairer-style starting step size for the 2-vector system."""
    f0x = v
    f0v = _accel(model, A, omega, gamma, t0, x, v)
    sx = atol + rtol * abs(x)
    sv = atol + rtol * abs(v)
    d0 = math.sqrt(0.5 * ((x / sx) ** 2 + (v / sv) ** 2))
    d1 = math.sqrt(0.5 * ((f0x / sx) ** 2 + (f0v / sv) ** 2))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    x1 = x + h0 * f0x
    v1 = v + h0 * f0v
    f1x = v1
    f1v = _accel(model, A, omega, gamma, t0 + h0, x1, v1)
    d2 = math.sqrt(0.5 * (((f1x - f0x) / sx) ** 2 + ((f1v - f0v) / sv) ** 2)) / h0
    dm = max(d1, d2)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** _ORDER_EXP
    return min(100.0 * h0, h1, hmax, span)


@njit(cache=True)
def _flow2(model, A, omega, gamma, x, v, t0, t1, rtol, atol, hmax):
    """Integrate (x, v) from t0 to t1.  Returns (x, v, status)."""
    t = t0
    span = t1 - t0
    if span <= 0.0:
        return x, v, STATUS_OK
    h = _hinit2(model, A, omega, gamma, t0, x, v, span, rtol, atol, hmax)
    while t < t1:
        hfloor = 1e4 * 2.220446049250313e-16 * max(abs(t), abs(t1))
        if h < hfloor:
            return x, v, STATUS_STEP_UNDERFLOW
        last = h >= t1 - t
        if last:
            h = t1 - t

        k1x = v
        k1v = _accel(model, A, omega, gamma, t, x, v)

        ax = x + h * _A21 * k1x
        av = v + h * _A21 * k1v
        k2x = av
        k2v = _accel(model, A, omega, gamma, t + _C2 * h, ax, av)

        ax = x + h * (_A31 * k1x + _A32 * k2x)
        av = v + h * (_A31 * k1v + _A32 * k2v)
        k3x = av
        k3v = _accel(model, A, omega, gamma, t + _C3 * h, ax, av)

        ax = x + h * (_A41 * k1x + _A42 * k2x + _A43 * k3x)
        av = v + h * (_A41 * k1v + _A42 * k2v + _A43 * k3v)
        k4x = av
        k4v = _accel(model, A, omega, gamma, t + _C4 * h, ax, av)

        ax = x + h * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x)
        av = v + h * (_A51 * k1v + _A52 * k2v + _A53 * k3v + _A54 * k4v)
        k5x = av
        k5v = _accel(model, A, omega, gamma, t + _C5 * h, ax, av)

        ax = x + h * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x)
        av = v + h * (_A61 * k1v + _A62 * k2v + _A63 * k3v + _A64 * k4v + _A65 * k5v)
        k6x = av
        k6v = _accel(model, A, omega, gamma, t + h, ax, av)

        xn = x + h * (_B1 * k1x + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
        vn = v + h * (_B1 * k1v + _B3 * k3v + _B4 * k4v + _B5 * k5v + _B6 * k6v)
        k7x = vn
        k7v = _accel(model, A, omega, gamma, t + h, xn, vn)

        ex = h * (_E1 * k1x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x)
        ev = h * (_E1 * k1v + _E3 * k3v + _E4 * k4v + _E5 * k5v + _E6 * k6v + _E7 * k7v)
        sx = atol + rtol * max(abs(x), abs(xn))
        sv = atol + rtol * max(abs(v), abs(vn))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ev / sv) ** 2))

        if math.isnan(err) or math.isinf(err):
            h *= 0.1
            continue
        if err <= 1.0:
            t = t1 if last else t + h
            x = xn
            v = vn
            fac = _SAFETY * err ** (-_ORDER_EXP) if err > 0.0 else _FAC_MAX
            h *= min(_FAC_MAX, max(_FAC_MIN, fac))
            if h > hmax:
                h = hmax
        else:
            fac = _SAFETY * err ** (-_ORDER_EXP)
            h *= max(_FAC_MIN, min(1.0, fac))
    return x, v, STATUS_OK


@njit(cache=True)
def _rhs7(model, A, omega, gamma, t, y, out):
    x = y[0]
    v = y[1]
    damp = _damping(model, gamma, x)
    j21 = -1.0 - 3.0 * x * x
    if model == MODEL_DVDP:
        j21 -= 2.0 * gamma * x * v
    j22 = -damp
    out[0] = v
    out[1] = -damp * v - x - x * x * x + A * math.cos(omega * t)
    out[2] = y[3]
    out[3] = j21 * y[2] + j22 * y[3]
    out[4] = y[5]
    out[5] = j21 * y[4] + j22 * y[5]
    out[6] = damp


@njit(cache=True)
def _flow7_span(model, A, omega, gamma, y, t0, t1, rtol, atol, hmax):
    """Integrate the augmented 7-vector in place.  Error control uses (x, v)
    only, so the accepted steps match _flow2 on the same span."""
    t = t0
    span = t1 - t0
    if span <= 0.0:
        return STATUS_OK
    h = _hinit2(model, A, omega, gamma, t0, y[0], y[1], span, rtol, atol, hmax)
    k = np.empty((7, 7))
    ytmp = np.empty(7)
    ynew = np.empty(7)
    while t < t1:
        hfloor = 1e4 * 2.220446049250313e-16 * max(abs(t), abs(t1))
        if h < hfloor:
            return STATUS_STEP_UNDERFLOW
        last = h >= t1 - t
        if last:
            h = t1 - t

        _rhs7(model, A, omega, gamma, t, y, k[0])
        for i in range(7):
            ytmp[i] = y[i] + h * _A21 * k[0, i]
        _rhs7(model, A, omega, gamma, t + _C2 * h, ytmp, k[1])
        for i in range(7):
            ytmp[i] = y[i] + h * (_A31 * k[0, i] + _A32 * k[1, i])
        _rhs7(model, A, omega, gamma, t + _C3 * h, ytmp, k[2])
        for i in range(7):
            ytmp[i] = y[i] + h * (_A41 * k[0, i] + _A42 * k[1, i] + _A43 * k[2, i])
        _rhs7(model, A, omega, gamma, t + _C4 * h, ytmp, k[3])
        for i in range(7):
            ytmp[i] = y[i] + h * (
                _A51 * k[0, i] + _A52 * k[1, i] + _A53 * k[2, i] + _A54 * k[3, i]
            )
        _rhs7(model, A, omega, gamma, t + _C5 * h, ytmp, k[4])
        for i in range(7):
            ytmp[i] = y[i] + h * (
                _A61 * k[0, i]
                + _A62 * k[1, i]
                + _A63 * k[2, i]
                + _A64 * k[3, i]
                + _A65 * k[4, i]
            )
        _rhs7(model, A, omega, gamma, t + h, ytmp, k[5])
        for i in range(7):
            ynew[i] = y[i] + h * (
                _B1 * k[0, i] + _B3 * k[2, i] + _B4 * k[3, i] + _B5 * k[4, i] + _B6 * k[5, i]
            )
        _rhs7(model, A, omega, gamma, t + h, ynew, k[6])

        ex = h * (
            _E1 * k[0, 0]
            + _E3 * k[2, 0]
            + _E4 * k[3, 0]
            + _E5 * k[4, 0]
            + _E6 * k[5, 0]
            + _E7 * k[6, 0]
        )
        ev = h * (
            _E1 * k[0, 1]
            + _E3 * k[2, 1]
            + _E4 * k[3, 1]
            + _E5 * k[4, 1]
            + _E6 * k[5, 1]
            + _E7 * k[6, 1]
        )
        sx = atol + rtol * max(abs(y[0]), abs(ynew[0]))
        sv = atol + rtol * max(abs(y[1]), abs(ynew[1]))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ev / sv) ** 2))

        if math.isnan(err) or math.isinf(err):
            h *= 0.1
            continue
        if err <= 1.0:
            t = t1 if last else t + h
            for i in range(7):
                y[i] = ynew[i]
            fac = _SAFETY * err ** (-_ORDER_EXP) if err > 0.0 else _FAC_MAX
            h *= min(_FAC_MAX, max(_FAC_MIN, fac))
            if h > hmax:
                h = hmax
        else:
            fac = _SAFETY * err ** (-_ORDER_EXP)
            h *= max(_FAC_MIN, min(1.0, fac))
    return STATUS_OK


@njit(cache=True)
def _flow7(model, A, omega, gamma, x, v, t0, t1, tmid, rtol, atol, hmax):
    """Integrate state + variations from t0 to t1, with an optional exact stop
    at tmid (pass tmid <= t0 to skip).  Returns (y_final, y_mid, status); both
    fundamental matrices are taken from the identity at t0."""
    y = np.empty(7)
    y[0] = x
    y[1] = v
    y[2] = 1.0
    y[3] = 0.0
    y[4] = 0.0
    y[5] = 1.0
    y[6] = 0.0
    ymid = np.zeros(7)
    if tmid > t0 and tmid < t1:
        st = _flow7_span(model, A, omega, gamma, y, t0, tmid, rtol, atol, hmax)
        if st != STATUS_OK:
            return y, ymid, st
        for i in range(7):
            ymid[i] = y[i]
        st = _flow7_span(model, A, omega, gamma, y, tmid, t1, rtol, atol, hmax)
        return y, ymid, st
    st = _flow7_span(model, A, omega, gamma, y, t0, t1, rtol, atol, hmax)
    return y, ymid, st


@njit(cache=True)
def _flow2_samples(model, A, omega, gamma, x, v, t0, ts, rtol, atol, hmax):
    """Integrate through the strictly increasing sample times ts (ts[0] >= t0).
    Returns (xs, vs, status)."""
    n = ts.shape[0]
    xs = np.empty(n)
    vs = np.empty(n)
    t = t0
    for i in range(n):
        if ts[i] > t:
            x, v, st = _flow2(model, A, omega, gamma, x, v, t, ts[i], rtol, atol, hmax)
            if st != STATUS_OK:
                return xs, vs, st
            t = ts[i]
        xs[i] = x
        vs[i] = v
    return xs, vs, STATUS_OK


@njit(cache=True, inline="always")
def _refine_peak(t1, x1, t2, x2, t3, x3):
    """Quadratic interpolation through three samples; returns the refined
    extremum value (falls back to the middle sample when degenerate)."""
    a1 = (x2 - x1) / (t2 - t1)
    a2 = (x3 - x2) / (t3 - t2)
    b = (a2 - a1) / (t3 - t1)
    if b == 0.0:
        return x2
    tv = 0.5 * (t1 + t2) - a1 / (2.0 * b)
    if tv < t1 or tv > t3:
        return x2
    return x1 + a1 * (tv - t1) + b * (tv - t1) * (tv - t2)


@njit(cache=True)
def _flow2_track_absmax(model, A, omega, gamma, x, v, t0, t1, rtol, atol, hmax):
    """Integrate from t0 to t1 while tracking max |x| over the span, with
    quadratic refinement of interior extrema.  Returns (x, v, absmax, status)."""
    t = t0
    span = t1 - t0
    amax = abs(x)
    if span <= 0.0:
        return x, v, amax, STATUS_OK
    h = _hinit2(model, A, omega, gamma, t0, x, v, span, rtol, atol, hmax)
    tp2 = t0
    xp2 = x
    tp1 = t0
    xp1 = x
    nseen = 1
    while t < t1:
        hfloor = 1e4 * 2.220446049250313e-16 * max(abs(t), abs(t1))
        if h < hfloor:
            return x, v, amax, STATUS_STEP_UNDERFLOW
        last = h >= t1 - t
        if last:
            h = t1 - t

        k1x = v
        k1v = _accel(model, A, omega, gamma, t, x, v)
        ax = x + h * _A21 * k1x
        av = v + h * _A21 * k1v
        k2x = av
        k2v = _accel(model, A, omega, gamma, t + _C2 * h, ax, av)
        ax = x + h * (_A31 * k1x + _A32 * k2x)
        av = v + h * (_A31 * k1v + _A32 * k2v)
        k3x = av
        k3v = _accel(model, A, omega, gamma, t + _C3 * h, ax, av)
        ax = x + h * (_A41 * k1x + _A42 * k2x + _A43 * k3x)
        av = v + h * (_A41 * k1v + _A42 * k2v + _A43 * k3v)
        k4x = av
        k4v = _accel(model, A, omega, gamma, t + _C4 * h, ax, av)
        ax = x + h * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x)
        av = v + h * (_A51 * k1v + _A52 * k2v + _A53 * k3v + _A54 * k4v)
        k5x = av
        k5v = _accel(model, A, omega, gamma, t + _C5 * h, ax, av)
        ax = x + h * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x)
        av = v + h * (_A61 * k1v + _A62 * k2v + _A63 * k3v + _A64 * k4v + _A65 * k5v)
        k6x = av
        k6v = _accel(model, A, omega, gamma, t + h, ax, av)
        xn = x + h * (_B1 * k1x + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
        vn = v + h * (_B1 * k1v + _B3 * k3v + _B4 * k4v + _B5 * k5v + _B6 * k6v)
        k7x = vn
        k7v = _accel(model, A, omega, gamma, t + h, xn, vn)
        ex = h * (_E1 * k1x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x)
        ev = h * (_E1 * k1v + _E3 * k3v + _E4 * k4v + _E5 * k5v + _E6 * k6v + _E7 * k7v)
        sx = atol + rtol * max(abs(x), abs(xn))
        sv = atol + rtol * max(abs(v), abs(vn))
        err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ev / sv) ** 2))
        if math.isnan(err) or math.isinf(err):
            h *= 0.1
            continue
        if err <= 1.0:
            t = t1 if last else t + h
            x = xn
            v = vn
            if abs(x) > amax:
                amax = abs(x)
            if nseen >= 2:
                # interior extremum of x between the last three accepted samples
                if (xp1 - xp2) * (x - xp1) < 0.0:
                    pk = _refine_peak(tp2, xp2, tp1, xp1, t, x)
                    if abs(pk) > amax:
                        amax = abs(pk)
            tp2 = tp1
            xp2 = xp1
            tp1 = t
            xp1 = x
            nseen += 1
            fac = _SAFETY * err ** (-_ORDER_EXP) if err > 0.0 else _FAC_MAX
            h *= min(_FAC_MAX, max(_FAC_MIN, fac))
            if h > hmax:
                h = hmax
        else:
            fac = _SAFETY * err ** (-_ORDER_EXP)
            h *= max(_FAC_MIN, min(1.0, fac))
    return x, v, amax, STATUS_OK


@njit(cache=True)
def _classify_cell(
    model,
    A,
    omega,
    gamma,
    x0,
    v0,
    transient_periods,
    sample_periods,
    n_max,
    strobe_tol,
    qp_samples,
    rtol,
    atol,
):
    """Transient + stroboscopic classification for one parameter point.

    Returns (class_code, n, strobe_x, strobe_v, x_max, status).
    """
    tf = 2.0 * math.pi / omega
    x = x0
    v = v0
    # transient, one forcing period at a time (keeps t local to avoid large-t
    # phase error in cos(omega*t))
    for _ in range(transient_periods):
        x, v, st = _flow2(model, A, omega, gamma, x, v, 0.0, tf, rtol, atol, 1e9)
        if st != STATUS_OK:
            return CLASS_UNRESOLVED, 0, x, v, 0.0, st

    nbuf = qp_samples if qp_samples > sample_periods else sample_periods
    sxs = np.empty(nbuf + 1)
    svs = np.empty(nbuf + 1)
    sxs[0] = x
    svs[0] = v
    amax = abs(x)
    hmax = tf / 64.0
    for i in range(sample_periods):
        x, v, a, st = _flow2_track_absmax(model, A, omega, gamma, x, v, 0.0, tf, rtol, atol, hmax)
        if st != STATUS_OK:
            return CLASS_UNRESOLVED, 0, sxs[0], svs[0], amax, st
        if a > amax:
            amax = a
        sxs[i + 1] = x
        svs[i + 1] = v

    nsamp = sample_periods + 1
    scale = 1.0
    for i in range(nsamp):
        m = max(abs(sxs[i]), abs(svs[i]))
        if m > scale:
            scale = m
    for n in range(1, n_max + 1):
        ok = True
        for k in range(nsamp - n):
            dx = sxs[k + n] - sxs[k]
            dv = svs[k + n] - svs[k]
            if math.sqrt(dx * dx + dv * dv) > strobe_tol * scale:
                ok = False
                break
        if ok:
            return CLASS_PERIODIC, n, sxs[0], svs[0], amax, STATUS_OK

    # no period found: extend sampling and apply the curve-filling heuristic
    for i in range(nsamp, nbuf + 1):
        x, v, st = _flow2(model, A, omega, gamma, x, v, 0.0, tf, rtol, atol, 1e9)
        if st != STATUS_OK:
            return CLASS_UNRESOLVED, 0, sxs[0], svs[0], amax, st
        sxs[i] = x
        svs[i] = v
    total = nbuf + 1
    half = total // 2

    dapart = 0.0
    for i in range(total):
        for j in range(i + 1, total):
            dx = sxs[i] - sxs[j]
            dv = svs[i] - svs[j]
            d = dx * dx + dv * dv
            if d > dapart:
                dapart = d
    dapart = math.sqrt(dapart)
    if dapart > 1e3 or dapart < 10.0 * strobe_tol * scale:
        return CLASS_UNRESOLVED, 0, sxs[0], svs[0], amax, STATUS_OK

    dhalf = _mean_nn_distance(sxs, svs, half)
    dfull = _mean_nn_distance(sxs, svs, total)
    if dfull > 0.0 and dhalf / dfull >= 1.6:
        return CLASS_QUASIPERIODIC, 0, sxs[0], svs[0], amax, STATUS_OK
    return CLASS_UNRESOLVED, 0, sxs[0], svs[0], amax, STATUS_OK


@njit(cache=True)
def _mean_nn_distance(xs, vs, count):
    tot = 0.0
    for i in range(count):
        best = 1e300
        for j in range(count):
            if j == i:
                continue
            dx = xs[i] - xs[j]
            dv = vs[i] - vs[j]
            d = dx * dx + dv * dv
            if d < best:
                best = d
        tot += math.sqrt(best)
    return tot / count


@njit(cache=True, parallel=True)
def _raster_scan(
    model,
    omegas,
    amps,
    gamma,
    x0,
    v0,
    transient_periods,
    sample_periods,
    n_max,
    strobe_tol,
    qp_samples,
    rtol,
    atol,
):
    """Flattened (omega, A) grid scan.  Cell i = (omegas[i], amps[i])."""
    ncell = omegas.shape[0]
    codes = np.empty(ncell, np.int8)
    ns = np.empty(ncell, np.int16)
    sx = np.empty(ncell)
    sv = np.empty(ncell)
    xm = np.empty(ncell)
    status = np.empty(ncell, np.int8)
    for i in prange(ncell):
        c, n, a, b, m, st = _classify_cell(
            model,
            amps[i],
            omegas[i],
            gamma,
            x0,
            v0,
            transient_periods,
            sample_periods,
            n_max,
            strobe_tol,
            qp_samples,
            rtol,
            atol,
        )
        codes[i] = c
        ns[i] = n
        sx[i] = a
        sv[i] = b
        xm[i] = m
        status[i] = st
    return codes, ns, sx, sv, xm, status
