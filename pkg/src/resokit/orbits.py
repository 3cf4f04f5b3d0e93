"""Periodic orbits as fixed points of the iterated stroboscopic map.

An orbit of period n (in units of the forcing period 2*pi/omega) is a fixed
point of the n-th iterate of the stroboscopic map P.  Since the forcing pins
the phase, the period is known and Newton shooting in the two unknowns
(x0, v0) is enough; no collocation.  The monodromy matrix of the shooting
solve doubles as the Floquet linearization, so multipliers come out for free.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    Model,
    ModelParams,
    OscState,
    flow_with_variations,
    integrate,
    sample_trajectory,
)
from .errors import DegenerateOrbitError, NoConvergenceError, SingularJacobianError

RESIDUAL_TOL = 1e-9
SYMMETRY_TOL = 1e-7
MAX_NEWTON_ITER = 25
MAX_STEP_HALVINGS = 8
SAMPLES_PER_PERIOD = 256


class Stability(Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class ResonanceLabel:
    """Resonance identifier: k maxima per orbit period of n forcing periods."""

    k: int
    n: int

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise ValueError("resonance label indices must be >= 1")

    def __str__(self) -> str:
        return f"R({self.k},{self.n})"


@dataclass(frozen=True)
class PeriodicOrbit:
    """Refined fixed point of P^n with its Floquet data and classification.

    multipliers are the eigenvalues of the 2x2 monodromy matrix of P^n at s0,
    winding counts the strict local maxima of x(t) over one orbit period, and
    x_max is the peak |x(t)|.  half_flip_eigs caches the eigenvalues of the
    half-period flip linearization (odd n only), used by symmetry-breaking
    tests; it is derived data and excluded from equality.
    """

    params: ModelParams
    n: int
    s0: OscState
    multipliers: tuple[complex, complex]
    stability: Stability
    symmetric: bool
    winding: int
    x_max: float
    half_flip_eigs: tuple[complex, complex] | None = field(
        default=None, compare=False, repr=False
    )

    @property
    def period(self) -> float:
        return self.n * self.params.forcing_period

    @property
    def stable(self) -> bool:
        return self.stability is Stability.STABLE

    @property
    def label(self) -> ResonanceLabel:
        return ResonanceLabel(self.winding, self.n)


def stroboscopic_map(
    p: ModelParams,
    s: OscState,
    n: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> OscState:
    """State after n forcing periods, starting at forcing phase 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return integrate(p, s, 0.0, n * p.forcing_period, rtol, atol)


def _eigs_2x2(M: np.ndarray) -> tuple[complex, complex]:
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        r = math.sqrt(disc)
        return complex(0.5 * (tr - r)), complex(0.5 * (tr + r))
    r = math.sqrt(-disc)
    return complex(0.5 * tr, -0.5 * r), complex(0.5 * tr, 0.5 * r)


def _orbit_profile(
    p: ModelParams, s0: OscState, n: int, rtol: float, atol: float
) -> tuple[int, float]:
    """(winding, x_max) from dense output over one orbit period."""
    T = n * p.forcing_period
    m = SAMPLES_PER_PERIOD * n
    traj = sample_trajectory(p, s0, 0.0, T, m, rtol, atol)
    x = traj.x[:-1]  # half-open window [0, T)
    t = traj.t[:-1]
    idxs = _strict_maxima(x)
    if not idxs:
        if p.A == 0.0:
            raise DegenerateOrbitError("constant orbit at A=0 has no maxima")
        raise DegenerateOrbitError("no strict maxima found on a forced orbit")
    x_max = float(np.max(np.abs(x)))
    mm = len(x)
    for i in _strict_maxima(x) + _strict_maxima(-x):
        tm1, tm2, tm3 = t[(i - 1) % mm], t[i], t[(i + 1) % mm]
        if tm2 < tm1:
            tm2 += T
            tm3 += T
        elif tm3 < tm2:
            tm3 += T
        pk = _quad_peak(
            tm1, x[(i - 1) % mm], tm2, x[i], tm3, x[(i + 1) % mm]
        )
        x_max = max(x_max, abs(pk))
    return len(idxs), x_max


def _quad_peak(t1, x1, t2, x2, t3, x3) -> float:
    a1 = (x2 - x1) / (t2 - t1)
    a2 = (x3 - x2) / (t3 - t2)
    b = (a2 - a1) / (t3 - t1)
    if b == 0.0:
        return x2
    tv = 0.5 * (t1 + t2) - a1 / (2.0 * b)
    if tv < t1 or tv > t3:
        return x2
    return x1 + a1 * (tv - t1) + b * (tv - t1) * (tv - t2)


def _strict_maxima(x: np.ndarray) -> list[int]:
    """Indices of strict circular local maxima; exact-tie plateaus count once."""
    m = len(x)
    if m < 3:
        return []
    start = -1
    for i in range(m):
        if x[i] != x[i - 1]:
            start = i
            break
    if start < 0:
        return []  # constant signal
    idxs = []
    i = start
    seen = 0
    while seen < m:
        j = i
        run = 1
        while x[(j + 1) % m] == x[i] and run < m:
            j = (j + 1) % m
            run += 1
        prev = x[(i - 1) % m]
        nxt = x[(j + 1) % m]
        if prev < x[i] and nxt < x[i]:
            idxs.append(i)
        seen += run
        i = (j + 1) % m
    return sorted(idxs)


def refine_orbit(
    p: ModelParams,
    guess: OscState,
    n: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    residual_tol: float = RESIDUAL_TOL,
) -> PeriodicOrbit:
    """Newton-shooting refinement of a period-n orbit from a nearby guess.

    Raises NoConvergenceError if the guess is outside the Newton basin and
    SingularJacobianError when (DP^n - I) is numerically singular (at or very
    near a fold).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    T = n * p.forcing_period
    s = np.array([guess.x, guess.v], dtype=float)
    for _ in range(MAX_NEWTON_ITER):
        end, M, w, s_half, M_half = flow_with_variations(
            p, OscState(s[0], s[1]), 0.0, T, t_mid=0.5 * T, rtol=rtol, atol=atol
        )
        r = end.as_array() - s
        rn = float(np.linalg.norm(r))
        if not math.isfinite(rn):
            raise NoConvergenceError("shooting residual is not finite")
        if rn <= residual_tol:
            return _build_orbit(p, n, OscState(s[0], s[1]), M, s_half, M_half, rtol, atol)
        J = M - np.eye(2)
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) < 1e-12 * max(1.0, float(np.max(np.abs(M)))) ** 2:
            raise SingularJacobianError(
                f"DP^{n} - I is singular at s={s}, params={p}; likely at a fold"
            )
        step = np.linalg.solve(J, -r)
        lam = 1.0
        for _ in range(MAX_STEP_HALVINGS):
            cand = s + lam * step
            mapped = integrate(p, OscState(cand[0], cand[1]), 0.0, T, rtol, atol)
            rc = float(np.linalg.norm(mapped.as_array() - cand))
            if rc < rn:
                s = cand
                break
            lam *= 0.5
        else:
            raise NoConvergenceError(
                f"Newton stalled at residual {rn:.3e} for params={p}, n={n}"
            )
    raise NoConvergenceError(
        f"no convergence in {MAX_NEWTON_ITER} Newton iterations (params={p}, n={n})"
    )


def _build_orbit(
    p: ModelParams,
    n: int,
    s0: OscState,
    M: np.ndarray,
    s_half: OscState,
    M_half: np.ndarray,
    rtol: float,
    atol: float,
) -> PeriodicOrbit:
    mults = _eigs_2x2(M)
    stab = (
        Stability.STABLE
        if max(abs(mults[0]), abs(mults[1])) < 1.0
        else Stability.UNSTABLE
    )
    sym = _half_flip_closes(s0, s_half)
    half_eigs = _eigs_2x2(-M_half) if n % 2 == 1 else None
    winding, x_max = _orbit_profile(p, s0, n, rtol, atol)
    return PeriodicOrbit(
        params=p,
        n=n,
        s0=s0,
        multipliers=mults,
        stability=stab,
        symmetric=sym,
        winding=winding,
        x_max=x_max,
        half_flip_eigs=half_eigs,
    )


def _half_flip_closes(s0: OscState, s_half: OscState) -> bool:
    dx = s_half.x + s0.x
    dv = s_half.v + s0.v
    return math.hypot(dx, dv) <= SYMMETRY_TOL


def classify_symmetry(o: PeriodicOrbit) -> bool:
    """True iff flowing s0 by half the orbit period lands on (-x0, -v0).

    This is the invariance under the model symmetry (x, v, t) ->
    (-x, -v, t + pi/omega); it can only hold for odd n, since for even n half
    the orbit period is a whole number of forcing periods.
    """
    s_half = integrate(o.params, o.s0, 0.0, 0.5 * o.period)
    return _half_flip_closes(o.s0, s_half)


def winding_number(o: PeriodicOrbit) -> int:
    """Strict local maxima of x(t) per orbit period, recomputed from dense
    output."""
    winding, _ = _orbit_profile(o.params, o.s0, o.n, DEFAULT_RTOL, DEFAULT_ATOL)
    return winding


def amplitude(o: PeriodicOrbit) -> float:
    """Peak |x(t)| over one orbit period, recomputed from dense output."""
    _, x_max = _orbit_profile(o.params, o.s0, o.n, DEFAULT_RTOL, DEFAULT_ATOL)
    return x_max


def mirror_state(p: ModelParams, s0: OscState) -> OscState:
    """Phase-0 state of the mirror-image solution.

    If x(t) solves the model then -x(t + pi/omega) does too; its state at
    forcing phase 0 is minus the original state flowed half a forcing period.
    """
    s = integrate(p, s0, 0.0, 0.5 * p.forcing_period)
    return OscState(-s.x, -s.v)


def mirror_orbit(o: PeriodicOrbit) -> PeriodicOrbit:
    """The mirror image of an orbit, re-refined."""
    return refine_orbit(o.params, mirror_state(o.params, o.s0), o.n)


def residual(o: PeriodicOrbit, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> float:
    """|P^n(s0) - s0|, the shooting residual of the stored orbit."""
    end = integrate(o.params, o.s0, 0.0, o.period, rtol, atol)
    return math.hypot(end.x - o.s0.x, end.v - o.s0.v)


def multiplier_determinant_expected(o: PeriodicOrbit) -> float:
    """Liouville prediction for the multiplier product.

    For the Duffing model the damping trace is constant, so the product is
    exp(-gamma * n * 2*pi/omega).  For the Duffing-Van der Pol model the
    damping integral is recomputed along the orbit.
    """
    if o.params.model is Model.DUFFING:
        return math.exp(-o.params.gamma * o.period)
    _, _, w, _, _ = flow_with_variations(o.params, o.s0, 0.0, o.period)
    return math.exp(-w)
