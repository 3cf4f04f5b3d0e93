"""Pseudo-arclength continuation of periodic-orbit branches in one parameter.

Branches live in the extended space u = (x0, v0, lambda) where lambda is the
active parameter (omega by default).  Prediction is secant-based, correction
is a damped Newton solve of the shooting equations plus the arclength
constraint, and each accepted point carries the exact branch tangent (the
null vector of the extended shooting Jacobian) so test functions are local.

Bifurcation test functions:
  fold       sign change of the parameter component of the branch tangent
  period     the real multiplier nearest -1, shifted by +1 (continued by
  doubling   1 - sqrt(det M) on complex pairs, which matches at the
             real/complex transition and stays positive away from -1)
  pitchfork  on symmetric odd-n branches, the monodromy eigenvalue along the
             antisymmetric eigendirection of the half-period flip map, minus 1

Sign changes are localized by bisection along the branch, re-solving the
corrector at each midpoint.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    ModelParams,
    OscState,
    flow_with_variations,
    integrate,
)
from .errors import (
    NoConvergenceError,
    NotApplicableError,
    SingularJacobianError,
    StepCollapseError,
    SwitchFailedError,
)
from .orbits import (
    SYMMETRY_TOL,
    PeriodicOrbit,
    _build_orbit,
    _eigs_2x2,
    mirror_state,
    refine_orbit,
)

log = logging.getLogger(__name__)

ACTIVE_PARAMS = ("omega", "A", "gamma")

BIF_TEST_TOL = 1e-8
CLOSURE_TOL = 1e-7
MIN_CLOSURE_STEPS = 10


class BifurcationKind(Enum):
    SADDLE_NODE = "SN"
    PITCHFORK = "PF"
    PERIOD_DOUBLING = "PD"


@dataclass(frozen=True)
class StepControl:
    """Arclength step policy: halve on failure, grow 1.3x after 4 successes."""

    initial: float = 0.01
    min: float = 1e-6
    max: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.min <= self.initial <= self.max):
            raise ValueError(f"invalid step control {self}")


@dataclass(frozen=True)
class BranchPoint:
    orbit: PeriodicOrbit
    arclength: float
    tangent: tuple[float, float, float]


@dataclass(frozen=True)
class BifurcationPoint:
    kind: BifurcationKind
    active: str
    params_at: ModelParams
    orbit_at: PeriodicOrbit
    test_value_bracket: tuple[float, float]
    arclength: float


@dataclass
class Branch:
    """Ordered branch of period-n orbits with embedded bifurcation points."""

    active: str
    n: int
    points: list[BranchPoint]
    bifurcations: list[BifurcationPoint]
    closed: bool
    terminations: tuple[str, str]
    parent: BifurcationPoint | None = None

    def lambdas(self) -> np.ndarray:
        return np.array([getattr(bp.orbit.params, self.active) for bp in self.points])

    def amplitudes(self) -> np.ndarray:
        return np.array([bp.orbit.x_max for bp in self.points])

    def stable_mask(self) -> np.ndarray:
        return np.array([bp.orbit.stable for bp in self.points])


class _Raw(NamedTuple):
    """Converged corrector data before the full orbit record is built."""

    u: np.ndarray
    M: np.ndarray
    M_half: np.ndarray
    s_half: OscState
    w: float
    null_t: np.ndarray


def _pd_value(mu1: complex, mu2: complex) -> float:
    if abs(mu1.imag) < 1e-12 and abs(mu2.imag) < 1e-12:
        return min(mu1.real, mu2.real) + 1.0
    det = (mu1 * mu2).real
    return 1.0 - math.sqrt(max(det, 0.0))


def _pf_value(nu1: complex, nu2: complex) -> float:
    if abs(nu1.imag) < 1e-12 and abs(nu2.imag) < 1e-12:
        nu = nu1.real if abs(nu1.real + 1.0) <= abs(nu2.real + 1.0) else nu2.real
        return nu * nu - 1.0
    return (nu1 * nu2).real - 1.0


def fold_test(bp: BranchPoint) -> float:
    """Parameter component of the branch tangent; a sign change brackets a
    fold."""
    return bp.tangent[2]


def pd_test(bp: BranchPoint) -> float:
    """Crosses zero when a real multiplier passes through -1."""
    return _pd_value(*bp.orbit.multipliers)


def pitchfork_test(bp: BranchPoint) -> float:
    """Antisymmetric monodromy eigenvalue minus 1 on symmetric odd-n branches.

    Crosses zero when the eigenvalue of the half-period flip linearization
    passes through -1, i.e. at a symmetry-breaking pitchfork.
    """
    o = bp.orbit
    if not o.symmetric or o.n % 2 == 0 or o.half_flip_eigs is None:
        raise NotApplicableError("pitchfork test requires a symmetric odd-n orbit")
    return _pf_value(*o.half_flip_eigs)


def _params_with(p: ModelParams, active: str, value: float) -> ModelParams:
    return p.with_value(active, value)


class _Corrector:
    """Newton corrector for the extended system (shooting + arclength).

    Symmetric odd-n branches are continued as fixed points of the half-period
    flip map Q(s) = -flow_{nT/2}(s) instead of the full map P^n.  Symmetric
    orbits are exactly the fixed points of Q, so the trace cannot slip onto a
    symmetry-broken branch, pitchforks do not degenerate the Jacobian (they
    show up as an eigenvalue -1 of DQ, not as a rank drop), and the
    integration span halves.  The full monodromy is recovered as M = (DQ)^2.
    """

    def __init__(self, p_base, active, n, rtol, atol, residual_tol=1e-9,
                 half=False):
        if half and n % 2 == 0:
            raise ValueError("half-map continuation requires odd n")
        self.p_base = p_base
        self.active = active
        self.n = n
        self.rtol = rtol
        self.atol = atol
        self.residual_tol = residual_tol
        self.half = half

    def params_at(self, lam: float) -> ModelParams:
        return _params_with(self.p_base, self.active, lam)

    def _span(self, p: ModelParams) -> float:
        T = self.n * p.forcing_period
        return 0.5 * T if self.half else T

    def _mapped(self, p, u) -> np.ndarray:
        end = integrate(p, OscState(u[0], u[1]), 0.0, self._span(p),
                        self.rtol, self.atol)
        out = end.as_array()
        return -out if self.half else out

    def _map_residual(self, u) -> float:
        try:
            p = self.params_at(u[2])
        except ValueError:
            return math.inf
        try:
            m = self._mapped(p, u)
        except Exception:
            return math.inf
        return math.hypot(m[0] - u[0], m[1] - u[1])

    def _flam(self, u) -> np.ndarray:
        lam = u[2]
        dl = 1e-6 * max(1.0, abs(lam))
        res = []
        for lv in (lam + dl, lam - dl):
            p = self.params_at(lv)
            res.append(self._mapped(p, u))
        return (res[0] - res[1]) / (2.0 * dl)

    def solve(self, u_pred, tang, max_iter=12) -> _Raw | None:
        """Correct the predicted point; returns None on failure."""
        u = np.array(u_pred, dtype=float)
        for _ in range(max_iter):
            try:
                p = self.params_at(u[2])
            except ValueError:
                return None
            span = self._span(p)
            try:
                if self.half:
                    end, Mh, w, _, _ = flow_with_variations(
                        p, OscState(u[0], u[1]), 0.0, span,
                        rtol=self.rtol, atol=self.atol,
                    )
                    s_half = end
                    M_half = Mh
                    N = -Mh
                    M = N @ N
                    mapped = -end.as_array()
                else:
                    end, M, w, s_half, M_half = flow_with_variations(
                        p, OscState(u[0], u[1]), 0.0, span, t_mid=0.5 * span,
                        rtol=self.rtol, atol=self.atol,
                    )
                    mapped = end.as_array()
            except Exception:
                return None
            r_orb = mapped - u[:2]
            r_con = float(np.dot(u - u_pred, tang))
            rn = math.sqrt(r_orb[0] ** 2 + r_orb[1] ** 2 + r_con**2)
            if not math.isfinite(rn):
                return None
            J_map = (-M_half if self.half else M) - np.eye(2)
            Flam = self._flam(u)
            J2 = np.column_stack([J_map, Flam])
            if rn <= self.residual_tol:
                null_t = _null_tangent(J2)
                return _Raw(u, M, M_half, s_half, w, null_t)
            J = np.vstack([J2, tang])
            try:
                du = np.linalg.solve(J, -np.array([r_orb[0], r_orb[1], r_con]))
            except np.linalg.LinAlgError:
                return None
            stepped = False
            lam_damp = 1.0
            for _ in range(5):
                cand = u + lam_damp * du
                rc_orb = self._map_residual(cand)
                rc = math.hypot(rc_orb, (1.0 - lam_damp) * r_con)
                if rc < rn:
                    u = cand
                    stepped = True
                    break
                lam_damp *= 0.5
            if not stepped:
                return None
        return None


def _null_tangent(J2: np.ndarray) -> np.ndarray:
    """Unit null vector of the 2x3 extended shooting Jacobian."""
    _, _, vt = np.linalg.svd(J2)
    t = vt[-1]
    return t / np.linalg.norm(t)


def _raw_symmetric(raw: _Raw) -> bool:
    return (
        math.hypot(raw.s_half.x + raw.u[0], raw.s_half.v + raw.u[1]) <= SYMMETRY_TOL
    )


def _orient(t: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return t if float(np.dot(t, ref)) >= 0.0 else -t


def _raw_tests(raw: _Raw, direction_ref: np.ndarray, symmetric_branch: bool, n: int):
    """(fold, pd, pf) test values at a converged corrector point."""
    tang = _orient(raw.null_t, direction_ref)
    fold = float(tang[2])
    mu = _eigs_2x2(raw.M)
    pd = _pd_value(*mu)
    pf = math.nan
    if symmetric_branch and n % 2 == 1:
        nu = _eigs_2x2(-raw.M_half)
        pf = _pf_value(*nu)
    return fold, pd, pf


def _build_point(corr: _Corrector, raw: _Raw, arclength, tangent) -> BranchPoint:
    p = corr.params_at(raw.u[2])
    orbit = _build_orbit(
        p, corr.n, OscState(raw.u[0], raw.u[1]), raw.M, raw.s_half, raw.M_half,
        corr.rtol, corr.atol,
    )
    return BranchPoint(orbit=orbit, arclength=arclength, tangent=tuple(tangent))


_TEST_KINDS = (
    (0, BifurcationKind.SADDLE_NODE),
    (1, BifurcationKind.PERIOD_DOUBLING),
    (2, BifurcationKind.PITCHFORK),
)


def _localize(corr, u_a, tang_a, h_ab, tests_a, tests_b, ti, direction_ref,
              symmetric_branch):
    """Bisect the test-function sign change between two branch points.

    Returns (raw_at_zero, bracket) or None if the bracket is spurious.
    """
    lo, hi = 0.0, h_ab
    f_lo, f_hi = tests_a[ti], tests_b[ti]
    raw_best = None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        raw = corr.solve(u_a + mid * tang_a, tang_a)
        if raw is None:
            return None
        tests_m = _raw_tests(raw, direction_ref, symmetric_branch, corr.n)
        f_m = tests_m[ti]
        if math.isnan(f_m):
            return None
        if abs(f_m) < BIF_TEST_TOL:
            return raw, (f_lo, f_hi)
        if (f_m < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_m
        else:
            hi, f_hi = mid, f_m
        raw_best = raw
        if hi - lo <= 1e-10:
            break
    if raw_best is None:
        return None
    return raw_best, (f_lo, f_hi)


def _trace(corr, u0, t0_dir, lo, hi, step: StepControl, symmetric_branch,
           max_steps=20000, stop_on_symmetric=False):
    """Single-direction trace.  Returns (points_raw, bifs_raw, termination).

    points_raw is a list of (u, raw, arclength, tangent_secant, tests).
    """
    pts = []
    bifs = []
    raw0 = corr.solve(u0, t0_dir)
    if raw0 is None:
        raise NoConvergenceError("seed point did not converge on the branch")
    tests0 = _raw_tests(raw0, t0_dir, symmetric_branch, corr.n)
    tang0 = _orient(raw0.null_t, t0_dir)
    pts.append((raw0.u, raw0, 0.0, tang0, tests0))
    h = step.initial
    successes = 0
    termination = "max_steps"
    k = 0
    while k < max_steps:
        k += 1
        u_k, raw_k, s_k, tang_k, tests_k = pts[-1]
        if len(pts) >= 2:
            sec = u_k - pts[-2][0]
            pred_dir = sec / np.linalg.norm(sec)
        else:
            pred_dir = tang_k
        raw = corr.solve(u_k + h * pred_dir, pred_dir)
        ok = raw is not None
        if ok:
            dist = float(np.linalg.norm(raw.u - u_k))
            tang_new = _orient(raw.null_t, pred_dir)
            # reject corrector jumps to another sheet or reversals
            if dist > 4.0 * h or dist < 1e-14 or float(np.dot(tang_new, tang_k)) <= 0.0:
                ok = False
        if not ok:
            successes = 0
            h *= 0.5
            if h < step.min:
                termination = "step_collapse"
                break
            continue
        tests_new = _raw_tests(raw, pred_dir, symmetric_branch, corr.n)
        s_new = s_k + dist
        if stop_on_symmetric and _raw_symmetric(raw):
            # asymmetric branch terminating on the symmetric family
            pts.append((raw.u, raw, s_new, tang_new, tests_new))
            termination = "rejoined"
            break
        # bifurcation detection on the fresh segment
        for ti, kind in _TEST_KINDS:
            f_a, f_b = tests_k[ti], tests_new[ti]
            if math.isnan(f_a) or math.isnan(f_b):
                continue
            if f_a == 0.0 or (f_a < 0.0) == (f_b < 0.0):
                continue
            loc = _localize(corr, u_k, pred_dir, dist, tests_k, tests_new, ti,
                            pred_dir, symmetric_branch)
            if loc is not None:
                raw_bif, bracket = loc
                kind_here = kind
                if (
                    kind is BifurcationKind.SADDLE_NODE
                    and not symmetric_branch
                    and corr.n % 2 == 1
                    and _raw_symmetric(raw_bif)
                ):
                    # an asymmetric branch folding back exactly on a symmetric
                    # orbit is reconnecting at its pitchfork of origin
                    kind_here = BifurcationKind.PITCHFORK
                s_bif = s_k + float(np.linalg.norm(raw_bif.u - u_k))
                bifs.append((kind_here, raw_bif, bracket, s_bif))
        pts.append((raw.u, raw, s_new, tang_new, tests_new))
        # closure against the trace start
        if len(pts) > MIN_CLOSURE_STEPS:
            d0 = float(np.linalg.norm(raw.u - u0))
            if d0 < max(2.0 * h, 10.0 * CLOSURE_TOL):
                to_seed = u0 - raw.u
                if float(np.dot(to_seed, tang_new)) > 0.0:
                    raw_cl = corr.solve(u0, tang_new)
                    if raw_cl is not None and np.linalg.norm(raw_cl.u - u0) <= CLOSURE_TOL:
                        sec = raw_cl.u - raw.u
                        nrm = float(np.linalg.norm(sec))
                        tang_cl = _orient(raw_cl.null_t, tang_new)
                        tests_cl = _raw_tests(raw_cl, tang_new, symmetric_branch, corr.n)
                        pts.append((raw_cl.u, raw_cl, s_new + nrm, tang_cl, tests_cl))
                        termination = "closed"
                        break
        lam = raw.u[2]
        if lam < lo or lam > hi:
            termination = "range"
            break
        successes += 1
        if successes >= 4:
            h = min(step.max, h * 1.3)
            successes = 0
    return pts, bifs, termination


def continue_branch(
    seed: PeriodicOrbit,
    active: str = "omega",
    lo: float = 0.0,
    hi: float = math.inf,
    step: StepControl | None = None,
    direction: int = 0,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    parent: BifurcationPoint | None = None,
    max_steps: int = 20000,
) -> Branch:
    """Trace the branch through the seed orbit over lo <= active <= hi.

    direction 0 traces both ways from the seed; +1/-1 trace a single way with
    the initial tangent oriented toward larger/smaller parameter values.
    Raises StepCollapseError only if no point beyond the seed converges at the
    minimum step; a branch that collapses after tracing is returned with that
    end flagged in ``terminations``.
    """
    if active not in ACTIVE_PARAMS:
        raise ValueError(f"active parameter must be one of {ACTIVE_PARAMS}")
    if not (lo < hi):
        raise ValueError("range must satisfy lo < hi")
    lam0 = getattr(seed.params, active)
    if not (lo <= lam0 <= hi):
        raise ValueError(f"seed {active}={lam0} outside range [{lo}, {hi}]")
    step = step or StepControl()
    symmetric_branch = seed.symmetric and seed.n % 2 == 1
    corr = _Corrector(seed.params, active, seed.n, rtol, atol,
                      half=symmetric_branch)
    u0 = np.array([seed.s0.x, seed.s0.v, lam0])

    raw_seed = corr.solve(u0, np.array([0.0, 0.0, 1.0]))
    if raw_seed is None:
        raise NoConvergenceError("seed orbit does not satisfy the shooting equations")
    t_null = raw_seed.null_t
    if abs(t_null[2]) > 1e-12:
        t_fwd = _orient(t_null, np.array([0.0, 0.0, 1.0]))
    else:
        t_fwd = _orient(t_null, np.array([1.0, 0.0, 0.0]))
    stop_on_symmetric = (not seed.symmetric) and seed.n % 2 == 1

    directions = [+1, -1] if direction == 0 else [direction]
    traces = []
    for d in directions:
        t_dir = t_fwd if d > 0 else -t_fwd
        pts, bifs, term = _trace(corr, u0, t_dir, lo, hi, step, symmetric_branch,
                                 max_steps, stop_on_symmetric)
        traces.append((pts, bifs, term))
        if term == "closed":
            break

    if len(traces) == 1:
        pts, bifs, term = traces[0]
        if len(pts) < 2 and term == "step_collapse":
            raise StepCollapseError("no continuation step from the seed converged")
        closed = term == "closed"
        points, bifurcations = _assemble(corr, pts, bifs, flip=False, offset=0.0)
        terms = ("seed", term)
    else:
        pts_p, bifs_p, term_p = traces[0]
        pts_m, bifs_m, term_m = traces[1]
        if len(pts_p) < 2 and len(pts_m) < 2:
            raise StepCollapseError("no continuation step from the seed converged")
        closed = False
        total_m = pts_m[-1][2]
        points_m, bifs_mm = _assemble(corr, pts_m, bifs_m, flip=True, offset=total_m)
        points_p, bifs_pp = _assemble(corr, pts_p[1:], bifs_p, flip=False,
                                      offset=total_m)
        points = points_m + points_p
        bifurcations = sorted(bifs_mm + bifs_pp, key=lambda b: b.arclength)
        terms = (term_m, term_p)

    return Branch(
        active=active,
        n=seed.n,
        points=points,
        bifurcations=bifurcations,
        closed=closed,
        terminations=terms,
        parent=parent,
    )


def _assemble(corr, pts, bifs, flip: bool, offset: float):
    """Convert raw trace output to BranchPoints with a uniform orientation."""
    out = []
    total = pts[-1][2] if pts else 0.0
    for u, raw, s, tang, _tests in pts:
        if flip:
            arc = offset - s
            tg = tuple((-tang).tolist())
        else:
            arc = offset + s
            tg = tuple(tang.tolist())
        out.append(_build_point(corr, raw, arc, tg))
    if flip:
        out.reverse()
    bout = []
    for kind, raw_bif, bracket, s_bif in bifs:
        arc = offset - s_bif if flip else offset + s_bif
        p = corr.params_at(raw_bif.u[2])
        orbit = _build_orbit(
            p, corr.n, OscState(raw_bif.u[0], raw_bif.u[1]), raw_bif.M,
            raw_bif.s_half, raw_bif.M_half, corr.rtol, corr.atol,
        )
        bout.append(
            BifurcationPoint(
                kind=kind,
                active=corr.active,
                params_at=p,
                orbit_at=orbit,
                test_value_bracket=bracket,
                arclength=arc,
            )
        )
    return out, sorted(bout, key=lambda b: b.arclength)


def switch_branch(
    pf: BifurcationPoint,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> tuple[PeriodicOrbit, PeriodicOrbit]:
    """Seed the pair of symmetry-broken orbits born at a pitchfork.

    The offset along the antisymmetric null direction q of the half-period
    flip linearization is pinned by a bordered solve {P^n(s) - s = 0,
    q.(s - s_pf) = delta} with the parameter free, so Newton cannot drain back
    onto the symmetric branch and the parameter lands on whichever side of the
    pitchfork the broken pair exists.  The two seeds are mirror images with
    identical multipliers.
    """
    if pf.kind is not BifurcationKind.PITCHFORK:
        raise NotApplicableError("switch_branch requires a pitchfork point")
    o = pf.orbit_at
    p = o.params
    T = o.period
    _, _, _, _, M_half = flow_with_variations(p, o.s0, 0.0, T, t_mid=0.5 * T,
                                              rtol=rtol, atol=atol)
    N = -M_half
    nu, vecs = np.linalg.eig(N)
    idx = int(np.argmin(np.abs(nu + 1.0)))
    q = np.real(vecs[:, idx])
    q /= np.linalg.norm(q)

    lam0 = getattr(p, pf.active)
    s_pf = o.s0.as_array()
    scale = max(1.0, float(np.linalg.norm(s_pf)))
    corr = _Corrector(p, pf.active, o.n, rtol, atol)
    for delta in (1e-2, 3e-3, 3e-2, 1e-1):
        u = _pinned_solve(corr, s_pf, lam0, q, delta * scale)
        if u is None:
            continue
        try:
            p_try = corr.params_at(u[2])
            o1 = refine_orbit(p_try, OscState(u[0], u[1]), o.n, rtol, atol)
            if o1.symmetric:
                continue
            o2 = refine_orbit(p_try, mirror_state(p_try, o1.s0), o.n, rtol, atol)
        except (NoConvergenceError, SingularJacobianError):
            continue
        if o2.symmetric:
            continue
        return o1, o2
    raise SwitchFailedError(f"no asymmetric pair found near {pf.kind} at {pf.params_at}")


def _pinned_solve(corr: _Corrector, s_pf, lam0, q, delta, max_iter=20):
    """Newton on {P^n(s) - s = 0, q.(s - s_pf) = delta} with the parameter
    free.  Returns the extended point or None."""
    u = np.array([s_pf[0] + delta * q[0], s_pf[1] + delta * q[1], lam0])
    for _ in range(max_iter):
        try:
            p = corr.params_at(u[2])
        except ValueError:
            return None
        T = corr.n * p.forcing_period
        try:
            end, M, _, _, _ = flow_with_variations(
                p, OscState(u[0], u[1]), 0.0, T, t_mid=0.5 * T,
                rtol=corr.rtol, atol=corr.atol,
            )
        except Exception:
            return None
        r = np.array([
            end.x - u[0],
            end.v - u[1],
            q[0] * (u[0] - s_pf[0]) + q[1] * (u[1] - s_pf[1]) - delta,
        ])
        rn = float(np.linalg.norm(r))
        if not math.isfinite(rn):
            return None
        if rn <= corr.residual_tol:
            return u
        Flam = corr._flam(u)
        J = np.vstack([
            np.column_stack([M - np.eye(2), Flam]),
            np.array([q[0], q[1], 0.0]),
        ])
        try:
            du = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        u = u + du
    return None


def branch_min_distance(a: Branch, b: Branch, lam_window: float = 0.002) -> float:
    """Smallest (x0, v0) distance between points of two branches at nearly
    equal values of the active parameter.  Returns inf when the parameter
    ranges do not overlap."""
    la = a.lambdas()
    lb = b.lambdas()
    best = math.inf
    for i, bp in enumerate(a.points):
        close = np.abs(lb - la[i]) < lam_window
        if not np.any(close):
            continue
        sa = bp.orbit.s0
        for j in np.nonzero(close)[0]:
            sb = b.points[j].orbit.s0
            d = math.hypot(sa.x - sb.x, sa.v - sb.v)
            if d < best:
                best = d
    return best


def stability_changes_accounted(branch: Branch, slack: float = 0.06) -> bool:
    """Audit: every stability flip between consecutive points must have a
    detected bifurcation within one step of the flip location."""
    for p0, p1 in zip(branch.points, branch.points[1:]):
        if p0.orbit.stable == p1.orbit.stable:
            continue
        s0, s1 = p0.arclength, p1.arclength
        if not any(s0 - slack <= b.arclength <= s1 + slack for b in branch.bifurcations):
            return False
    return True


def find_isolas(
    p_base: ModelParams,
    omega_range: tuple[float, float],
    sweep_hits: list[tuple[float, OscState, int]],
    step: StepControl | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> list[Branch]:
    """Continue deduplicated branches from attractor seeds found by sweeping.

    Each hit is (omega, strobe state, period multiple).  Seeds that land on an
    already-traced branch (match within 1e-6 in (x0, v0, omega normalized by
    the range)) are merged into it rather than traced again.  Refinement
    failures are logged and skipped.
    """
    lo, hi = omega_range
    branches: list[Branch] = []
    for om, s, n in sorted(sweep_hits, key=lambda h: h[0]):
        try:
            p = _params_with(p_base, "omega", om)
            orbit = refine_orbit(p, s, n, rtol, atol)
        except Exception as exc:  # refinement failures are expected near folds
            log.warning("isola seed at omega=%g, n=%d failed: %s", om, n, exc)
            continue
        if any(_orbit_on_branch(br, orbit, (lo, hi), rtol, atol) for br in branches):
            continue
        try:
            br = continue_branch(orbit, "omega", lo, hi, step, rtol=rtol, atol=atol)
        except (NoConvergenceError, StepCollapseError) as exc:
            log.warning("isola continuation from omega=%g failed: %s", om, exc)
            continue
        branches.append(br)
    return branches


def _orbit_on_branch(branch: Branch, orbit: PeriodicOrbit,
                     omega_range: tuple[float, float], rtol, atol,
                     tol: float = 1e-6) -> bool:
    """Does the orbit lie on the branch?  Checked by re-refining the branch
    sheet at the orbit's exact parameter value and comparing states."""
    if branch.n != orbit.n:
        return False
    lam = getattr(orbit.params, branch.active)
    span = omega_range[1] - omega_range[0]
    lams = branch.lambdas()
    s_new = orbit.s0.as_array()
    for i in range(len(branch.points) - 1):
        l0, l1 = lams[i], lams[i + 1]
        if not (min(l0, l1) - 1e-12 <= lam <= max(l0, l1) + 1e-12) or l0 == l1:
            continue
        w = (lam - l0) / (l1 - l0)
        g0 = branch.points[i].orbit.s0.as_array()
        g1 = branch.points[i + 1].orbit.s0.as_array()
        guess = (1.0 - w) * g0 + w * g1
        if np.linalg.norm(guess - s_new) > 0.1 * max(1.0, np.linalg.norm(s_new)):
            continue
        try:
            o_chk = refine_orbit(orbit.params, OscState(*guess), orbit.n, rtol, atol)
        except Exception:
            continue
        d = math.hypot(o_chk.s0.x - orbit.s0.x, o_chk.s0.v - orbit.s0.v)
        if d / max(1.0, span) <= tol or d <= tol:
            return True
    return False
