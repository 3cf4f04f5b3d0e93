"""Oscillator models, adaptive integration, variational flow, natural period.

Two periodically forced oscillators are supported, selected by ``Model``:

  Duffing              x'' + gamma x' + x + x^3 = A cos(omega t)
  Duffing-Van der Pol  x'' + gamma (x^2 - 1) x' + x + x^3 = A cos(omega t)

The Duffing-Van der Pol damping coefficient gamma*(x^2 - 1) is negative for
|x| < 1, so the oscillator is self-sustained: energy flows in at small
amplitude and the unforced system settles onto a stable limit cycle.

Time and position are normalized so the linear frequency and the cubic
coefficient are both 1.  The forcing phase convention is cos(omega*t) = 1 at
t = 0; every stroboscopic section in the package is taken at t = 0 mod
2*pi/omega.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad

from . import _kernels as _k
from .errors import StepUnderflowError

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


class Model(Enum):
    DUFFING = "duffing"
    DUFFING_VAN_DER_POL = "dvdp"


@dataclass(frozen=True)
class ModelParams:
    """Forcing and damping parameters of one oscillator instance.

    beta and omega0 are fixed to 1 by the normalization and only exist to make
    the convention explicit.
    """

    model: Model = Model.DUFFING
    A: float = 0.0
    omega: float = 1.0
    gamma: float = 0.0
    beta: float = 1.0
    omega0: float = 1.0

    def __post_init__(self):
        if self.A < 0.0:
            raise ValueError(f"forcing amplitude must be >= 0, got {self.A}")
        if self.omega <= 0.0:
            raise ValueError(f"forcing frequency must be > 0, got {self.omega}")
        if self.beta != 1.0 or self.omega0 != 1.0:
            raise ValueError("beta and omega0 are fixed to 1 by the normalization")
        if self.model is Model.DUFFING:
            if self.gamma < 0.0:
                raise ValueError(f"Duffing damping must be >= 0, got {self.gamma}")
        else:
            if self.gamma <= 0.0:
                raise ValueError(f"Duffing-Van der Pol damping must be > 0, got {self.gamma}")

    @property
    def forcing_period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def _code(self) -> int:
        return _k.MODEL_DUFFING if self.model is Model.DUFFING else _k.MODEL_DVDP

    def with_value(self, name: str, value: float) -> "ModelParams":
        """Copy with one of A / omega / gamma replaced."""
        if name not in ("A", "omega", "gamma"):
            raise ValueError(f"unknown parameter {name!r}")
        return replace(self, **{name: value})


class OscState(NamedTuple):
    """Phase-space point (position, velocity)."""

    x: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.v])


@dataclass(frozen=True)
class Trajectory:
    """Densely sampled solution segment."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    params: ModelParams

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> OscState:
        return OscState(float(self.x[i]), float(self.v[i]))


def vector_field(p: ModelParams, s: OscState, t: float) -> tuple[float, float]:
    """Right-hand side (dx/dt, dv/dt) at state s and time t."""
    if p.model is Model.DUFFING:
        damp = p.gamma
    else:
        damp = p.gamma * (s.x * s.x - 1.0)
    dv = -damp * s.v - s.x - s.x**3 + p.A * math.cos(p.omega * t)
    return s.v, dv


def integrate(
    p: ModelParams,
    s0: OscState,
    t0: float,
    t1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_step: float = np.inf,
) -> OscState:
    """Adaptive 5(4) integration of the state from t0 to t1."""
    if t1 <= t0:
        raise ValueError("t1 must be greater than t0")
    if rtol <= 0.0 or atol <= 0.0:
        raise ValueError("tolerances must be positive")
    x, v, st = _k._flow2(p._code, p.A, p.omega, p.gamma, s0.x, s0.v, t0, t1, rtol, atol, max_step)
    if st != _k.STATUS_OK:
        raise StepUnderflowError(f"step size collapsed near t={t0}..{t1} for {p}")
    return OscState(x, v)


def integrate_with_variations(
    p: ModelParams,
    s0: OscState,
    t0: float,
    t1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> tuple[OscState, np.ndarray]:
    """State at t1 plus the fundamental matrix M = d(state at t1)/d(s0).

    The linearized equations are integrated jointly with the base state, with
    error control on the base components only, so M rides on exactly the base
    step sequence.
    """
    if t1 <= t0:
        raise ValueError("t1 must be greater than t0")
    y, _, st = _k._flow7(p._code, p.A, p.omega, p.gamma, s0.x, s0.v, t0, t1, t0, rtol, atol, np.inf)
    if st != _k.STATUS_OK:
        raise StepUnderflowError(f"step size collapsed near t={t0}..{t1} for {p}")
    M = np.array([[y[2], y[4]], [y[3], y[5]]])
    return OscState(y[0], y[1]), M


def flow_with_variations(
    p: ModelParams,
    s0: OscState,
    t0: float,
    t1: float,
    t_mid: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
):
    """Lower-level variant also returning the damping integral and an optional
    mid-time snapshot.

    Returns (state1, M1, w1, state_mid, M_mid) where w1 = int_{t0}^{t1}
    gamma_eff(x(t)) dt (so det M1 = exp(-w1)) and the *_mid entries are None
    unless t_mid is given.  Both fundamental matrices start from the identity
    at t0.
    """
    tm = t_mid if t_mid is not None else t0
    y, ymid, st = _k._flow7(p._code, p.A, p.omega, p.gamma, s0.x, s0.v, t0, t1, tm, rtol, atol, np.inf)
    if st != _k.STATUS_OK:
        raise StepUnderflowError(f"step size collapsed near t={t0}..{t1} for {p}")
    M1 = np.array([[y[2], y[4]], [y[3], y[5]]])
    if t_mid is None:
        return OscState(y[0], y[1]), M1, float(y[6]), None, None
    Mm = np.array([[ymid[2], ymid[4]], [ymid[3], ymid[5]]])
    return OscState(y[0], y[1]), M1, float(y[6]), OscState(ymid[0], ymid[1]), Mm


def sample_trajectory(
    p: ModelParams,
    s0: OscState,
    t0: float,
    t1: float,
    num: int,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Trajectory:
    """Solution sampled on num+1 uniform times covering [t0, t1]."""
    ts = np.linspace(t0, t1, num + 1)
    xs, vs, st = _k._flow2_samples(
        p._code, p.A, p.omega, p.gamma, s0.x, s0.v, t0, ts, rtol, atol, np.inf
    )
    if st != _k.STATUS_OK:
        raise StepUnderflowError(f"step size collapsed while sampling for {p}")
    return Trajectory(ts, xs, vs, p)


def potential(x: float) -> float:
    """Potential of the restoring force, U(x) = x^2/2 + x^4/4."""
    return 0.5 * x * x + 0.25 * x**4


def energy(s: OscState) -> float:
    """Mechanical energy v^2/2 + U(x) of the unforced undamped oscillator."""
    return 0.5 * s.v * s.v + potential(s.x)


def natural_period(x_max: float) -> float:
    """Period of the undamped unforced oscillation with turning point x_max.

    Quarter-period quadrature with the endpoint singularity removed by
    x = x_max sin(theta):

        T = 4 int_0^{pi/2} dtheta / sqrt(1 + x_max^2 (1 + sin^2 theta) / 2)

    Monotonically decreasing in x_max (hardening spring); T -> 2*pi as
    x_max -> 0.
    """
    if x_max <= 0.0:
        raise ValueError(f"amplitude must be positive, got {x_max}")
    a2 = x_max * x_max

    def integrand(theta: float) -> float:
        s = math.sin(theta)
        return 1.0 / math.sqrt(1.0 + 0.5 * a2 * (1.0 + s * s))

    val, _err = quad(integrand, 0.0, 0.5 * math.pi, epsabs=1e-14, epsrel=1e-13)
    return 4.0 * val


def natural_frequency(x_max: float) -> float:
    """Amplitude-dependent frequency 2*pi / natural_period(x_max)."""
    return 2.0 * math.pi / natural_period(x_max)
