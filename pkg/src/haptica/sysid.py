"""Least-squares identification of the linear-actuator dynamic model.

Two synthetic experiments mirror the identification procedure:

* friction/inertia: zero motor current, a hand applies a chirp force through
  a load cell.  The measured force balances the model, F = m * xdd +
  F_static * sign(xd) + a_viscous * xd, fitted with regressors
  [xdd, sign(xd), xd].
* motor constant: the motor renders a soft virtual spring while the hand
  moves the rod; with the prior (m, F_static, a_viscous) known, K_m follows
  from the single-regressor fit K_m * u = F + m * xdd + F_friction.

Load-cell sign conventions differ between the two experiments (the cell is
flipped so the fitted constants come out positive): friction traces record
the force the hand applies to the rod; motor traces record the force the rod
applies to the hand.  Trace generators set this up; see their docstrings.

Velocities/accelerations come from central differences (second-order
one-sided at the ends).  Samples whose difference stencil enters the
stiction band, or straddles a velocity reversal, are excluded from fits:
sign(xd) is not meaningful there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as _signal

from . import actuator as _act


class TooShort(ValueError):
    """Trace has too few samples to differentiate."""


class RankDeficient(RuntimeError):
    """Regression matrix is ill-conditioned (e.g. no acceleration content)."""


class InsufficientExcitation(RuntimeError):
    """Trace does not excite the dynamics needed for identification."""


DEFAULT_CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class SimTrace:
    """Uniformly sampled identification record."""

    time: np.ndarray  # s
    position: np.ndarray  # m
    force: np.ndarray  # N, load-cell reading (see module docstring for sign)
    current: np.ndarray  # A, commanded motor current
    sample_rate_hz: float

    def __post_init__(self):
        time = np.asarray(self.time, dtype=float)
        if time.size < 3:
            raise TooShort("trace needs at least 3 samples")
        if self.sample_rate_hz <= 0.0:
            raise ValueError("sample rate must be positive")
        steps = np.diff(time)
        if not np.allclose(steps, 1.0 / self.sample_rate_hz, rtol=1e-6, atol=1e-12):
            raise ValueError("trace timestamps must be uniform at the sample rate")
        for name in ("position", "force", "current"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != time.shape:
                raise ValueError(f"{name} must match the time vector length")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "time", time)


@dataclass(frozen=True)
class IdentifiedParams:
    mass: float
    static_friction: float
    viscous_coeff: float
    motor_constant: float | None
    rms_error: float  # N
    max_error: float  # N
    condition_number: float


def differentiate(
    trace: SimTrace, filter_cutoff_hz: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Velocity and acceleration series from the sampled position.

    Central differences in the interior, second-order one-sided at the ends
    (exact for quadratics).  An optional zero-phase Butterworth low-pass is
    applied to the position before differencing.
    """
    x = trace.position
    if x.size < 3:
        raise TooShort("need at least 3 samples to differentiate")
    if filter_cutoff_hz is not None:
        nyquist = trace.sample_rate_hz / 2.0
        if not (0.0 < filter_cutoff_hz < nyquist):
            raise ValueError("filter cutoff must lie below the Nyquist rate")
        b, a = _signal.butter(4, filter_cutoff_hz / nyquist)
        x = _signal.filtfilt(b, a, x)
    dt = 1.0 / trace.sample_rate_hz
    vel = np.gradient(x, dt, edge_order=2)
    acc = np.gradient(vel, dt, edge_order=2)
    return vel, acc


def _fit_mask(vel: np.ndarray, band: float) -> np.ndarray:
    """Samples safe for sign(xd) regressors: outside the stiction band and
    with no velocity reversal inside the central-difference stencil."""
    mask = np.abs(vel) >= band
    reversal = np.zeros_like(mask)
    reversal[1:-1] = vel[:-2] * vel[2:] <= 0.0
    reversal[0] = reversal[-1] = True  # one-sided stencils at the ends
    return mask & ~reversal


def identify_dynamics(
    trace: SimTrace,
    stiction_band: float = 1e-4,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
    filter_cutoff_hz: float | None = None,
) -> IdentifiedParams:
    """Fit (m, F_static, a_viscous) to a zero-current trace.

    The trace force is the load applied to the rod by the hand, so
    F = m * xdd + F_static * sign(xd) + a_viscous * xd.
    """
    vel, acc = differentiate(trace, filter_cutoff_hz)
    mask = _fit_mask(vel, stiction_band)
    if int(np.count_nonzero(mask)) < 10:
        raise InsufficientExcitation("too few samples outside the stiction band")
    regressors = np.column_stack([acc[mask], np.sign(vel[mask]), vel[mask]])
    cond = float(np.linalg.cond(regressors))
    if not math.isfinite(cond) or cond > condition_limit:
        raise RankDeficient(f"regression condition number {cond:.3g} exceeds limit")
    if not (np.any(vel[mask] > 0.0) and np.any(vel[mask] < 0.0)):
        raise InsufficientExcitation("velocity must change sign during the trace")
    target = trace.force[mask]
    coef, _, _, _ = np.linalg.lstsq(regressors, target, rcond=None)
    residual = target - regressors @ coef
    rms = float(np.sqrt(np.mean(residual**2)))
    peak = float(np.max(np.abs(residual)))
    return IdentifiedParams(
        mass=float(coef[0]),
        static_friction=float(coef[1]),
        viscous_coeff=float(coef[2]),
        motor_constant=None,
        rms_error=rms,
        max_error=peak,
        condition_number=cond,
    )


def identify_motor_constant(
    trace: SimTrace,
    prior: IdentifiedParams,
    stiction_band: float = 1e-4,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
    filter_cutoff_hz: float | None = None,
) -> IdentifiedParams:
    """Fit K_m to a commanded-current trace given prior dynamic parameters.

    The trace force is the load the rod applies to the hand, so
    K_m * u = F + m * xdd + F_static * sign(xd) + a_viscous * xd.
    """
    if float(np.max(np.abs(trace.current))) <= 0.0:
        raise InsufficientExcitation("motor current is identically zero")
    vel, acc = differentiate(trace, filter_cutoff_hz)
    mask = _fit_mask(vel, stiction_band)
    if int(np.count_nonzero(mask)) < 10:
        raise InsufficientExcitation("too few samples outside the stiction band")
    u = trace.current[mask]
    denom = float(u @ u)
    if denom <= 0.0:
        raise InsufficientExcitation("no current excitation outside the stiction band")
    friction = prior.static_friction * np.sign(vel[mask]) + prior.viscous_coeff * vel[mask]
    target = trace.force[mask] + prior.mass * acc[mask] + friction
    k_m = float(u @ target / denom)
    residual = target - k_m * u
    rms = float(np.sqrt(np.mean(residual**2)))
    peak = float(np.max(np.abs(residual)))
    cond = 1.0  # single regressor
    return IdentifiedParams(
        mass=prior.mass,
        static_friction=prior.static_friction,
        viscous_coeff=prior.viscous_coeff,
        motor_constant=k_m,
        rms_error=rms,
        max_error=peak,
        condition_number=cond,
    )


def validation_stats(
    trace: SimTrace,
    params: IdentifiedParams,
    stiction_band: float = 1e-4,
    filter_cutoff_hz: float | None = None,
) -> tuple[float, float]:
    """(RMS, max) error between the measured force and the model prediction.

    Zero-current traces predict the hand load m*xdd + friction; traces with
    current predict the delivered force K_m*u - m*xdd - friction.
    """
    vel, acc = differentiate(trace, filter_cutoff_hz)
    mask = _fit_mask(vel, stiction_band)
    friction = params.static_friction * np.sign(vel) + params.viscous_coeff * vel
    if float(np.max(np.abs(trace.current))) > 0.0:
        if params.motor_constant is None:
            raise ValueError("motor constant required to validate a driven trace")
        predicted = params.motor_constant * trace.current - params.mass * acc - friction
    else:
        predicted = params.mass * acc + friction
    err = (trace.force - predicted)[mask]
    if err.size == 0:
        raise InsufficientExcitation("no usable samples outside the stiction band")
    return float(np.sqrt(np.mean(err**2))), float(np.max(np.abs(err)))


@dataclass(frozen=True)
class ChirpSettings:
    """Human excitation profile: logarithmic force chirp, zero at t = 0."""

    amplitude: float = 40.0  # N
    f0_hz: float = 0.1
    f1_hz: float = 10.0
    duration: float = 30.0  # s
    sample_rate_hz: float = 1000.0

    def phase(self, t: float) -> float:
        ratio = self.f1_hz / self.f0_hz
        log_ratio = math.log(ratio)
        return (
            2.0
            * math.pi
            * self.f0_hz
            * self.duration
            * (ratio ** (t / self.duration) - 1.0)
            / log_ratio
        )

    def force(self, t: float) -> float:
        """Instantaneous hand force (continuous in time, not sampled)."""
        return self.amplitude * math.sin(self.phase(t))


def with_noise(trace: SimTrace, sigma: float, seed: int) -> SimTrace:
    """Copy of ``trace`` with Gaussian measurement noise on the force channel."""
    rng = np.random.default_rng(seed)
    return SimTrace(
        trace.time,
        trace.position,
        trace.force + rng.normal(0.0, sigma, trace.force.shape),
        trace.current,
        trace.sample_rate_hz,
    )


def generate_friction_trace(
    params: _act.ActuatorParams,
    chirp: ChirpSettings = ChirpSettings(),
    noise_sigma: float = 0.0,
    seed: int = 0,
    dt: float = 1e-5,
) -> SimTrace:
    """Zero-current chirp-backdrive trace.

    The recorded force is the hand-applied load (positive pushing the rod
    toward +x); optional Gaussian measurement noise is added to the force
    channel only.
    """
    trace = _act.simulate(
        params,
        command=lambda t: 0.0,
        external=lambda t: -chirp.force(t),  # reaction: the hand pushes the rod
        duration=chirp.duration,
        dt=dt,
        control_rate_hz=chirp.sample_rate_hz,
        mode=_act.Mode.LUMPED,
    )
    ts = np.array([p.t for p in trace])
    xs = np.array([p.x for p in trace])
    forces = np.array([-p.external_force for p in trace])
    out = SimTrace(ts, xs, forces, np.zeros_like(ts), chirp.sample_rate_hz)
    if noise_sigma > 0.0:
        out = with_noise(out, noise_sigma, seed)
    return out


def generate_motor_trace(
    params: _act.ActuatorParams,
    chirp: ChirpSettings = ChirpSettings(),
    spring_stiffness: float = 400.0,  # N/m (0.4 N/mm soft virtual spring)
    noise_sigma: float = 0.0,
    seed: int = 0,
    dt: float = 1e-5,
) -> SimTrace:
    """Virtual-spring trace for motor-constant identification.

    The motor renders u = -k_spring * x / K_m (zero-order hold at the sample
    rate) while the hand applies the chirp.  The recorded force is the load
    the rod applies to the hand.  The driver lag is disabled during
    generation: identification assumes the current loop tracks within the
    excitation band.
    """
    gen_params = replace(params, driver_pole_hz=None)
    rate = chirp.sample_rate_hz
    latest = {"x": 0.0}

    def command(t: float) -> float:
        return -spring_stiffness * latest["x"] / gen_params.motor_constant

    state = _act.ActuatorState()
    driver = _act.MotorDriver(gen_params)
    substeps = max(1, round(1.0 / (rate * dt)))
    step_dt = 1.0 / (rate * substeps)
    n_ticks = int(round(chirp.duration * rate))
    ts = [0.0]
    xs = [0.0]
    us = [0.0]
    fs = [-chirp.force(0.0)]
    for tick in range(n_ticks):
        u = command(tick / rate)
        for _ in range(substeps):
            motor = driver.step(u, step_dt)
            state = _act.step(
                state, motor, -chirp.force(state.t), step_dt, gen_params, _act.Mode.LUMPED
            )
        latest["x"] = state.x
        ts.append(state.t)
        xs.append(state.x)
        us.append(u)
        fs.append(-chirp.force(state.t))
    out = SimTrace(np.asarray(ts), np.asarray(xs), np.asarray(fs), np.asarray(us), rate)
    if noise_sigma > 0.0:
        out = with_noise(out, noise_sigma, seed)
    return out
