"""Time-domain models of the modular linear actuator.

Dynamics follow the identified linear-plus-friction model: the output force
applied to the environment is

    F_out = -m * xdd - F_friction + F_motor

with F_friction = F_static * sign(xd) + a_viscous * xd and F_motor = K_m * u.
Two integration modes are provided:

* ``Mode.LUMPED``   -- rotor and rod move together with the lumped mass m.
* ``Mode.TWO_MASS`` -- the rotor couples to the rod through the timing belt
  spring; Coulomb friction acts on the rod, viscous friction on the rotor.

Integration is semi-implicit (symplectic) Euler with a Karnopp-style
stiction band: below ``stiction_band`` velocity, Coulomb friction cancels
the net applied force up to F_static and the mass sticks.

The motor driver adds an optional first-order lag (current-loop pole) and a
hard force clamp with a saturation flag.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .mechanisms import NOMINAL_TORQUE, PULLEY_RADIUS
from .util import parallel_map


class NonfiniteState(RuntimeError):
    """Simulation diverged to a non-finite state."""


class NonConvergedFit(RuntimeError):
    """Sinusoid fit failed to describe the steady-state response."""


class Mode(str, enum.Enum):
    LUMPED = "lumped"
    TWO_MASS = "two_mass"


@dataclass(frozen=True)
class ActuatorParams:
    """Identified constants of one modular linear actuator (SI units)."""

    rotor_mass: float = 0.583  # kg, rotor + idler reflected to linear
    rod_mass: float = 0.533  # kg, rod + belt + tensioner
    static_friction: float = 5.26  # N
    viscous_coeff: float = 7.52  # N*s/m
    motor_constant: float = 3.25  # N/A
    belt_stiffness: float = 222.0e3  # N/m
    driver_pole_hz: float | None = 30.0  # None disables the current-loop lag
    encoder_bits: int = 12
    pulley_radius: float = PULLEY_RADIUS  # m
    nominal_torque: float = NOMINAL_TORQUE  # N*m
    force_limit: float | None = None  # N; None derives from nominal torque
    stiction_band: float = 1e-4  # m/s

    def __post_init__(self):
        positive = (
            "rotor_mass",
            "rod_mass",
            "static_friction",
            "viscous_coeff",
            "motor_constant",
            "belt_stiffness",
            "pulley_radius",
            "nominal_torque",
            "stiction_band",
        )
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.encoder_bits < 1:
            raise ValueError("encoder_bits must be >= 1")
        if self.driver_pole_hz is not None and self.driver_pole_hz <= 0.0:
            raise ValueError("driver_pole_hz must be positive or None")
        if self.force_limit is not None and self.force_limit <= 0.0:
            raise ValueError("force_limit must be positive or None")

    @property
    def mass(self) -> float:
        """Lumped moving mass m = rotor + rod (holds by construction)."""
        return self.rotor_mass + self.rod_mass

    @property
    def max_force(self) -> float:
        """Force clamp: explicit limit, else nominal torque / pulley radius."""
        if self.force_limit is not None:
            return self.force_limit
        return self.nominal_torque / self.pulley_radius


@dataclass
class ActuatorState:
    """Rod and rotor positions/velocities in reflected linear coordinates."""

    x: float = 0.0
    v: float = 0.0
    rotor_x: float = 0.0
    rotor_v: float = 0.0
    t: float = 0.0

    def check_finite(self) -> None:
        vals = (self.x, self.v, self.rotor_x, self.rotor_v)
        if not all(math.isfinite(val) for val in vals):
            raise NonfiniteState(f"actuator state diverged: {vals}")


def friction_force(v: float, params: ActuatorParams, applied_force: float = 0.0) -> float:
    """Friction force opposing motion: F_static * sign(v) + a_viscous * v.

    Inside the stiction band (|v| < stiction_band) the Coulomb term instead
    opposes the net applied force, clipped to +-F_static, so a resting mass
    under small load stays at rest.
    """
    if abs(v) < params.stiction_band:
        coulomb = min(max(applied_force, -params.static_friction), params.static_friction)
    else:
        coulomb = math.copysign(params.static_friction, v)
    return coulomb + params.viscous_coeff * v


class MotorDriver:
    """Current command -> motor force, with first-order lag and force clamp.

    The lag filters the raw K_m * u signal; the saturation flag reports when
    the filtered (pre-clamp) force exceeds the clamp.
    """

    def __init__(self, params: ActuatorParams, initial_force: float = 0.0):
        self.params = params
        self.filtered = initial_force
        self.saturated = False

    def step(self, u: float, dt: float) -> float:
        target = self.params.motor_constant * u
        pole = self.params.driver_pole_hz
        if pole is None:
            self.filtered = target
        else:
            alpha = 1.0 - math.exp(-2.0 * math.pi * pole * dt)
            self.filtered += alpha * (target - self.filtered)
        limit = self.params.max_force
        self.saturated = abs(self.filtered) > limit
        return min(max(self.filtered, -limit), limit)


def motor_force(
    u: float, params: ActuatorParams, dt: float = 1e-3, driver: MotorDriver | None = None
) -> tuple[float, bool]:
    """Motor force for current command ``u``: K_m * u through lag and clamp.

    With a ``driver`` instance the lag advances one ``dt`` step (stateful
    path used by simulations).  Without one, the steady response is returned:
    the lag has unity DC gain, so a held command passes through unchanged.
    Returns (force, saturation flag).
    """
    if driver is not None:
        return driver.step(u, dt), driver.saturated
    target = params.motor_constant * u
    limit = params.max_force
    saturated = abs(target) > limit
    return min(max(target, -limit), limit), saturated


def step(
    state: ActuatorState,
    motor: float,
    external_force: float,
    dt: float,
    params: ActuatorParams,
    mode: Mode = Mode.LUMPED,
) -> ActuatorState:
    """Advance one semi-implicit Euler step.

    ``motor`` is the already-filtered/clamped motor force (N).
    ``external_force`` is the force the actuator applies to the environment;
    its reaction acts on the rod.  Sign convention: a positive external force
    means the rod pushes the environment toward +x.
    """
    if not (0.0 < dt <= 1e-2):
        raise ValueError(f"dt must lie in (0, 1e-2] s, got {dt}")
    band = params.stiction_band
    f_s = params.static_friction
    if mode is Mode.LUMPED:
        applied = motor - external_force
        v = state.v
        if abs(v) < band and abs(applied) <= f_s:
            v_new = 0.0
        else:
            fric = friction_force(v, params, applied)
            v_new = v + dt * (applied - fric) / params.mass
            if abs(v_new) < band and abs(applied) <= f_s:
                v_new = 0.0
        x_new = state.x + dt * v_new
        new = ActuatorState(x_new, v_new, x_new, v_new, state.t + dt)
    elif mode is Mode.TWO_MASS:
        belt = params.belt_stiffness * (state.rotor_x - state.x)
        rotor_force = motor - belt - params.viscous_coeff * state.rotor_v
        rotor_v = state.rotor_v + dt * rotor_force / params.rotor_mass
        applied = belt - external_force
        v = state.v
        if abs(v) < band and abs(applied) <= f_s:
            v_new = 0.0
        else:
            if abs(v) < band:
                coulomb = min(max(applied, -f_s), f_s)
            else:
                coulomb = math.copysign(f_s, v)
            v_new = v + dt * (applied - coulomb) / params.rod_mass
            if abs(v_new) < band and abs(applied) <= f_s:
                v_new = 0.0
        new = ActuatorState(
            state.x + dt * v_new,
            v_new,
            state.rotor_x + dt * rotor_v,
            rotor_v,
            state.t + dt,
        )
    else:
        raise ValueError(f"unknown mode {mode!r}")
    new.check_finite()
    return new


@dataclass(frozen=True)
class TracePoint:
    t: float
    x: float
    v: float
    u: float
    motor_force: float
    external_force: float
    saturated: bool


def simulate(
    params: ActuatorParams,
    command: "callable",
    external: "callable",
    duration: float,
    dt: float = 1e-5,
    control_rate_hz: float = 1000.0,
    mode: Mode = Mode.LUMPED,
    state: ActuatorState | None = None,
    record_rate_hz: float | None = None,
) -> list[TracePoint]:
    """Roll out the actuator under ``command(t) -> A`` and ``external(t) -> N``.

    The current command is sampled at ``control_rate_hz`` (zero-order hold);
    physics run at ``dt``.  Points are recorded at ``record_rate_hz``
    (defaults to the control rate).
    """
    state = state or ActuatorState()
    driver = MotorDriver(params)
    record_rate = record_rate_hz or control_rate_hz
    substeps = max(1, round(1.0 / (control_rate_hz * dt)))
    dt = 1.0 / (control_rate_hz * substeps)  # make ticks exact
    n_ticks = round(duration * control_rate_hz)
    record_every = max(1, round(control_rate_hz / record_rate))

    trace: list[TracePoint] = []
    u = command(state.t)
    f_ext = external(state.t)
    trace.append(TracePoint(state.t, state.x, state.v, u, 0.0, f_ext, False))
    for tick in range(n_ticks):
        u = command(tick / control_rate_hz)
        for _ in range(substeps):
            f_ext = external(state.t)
            motor = driver.step(u, dt)
            state = step(state, motor, f_ext, dt, params, mode)
        if (tick + 1) % record_every == 0:
            # Snapshot the external load at the exact sample time so trace
            # rows are time-aligned (important for identification fits).
            trace.append(
                TracePoint(
                    state.t, state.x, state.v, u, motor, external(state.t), driver.saturated
                )
            )
    return trace


@dataclass(frozen=True)
class FrequencyPoint:
    frequency_hz: float
    gain_db: float
    phase_deg: float


def _fit_sinusoid(t: np.ndarray, y: np.ndarray, freq_hz: float) -> tuple[float, float]:
    """Least-squares fit A*sin + B*cos + C; returns (amplitude, phase_rad)."""
    w = 2.0 * math.pi * freq_hz
    basis = np.column_stack([np.sin(w * t), np.cos(w * t), np.ones_like(t)])
    coef, _, _, _ = np.linalg.lstsq(basis, y, rcond=None)
    a, b, _ = coef
    amplitude = math.hypot(a, b)
    residual = y - basis @ coef
    rms = float(np.sqrt(np.mean(residual**2)))
    if amplitude <= 0.0 or rms > 0.8 * amplitude:
        raise NonConvergedFit(
            f"no coherent response at {freq_hz} Hz (amp={amplitude:.3g}, rms={rms:.3g})"
        )
    return amplitude, math.atan2(b, a)


def _clamped_response_at(
    params: ActuatorParams,
    amplitude: float,
    freq_hz: float,
    mode: Mode,
    min_cycles: int,
    control_rate_hz: float,
) -> FrequencyPoint:
    # End-effector clamped to the frame: the rod cannot move.  In two-mass
    # mode the rotor oscillates against the belt spring and the transmitted
    # force is the belt tension; in lumped mode the transmitted force is the
    # motor force itself (driver lag only).
    settle = 2.0 * params.rotor_mass / params.viscous_coeff  # rotor decay time
    cycles = max(min_cycles, int(math.ceil(6.0 * settle * freq_hz)))
    period = 1.0 / freq_hz
    dt = min(1e-4, period / 2000.0)
    substeps = max(1, round(1.0 / (control_rate_hz * dt)))
    dt = 1.0 / (control_rate_hz * substeps)
    n_ticks = int(math.ceil(cycles * period * control_rate_hz))

    w = 2.0 * math.pi * freq_hz
    k_belt = params.belt_stiffness
    m_rotor = params.rotor_mass
    visc = params.viscous_coeff
    driver = MotorDriver(params)
    rotor_x = 0.0
    rotor_v = 0.0
    t = 0.0
    times: list[float] = []
    forces: list[float] = []
    record_from = 0.5 * cycles * period
    for tick in range(n_ticks):
        u = amplitude * math.sin(w * (tick / control_rate_hz)) / params.motor_constant
        for _ in range(substeps):
            motor = driver.step(u, dt)
            if mode is Mode.TWO_MASS:
                belt = k_belt * rotor_x
                rotor_v += dt * (motor - belt - visc * rotor_v) / m_rotor
                rotor_x += dt * rotor_v
                transmitted = k_belt * rotor_x
            else:
                transmitted = motor
            t += dt
            if t >= record_from:
                times.append(t)
                forces.append(transmitted)
    fitted, phase = _fit_sinusoid(np.asarray(times), np.asarray(forces), freq_hz)
    gain_db = 20.0 * math.log10(fitted / amplitude)
    phase_deg = math.degrees(phase)
    return FrequencyPoint(freq_hz, gain_db, phase_deg)


def frequency_response(
    params: ActuatorParams,
    amplitude: float,
    freqs,
    mode: Mode = Mode.TWO_MASS,
    min_cycles: int = 20,
    control_rate_hz: float = 1000.0,
) -> list[FrequencyPoint]:
    """Clamped-end force frequency response by sinusoid fitting.

    A sinusoidal force of ``amplitude`` N is commanded at each frequency; at
    least ``min_cycles`` cycles are simulated and the first half discarded as
    transient before fitting the transmitted clamp force.
    """
    if amplitude > params.max_force:
        raise ValueError("command amplitude exceeds the actuator force limit")
    freqs = [float(f) for f in freqs]
    return parallel_map(
        lambda f: _clamped_response_at(
            params, amplitude, f, mode, min_cycles, control_rate_hz
        ),
        freqs,
    )


def minus_3db_crossing(points: list[FrequencyPoint]) -> float:
    """First -3 dB crossing frequency, log-linear interpolated."""
    for prev, cur in zip(points, points[1:]):
        if prev.gain_db > -3.0 >= cur.gain_db:
            span = cur.gain_db - prev.gain_db
            frac = (-3.0 - prev.gain_db) / span
            return float(
                10.0
                ** (
                    math.log10(prev.frequency_hz)
                    + frac * (math.log10(cur.frequency_hz) - math.log10(prev.frequency_hz))
                )
            )
    raise ValueError("response never crosses -3 dB within the frequency range")


def gain_peak(points: list[FrequencyPoint]) -> FrequencyPoint:
    """Frequency point with the largest gain."""
    return max(points, key=lambda p: p.gain_db)


def with_peak_limits(params: ActuatorParams, factor: float = 2.0) -> ActuatorParams:
    """Variant with peak (short-duty) torque limits scaled by ``factor``."""
    return replace(params, nominal_torque=params.nominal_torque * factor, force_limit=None)
