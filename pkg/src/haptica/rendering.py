"""Sampled-data haptic rendering against virtual fixtures.

The controller runs at a fixed rate (default 1 kHz): it reads encoder-
quantized actuator positions, evaluates the penalty force field of the
active fixture at the quantized end-effector position, and maps the desired
task force to actuator commands through tau = J^T F_d with a two-stage,
direction-preserving clamp (task-space magnitude first, then a uniform
scaling keeping each actuator inside its limit).  Physics integrate at a
much smaller step through the actuator models.

The displayable-stiffness limit experiment renders a 1-D wall while a
modeled operator presses and slowly releases; a run is classified unstable
when the detrended position oscillates by more than twice the encoder
quantum for at least 0.2 s after the release begins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import actuator as _act
from .mechanisms import KinematicsError, ParallelLinear, Singular, forward_kinematics
from .util import parallel_map

DEFAULT_TASK_CLAMP = 100.0  # N, task-space force magnitude limit
DEFAULT_ACTUATOR_CLAMP = 65.0  # N per actuator

# Sentinel: take encoder resolution from the actuator parameters.
FROM_PARAMS = "params"


class SweepTooCoarse(RuntimeError):
    """Stiffness sweep cannot bracket the stability boundary."""


@dataclass(frozen=True)
class Wall1D:
    """Virtual wall along a single actuator axis; penetration is x > position."""

    stiffness: float  # N/m
    position: float = 0.0  # m
    per_actuator_clamp: float = DEFAULT_ACTUATOR_CLAMP
    task_clamp: float = DEFAULT_TASK_CLAMP

    def __post_init__(self):
        if self.stiffness < 0.0:
            raise ValueError("wall stiffness must be >= 0")
        if self.per_actuator_clamp <= 0.0 or self.task_clamp <= 0.0:
            raise ValueError("force clamps must be positive")


@dataclass(frozen=True)
class Box2D:
    """Rectangular virtual obstacle with a penalty field on its edges."""

    center: tuple[float, float]
    half_extents: tuple[float, float]
    stiffness: float  # N/m
    per_actuator_clamp: float = DEFAULT_ACTUATOR_CLAMP
    task_clamp: float = DEFAULT_TASK_CLAMP

    def __post_init__(self):
        if self.stiffness < 0.0:
            raise ValueError("box stiffness must be >= 0")
        if min(self.half_extents) <= 0.0:
            raise ValueError("box half extents must be positive")
        if self.per_actuator_clamp <= 0.0 or self.task_clamp <= 0.0:
            raise ValueError("force clamps must be positive")


VirtualFixture = Wall1D | Box2D


def fixture_force(position, fixture: VirtualFixture):
    """Penalty force at ``position``: zero outside, stiffness x depth inside.

    For a box the force points outward along the minimum-penetration axis;
    on the diagonal tie the direction is radial from the nearest corner.
    Walls take/return scalars, boxes 2-vectors.
    """
    if isinstance(fixture, Wall1D):
        pen = float(position) - fixture.position
        return -fixture.stiffness * pen if pen > 0.0 else 0.0
    px = float(position[0]) - fixture.center[0]
    py = float(position[1]) - fixture.center[1]
    sx = fixture.half_extents[0] - abs(px)
    sy = fixture.half_extents[1] - abs(py)
    if sx <= 0.0 or sy <= 0.0:
        return np.zeros(2)
    k = fixture.stiffness
    dir_x = 1.0 if px >= 0.0 else -1.0
    dir_y = 1.0 if py >= 0.0 else -1.0
    if sx < sy:
        return np.array([k * sx * dir_x, 0.0])
    if sy < sx:
        return np.array([0.0, k * sy * dir_y])
    # Diagonal tie: push radially toward the nearest corner.
    scale = k * sx / math.sqrt(2.0)
    return np.array([scale * dir_x, scale * dir_y])


def feedforward_torque(
    jac: np.ndarray,
    desired_force,
    task_clamp: float = DEFAULT_TASK_CLAMP,
    per_actuator_clamp: float = DEFAULT_ACTUATOR_CLAMP,
    eps: float = 1e-9,
) -> tuple[np.ndarray, bool, bool]:
    """Open-loop actuator commands tau = J^T F_d with direction-preserving clamps.

    The desired force is first scaled down to ``task_clamp`` magnitude, then
    the command pair is scaled uniformly so no actuator exceeds its limit.
    Returns (tau, task_clamped, actuator_clamped).
    """
    jac = np.asarray(jac, dtype=float)
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if abs(det) <= eps:
        raise Singular("feedforward mapping requires a nonsingular Jacobian")
    f_d = np.asarray(desired_force, dtype=float).reshape(2).copy()
    task_clamped = False
    magnitude = float(np.hypot(*f_d))
    if magnitude > task_clamp:
        f_d *= task_clamp / magnitude
        task_clamped = True
    tau = jac.T @ f_d
    actuator_clamped = False
    peak = float(np.max(np.abs(tau)))
    if peak > per_actuator_clamp:
        tau *= per_actuator_clamp / peak
        actuator_clamped = True
    return tau, task_clamped, actuator_clamped


def encoder_quantum(pulley_radius: float, encoder_bits: int) -> float:
    """Linear position quantum: one encoder count = 2*pi*r / 2^bits."""
    if encoder_bits < 1:
        raise ValueError("encoder_bits must be >= 1")
    return 2.0 * math.pi * pulley_radius / (2.0**encoder_bits)


def quantize(position, pulley_radius: float, encoder_bits: int | None):
    """Round each actuator coordinate to the nearest encoder count multiple.

    ``encoder_bits=None`` disables quantization (ideal sensing).
    """
    if encoder_bits is None:
        return position
    delta = encoder_quantum(pulley_radius, encoder_bits)
    if np.isscalar(position):
        return round(position / delta) * delta
    return np.round(np.asarray(position, dtype=float) / delta) * delta


@dataclass(frozen=True)
class OperatorModel:
    """Hand impedance pulling the end-effector toward an intent trajectory.

    The hand mass rides rigidly on the end-effector; the grip spring/damper
    act between the end-effector and the (time-interpolated) intent point.
    """

    intent_times: np.ndarray
    intent_points: np.ndarray  # (n,) for 1-D scenarios or (n, 2) for planar
    hand_mass: float = 2.0  # kg
    grip_stiffness: float = 500.0  # N/m
    grip_damping: float = 20.0  # N*s/m

    def __post_init__(self):
        times = np.asarray(self.intent_times, dtype=float)
        points = np.asarray(self.intent_points, dtype=float)
        if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0.0):
            raise ValueError("intent times must be increasing with >= 2 entries")
        if points.shape[0] != times.size:
            raise ValueError("intent points must match intent times")
        if self.hand_mass <= 0.0 or self.grip_stiffness <= 0.0 or self.grip_damping <= 0.0:
            raise ValueError("operator impedance parameters must be positive")
        object.__setattr__(self, "intent_times", times)
        object.__setattr__(self, "intent_points", points)

    def target(self, t: float):
        """Intent position and velocity at time ``t`` (held beyond the ends)."""
        times = self.intent_times
        pts = self.intent_points
        if t <= times[0]:
            return pts[0], pts[0] * 0.0
        if t >= times[-1]:
            return pts[-1], pts[-1] * 0.0
        idx = int(np.searchsorted(times, t, side="right")) - 1
        span = times[idx + 1] - times[idx]
        frac = (t - times[idx]) / span
        slope = (pts[idx + 1] - pts[idx]) / span
        return pts[idx] + frac * (pts[idx + 1] - pts[idx]), slope


@dataclass(frozen=True)
class WallTracePoint:
    t: float
    x: float
    xq: float
    commanded_force: float
    motor_force: float
    clamped: bool


def simulate_wall_interaction(
    params: _act.ActuatorParams,
    wall: Wall1D,
    operator: OperatorModel | None,
    duration: float,
    dt: float = 1e-5,
    control_rate_hz: float = 1000.0,
    encoder_bits: int | None = None,
    mode: _act.Mode = _act.Mode.LUMPED,
    initial: _act.ActuatorState | None = None,
) -> list[WallTracePoint]:
    """Single-actuator wall rendering at the control rate.

    The wall exists only through the controller: each tick reads the
    quantized rod position, renders F = -k * penetration (clamped), and
    commands the motor.  The operator grip force acts on the rod as an
    external load; the hand mass is folded into the rod-side mass.
    """
    bits = params.encoder_bits if encoder_bits is FROM_PARAMS else encoder_bits
    sim_params = params
    if operator is not None:
        sim_params = replace(params, rod_mass=params.rod_mass + operator.hand_mass)
    state = initial or _act.ActuatorState()
    driver = _act.MotorDriver(sim_params)
    substeps = max(1, round(1.0 / (control_rate_hz * dt)))
    dt = 1.0 / (control_rate_hz * substeps)
    n_ticks = round(duration * control_rate_hz)
    clamp = min(wall.per_actuator_clamp, wall.task_clamp)

    trace: list[WallTracePoint] = []
    for tick in range(n_ticks + 1):
        t_tick = tick / control_rate_hz
        xq = quantize(state.x, sim_params.pulley_radius, bits)
        f_cmd = fixture_force(xq, wall)
        clamped = abs(f_cmd) > clamp
        f_cmd_clamped = min(max(f_cmd, -clamp), clamp)
        u = f_cmd_clamped / sim_params.motor_constant
        trace.append(
            WallTracePoint(t_tick, state.x, xq, f_cmd_clamped, driver.filtered, clamped)
        )
        if tick == n_ticks:
            break
        if operator is not None:
            target, target_v = operator.target(t_tick)
        for _ in range(substeps):
            if operator is not None:
                grip = operator.grip_stiffness * (target - state.x) + operator.grip_damping * (
                    target_v - state.v
                )
            else:
                grip = 0.0
            motor = driver.step(u, dt)
            state = _act.step(state, motor, -grip, dt, sim_params, mode)
    return trace


@dataclass(frozen=True)
class RenderTracePoint:
    t: float
    x: tuple[float, float]
    xq: tuple[float, float]
    desired_force: tuple[float, float]
    actuator_force: tuple[float, float]
    clamped: bool


def simulate_interaction(
    mechanism: ParallelLinear,
    params: _act.ActuatorParams,
    fixture: Box2D,
    operator: OperatorModel | None,
    duration: float,
    dt: float = 1e-5,
    control_rate_hz: float = 1000.0,
    encoder_bits: int | None | str = FROM_PARAMS,
    initial_position=None,
) -> list[RenderTracePoint]:
    """Planar virtual-box rendering on the parallel linear mechanism.

    Controller per tick: quantize rod lengths, reconstruct the end-effector,
    evaluate the box field there, map through tau = J^T F_d with both clamps.
    Physics per substep: lumped actuator masses reflected to the task frame
    plus the operator hand mass; per-axis Karnopp friction on the rods.
    """
    bits = params.encoder_bits if encoder_bits is FROM_PARAMS else encoder_bits
    p1x, p1y = mechanism.base_pivots[0]
    p2x, p2y = mechanism.base_pivots[1]
    m_act = mechanism.actuator_mass
    m_hand = operator.hand_mass if operator is not None else 0.0
    f_s = params.static_friction
    a_v = params.viscous_coeff
    band = params.stiction_band
    k_m = params.motor_constant
    force_limit = params.max_force

    if initial_position is None:
        if operator is None:
            raise ValueError("initial_position required without an operator")
        initial_position = operator.target(0.0)[0]
    x = float(initial_position[0])
    y = float(initial_position[1])
    vx = vy = 0.0
    drivers = (_act.MotorDriver(params), _act.MotorDriver(params))

    substeps = max(1, round(1.0 / (control_rate_hz * dt)))
    dt = 1.0 / (control_rate_hz * substeps)
    n_ticks = round(duration * control_rate_hz)

    trace: list[RenderTracePoint] = []
    tau = np.zeros(2)
    for tick in range(n_ticks + 1):
        t_tick = tick / control_rate_hz
        l1 = math.hypot(x - p1x, y - p1y)
        l2 = math.hypot(x - p2x, y - p2y)
        q_meas = quantize(np.array([l1, l2]), params.pulley_radius, bits)
        try:
            xq = forward_kinematics(mechanism, q_meas)
            u1x, u1y = (xq[0] - p1x) / q_meas[0], (xq[1] - p1y) / q_meas[0]
            u2x, u2y = (xq[0] - p2x) / q_meas[1], (xq[1] - p2y) / q_meas[1]
            j_inv = np.array([[u1x, u1y], [u2x, u2y]])
            jac = np.linalg.inv(j_inv)
            f_d = fixture_force(xq, fixture)
            tau, c_task, c_act = feedforward_torque(
                jac, f_d, fixture.task_clamp, fixture.per_actuator_clamp
            )
            clamped = c_task or c_act
        except (KinematicsError, np.linalg.LinAlgError):
            # Quantized rod lengths can momentarily be geometrically invalid;
            # hold zero command for this tick rather than aborting.
            xq = np.array([x, y])
            f_d = np.zeros(2)
            tau = np.zeros(2)
            clamped = False
        trace.append(
            RenderTracePoint(
                t_tick,
                (x, y),
                (float(xq[0]), float(xq[1])),
                (float(f_d[0]), float(f_d[1])),
                (float(tau[0]), float(tau[1])),
                clamped,
            )
        )
        if tick == n_ticks:
            break
        if operator is not None:
            target, target_v = operator.target(t_tick)
            tx, ty = float(target[0]), float(target[1])
            tvx, tvy = float(target_v[0]), float(target_v[1])
        u_cmd1 = tau[0] / k_m
        u_cmd2 = tau[1] / k_m
        for _ in range(substeps):
            # geometry at the true state
            r1x, r1y = x - p1x, y - p1y
            r2x, r2y = x - p2x, y - p2y
            l1 = math.hypot(r1x, r1y)
            l2 = math.hypot(r2x, r2y)
            u1x, u1y = r1x / l1, r1y / l1
            u2x, u2y = r2x / l2, r2y / l2
            # operator grip
            if operator is not None:
                gx = operator.grip_stiffness * (tx - x) + operator.grip_damping * (tvx - vx)
                gy = operator.grip_stiffness * (ty - y) + operator.grip_damping * (tvy - vy)
            else:
                gx = gy = 0.0
            # motor forces through driver lag and hard limit
            m1 = drivers[0].step(u_cmd1, dt)
            m2 = drivers[1].step(u_cmd2, dt)
            m1 = min(max(m1, -force_limit), force_limit)
            m2 = min(max(m2, -force_limit), force_limit)
            # per-axis Karnopp friction on the rods
            ld1 = u1x * vx + u1y * vy
            ld2 = u2x * vx + u2y * vy
            app1 = m1 + u1x * gx + u1y * gy
            app2 = m2 + u2x * gx + u2y * gy
            if abs(ld1) < band:
                fr1 = min(max(app1, -f_s), f_s) + a_v * ld1
            else:
                fr1 = math.copysign(f_s, ld1) + a_v * ld1
            if abs(ld2) < band:
                fr2 = min(max(app2, -f_s), f_s) + a_v * ld2
            else:
                fr2 = math.copysign(f_s, ld2) + a_v * ld2
            fx = (m1 - fr1) * u1x + (m2 - fr2) * u2x + gx
            fy = (m1 - fr1) * u1y + (m2 - fr2) * u2y + gy
            # task-space mass matrix and its inverse
            a11 = m_act * (u1x * u1x + u2x * u2x) + m_hand
            a12 = m_act * (u1x * u1y + u2x * u2y)
            a22 = m_act * (u1y * u1y + u2y * u2y) + m_hand
            det = a11 * a22 - a12 * a12
            ax = (a22 * fx - a12 * fy) / det
            ay = (a11 * fy - a12 * fx) / det
            vx += dt * ax
            vy += dt * ay
            x += dt * vx
            y += dt * vy
        if not (math.isfinite(x) and math.isfinite(y)):
            raise _act.NonfiniteState(f"interaction diverged at t={t_tick}")
    return trace


def press_release_intent(
    wall_position: float = 0.0,
    start_offset: float = -0.005,
    press_depth: float = 0.003,
    approach_time: float = 0.5,
    hold_time: float = 0.3,
    release_time: float = 2.0,
    settle_time: float = 1.2,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Pull-then-release intent profile; returns (times, points, release start)."""
    t0 = 0.2
    times = np.array(
        [
            0.0,
            t0,
            t0 + approach_time,
            t0 + approach_time + hold_time,
            t0 + approach_time + hold_time + release_time,
            t0 + approach_time + hold_time + release_time + settle_time,
        ]
    )
    start = wall_position + start_offset
    pressed = wall_position + press_depth
    points = np.array([start, start, pressed, pressed, start, start])
    release_start = t0 + approach_time + hold_time
    return times, points, release_start


def oscillation_amplitude(
    times: np.ndarray, positions: np.ndarray, t_from: float, window: float = 0.2
) -> float:
    """Largest half peak-to-peak of linearly detrended position over sliding
    windows of ``window`` seconds starting at ``t_from``."""
    sel = times >= t_from
    ts = times[sel]
    xs = positions[sel]
    if ts.size < 8:
        return 0.0
    dt = ts[1] - ts[0]
    n_win = max(4, int(round(window / dt)))
    hop = max(1, n_win // 2)
    worst = 0.0
    for start in range(0, ts.size - n_win + 1, hop):
        seg_t = ts[start : start + n_win]
        seg_x = xs[start : start + n_win]
        slope, intercept = np.polyfit(seg_t, seg_x, 1)
        resid = seg_x - (slope * seg_t + intercept)
        amp = 0.5 * (float(np.max(resid)) - float(np.min(resid)))
        worst = max(worst, amp)
    return worst


@dataclass(frozen=True)
class StiffnessLimitResult:
    stiffness_values: tuple[float, ...]  # N/m, ascending
    unstable: tuple[bool, ...]
    amplitudes: tuple[float, ...]  # m, worst detrended oscillation amplitude
    critical_stiffness: float | None  # N/m; None when stable through the sweep
    amplitude_threshold: float  # m


def stiffness_render_limit(
    params: _act.ActuatorParams,
    operator: OperatorModel,
    stiffness_values,
    encoder_bits: int | None = 12,
    wall_position: float = 0.0,
    press_depth: float = 0.003,
    release_time: float = 2.0,
    dt: float = 1e-5,
    control_rate_hz: float = 1000.0,
    mode: _act.Mode = _act.Mode.LUMPED,
    threshold_bits: int = 12,
) -> StiffnessLimitResult:
    """Sweep wall stiffness; classify each press-and-release run for stability.

    A run is unstable when the detrended rod position oscillates more than
    twice the encoder quantum (of ``threshold_bits`` when quantization is
    disabled) over any 0.2 s window after the release begins.  Returns the
    largest stable stiffness below the first unstable one; ``None`` when the
    sweep never destabilizes.
    """
    ks = [float(k) for k in stiffness_values]
    if len(ks) < 1 or any(ks[i] >= ks[i + 1] for i in range(len(ks) - 1)):
        raise ValueError("stiffness sweep must be ascending and non-empty")
    bits_for_threshold = encoder_bits if encoder_bits is not None else threshold_bits
    threshold = 2.0 * encoder_quantum(params.pulley_radius, bits_for_threshold)
    times, points, release_start = press_release_intent(
        wall_position, press_depth=press_depth, release_time=release_time
    )
    duration = float(times[-1])
    base_operator = OperatorModel(
        times,
        points,
        hand_mass=operator.hand_mass,
        grip_stiffness=operator.grip_stiffness,
        grip_damping=operator.grip_damping,
    )

    def run(k: float) -> float:
        wall = Wall1D(stiffness=k, position=wall_position)
        start_state = _act.ActuatorState(x=float(points[0]), rotor_x=float(points[0]))
        trace = simulate_wall_interaction(
            params,
            wall,
            base_operator,
            duration,
            dt=dt,
            control_rate_hz=control_rate_hz,
            encoder_bits=encoder_bits,
            mode=mode,
            initial=start_state,
        )
        ts = np.array([p.t for p in trace])
        xs = np.array([p.x for p in trace])
        return oscillation_amplitude(ts, xs, release_start)

    amplitudes = parallel_map(run, ks)
    unstable = [amp > threshold for amp in amplitudes]
    critical: float | None
    if not any(unstable):
        critical = None
    else:
        first = unstable.index(True)
        if first == 0:
            raise SweepTooCoarse(
                "lowest stiffness in the sweep is already unstable; extend downward"
            )
        critical = ks[first - 1]
    return StiffnessLimitResult(
        tuple(ks), tuple(unstable), tuple(amplitudes), critical, threshold
    )
