"""Planar 2-DOF mechanism models: kinematics, Jacobians and joint-space inertia.

Three mechanism families are compared throughout the package:

* ``ParallelLinear``  -- two linear actuators (extensible rods) pinned to
  fixed base pivots and meeting at the end-effector.  Joint coordinates are
  the two rod lengths.
* ``SerialRotational`` -- a conventional 2R arm; the second motor rides on
  link 1, so its mass is carried at the elbow.
* ``ParallelRotational`` -- both motors grounded at the base; the second
  joint angle is absolute (rigid-transmission five-bar idealization).

Conventions: task velocity xdot = J(q) qdot, so static forces map as
F = J^-T tau and commanded torques as tau = J^T F_d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Pulley radius / nominal motor torque of the modular linear actuator.
PULLEY_RADIUS = 0.028245  # m
NOMINAL_TORQUE = 2.825  # N*m at the motor shaft
# Linear force available per actuator (continuous rating).
NOMINAL_LINEAR_FORCE = NOMINAL_TORQUE / PULLEY_RADIUS  # ~100.02 N

# Moving linear inertia (rod + belt + tensioner) and rotor-side reflected mass.
MOVING_LINEAR_INERTIA = 0.533  # kg
ROTOR_LINEAR_INERTIA = 0.583  # kg

# Rotor inertia at the motor shaft, reflected mass * pulley radius^2.
ROTOR_INERTIA = ROTOR_LINEAR_INERTIA * PULLEY_RADIUS**2  # ~4.651e-4 kg*m^2

# CFRP rod linear density: 158 g over 1219 mm.
ROD_LINEAR_DENSITY = 0.158 / 1.219  # kg/m

DEFAULT_SINGULARITY_EPS = 1e-9


class KinematicsError(ValueError):
    """Base class for kinematic domain errors."""


class NoIntersection(KinematicsError):
    """Rod circles of a parallel linear mechanism do not meet."""


class OutOfTravel(KinematicsError):
    """A linear joint value lies outside the rod travel range."""


class Unreachable(KinematicsError):
    """Requested end-effector position is outside the workspace."""


class Singular(KinematicsError):
    """Jacobian (or its inverse map) is singular at this configuration."""


def _as_vec2(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"{name} must have exactly 2 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


def _as_pair(value, name: str) -> tuple[float, float]:
    try:
        a, b = (float(value), float(value))  # scalar broadcast
    except TypeError:
        a, b = (float(value[0]), float(value[1]))
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"{name} must be finite")
    return a, b


@dataclass(frozen=True)
class ParallelLinear:
    """Two linear actuators pinned at ``base_pivots``, joined at the end-effector.

    ``elbow_sign = +1`` selects the intersection on the counter-clockwise side
    of the pivot line p1 -> p2 (the working side of the device).
    """

    base_pivots: tuple[tuple[float, float], tuple[float, float]] = ((-0.3, 0.0), (0.3, 0.0))
    rod_travel: tuple[float, float] = (0.05, 1.25)
    actuator_force_max: float = NOMINAL_LINEAR_FORCE
    moving_linear_inertia: float = MOVING_LINEAR_INERTIA
    rotor_linear_inertia: float = ROTOR_LINEAR_INERTIA
    elbow_sign: int = 1

    def __post_init__(self):
        p1 = _as_vec2(self.base_pivots[0], "base pivot 1")
        p2 = _as_vec2(self.base_pivots[1], "base pivot 2")
        object.__setattr__(self, "base_pivots", ((p1[0], p1[1]), (p2[0], p2[1])))
        if np.allclose(p1, p2):
            raise ValueError("base pivots must be distinct")
        lo, hi = self.rod_travel
        if not (0.0 < lo < hi):
            raise ValueError(f"rod travel must satisfy 0 < min < max, got {self.rod_travel}")
        for field_name in ("actuator_force_max", "moving_linear_inertia", "rotor_linear_inertia"):
            if getattr(self, field_name) <= 0.0:
                raise ValueError(f"{field_name} must be strictly positive")
        if self.elbow_sign not in (-1, 1):
            raise ValueError("elbow_sign must be +1 or -1")

    @property
    def pivots(self) -> np.ndarray:
        return np.array(self.base_pivots, dtype=float)

    @property
    def actuator_mass(self) -> float:
        """Total reflected linear inertia per actuator (rod side + rotor side)."""
        return self.moving_linear_inertia + self.rotor_linear_inertia


@dataclass(frozen=True)
class SerialRotational:
    """Planar 2R arm; joint 2 is relative to link 1 and motor 2 rides on link 1."""

    base_point: tuple[float, float] = (0.0, 0.0)
    link_lengths: tuple[float, float] = (0.6, 0.6)
    gear_ratio: tuple[float, float] = (21.0, 21.0)
    rotor_inertia: float = ROTOR_INERTIA
    motor_torque_max: float = NOMINAL_TORQUE
    link_linear_density: float = ROD_LINEAR_DENSITY
    carried_motor_mass: float = 0.8
    elbow_sign: int = -1

    def __post_init__(self):
        base = _as_vec2(self.base_point, "base point")
        object.__setattr__(self, "base_point", (base[0], base[1]))
        object.__setattr__(self, "link_lengths", _as_pair(self.link_lengths, "link lengths"))
        object.__setattr__(self, "gear_ratio", _as_pair(self.gear_ratio, "gear ratio"))
        if min(self.link_lengths) <= 0.0 or min(self.gear_ratio) <= 0.0:
            raise ValueError("link lengths and gear ratios must be strictly positive")
        if self.rotor_inertia <= 0.0 or self.motor_torque_max <= 0.0:
            raise ValueError("rotor inertia and torque limit must be strictly positive")
        if self.link_linear_density < 0.0 or self.carried_motor_mass < 0.0:
            raise ValueError("link density and carried mass must be non-negative")
        if self.elbow_sign not in (-1, 1):
            raise ValueError("elbow_sign must be +1 or -1")

    @property
    def base(self) -> np.ndarray:
        return np.asarray(self.base_point, dtype=float)


@dataclass(frozen=True)
class ParallelRotational:
    """Base-grounded pair of rotational actuators; both joint angles absolute."""

    base_point: tuple[float, float] = (0.0, 0.0)
    link_lengths: tuple[float, float] = (0.6, 0.6)
    gear_ratio: tuple[float, float] = (18.0, 18.0)
    rotor_inertia: float = ROTOR_INERTIA
    motor_torque_max: float = NOMINAL_TORQUE
    link_linear_density: float = ROD_LINEAR_DENSITY
    elbow_sign: int = -1

    def __post_init__(self):
        base = _as_vec2(self.base_point, "base point")
        object.__setattr__(self, "base_point", (base[0], base[1]))
        object.__setattr__(self, "link_lengths", _as_pair(self.link_lengths, "link lengths"))
        object.__setattr__(self, "gear_ratio", _as_pair(self.gear_ratio, "gear ratio"))
        if min(self.link_lengths) <= 0.0 or min(self.gear_ratio) <= 0.0:
            raise ValueError("link lengths and gear ratios must be strictly positive")
        if self.rotor_inertia <= 0.0 or self.motor_torque_max <= 0.0:
            raise ValueError("rotor inertia and torque limit must be strictly positive")
        if self.link_linear_density < 0.0:
            raise ValueError("link density must be non-negative")
        if self.elbow_sign not in (-1, 1):
            raise ValueError("elbow_sign must be +1 or -1")

    @property
    def base(self) -> np.ndarray:
        return np.asarray(self.base_point, dtype=float)


MechanismModel = ParallelLinear | SerialRotational | ParallelRotational


def joint_effort_limits(model: MechanismModel) -> np.ndarray:
    """Per-joint actuation limits: N for linear joints, N*m for rotational ones."""
    if isinstance(model, ParallelLinear):
        return np.array([model.actuator_force_max, model.actuator_force_max])
    n1, n2 = model.gear_ratio
    return np.array([n1 * model.motor_torque_max, n2 * model.motor_torque_max])


def _check_travel(model: ParallelLinear, q: np.ndarray) -> None:
    lo, hi = model.rod_travel
    if np.any(q < lo - 1e-12) or np.any(q > hi + 1e-12):
        raise OutOfTravel(f"rod lengths {q} outside travel range [{lo}, {hi}]")


def forward_kinematics(model: MechanismModel, q) -> np.ndarray:
    """End-effector position for joint coordinates ``q`` (lengths or angles)."""
    q = _as_vec2(q, "q")
    if isinstance(model, ParallelLinear):
        _check_travel(model, q)
        p1, p2 = model.pivots
        l1, l2 = q
        span_vec = p2 - p1
        d = float(np.hypot(*span_vec))
        # Circle-circle intersection; tolerate tangency at the workspace edge.
        a = (l1**2 - l2**2 + d**2) / (2.0 * d)
        h_sq = l1**2 - a**2
        if h_sq < -1e-12 * max(l1, l2) ** 2:
            raise NoIntersection(
                f"rods of lengths {l1:.6g}, {l2:.6g} cannot meet across span {d:.6g}"
            )
        h = math.sqrt(max(h_sq, 0.0))
        e_hat = span_vec / d
        n_hat = np.array([-e_hat[1], e_hat[0]])  # ccw perpendicular of p1 -> p2
        return p1 + a * e_hat + model.elbow_sign * h * n_hat
    if isinstance(model, SerialRotational):
        t1, t2 = q
        l1, l2 = model.link_lengths
        elbow = model.base + l1 * np.array([math.cos(t1), math.sin(t1)])
        return elbow + l2 * np.array([math.cos(t1 + t2), math.sin(t1 + t2)])
    if isinstance(model, ParallelRotational):
        t1, t2 = q
        l1, l2 = model.link_lengths
        elbow = model.base + l1 * np.array([math.cos(t1), math.sin(t1)])
        return elbow + l2 * np.array([math.cos(t2), math.sin(t2)])
    raise TypeError(f"unsupported mechanism model {type(model)!r}")


def elbow_point(model: SerialRotational | ParallelRotational, q) -> np.ndarray:
    """Position of the intermediate (elbow) joint of a rotational mechanism."""
    q = _as_vec2(q, "q")
    l1 = model.link_lengths[0]
    return model.base + l1 * np.array([math.cos(q[0]), math.sin(q[0])])


def inverse_kinematics(model: MechanismModel, x) -> np.ndarray:
    """Joint coordinates that place the end-effector at ``x``.

    Branch selection follows each model's ``elbow_sign`` convention, so
    ``forward_kinematics(model, inverse_kinematics(model, x))`` returns ``x``.
    """
    x = _as_vec2(x, "x")
    if isinstance(model, ParallelLinear):
        p1, p2 = model.pivots
        q = np.array([float(np.hypot(*(x - p1))), float(np.hypot(*(x - p2)))])
        lo, hi = model.rod_travel
        if np.any(q < lo) or np.any(q > hi):
            raise Unreachable(f"position {x} requires rod lengths {q} outside travel")
        span_vec = p2 - p1
        n_hat = np.array([-span_vec[1], span_vec[0]])
        if model.elbow_sign * float(np.dot(x - p1, n_hat)) < 0.0:
            raise Unreachable(f"position {x} lies on the wrong side of the pivot line")
        return q
    # Rotational kinds share the elbow construction: the elbow is the circle
    # intersection of radius l1 about the base and l2 about the target.
    l1, l2 = model.link_lengths
    rel = x - model.base
    r = float(np.hypot(*rel))
    if r > l1 + l2 + 1e-12 or r < abs(l1 - l2) - 1e-12 or r == 0.0:
        raise Unreachable(f"position {x} at radius {r:.6g} is outside the annulus")
    cos_t2 = (r**2 - l1**2 - l2**2) / (2.0 * l1 * l2)
    cos_t2 = min(1.0, max(-1.0, cos_t2))
    t2_rel = model.elbow_sign * math.acos(cos_t2)
    t1 = math.atan2(rel[1], rel[0]) - math.atan2(
        l2 * math.sin(t2_rel), l1 + l2 * math.cos(t2_rel)
    )
    if isinstance(model, SerialRotational):
        return np.array([t1, t2_rel])
    return np.array([t1, t1 + t2_rel])  # absolute second angle


def jacobian(model: MechanismModel, q, eps: float = DEFAULT_SINGULARITY_EPS) -> np.ndarray:
    """Jacobian J with xdot = J(q) qdot.

    For the parallel linear mechanism the rows of J^-1 are the unit vectors
    from each base pivot to the end-effector, so J is obtained by inversion.
    """
    q = _as_vec2(q, "q")
    if isinstance(model, ParallelLinear):
        x = forward_kinematics(model, q)
        p = model.pivots
        u1 = (x - p[0]) / q[0]
        u2 = (x - p[1]) / q[1]
        j_inv = np.array([u1, u2])
        det = j_inv[0, 0] * j_inv[1, 1] - j_inv[0, 1] * j_inv[1, 0]
        if abs(det) <= eps:
            raise Singular(f"rod axes are collinear at q={q} (det={det:.3e})")
        return np.linalg.inv(j_inv)
    l1, l2 = model.link_lengths
    t1 = q[0]
    if isinstance(model, SerialRotational):
        t12 = q[0] + q[1]
        jac = np.array(
            [
                [-l1 * math.sin(t1) - l2 * math.sin(t12), -l2 * math.sin(t12)],
                [l1 * math.cos(t1) + l2 * math.cos(t12), l2 * math.cos(t12)],
            ]
        )
    else:
        t2 = q[1]
        jac = np.array(
            [
                [-l1 * math.sin(t1), -l2 * math.sin(t2)],
                [l1 * math.cos(t1), l2 * math.cos(t2)],
            ]
        )
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if abs(det) <= eps:
        raise Singular(f"Jacobian singular at q={q} (det={det:.3e})")
    return jac


def inertia_matrix(model: MechanismModel, q) -> np.ndarray:
    """Joint-space inertia matrix M(q); symmetric positive definite.

    Links are uniform slender rods (I = m L^2 / 3 about the proximal joint);
    rotor inertia is reflected through the squared gear ratio onto each joint
    diagonal; the serial arm additionally carries motor 2 as a point mass at
    the elbow.
    """
    q = _as_vec2(q, "q")
    if isinstance(model, ParallelLinear):
        m_act = model.actuator_mass
        return np.diag([m_act, m_act])
    l1, l2 = model.link_lengths
    n1, n2 = model.gear_ratio
    rho = model.link_linear_density
    m1, m2 = rho * l1, rho * l2
    refl1 = n1**2 * model.rotor_inertia
    refl2 = n2**2 * model.rotor_inertia
    if isinstance(model, SerialRotational):
        c2 = math.cos(q[1])
        m11 = (
            m1 * l1**2 / 3.0
            + m2 * (l1**2 + l2**2 / 3.0 + l1 * l2 * c2)
            + model.carried_motor_mass * l1**2
            + refl1
        )
        m12 = m2 * (l2**2 / 3.0 + l1 * l2 * c2 / 2.0)
        m22 = m2 * l2**2 / 3.0 + refl2
    else:
        c12 = math.cos(q[0] - q[1])
        m11 = m1 * l1**2 / 3.0 + m2 * l1**2 + refl1
        m12 = m2 * l1 * (l2 / 2.0) * c12
        m22 = m2 * l2**2 / 3.0 + refl2
    return np.array([[m11, m12], [m12, m22]])


def reachable(model: MechanismModel, x) -> bool:
    """True when ``x`` has a valid inverse-kinematics solution."""
    try:
        inverse_kinematics(model, x)
    except KinematicsError:
        return False
    return True
