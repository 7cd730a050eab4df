"""Directional force capability, reflected inertia and haptic force density.

The directional force capability at a configuration is the largest force
magnitude the actuators can statically exert along a unit direction u:
the boundary of the polygon {J^-T tau : |tau_i| <= tau_max,i} along u,
given in closed form by s(u) = min_i tau_max,i / |(J^T u)_i|.

The reflected inertial force is |Lambda(q) u| with Lambda = J^-T M J^-1,
i.e. the force felt when back-driving the end-effector at 1 m/s^2.

Haptic force density is their ratio (dimensionless), mapped over a
workspace grid and a direction sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mechanisms import (
    KinematicsError,
    MechanismModel,
    Singular,
    inertia_matrix,
    inverse_kinematics,
    jacobian,
    joint_effort_limits,
)
from .util import parallel_map


class AllSingular(ValueError):
    """Every grid cell was unreachable or singular."""


@dataclass(frozen=True)
class DirectionSweep:
    """Ordered set of task-space directions, angles in [0, 2*pi)."""

    angles: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float).reshape(-1)
        if angles.size == 0:
            raise ValueError("direction sweep must contain at least one angle")
        if np.any(angles < 0.0) or np.any(angles >= 2.0 * math.pi):
            raise ValueError("angles must lie in [0, 2*pi)")
        if np.any(np.diff(angles) <= 0.0):
            raise ValueError("angles must be strictly increasing")
        object.__setattr__(self, "angles", angles)

    @classmethod
    def uniform(cls, count: int = 360) -> "DirectionSweep":
        if count < 1:
            raise ValueError("count must be >= 1")
        return cls(np.arange(count) * (2.0 * math.pi / count))

    @property
    def unit_vectors(self) -> np.ndarray:
        return np.column_stack([np.cos(self.angles), np.sin(self.angles)])


@dataclass(frozen=True)
class WorkspaceGrid:
    """Rectangular Cartesian sample grid, endpoints inclusive."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    resolution: int = 60

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("grid resolution must be >= 2")
        if not (self.x_range[0] < self.x_range[1] and self.y_range[0] < self.y_range[1]):
            raise ValueError("grid ranges must be non-empty")

    def points(self) -> np.ndarray:
        """Row-major (y outer, x inner) grid points, shape (n, 2)."""
        xs = np.linspace(self.x_range[0], self.x_range[1], self.resolution)
        ys = np.linspace(self.y_range[0], self.y_range[1], self.resolution)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass(frozen=True)
class MetricSample:
    position: tuple[float, float]
    direction: float
    reachable: bool
    force_capability: float  # N; nan when not reachable
    reflected_inertial_force: float  # N at 1 m/s^2; nan when not reachable
    density: float  # dimensionless; nan when not reachable


def _direction_vector(direction: float) -> np.ndarray:
    return np.array([math.cos(direction), math.sin(direction)])


def force_capability(model: MechanismModel, q, direction: float) -> float:
    """Largest force magnitude available along ``direction`` at configuration q."""
    jac = jacobian(model, q)
    limits = joint_effort_limits(model)
    w = jac.T @ _direction_vector(direction)
    with np.errstate(divide="ignore"):
        per_joint = np.where(np.abs(w) > 0.0, limits / np.abs(w), np.inf)
    s = float(np.min(per_joint))
    if not np.isfinite(s):
        raise Singular(f"direction {direction} is unconstrained by the torque box")
    return s


def reflected_inertial_force(model: MechanismModel, q, direction: float) -> float:
    """|Lambda(q) u| at 1 m/s^2, with Lambda = J^-T M J^-1."""
    jac = jacobian(model, q)
    j_inv = np.linalg.inv(jac)
    lam = j_inv.T @ inertia_matrix(model, q) @ j_inv
    return float(np.linalg.norm(lam @ _direction_vector(direction)))


def haptic_force_density(model: MechanismModel, q, direction: float) -> float:
    """Force capability per unit reflected inertial force at (q, direction)."""
    return force_capability(model, q, direction) / reflected_inertial_force(
        model, q, direction
    )


def _cell_samples(
    model: MechanismModel, point: np.ndarray, dirs: np.ndarray, angles: np.ndarray
) -> list[MetricSample]:
    pos = (float(point[0]), float(point[1]))
    try:
        q = inverse_kinematics(model, point)
        jac = jacobian(model, q)
    except KinematicsError:
        nan = float("nan")
        return [
            MetricSample(pos, float(a), False, nan, nan, nan) for a in angles
        ]
    limits = joint_effort_limits(model)
    w = dirs @ jac  # row i = J^T u_i
    with np.errstate(divide="ignore"):
        caps = np.min(np.where(np.abs(w) > 0.0, limits / np.abs(w), np.inf), axis=1)
    j_inv = np.linalg.inv(jac)
    lam = j_inv.T @ inertia_matrix(model, q) @ j_inv
    inertial = np.linalg.norm(dirs @ lam, axis=1)  # Lambda symmetric
    density = caps / inertial
    return [
        MetricSample(pos, float(a), True, float(f), float(i), float(d))
        for a, f, i, d in zip(angles, caps, inertial, density)
    ]


def sweep_workspace(
    model: MechanismModel, grid: WorkspaceGrid, sweep: DirectionSweep
) -> list[MetricSample]:
    """One MetricSample per (grid cell, direction), row-major then by angle.

    Unreachable or singular cells are emitted with ``reachable=False`` and NaN
    metrics so downstream tables stay rectangular.
    """
    dirs = sweep.unit_vectors
    angles = sweep.angles
    chunks = parallel_map(
        lambda p: _cell_samples(model, p, dirs, angles), list(grid.points())
    )
    return [sample for chunk in chunks for sample in chunk]


def min_density(
    model: MechanismModel, grid: WorkspaceGrid, sweep: DirectionSweep
) -> tuple[float, tuple[float, float], float]:
    """Global minimum haptic force density over the sweep.

    Returns (value, argmin position, argmin direction); ties resolve to the
    first occurrence in deterministic row-major-then-angle order.
    """
    best = None
    for sample in sweep_workspace(model, grid, sweep):
        if not sample.reachable or not math.isfinite(sample.density):
            continue
        if best is None or sample.density < best.density:
            best = sample
    if best is None:
        raise AllSingular("no reachable, nonsingular cell in the grid")
    return best.density, best.position, best.direction
