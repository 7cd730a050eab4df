"""Structural stiffness maps: belt stretch vs. cantilever link bending.

The parallel linear mechanism resists end-effector displacement through
axial belt stretch only: K = sum_i k_i u_i u_i^T, where u_i is the rod unit
vector and k_i the belt stiffness at the current belt span (inversely
proportional to span length).

Rotational mechanisms deflect by link bending.  With both joints locked, the
chain is two Euler-Bernoulli cantilever segments in series; each segment
contributes tip deflection and rotation under the transverse component of
the end-effector load and the moment from its lever arm.  Composing both
flexibilities reproduces the full-length cantilever in the straight
configuration.  Bending only: the axial direction is rigid, capped at a
configurable ceiling.

All stiffnesses are SI (N/m) internally; CSV emitters convert to N/mm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mechanisms import (
    KinematicsError,
    MechanismModel,
    ParallelLinear,
    ParallelRotational,
    SerialRotational,
    elbow_point,
    forward_kinematics,
    inverse_kinematics,
)
from .metrics import DirectionSweep, WorkspaceGrid
from .util import parallel_map

# Ceiling for directions the bending-only model treats as rigid (1e4 N/mm).
DEFAULT_AXIAL_CEILING = 1.0e7  # N/m

# Belt span at configuration q is base_offset + rod extension past minimum travel.
DEFAULT_BELT_BASE_OFFSET = 0.15  # m


class NonpositiveLength(ValueError):
    """Belt span must be strictly positive."""


@dataclass(frozen=True)
class BeltParams:
    """Belt axial stiffness identified at a reference span length."""

    reference_stiffness: float = 222.0e3  # N/m (222 N/mm)
    reference_length: float = 0.488  # m
    base_offset: float = DEFAULT_BELT_BASE_OFFSET  # m

    def __post_init__(self):
        if self.reference_stiffness <= 0.0 or self.reference_length <= 0.0:
            raise ValueError("belt reference stiffness and length must be positive")
        if self.base_offset <= 0.0:
            raise ValueError("belt base offset must be positive")


@dataclass(frozen=True)
class RodSection:
    """Thin-walled tube cross-section of the CFRP linkage rods."""

    outer_diameter: float = 0.0254  # m
    inner_diameter: float = 0.02286  # m
    elastic_modulus: float = 106.0e9  # Pa, calibrated (see bundled configs)

    def __post_init__(self):
        if not (0.0 < self.inner_diameter < self.outer_diameter):
            raise ValueError("require 0 < inner diameter < outer diameter")
        if self.elastic_modulus <= 0.0:
            raise ValueError("elastic modulus must be positive")

    @property
    def area_moment(self) -> float:
        """Second moment of area pi (D^4 - d^4) / 64."""
        return math.pi * (self.outer_diameter**4 - self.inner_diameter**4) / 64.0


@dataclass(frozen=True)
class StiffnessSample:
    position: tuple[float, float]
    direction: float
    reachable: bool
    force_per_meter: float  # N per m of displacement along the direction (|K u|)
    min_eigenvalue: float  # N/m, smallest eigenvalue of K at this cell


def belt_axial_stiffness(belt: BeltParams, length: float) -> float:
    """Belt stiffness at span ``length``: k_ref * L_ref / L (units of k_ref)."""
    if length <= 0.0:
        raise NonpositiveLength(f"belt span must be positive, got {length}")
    return belt.reference_stiffness * belt.reference_length / length


def parallel_linear_stiffness(
    model: ParallelLinear,
    q,
    belt: BeltParams,
    active_actuators: tuple[bool, bool] = (True, True),
) -> np.ndarray:
    """Task-space stiffness K = sum_i k_i u_i u_i^T from axial belt stretch.

    Deactivating an actuator drops its rank-one term (stiffness of the
    remaining rod alone; zero orthogonal to it).
    """
    q = np.asarray(q, dtype=float).reshape(2)
    x = forward_kinematics(model, q)
    k_mat = np.zeros((2, 2))
    for pivot, rod_len, active in zip(model.pivots, q, active_actuators):
        if not active:
            continue
        u = (x - pivot) / rod_len
        span = belt.base_offset + (rod_len - model.rod_travel[0])
        k_mat += belt_axial_stiffness(belt, span) * np.outer(u, u)
    return k_mat


def rotational_structure_stiffness(
    model: SerialRotational | ParallelRotational,
    q,
    section: RodSection,
    axial_ceiling: float = DEFAULT_AXIAL_CEILING,
) -> np.ndarray:
    """Locked-joint bending stiffness of the two-link chain at configuration q.

    Each segment is a cantilever clamped at its proximal joint; its tip
    deflection/rotation under the transmitted tip force F and lever moment
    (x - b) x F propagates rigidly to the end-effector.  The resulting
    compliance is inverted eigenwise with stiffness capped at
    ``axial_ceiling``.
    """
    q = np.asarray(q, dtype=float).reshape(2)
    base = model.base
    elbow = elbow_point(model, q)
    tip = forward_kinematics(model, q)
    ei = section.elastic_modulus * section.area_moment

    compliance = np.zeros((2, 2))
    for a, b in ((base, elbow), (elbow, tip)):
        seg = b - a
        length = float(np.hypot(*seg))
        t_hat = seg / length
        n_hat = np.array([-t_hat[1], t_hat[0]])
        lever = tip - b
        p_vec = np.array([-lever[1], lever[0]])  # z x lever
        c_ff = length**3 / (3.0 * ei)
        c_fm = length**2 / (2.0 * ei)
        c_mm = length / ei
        compliance += (
            c_ff * np.outer(n_hat, n_hat)
            + c_fm * (np.outer(n_hat, p_vec) + np.outer(p_vec, n_hat))
            + c_mm * np.outer(p_vec, p_vec)
        )

    eigvals, eigvecs = np.linalg.eigh(compliance)
    stiff_vals = np.where(
        eigvals > 1.0 / axial_ceiling, 1.0 / np.maximum(eigvals, 1e-300), axial_ceiling
    )
    stiff_vals = np.minimum(stiff_vals, axial_ceiling)
    return eigvecs @ np.diag(stiff_vals) @ eigvecs.T


def cell_stiffness(
    model: MechanismModel,
    point,
    belt: BeltParams,
    section: RodSection,
    axial_ceiling: float = DEFAULT_AXIAL_CEILING,
) -> np.ndarray:
    """Structural stiffness matrix at a workspace point (IK + per-kind model)."""
    q = inverse_kinematics(model, point)
    if isinstance(model, ParallelLinear):
        return parallel_linear_stiffness(model, q, belt)
    return rotational_structure_stiffness(model, q, section, axial_ceiling)


def _cell_samples(
    model: MechanismModel,
    point: np.ndarray,
    dirs: np.ndarray,
    angles: np.ndarray,
    belt: BeltParams,
    section: RodSection,
    axial_ceiling: float,
) -> list[StiffnessSample]:
    pos = (float(point[0]), float(point[1]))
    try:
        k_mat = cell_stiffness(model, point, belt, section, axial_ceiling)
    except KinematicsError:
        nan = float("nan")
        return [StiffnessSample(pos, float(a), False, nan, nan) for a in angles]
    forces = np.linalg.norm(dirs @ k_mat, axis=1)  # K symmetric
    min_eig = float(np.linalg.eigvalsh(k_mat)[0])
    return [
        StiffnessSample(pos, float(a), True, float(f), min_eig)
        for a, f in zip(angles, forces)
    ]


def stiffness_map(
    model: MechanismModel,
    grid: WorkspaceGrid,
    sweep: DirectionSweep,
    belt: BeltParams,
    section: RodSection,
    axial_ceiling: float = DEFAULT_AXIAL_CEILING,
) -> list[StiffnessSample]:
    """Per-cell, per-direction |K u| in deterministic row-major-then-angle order."""
    dirs = sweep.unit_vectors
    angles = sweep.angles
    chunks = parallel_map(
        lambda p: _cell_samples(model, p, dirs, angles, belt, section, axial_ceiling),
        list(grid.points()),
    )
    return [sample for chunk in chunks for sample in chunk]


def min_structural_stiffness(
    model: MechanismModel,
    grid: WorkspaceGrid,
    sweep: DirectionSweep,
    belt: BeltParams,
    section: RodSection,
    axial_ceiling: float = DEFAULT_AXIAL_CEILING,
) -> float:
    """Smallest per-cell minimum stiffness eigenvalue over the map (N/m)."""
    best = math.inf
    for sample in stiffness_map(model, grid, sweep, belt, section, axial_ceiling):
        if sample.reachable and sample.min_eigenvalue < best:
            best = sample.min_eigenvalue
    if not math.isfinite(best):
        raise KinematicsError("no reachable cell in the stiffness grid")
    return best
