import math

import numpy as np
import pytest
from scipy.optimize import linprog

from haptica.mechanisms import (
    ParallelLinear,
    SerialRotational,
    inverse_kinematics,
    jacobian,
    inertia_matrix,
    joint_effort_limits,
)
from haptica.metrics import (
    AllSingular,
    DirectionSweep,
    WorkspaceGrid,
    force_capability,
    haptic_force_density,
    min_density,
    reflected_inertial_force,
    sweep_workspace,
)

RNG = np.random.default_rng(99)

# Pivots placed so the rod unit vectors at the origin are exactly (1,0), (0,1).
ORTHO = ParallelLinear(base_pivots=((-0.5, 0.0), (0.0, -0.5)))
ORTHO_Q = np.array([0.5, 0.5])


def linprog_capability(model, q, direction):
    """Independent oracle: LP  max s  s.t.  J^-T tau = s u, |tau| <= limits."""
    jac = jacobian(model, q)
    j_inv_t = np.linalg.inv(jac).T
    u = np.array([math.cos(direction), math.sin(direction)])
    limits = joint_effort_limits(model)
    # variables [tau1, tau2, s]; maximize s
    a_eq = np.column_stack([j_inv_t, -u])
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_eq=a_eq,
        b_eq=[0.0, 0.0],
        bounds=[(-limits[0], limits[0]), (-limits[1], limits[1]), (0.0, None)],
        method="highs",
    )
    assert res.success
    return res.x[2]


def home_model_and_q(gamma_deg=56.1, half_span=0.3):
    """Parallel linear device at the home pose with a chosen inter-rod angle."""
    gamma = math.radians(gamma_deg)
    y_home = half_span * math.sqrt((1.0 + math.cos(gamma)) / (1.0 - math.cos(gamma)))
    model = ParallelLinear(base_pivots=((-half_span, 0.0), (half_span, 0.0)))
    return model, inverse_kinematics(model, (0.0, y_home)), gamma


class TestForceCapability:
    def test_along_rod_axis_equals_actuator_limit(self):
        model = ParallelLinear(
            base_pivots=((-0.5, 0.0), (0.0, -0.5)), actuator_force_max=100.0
        )
        assert force_capability(model, ORTHO_Q, 0.0) == pytest.approx(100.0)

    def test_diagonal_reaches_the_corner(self):
        model = ParallelLinear(
            base_pivots=((-0.5, 0.0), (0.0, -0.5)), actuator_force_max=100.0
        )
        cap = force_capability(model, ORTHO_Q, math.pi / 4.0)
        assert cap == pytest.approx(141.42, abs=0.01)

    def test_home_minimum_is_fmax_sin_gamma(self):
        model, q, gamma = home_model_and_q()
        f_max = joint_effort_limits(model)[0]
        angles = np.arange(3600) * (2.0 * math.pi / 3600.0)
        caps = [force_capability(model, q, a) for a in angles]
        assert min(caps) == pytest.approx(f_max * math.sin(gamma), rel=1e-5)
        assert min(caps) == pytest.approx(83.0, abs=1.0)

    def test_matches_linprog_oracle(self):
        cases = [
            (ORTHO, ORTHO_Q),
            (SerialRotational(), np.array([0.3, -1.2])),
            (home_model_and_q()[0], home_model_and_q()[1]),
        ]
        for model, q in cases:
            for direction in RNG.uniform(0.0, 2.0 * math.pi, 20):
                mine = force_capability(model, q, direction)
                ref = linprog_capability(model, q, direction)
                assert mine == pytest.approx(ref, rel=1e-6), (model, direction)

    def test_symmetry_under_direction_flip(self):
        model = SerialRotational()
        q = np.array([0.4, -1.0])
        for direction in RNG.uniform(0.0, math.pi, 50):
            a = force_capability(model, q, direction)
            b = force_capability(model, q, (direction + math.pi) % (2.0 * math.pi))
            assert a == pytest.approx(b, rel=1e-12)


class TestReflectedInertia:
    def test_orthogonal_rods_isotropic(self):
        for direction in RNG.uniform(0.0, 2.0 * math.pi, 25):
            val = reflected_inertial_force(ORTHO, ORTHO_Q, direction)
            assert val == pytest.approx(1.116, rel=1e-9)

    def test_pi_symmetry(self):
        model = SerialRotational()
        q = np.array([0.7, -0.9])
        for direction in RNG.uniform(0.0, math.pi, 50):
            a = reflected_inertial_force(model, q, direction)
            b = reflected_inertial_force(model, q, (direction + math.pi) % (2 * math.pi))
            assert a == pytest.approx(b, rel=1e-12)

    def test_dense_recomputation_oracle(self):
        """Adjugate-formula 2x2 inverse, built by hand, must agree."""
        model = SerialRotational()
        q = np.array([0.5, -1.3])
        jac = jacobian(model, q)
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        j_inv = (
            np.array([[jac[1, 1], -jac[0, 1]], [-jac[1, 0], jac[0, 0]]]) / det
        )
        lam = j_inv.T @ inertia_matrix(model, q) @ j_inv
        for direction in RNG.uniform(0.0, 2.0 * math.pi, 25):
            u = np.array([math.cos(direction), math.sin(direction)])
            ref = math.hypot(*(lam @ u))
            assert reflected_inertial_force(model, q, direction) == pytest.approx(
                ref, rel=1e-9
            )


class TestDensity:
    def test_orthogonal_rods_worst_direction(self):
        model = ParallelLinear(
            base_pivots=((-0.5, 0.0), (0.0, -0.5)), actuator_force_max=100.0
        )
        angles = np.arange(3600) * (2.0 * math.pi / 3600.0)
        dens = [haptic_force_density(model, ORTHO_Q, a) for a in angles]
        assert min(dens) == pytest.approx(100.0 / 1.116, rel=1e-4)

    def test_doubling_torque_doubles_density(self):
        base = ParallelLinear()
        double = ParallelLinear(actuator_force_max=2.0 * base.actuator_force_max)
        q = inverse_kinematics(base, (0.1, 0.5))
        for direction in RNG.uniform(0.0, 2.0 * math.pi, 10):
            assert haptic_force_density(double, q, direction) == pytest.approx(
                2.0 * haptic_force_density(base, q, direction), rel=1e-12
            )

    def test_mass_scaling_law(self):
        base = ParallelLinear()
        scale = 3.7
        heavy = ParallelLinear(
            moving_linear_inertia=scale * base.moving_linear_inertia,
            rotor_linear_inertia=scale * base.rotor_linear_inertia,
        )
        q = inverse_kinematics(base, (0.1, 0.5))
        for direction in RNG.uniform(0.0, 2.0 * math.pi, 10):
            assert haptic_force_density(heavy, q, direction) == pytest.approx(
                haptic_force_density(base, q, direction) / scale, rel=1e-12
            )


class TestSweep:
    def test_sample_count_and_ordering(self):
        model = ParallelLinear()
        grid = WorkspaceGrid((-0.1, 0.1), (0.4, 0.6), resolution=2)
        sweep = DirectionSweep.uniform(4)
        samples = sweep_workspace(model, grid, sweep)
        assert len(samples) == 16
        expected_cells = [(-0.1, 0.4), (0.1, 0.4), (-0.1, 0.6), (0.1, 0.6)]
        for i, sample in enumerate(samples):
            cell = expected_cells[i // 4]
            assert sample.position == pytest.approx(cell)
            assert sample.direction == pytest.approx((i % 4) * math.pi / 2.0)

    def test_single_cell_matches_pointwise_calls(self):
        model = ParallelLinear()
        grid = WorkspaceGrid((-0.01, 0.01), (0.49, 0.51), resolution=2)
        sweep = DirectionSweep.uniform(8)
        samples = sweep_workspace(model, grid, sweep)
        for sample in samples:
            q = inverse_kinematics(model, sample.position)
            assert sample.force_capability == pytest.approx(
                force_capability(model, q, sample.direction), rel=1e-9
            )
            assert sample.reflected_inertial_force == pytest.approx(
                reflected_inertial_force(model, q, sample.direction), rel=1e-9
            )
            assert sample.density == pytest.approx(
                haptic_force_density(model, q, sample.direction), rel=1e-9
            )

    def test_unreachable_cells_flagged_not_dropped(self):
        model = SerialRotational()
        grid = WorkspaceGrid((0.9, 1.5), (0.0, 0.5), resolution=3)
        sweep = DirectionSweep.uniform(2)
        samples = sweep_workspace(model, grid, sweep)
        assert len(samples) == 18
        flags = {s.reachable for s in samples}
        assert flags == {True, False}
        for s in samples:
            if not s.reachable:
                assert math.isnan(s.density)

    def test_min_density_matches_exhaustive_rescan(self):
        model = ParallelLinear()
        grid = WorkspaceGrid((-0.2, 0.2), (0.3, 0.7), resolution=5)
        sweep = DirectionSweep.uniform(36)
        value, pos, direction = min_density(model, grid, sweep)
        samples = [s for s in sweep_workspace(model, grid, sweep) if s.reachable]
        ref = min(s.density for s in samples)
        assert value == pytest.approx(ref, rel=1e-12)
        witness = next(s for s in samples if s.density == ref)
        assert pos == pytest.approx(witness.position)
        assert direction == pytest.approx(witness.direction)

    def test_min_density_single_cell_equals_angle_min(self):
        model = ParallelLinear()
        grid = WorkspaceGrid((-1e-10, 1e-10), (0.5, 0.5 + 1e-10), resolution=2)
        sweep = DirectionSweep.uniform(16)
        value, _, _ = min_density(model, grid, sweep)
        q = inverse_kinematics(model, (0.0, 0.5))
        ref = min(haptic_force_density(model, q, a) for a in sweep.angles)
        assert value == pytest.approx(ref, rel=1e-6)

    def test_all_singular_raises(self):
        model = SerialRotational()
        grid = WorkspaceGrid((5.0, 6.0), (5.0, 6.0), resolution=2)
        sweep = DirectionSweep.uniform(2)
        with pytest.raises(AllSingular):
            min_density(model, grid, sweep)

    def test_argmin_invariant_under_torque_scaling(self):
        base = ParallelLinear()
        double = ParallelLinear(actuator_force_max=2.0 * base.actuator_force_max)
        grid = WorkspaceGrid((-0.2, 0.2), (0.3, 0.7), resolution=4)
        sweep = DirectionSweep.uniform(24)
        v1, p1, d1 = min_density(base, grid, sweep)
        v2, p2, d2 = min_density(double, grid, sweep)
        assert p1 == pytest.approx(p2)
        assert d1 == pytest.approx(d2)
        assert v2 == pytest.approx(2.0 * v1, rel=1e-9)


def test_direction_sweep_validation():
    with pytest.raises(ValueError):
        DirectionSweep(np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        DirectionSweep(np.array([0.0, 7.0]))
    assert DirectionSweep.uniform(360).angles.shape == (360,)


def test_grid_validation():
    with pytest.raises(ValueError):
        WorkspaceGrid((0.0, 1.0), (0.0, 1.0), resolution=1)
    with pytest.raises(ValueError):
        WorkspaceGrid((1.0, 0.0), (0.0, 1.0), resolution=4)
