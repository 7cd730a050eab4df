import math

import numpy as np
import pytest

from haptica.mechanisms import (
    NoIntersection,
    OutOfTravel,
    ParallelLinear,
    ParallelRotational,
    SerialRotational,
    Singular,
    Unreachable,
    forward_kinematics,
    inertia_matrix,
    inverse_kinematics,
    jacobian,
    joint_effort_limits,
)

RNG = np.random.default_rng(1234)


def fd_jacobian(model, q, h=1e-6):
    """Independent oracle: central finite differences of forward kinematics."""
    out = np.zeros((2, 2))
    for k in range(2):
        dq = np.zeros(2)
        dq[k] = h
        out[:, k] = (
            forward_kinematics(model, q + dq) - forward_kinematics(model, q - dq)
        ) / (2.0 * h)
    return out


def sample_parallel_linear_configs(model, n):
    pts = np.column_stack(
        [RNG.uniform(-0.25, 0.25, n), RNG.uniform(0.15, 0.85, n)]
    )
    return [inverse_kinematics(model, p) for p in pts]


def sample_serial_configs(n):
    t1 = RNG.uniform(-math.pi, math.pi, n)
    t2 = -RNG.uniform(0.2, 2.9, n)  # matches the default elbow branch
    return list(np.column_stack([t1, t2]))


def sample_parallel_rot_configs(n):
    t1 = RNG.uniform(-math.pi, math.pi, n)
    gap = RNG.uniform(0.2, 2.9, n) * RNG.choice([-1.0, 1.0], n)
    return list(np.column_stack([t1, t1 - gap]))


class TestForwardKinematics:
    def test_parallel_linear_345_triangle(self):
        model = ParallelLinear(base_pivots=((-0.3, 0.0), (0.3, 0.0)))
        x = forward_kinematics(model, (0.5, 0.5))
        np.testing.assert_allclose(x, [0.0, 0.4], atol=1e-12)

    def test_serial_fully_extended(self):
        model = SerialRotational()
        x = forward_kinematics(model, (0.0, 0.0))
        np.testing.assert_allclose(x, [1.2, 0.0], atol=1e-12)

    def test_parallel_rotational_right_angle(self):
        model = ParallelRotational()
        x = forward_kinematics(model, (math.pi / 2.0, 0.0))
        np.testing.assert_allclose(x, [0.6, 0.6], atol=1e-12)

    def test_no_intersection(self):
        model = ParallelLinear(base_pivots=((-0.3, 0.0), (0.3, 0.0)))
        with pytest.raises(NoIntersection):
            forward_kinematics(model, (0.1, 0.1))

    def test_out_of_travel(self):
        model = ParallelLinear(rod_travel=(0.3, 1.0))
        with pytest.raises(OutOfTravel):
            forward_kinematics(model, (0.2, 0.5))


class TestInverseKinematics:
    def test_parallel_linear_inverse_of_fk(self):
        model = ParallelLinear(base_pivots=((-0.3, 0.0), (0.3, 0.0)))
        q = inverse_kinematics(model, (0.0, 0.4))
        np.testing.assert_allclose(q, [0.5, 0.5], atol=1e-12)

    def test_serial_extended(self):
        model = SerialRotational()
        q = inverse_kinematics(model, (1.2, 0.0))
        np.testing.assert_allclose(q, [0.0, 0.0], atol=1e-9)

    def test_unreachable(self):
        model = SerialRotational()
        with pytest.raises(Unreachable):
            inverse_kinematics(model, (1.5, 0.0))

    def test_wrong_side_rejected(self):
        model = ParallelLinear(base_pivots=((-0.3, 0.0), (0.3, 0.0)))
        with pytest.raises(Unreachable):
            inverse_kinematics(model, (0.0, -0.4))

    @pytest.mark.parametrize(
        "model",
        [
            ParallelLinear(),
            SerialRotational(),
            ParallelRotational(),
        ],
        ids=["parallel_linear", "serial_rotational", "parallel_rotational"],
    )
    def test_round_trip_1000_samples(self, model):
        if isinstance(model, ParallelLinear):
            pts = np.column_stack(
                [RNG.uniform(-0.25, 0.25, 1000), RNG.uniform(0.1, 0.9, 1000)]
            )
        else:
            radius = RNG.uniform(0.25, 1.15, 1000)
            angle = RNG.uniform(-math.pi, math.pi, 1000)
            pts = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
        worst = 0.0
        for p in pts:
            q = inverse_kinematics(model, p)
            err = float(np.linalg.norm(forward_kinematics(model, q) - p))
            worst = max(worst, err)
        assert worst < 1e-9


class TestJacobian:
    def test_parallel_linear_orthogonal_rods_inverse_is_identity(self):
        model = ParallelLinear(base_pivots=((-0.5, 0.0), (0.0, -0.5)))
        jac = jacobian(model, (0.5, 0.5))
        np.testing.assert_allclose(np.linalg.inv(jac), np.eye(2), atol=1e-12)

    @pytest.mark.parametrize(
        "model, configs",
        [
            (ParallelLinear(), "pl"),
            (SerialRotational(), "sr"),
            (ParallelRotational(), "pr"),
        ],
        ids=["parallel_linear", "serial_rotational", "parallel_rotational"],
    )
    def test_matches_finite_differences(self, model, configs):
        if configs == "pl":
            qs = sample_parallel_linear_configs(model, 1000)
        elif configs == "sr":
            qs = sample_serial_configs(1000)
        else:
            qs = sample_parallel_rot_configs(1000)
        for q in qs:
            jac = jacobian(model, q)
            ref = fd_jacobian(model, q)
            rel = np.linalg.norm(jac - ref) / np.linalg.norm(ref)
            assert rel < 1e-5, f"q={q}: rel error {rel}"

    def test_serial_90_degree_standard_form(self):
        model = SerialRotational()
        q = np.array([0.0, math.pi / 2.0])
        jac = jacobian(model, q)
        l1, l2 = model.link_lengths
        expected = np.array([[-l2, -l2], [l1, 0.0]])
        np.testing.assert_allclose(jac, expected, atol=1e-12)

    def test_singular_raises(self):
        model = SerialRotational()
        with pytest.raises(Singular):
            jacobian(model, (0.3, 0.0))

    def test_parallel_linear_translation_invariance(self):
        base = ParallelLinear(base_pivots=((-0.3, 0.0), (0.3, 0.0)))
        shift = np.array([1.7, -2.3])
        moved = ParallelLinear(
            base_pivots=(tuple(shift + (-0.3, 0.0)), tuple(shift + (0.3, 0.0)))
        )
        for q in sample_parallel_linear_configs(base, 50):
            np.testing.assert_allclose(
                jacobian(base, q), jacobian(moved, q), atol=1e-12
            )


class TestInertiaMatrix:
    def test_parallel_linear_paper_constants(self):
        model = ParallelLinear()
        m = inertia_matrix(model, (0.5, 0.5))
        np.testing.assert_allclose(m, np.diag([1.116, 1.116]), atol=1e-9)

    def test_serial_reflected_rotor_only(self):
        # N^2 * J_rotor with J_rotor = 0.583 kg * (0.028245 m)^2
        model = SerialRotational(
            link_linear_density=1e-12, carried_motor_mass=0.0, gear_ratio=21.0,
            rotor_inertia=4.65e-4,
        )
        m = inertia_matrix(model, (0.1, -0.7))
        np.testing.assert_allclose(m, np.diag([0.205065, 0.205065]), atol=1e-6)

    @pytest.mark.parametrize(
        "model, configs",
        [
            (ParallelLinear(), "pl"),
            (SerialRotational(), "sr"),
            (ParallelRotational(), "pr"),
        ],
        ids=["parallel_linear", "serial_rotational", "parallel_rotational"],
    )
    def test_symmetric_positive_definite(self, model, configs):
        if configs == "pl":
            qs = sample_parallel_linear_configs(model, 1000)
        elif configs == "sr":
            qs = sample_serial_configs(1000)
        else:
            qs = sample_parallel_rot_configs(1000)
        for q in qs:
            m = inertia_matrix(model, q)
            np.testing.assert_allclose(m, m.T, atol=1e-12)
            assert np.all(np.linalg.eigvalsh(m) > 0.0)


def test_joint_effort_limits():
    np.testing.assert_allclose(
        joint_effort_limits(ParallelLinear()), [100.0177, 100.0177], atol=1e-3
    )
    np.testing.assert_allclose(
        joint_effort_limits(SerialRotational()), [59.325, 59.325], atol=1e-9
    )
    np.testing.assert_allclose(
        joint_effort_limits(ParallelRotational()), [50.85, 50.85], atol=1e-9
    )


def test_validation_rejects_bad_models():
    with pytest.raises(ValueError):
        ParallelLinear(base_pivots=((0.1, 0.2), (0.1, 0.2)))
    with pytest.raises(ValueError):
        ParallelLinear(rod_travel=(0.5, 0.2))
    with pytest.raises(ValueError):
        SerialRotational(link_lengths=(0.6, -0.1))
