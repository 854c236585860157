import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from locoteam import model
from locoteam.errors import IntegrationError, SingularityError
from locoteam.kernels import dynamics as dyn
from locoteam.model import BodyParams, PayloadControl, RigidBodyState, RobotControl, RobotState

GRAVITY = np.array([0.0, 0.0, -9.81])


def payload_params(n_handles=2):
    handles = np.array([[0.5, 0.0, 0.0], [-0.5, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0, -0.4, 0.0]])
    return BodyParams(
        mass=10.0,
        inertia_body=np.diag([0.48, 1.08, 1.42]),
        handle_offsets=handles[:n_handles],
    )


def robot_params():
    return BodyParams(mass=50.0, inertia_body=np.diag([2.1, 4.3, 4.8]))


def random_payload_point(rng, n_handles=2):
    x = rng.uniform(-1.0, 1.0, 12)
    x[7] = rng.uniform(-0.9, 0.9)
    u = rng.uniform(-40.0, 40.0, 6 * n_handles)
    return x, u


def random_robot_point(rng):
    x = rng.uniform(-1.0, 1.0, 24)
    x[7] = rng.uniform(-0.9, 0.9)
    u = rng.uniform(-60.0, 60.0, 30)
    p_hand = rng.uniform(-1.0, 1.0, 3)
    return x, u, p_hand


def payload_xdot_oracle(x, u, handles, m0, inertia, g):
    """Direct transcription of the payload equations using scipy rotations."""
    r, r_dot, theta, l = x[0:3], x[3:6], x[6:9], x[9:12]
    rot = Rotation.from_euler("ZYX", theta).as_matrix()
    iw = rot @ inertia @ rot.T
    omega = np.linalg.solve(iw, l)
    rz = Rotation.from_euler("z", theta[0]).as_matrix()
    ry = Rotation.from_euler("y", theta[1]).as_matrix()
    emat = np.column_stack(
        [np.array([0.0, 0.0, 1.0]), rz @ np.array([0.0, 1.0, 0.0]), rz @ ry @ np.array([1.0, 0.0, 0.0])]
    )
    theta_dot = np.linalg.solve(emat, omega)
    acc = g.astype(float).copy()
    l_dot = np.zeros(3)
    for i, offset in enumerate(handles):
        f_bar = u[6 * i : 6 * i + 3]
        tau_bar = u[6 * i + 3 : 6 * i + 6]
        p_hand = r + rot @ offset
        acc = acc + f_bar / m0
        l_dot = l_dot + np.cross(p_hand - r, f_bar) + tau_bar
    return np.concatenate([r_dot, acc, theta_dot, l_dot])


def robot_xdot_oracle(x, u, p_hand, m, inertia, g):
    r, r_dot, theta, l = x[0:3], x[3:6], x[6:9], x[9:12]
    feet = x[12:24].reshape(4, 3)
    rot = Rotation.from_euler("ZYX", theta).as_matrix()
    iw = rot @ inertia @ rot.T
    omega = np.linalg.solve(iw, l)
    rz = Rotation.from_euler("z", theta[0]).as_matrix()
    ry = Rotation.from_euler("y", theta[1]).as_matrix()
    emat = np.column_stack(
        [np.array([0.0, 0.0, 1.0]), rz @ np.array([0.0, 1.0, 0.0]), rz @ ry @ np.array([1.0, 0.0, 0.0])]
    )
    theta_dot = np.linalg.solve(emat, omega)
    f_h, tau_h = u[24:27], u[27:30]
    acc = g + f_h / m
    l_dot = np.cross(p_hand - r, f_h) + tau_h
    for j in range(4):
        f = u[3 * j : 3 * j + 3]
        acc = acc + f / m
        l_dot = l_dot + np.cross(feet[j] - r, f)
    return np.concatenate([r_dot, acc, theta_dot, l_dot, u[12:24]])


class TestEulerRateMap:
    def test_zero_angles_is_axis_reversal(self):
        # At theta = 0 the yaw rate equals omega_z, pitch rate omega_y,
        # roll rate omega_x, so the map is the axis-reversing permutation.
        t = model.euler_rate_map([0.0, 0.0, 0.0])
        expected = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
        np.testing.assert_allclose(t, expected, atol=1e-15)

    def test_gimbal_lock_guard(self):
        with pytest.raises(SingularityError):
            model.euler_rate_map([0.0, np.pi / 2 - 1e-7, 0.0])

    def test_matches_finite_difference_of_rotation_composition(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            theta = rng.uniform(-1.2, 1.2, 3)
            theta_dot = rng.uniform(-1.0, 1.0, 3)
            h = 1e-6
            rp = Rotation.from_euler("ZYX", theta + h * theta_dot).as_matrix()
            rm = Rotation.from_euler("ZYX", theta - h * theta_dot).as_matrix()
            r0 = Rotation.from_euler("ZYX", theta).as_matrix()
            w = (rp - rm) / (2 * h) @ r0.T
            omega = np.array([w[2, 1], w[0, 2], w[1, 0]])
            np.testing.assert_allclose(
                model.euler_rate_map(theta) @ omega, theta_dot, atol=1e-7
            )


class TestWorldInertia:
    def test_identity_rotation(self):
        iw = model.world_inertia([0.0, 0.0, 0.0], np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(iw, np.diag([1.0, 2.0, 3.0]), atol=1e-15)

    def test_yaw_quarter_turn_permutes_axes(self):
        iw = model.world_inertia([np.pi / 2, 0.0, 0.0], np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(iw, np.diag([2.0, 1.0, 3.0]), atol=1e-12)

    def test_eigenvalues_preserved(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = rng.uniform(-0.5, 0.5, (3, 3))
            inertia = a @ a.T + np.eye(3)
            theta = rng.uniform(-1.3, 1.3, 3)
            iw = model.world_inertia(theta, inertia)
            np.testing.assert_allclose(
                np.linalg.eigvalsh(iw), np.linalg.eigvalsh(inertia), atol=1e-10
            )


class TestArmEePosition:
    def test_identity(self):
        p = model.arm_ee_position([0, 0, 0.5], [0, 0, 0], [0.5, 0, 0])
        np.testing.assert_allclose(p, [0.5, 0.0, 0.5], atol=1e-15)

    def test_quarter_yaw(self):
        p = model.arm_ee_position([1, 0, 0.5], [np.pi / 2, 0, 0], [0.5, 0, 0])
        np.testing.assert_allclose(p, [1.0, 0.5, 0.5], atol=1e-12)

    def test_matches_homogeneous_transform(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            r0 = rng.uniform(-2, 2, 3)
            theta = rng.uniform(-1.2, 1.2, 3)
            offset = rng.uniform(-1, 1, 3)
            tf = np.eye(4)
            tf[:3, :3] = Rotation.from_euler("ZYX", theta).as_matrix()
            tf[:3, 3] = r0
            expected = (tf @ np.append(offset, 1.0))[:3]
            np.testing.assert_allclose(
                model.arm_ee_position(r0, theta, offset), expected, atol=1e-12
            )


class TestPayloadDynamics:
    def test_static_equilibrium(self):
        params = payload_params()
        state = RigidBodyState([0, 0, 0.5], [0, 0, 0], [0, 0, 0], [0, 0, 0])
        control = PayloadControl(
            f_bar=[[0, 0, 49.05], [0, 0, 49.05]], tau_bar=np.zeros((2, 3))
        )
        xdot = model.payload_dynamics(state, control, params)
        np.testing.assert_allclose(xdot[3:6], 0.0, atol=1e-12)
        np.testing.assert_allclose(xdot[9:12], 0.0, atol=1e-12)

    def test_free_fall(self):
        params = payload_params()
        state = RigidBodyState([0, 0, 1.0], [0, 0, 0], [0, 0, 0], [0, 0, 0])
        control = PayloadControl(f_bar=np.zeros((2, 3)), tau_bar=np.zeros((2, 3)))
        xdot = model.payload_dynamics(state, control, params)
        np.testing.assert_allclose(xdot[3:6], [0, 0, -9.81], atol=1e-14)
        np.testing.assert_allclose(xdot[9:12], 0.0, atol=1e-14)

    def test_matches_oracle(self):
        params = payload_params()
        rng = np.random.default_rng(21)
        for _ in range(100):
            x, u = random_payload_point(rng)
            got = model.payload_dynamics(x, u, params)
            want = payload_xdot_oracle(
                x, u, params.handle_offsets, params.mass, params.inertia_body, GRAVITY
            )
            np.testing.assert_allclose(got, want, atol=1e-10)


class TestRobotDynamics:
    def test_force_balance_hover(self):
        params = robot_params()
        feet = np.array([[0.35, 0.2, 0], [0.35, -0.2, 0], [-0.35, 0.2, 0], [-0.35, -0.2, 0]])
        state = RobotState(
            RigidBodyState([0, 0, 0.55], [0, 0, 0], [0, 0, 0], [0, 0, 0]), feet
        )
        control = RobotControl(
            f_feet=np.tile([0.0, 0.0, 134.8875], (4, 1)),
            p_dot_feet=np.zeros((4, 3)),
            f_h=[0.0, 0.0, -49.05],
            tau_h=[0.0, 0.0, 0.0],
        )
        xdot = model.robot_dynamics(state, control, np.array([0, 0, 0.55]), params)
        np.testing.assert_allclose(xdot[3:6], 0.0, atol=1e-10)

    def test_ballistic(self):
        params = robot_params()
        x = np.zeros(24)
        x[2] = 0.55
        xdot = model.robot_dynamics(x, np.zeros(30), np.zeros(3), params)
        np.testing.assert_allclose(xdot[3:6], GRAVITY, atol=1e-14)
        np.testing.assert_allclose(xdot[9:12], 0.0, atol=1e-14)
        np.testing.assert_allclose(xdot[12:24], 0.0, atol=1e-14)

    def test_matches_oracle(self):
        params = robot_params()
        rng = np.random.default_rng(5)
        for _ in range(100):
            x, u, p_hand = random_robot_point(rng)
            got = model.robot_dynamics(x, u, p_hand, params)
            want = robot_xdot_oracle(x, u, p_hand, params.mass, params.inertia_body, GRAVITY)
            np.testing.assert_allclose(got, want, atol=1e-10)


class TestBackwardEuler:
    def test_constant_derivative_exact(self):
        x = np.array([1.0, -2.0, 0.5])
        u = np.array([0.2, 0.0, -0.4])
        xn = model.step_backward_euler(lambda xx, uu: uu, x, u, 0.05)
        np.testing.assert_array_equal(xn, x + 0.05 * u)

    def test_momentum_conserved_free_body(self):
        params = robot_params()
        x = np.zeros(24)
        x[9:12] = [0.4, -0.2, 0.7]
        xn = model.robot_step(x, np.zeros(30), np.zeros(3), params, 0.05)
        np.testing.assert_array_equal(xn[9:12], x[9:12])

    def test_equilibrium_fixed_point(self):
        params = payload_params()
        x = np.zeros(12)
        x[2] = 0.5
        u = np.zeros(12)
        u[2] = 49.05
        u[8] = 49.05
        xn = model.payload_step(x, u, params, 0.05)
        np.testing.assert_allclose(xn, x, atol=1e-9)

    def test_nonconvergence_reports_residual(self):
        # dynamics with huge stiffness: x' = -k x with k*dt >> 1 still solvable,
        # so use a pathological non-Lipschitz map instead
        def bad(xx, uu):
            return np.array([1e12 * np.sign(xx[0]) * np.sqrt(abs(xx[0]) + 1.0)])

        with pytest.raises(IntegrationError) as err:
            model.step_backward_euler(bad, np.array([1.0]), np.array([0.0]), 1.0, max_iter=3)
        assert err.value.residual is not None


class TestLinearizeStep:
    def test_foot_block_integrator_chain(self):
        params = robot_params()

        def f(xx, uu):
            return dyn.robot_xdot(xx, uu, np.zeros(3), params.mass, params.inertia_body, GRAVITY)

        def jac(xx, uu):
            return dyn.robot_jac(xx, uu, np.zeros(3), params.mass, params.inertia_body, GRAVITY)

        x = np.zeros(24)
        u = np.zeros(30)
        a_mat, b_mat = model.linearize_step(f, x, u, 0.05, jac=jac)
        np.testing.assert_allclose(a_mat[12:24, 12:24], np.eye(12), atol=1e-12)
        np.testing.assert_allclose(b_mat[12:24, 12:24], 0.05 * np.eye(12), atol=1e-12)

    @pytest.mark.parametrize("subsystem", ["payload", "robot"])
    def test_matches_finite_differences(self, subsystem):
        rng = np.random.default_rng(13)
        dt = 0.05
        if subsystem == "payload":
            params = payload_params()

            def f(xx, uu):
                return dyn.payload_xdot(
                    xx, uu, params.handle_offsets, params.mass, params.inertia_body, GRAVITY
                )

            def jac(xx, uu):
                return dyn.payload_jac(
                    xx, uu, params.handle_offsets, params.mass, params.inertia_body, GRAVITY
                )

            sampler = lambda: random_payload_point(rng)
        else:
            params = robot_params()
            p_hand = np.array([0.3, 0.1, 0.6])

            def f(xx, uu):
                return dyn.robot_xdot(xx, uu, p_hand, params.mass, params.inertia_body, GRAVITY)

            def jac(xx, uu):
                return dyn.robot_jac(xx, uu, p_hand, params.mass, params.inertia_body, GRAVITY)

            sampler = lambda: random_robot_point(rng)[:2]

        for _ in range(20):
            x, u = sampler()
            a_mat, b_mat = model.linearize_step(f, x, u, dt, jac=jac)
            h = 1e-6
            for i in range(x.size):
                e = np.zeros(x.size)
                e[i] = h
                col = (
                    model.step_backward_euler(f, x + e, u, dt, jac=jac)
                    - model.step_backward_euler(f, x - e, u, dt, jac=jac)
                ) / (2 * h)
                assert np.abs(col - a_mat[:, i]).max() <= 1e-5
            for i in range(u.size):
                e = np.zeros(u.size)
                e[i] = h
                col = (
                    model.step_backward_euler(f, x, u + e, dt, jac=jac)
                    - model.step_backward_euler(f, x, u - e, dt, jac=jac)
                ) / (2 * h)
                assert np.abs(col - b_mat[:, i]).max() <= 1e-5

    def test_dt_to_zero_limit(self):
        params = payload_params()

        def f(xx, uu):
            return dyn.payload_xdot(
                xx, uu, params.handle_offsets, params.mass, params.inertia_body, GRAVITY
            )

        def jac(xx, uu):
            return dyn.payload_jac(
                xx, uu, params.handle_offsets, params.mass, params.inertia_body, GRAVITY
            )

        rng = np.random.default_rng(2)
        x, u = random_payload_point(rng)
        a_mat, b_mat = model.linearize_step(f, x, u, 1e-8, jac=jac)
        assert np.abs(a_mat - np.eye(12)).max() <= 1e-6
        assert np.abs(b_mat).max() <= 1e-6


class TestModelInvariants:
    def test_newton_pair_consistency(self):
        """With copies equal to the negated wrenches, total linear momentum rate
        equals total weight plus the sum of foot forces."""
        rng = np.random.default_rng(17)
        pparams = payload_params()
        rparams = robot_params()
        for _ in range(20):
            x0, _ = random_payload_point(rng)
            robots = [random_robot_point(rng) for _ in range(2)]
            copies = np.zeros(12)
            total_feet = np.zeros(3)
            acc_sum = np.zeros(3)
            for i, (xi, ui, _) in enumerate(robots):
                p_hand = model.arm_ee_position(x0[0:3], x0[6:9], pparams.handle_offsets[i])
                copies[6 * i : 6 * i + 3] = -ui[24:27]
                copies[6 * i + 3 : 6 * i + 6] = -ui[27:30]
                total_feet += ui[0:12].reshape(4, 3).sum(axis=0)
                xdot_i = model.robot_dynamics(xi, ui, p_hand, rparams)
                acc_sum += rparams.mass * xdot_i[3:6]
            xdot_0 = model.payload_dynamics(x0, copies, pparams)
            acc_sum += pparams.mass * xdot_0[3:6]
            total_mass = pparams.mass + 2 * rparams.mass
            np.testing.assert_allclose(
                acc_sum, total_mass * GRAVITY + total_feet, atol=1e-9
            )

    def test_free_body_conservation_100_steps(self):
        params = payload_params()
        x = np.zeros(12)
        x[2] = 5.0
        x[9:12] = [0.3, -0.1, 0.25]
        u = np.zeros(12)
        l0 = x[9:12].copy()
        for k in range(100):
            x = model.payload_step(x, u, params, 0.01)
            np.testing.assert_array_equal(x[9:12], l0)
        np.testing.assert_allclose(x[3:6], GRAVITY * 1.0, atol=1e-8)

    def test_principal_axis_spin_energy_nonincreasing(self):
        params = payload_params()
        x = np.zeros(12)
        x[9:12] = [0.0, 0.0, 2.0]
        u = np.zeros(12)

        def kinetic(state):
            iw = model.world_inertia(state[6:9], params.inertia_body)
            return 0.5 * state[9:12] @ np.linalg.solve(iw, state[9:12])

        prev = kinetic(x)
        for _ in range(50):
            x = model.payload_step(x, u, params, 0.02)
            cur = kinetic(x)
            assert cur <= prev + 1e-12
            prev = cur

    def test_tumbling_spin_energy_stays_within_physical_bounds(self):
        # With l conserved exactly, orientation drift repartitions the energy,
        # so only the bounds l^2/(2 I_max) <= KE <= l^2/(2 I_min) are guaranteed.
        params = payload_params()
        x = np.zeros(12)
        x[6:9] = [0.3, 0.2, -0.1]
        x[9:12] = [1.5, -2.0, 1.0]
        u = np.zeros(12)
        l_sq = float(x[9:12] @ x[9:12])
        eigs = np.linalg.eigvalsh(params.inertia_body)
        lo, hi = l_sq / (2 * eigs.max()), l_sq / (2 * eigs.min())

        def kinetic(state):
            iw = model.world_inertia(state[6:9], params.inertia_body)
            return 0.5 * state[9:12] @ np.linalg.solve(iw, state[9:12])

        for _ in range(200):
            x = model.payload_step(x, u, params, 0.02)
            ke = kinetic(x)
            assert lo - 1e-9 <= ke <= hi + 1e-9
