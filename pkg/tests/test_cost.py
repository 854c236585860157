import numpy as np
import pytest

from locoteam import cost as ct
from locoteam.kernels.constraintops import relaxed_log_barrier


class TestStageCost:
    def test_zero_at_reference(self):
        x = np.arange(12.0)
        assert ct.stage_cost(x, np.zeros(6), x, np.ones(12), np.ones(6)) == 0.0

    def test_single_axis_deviation(self):
        x_ref = np.zeros(12)
        x = x_ref.copy()
        x[0] = 0.5
        assert ct.stage_cost(x, np.zeros(6), x_ref, np.ones(12), np.zeros(6)) == pytest.approx(0.25)

    def test_matches_direct_quadratic_form(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.normal(size=24)
            x_ref = rng.normal(size=24)
            u = rng.normal(size=30)
            q = rng.uniform(0, 5, 24)
            r = rng.uniform(0, 2, 30)
            want = (x - x_ref) @ np.diag(q) @ (x - x_ref) + u @ np.diag(r) @ u
            assert ct.stage_cost(x, u, x_ref, q, r) == pytest.approx(want, rel=1e-12)

    def test_terminal_omits_control_term(self):
        x = np.ones(12)
        x_ref = np.zeros(12)
        q = np.ones(12)
        assert ct.stage_cost(x, None, x_ref, q) == pytest.approx(12.0)


class TestConsensusPenalty:
    def test_satisfied_newton_pair(self):
        own = np.array([[1.0, 2.0, 3.0, 0.1, 0.2, 0.3]])
        other = -own
        assert ct.consensus_penalty(own, other, np.zeros((1, 6)), 10.0) == 0.0

    def test_single_step_mismatch(self):
        own = np.zeros((1, 6))
        other = np.zeros((1, 6))
        other[0, 0] = 1.0
        assert ct.consensus_penalty(own, other, np.zeros((1, 6)), 2.0) == pytest.approx(1.0)

    def test_matches_direct_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            own = rng.normal(size=(7, 12))
            other = rng.normal(size=(7, 12))
            w = rng.normal(size=(7, 12))
            rho = rng.uniform(0.5, 20)
            want = 0.5 * rho * sum(
                np.linalg.norm(own[k] + other[k] + w[k]) ** 2 for k in range(7)
            )
            assert ct.consensus_penalty(own, other, w, rho) == pytest.approx(want, rel=1e-12)

    def test_payload_block_equals_sum_of_robot_blocks(self):
        rng = np.random.default_rng(2)
        n, n_robots = 5, 3
        u0 = rng.normal(size=(n, 6 * n_robots))
        robot_wrenches = rng.normal(size=(n_robots, n, 6))
        w = rng.normal(size=(n, 6 * n_robots))
        rho = 10.0
        stacked = np.concatenate([robot_wrenches[i] for i in range(n_robots)], axis=1)
        payload_side = ct.consensus_penalty(u0, stacked, w, rho)
        robot_side = sum(
            ct.consensus_penalty(
                robot_wrenches[i],
                u0[:, 6 * i : 6 * i + 6],
                w[:, 6 * i : 6 * i + 6],
                rho,
            )
            for i in range(n_robots)
        )
        assert payload_side == pytest.approx(robot_side, rel=1e-12)


class TestConsensusMatrices:
    def test_selection_implements_newton_pair(self):
        pen = ct.ConsensusPenalty(rho=10.0, robot_index=1, n_robots=3)
        rng = np.random.default_rng(3)
        u_robot = rng.normal(size=30)
        u_payload = rng.normal(size=18)
        resid = pen.residual(u_robot, u_payload)
        np.testing.assert_allclose(resid, u_robot[24:30] + u_payload[6:12], atol=1e-15)

    def test_rho_positive(self):
        with pytest.raises(ValueError):
            ct.ConsensusPenalty(rho=0.0, robot_index=0, n_robots=2)


class TestQuadraticizeStage:
    def test_pure_quadratic_hessian_exact(self):
        q = np.array([1.0, 2.0, 3.0])
        r = np.array([0.5, 0.25])
        rho = 10.0
        x = np.array([0.1, -0.2, 0.3])
        u = np.array([0.4, -0.5])
        gx, gu, hxx, hxu, huu = ct.quadraticize_stage(
            x, u, np.zeros(3), q, r, consensus=(0, np.array([0.7, -0.1]), rho)
        )
        np.testing.assert_allclose(hxx, np.diag(2 * q), atol=1e-14)
        np.testing.assert_allclose(huu, np.diag(2 * r) + rho * np.eye(2), atol=1e-14)
        np.testing.assert_allclose(hxu, 0.0, atol=1e-14)
        np.testing.assert_allclose(gx, 2 * q * x, atol=1e-14)
        np.testing.assert_allclose(gu, 2 * r * u + rho * (u + [0.7, -0.1]), atol=1e-14)

    def test_gradient_matches_fd_with_barriers(self):
        rng = np.random.default_rng(4)
        nx, nu = 4, 3
        q = rng.uniform(0.1, 2, nx)
        r = rng.uniform(0.1, 2, nu)
        x_ref = rng.normal(size=nx)
        jx1, ju1 = rng.normal(size=nx), rng.normal(size=nu)
        jx2 = rng.normal(size=nx)
        g_jx, g_ju = rng.normal(size=nx), rng.normal(size=nu)
        mu_b, delta = 1e-2, 1e-3
        cvec = rng.normal(size=2)
        rho = 5.0

        def total(x, u):
            val = ct.stage_cost(x, u, x_ref, q, r)
            val += 0.5 * rho * np.sum((u[0:2] + cvec) ** 2)
            z1 = 1.5 + jx1 @ x + ju1 @ u
            z2 = 0.8 + jx2 @ x
            val += relaxed_log_barrier(z1, delta, mu_b)[0]
            val += relaxed_log_barrier(z2, delta, mu_b)[0]
            g = 0.3 + g_jx @ x + g_ju @ u
            val += ct.DEFAULT_EQ_WEIGHT * g * g
            return val

        for _ in range(20):
            x = rng.normal(size=nx) * 0.2
            u = rng.normal(size=nu) * 0.2
            z1 = 1.5 + jx1 @ x + ju1 @ u
            z2 = 0.8 + jx2 @ x
            g = 0.3 + g_jx @ x + g_ju @ u
            gx, gu, *_ = ct.quadraticize_stage(
                x,
                u,
                x_ref,
                q,
                r,
                consensus=(0, cvec, rho),
                barriers=[(z1, jx1, ju1, mu_b, delta), (z2, jx2, None, mu_b, delta)],
                eq_terms=[(g, g_jx, g_ju)],
            )
            h = 1e-6
            for i in range(nx):
                e = np.zeros(nx)
                e[i] = h
                fd = (total(x + e, u) - total(x - e, u)) / (2 * h)
                assert abs(fd - gx[i]) < 1e-5 * max(1.0, abs(fd))
            for i in range(nu):
                e = np.zeros(nu)
                e[i] = h
                fd = (total(x, u + e) - total(x, u - e)) / (2 * h)
                assert abs(fd - gu[i]) < 1e-5 * max(1.0, abs(fd))

    def test_stationary_point_zero_gradient(self):
        q = np.ones(3)
        r = np.ones(2)
        gx, gu, *_ = ct.quadraticize_stage(np.ones(3), np.zeros(2), np.ones(3), q, r)
        np.testing.assert_allclose(gx, 0.0, atol=1e-15)
        np.testing.assert_allclose(gu, 0.0, atol=1e-15)

    def test_quadratic_part_nonnegative(self):
        rng = np.random.default_rng(5)
        w = ct.CostWeights()
        for _ in range(50):
            x = rng.normal(size=24)
            x_ref = rng.normal(size=24)
            u = rng.normal(size=30)
            val = ct.stage_cost(x, u, x_ref, w.robot_q, w.robot_r)
            assert val >= 0.0
        assert ct.stage_cost(x_ref, np.zeros(30), x_ref, w.robot_q, w.robot_r) == 0.0


class TestCostWeights:
    def test_defaults_match_documented_values(self):
        w = ct.CostWeights()
        np.testing.assert_allclose(w.payload_q[:3], 400.0)
        np.testing.assert_allclose(w.payload_q[3:6], 10.0)
        np.testing.assert_allclose(w.payload_q[6:9], 200.0)
        np.testing.assert_allclose(w.payload_q[9:12], 1.0)
        np.testing.assert_allclose(w.robot_q[12:], 20.0)
        np.testing.assert_allclose(w.robot_r[:12], 1e-3)
        np.testing.assert_allclose(w.robot_r[12:24], 1.0)
        np.testing.assert_allclose(w.robot_r[24:], 1e-3)
        assert w.terminal_scale == 10.0
        assert w.payload_r(3).shape == (18,)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            ct.CostWeights(payload_q=[-1.0] * 12)
