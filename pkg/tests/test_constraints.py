import numpy as np
import pytest

from locoteam import constraints as cn
from locoteam.errors import ConfigValidationError


def fd_rows(fn, x, h=1e-6):
    """Central-difference Jacobian of a vector function of one vector arg."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        cols.append((fn(x + e) - fn(x - e)) / (2 * h))
    return np.array(cols).T


class TestFrictionCone:
    def test_pure_normal_force_inside(self):
        res, _ = cn.friction_cone([0, 0, 100.0], [0, 0, 1.0], 0.7)
        assert abs(res[0] - (-100.0)) < 1e-9
        assert abs(res[1] - (-70.0)) < 1e-2  # smoothing shifts by ~eps
        assert np.all(res <= 0)

    def test_tangential_overload_violates(self):
        res, _ = cn.friction_cone([80.0, 0, 100.0], [0, 0, 1.0], 0.7)
        assert res[1] == pytest.approx(10.0, abs=1e-2)
        assert res[1] > 0

    def test_rotated_slope_case(self):
        ang = np.deg2rad(10.0)
        n = np.array([-np.sin(ang), 0.0, np.cos(ang)])
        res, _ = cn.friction_cone(100.0 * n, n, 0.7)
        assert res[0] == pytest.approx(-100.0, abs=1e-9)
        assert res[1] == pytest.approx(-70.0, abs=1e-2)

    def test_unit_normal_required(self):
        with pytest.raises(ValueError):
            cn.friction_cone([0, 0, 1.0], [0, 0, 2.0], 0.7)

    def test_jacobian_matches_fd(self):
        rng = np.random.default_rng(0)
        n = np.array([0.1, -0.2, 1.0])
        n /= np.linalg.norm(n)
        for _ in range(20):
            f = rng.uniform(-50, 50, 3)
            _, jac = cn.friction_cone(f, n, 0.6)
            fd = fd_rows(lambda ff: cn.friction_cone(ff, n, 0.6)[0], f)
            assert np.abs(jac - fd).max() < 1e-5


class TestManipulationWrench:
    def test_carrying_equilibrium_inside(self):
        box = cn.WrenchBox.symmetric(5.0)
        res, _, _ = cn.manipulation_wrench_constraints(
            [0, 0, -49.05], [0, 0, 0], [0, 0, 1.0], 0.7, box
        )
        assert np.all(res[:2] <= 0)

    def test_centered_torque_box(self):
        box = cn.WrenchBox.symmetric(5.0)
        res, _, _ = cn.manipulation_wrench_constraints(
            [0, 0, -49.05], [0, 0, 0], [0, 0, 1.0], 0.7, box
        )
        np.testing.assert_allclose(res[2:], -5.0, atol=1e-12)

    def test_signs_match_direct_inequalities(self):
        rng = np.random.default_rng(1)
        box = cn.WrenchBox([-4, -5, -6], [4, 5, 6])
        n = np.array([0.0, 0.0, 1.0])
        mu = 0.5
        for _ in range(50):
            f_h = rng.uniform(-80, 80, 3)
            tau = rng.uniform(-10, 10, 3)
            res, _, _ = cn.manipulation_wrench_constraints(f_h, tau, n, mu, box)
            reaction = -f_h
            fn = reaction @ n
            ft = np.linalg.norm(reaction - fn * n)
            direct = np.concatenate(
                [[-fn, ft - mu * fn], box.tau_min - tau, tau - box.tau_max]
            )
            # smoothing perturbs magnitudes slightly but never the sign except
            # within eps of the boundary
            mask = np.abs(direct) > 1e-2
            assert np.all(np.sign(res[mask]) == np.sign(direct[mask]))

    def test_jacobians_match_fd(self):
        rng = np.random.default_rng(2)
        box = cn.WrenchBox.symmetric(5.0)
        n = np.array([0.1, 0.1, 1.0])
        n /= np.linalg.norm(n)
        for _ in range(20):
            f_h = rng.uniform(-60, 60, 3)
            tau = rng.uniform(-8, 8, 3)
            _, j_f, j_tau = cn.manipulation_wrench_constraints(f_h, tau, n, 0.7, box)
            fd_f = fd_rows(
                lambda ff: cn.manipulation_wrench_constraints(ff, tau, n, 0.7, box)[0], f_h
            )
            fd_tau = fd_rows(
                lambda tt: cn.manipulation_wrench_constraints(f_h, tt, n, 0.7, box)[0], tau
            )
            assert np.abs(j_f - fd_f).max() < 1e-5
            assert np.abs(j_tau - fd_tau).max() < 1e-5


class TestContactEqualities:
    def test_stance_zero_velocity(self):
        res, _, _ = cn.contact_equalities(True, [0, 0, 0], [0, 0, 50.0])
        np.testing.assert_array_equal(res, np.zeros(3))

    def test_swing_force_violation(self):
        res, _, _ = cn.contact_equalities(False, [0.1, 0, 0], [0, 0, 10.0])
        np.testing.assert_array_equal(res, [0, 0, 10.0])

    def test_stance_sliding_violation(self):
        res, _, _ = cn.contact_equalities(True, [0.1, 0, 0], [0, 0, 0])
        np.testing.assert_array_equal(res, [0.1, 0, 0])


class TestFootKinematicsBox:
    def test_centered(self):
        hw = np.array([0.25, 0.15, 0.2])
        nominal = np.array([0.35, 0.2, -0.55])
        res, *_ = cn.foot_kinematics_box(nominal, [0, 0, 0], [0, 0, 0], nominal, hw)
        np.testing.assert_allclose(res, np.concatenate([-hw, -hw]), atol=1e-14)

    def test_boundary_active(self):
        hw = np.array([0.25, 0.15, 0.2])
        nominal = np.array([0.35, 0.2, -0.55])
        p = nominal + np.array([hw[0], 0, 0])
        res, *_ = cn.foot_kinematics_box(p, [0, 0, 0], [0, 0, 0], nominal, hw)
        assert res[3] == pytest.approx(0.0, abs=1e-14)

    def test_random_pose_matches_direct_eval(self):
        rng = np.random.default_rng(3)
        hw = np.array([0.25, 0.15, 0.2])
        nominal = np.array([0.35, -0.2, -0.55])
        for _ in range(20):
            p = rng.uniform(-1, 1, 3)
            r = rng.uniform(-1, 1, 3)
            th = rng.uniform(-0.8, 0.8, 3)
            res, *_ = cn.foot_kinematics_box(p, r, th, nominal, hw)
            from scipy.spatial.transform import Rotation

            y = Rotation.from_euler("ZYX", th).as_matrix().T @ (p - r) - nominal
            np.testing.assert_allclose(res, np.concatenate([-y - hw, y - hw]), atol=1e-12)

    def test_jacobians_match_fd(self):
        rng = np.random.default_rng(4)
        hw = np.array([0.25, 0.15, 0.2])
        nominal = np.array([0.35, -0.2, -0.55])
        for _ in range(20):
            p = rng.uniform(-1, 1, 3)
            r = rng.uniform(-1, 1, 3)
            th = rng.uniform(-0.9, 0.9, 3)
            _, j_p, j_r, j_th = cn.foot_kinematics_box(p, r, th, nominal, hw)
            assert np.abs(j_p - fd_rows(lambda v: cn.foot_kinematics_box(v, r, th, nominal, hw)[0], p)).max() < 1e-5
            assert np.abs(j_r - fd_rows(lambda v: cn.foot_kinematics_box(p, v, th, nominal, hw)[0], r)).max() < 1e-5
            assert np.abs(j_th - fd_rows(lambda v: cn.foot_kinematics_box(p, r, v, nominal, hw)[0], th)).max() < 1e-5


class TestFootPlacement:
    def test_flat_on_surface(self):
        terrain = cn.Terrain()
        eq, _, ineq, _ = cn.foot_placement([1.0, 2.0, 0.0], terrain)
        np.testing.assert_allclose(eq, [0.0], atol=1e-14)
        assert ineq.size == 0

    def test_slope_point_on_plane(self):
        grade = np.tan(np.deg2rad(10.0))
        terrain = cn.Terrain(default_plane=[0.0, grade, 0.0])
        eq, _, _, _ = cn.foot_placement([1.0, 0.0, 0.17633], terrain)
        assert eq[0] == pytest.approx(0.0, abs=1e-4)

    def test_region_violation(self):
        terrain = cn.Terrain()
        region = cn.ConvexRegion.box(0.0, 0.3, 0.0, 0.3)
        _, _, ineq, _ = cn.foot_placement([0.4, 0.1, 0.0], terrain, region=region)
        assert ineq.max() == pytest.approx(0.1, abs=1e-12)
        assert np.sum(ineq > 0) == 1

    def test_swing_has_no_residuals(self):
        eq, _, ineq, _ = cn.foot_placement([0, 0, 5.0], cn.Terrain(), in_contact=False)
        assert eq.size == 0 and ineq.size == 0

    def test_jacobians_match_fd(self):
        grade = np.tan(np.deg2rad(10.0))
        terrain = cn.Terrain(default_plane=[0.05, grade, -0.02])
        region = cn.ConvexRegion.box(-1.0, 1.0, -1.0, 1.0)
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = rng.uniform(-0.8, 0.8, 3)
            eq, eq_jac, ineq, ineq_jac = cn.foot_placement(p, terrain, region=region)
            fd_eq = fd_rows(lambda v: cn.foot_placement(v, terrain, region=region)[0], p)
            fd_in = fd_rows(lambda v: cn.foot_placement(v, terrain, region=region)[2], p)
            assert np.abs(eq_jac - fd_eq).max() < 1e-5
            assert np.abs(ineq_jac - fd_in).max() < 1e-5


class TestCbfObstacle:
    def test_static_safe_body(self):
        obs = cn.Obstacle([2.0, 0.0], 0.3)
        p = np.array([0.0, 0.0])
        res, _, _ = cn.cbf_obstacle(p, p, obs, 0.1, 0.4)
        h = 4.0 - 0.49
        assert res[0] == pytest.approx(-0.1 * h, abs=1e-12)
        assert res[0] <= 0

    def test_stepping_to_boundary_violates(self):
        obs = cn.Obstacle([2.0, 0.0], 0.3)
        p0 = np.array([0.0, 0.0])
        p1 = np.array([2.0 - 0.7, 0.0])  # exactly on the inflated boundary
        res, _, _ = cn.cbf_obstacle(p0, p1, obs, 0.1, 0.4)
        h0 = 4.0 - 0.49
        assert res[0] == pytest.approx(0.9 * h0, abs=1e-9)
        assert res[0] > 0

    def test_matches_direct_formula_and_fd(self):
        rng = np.random.default_rng(6)
        obs = cn.Obstacle([1.0, -0.5], 0.25)
        gamma, r_body = 0.2, 0.35
        rad = 0.6
        for _ in range(20):
            p0 = rng.uniform(-2, 2, 2)
            p1 = rng.uniform(-2, 2, 2)
            res, j0, j1 = cn.cbf_obstacle(p0, p1, obs, gamma, r_body)
            h = lambda p: (p - obs.center) @ (p - obs.center) - rad**2
            assert res[0] == pytest.approx((1 - gamma) * h(p0) - h(p1), abs=1e-12)
            assert np.abs(j0 - fd_rows(lambda v: cn.cbf_obstacle(v, p1, obs, gamma, r_body)[0], p0)).max() < 1e-5
            assert np.abs(j1 - fd_rows(lambda v: cn.cbf_obstacle(p0, v, obs, gamma, r_body)[0], p1)).max() < 1e-5

    def test_gamma_range_checked(self):
        with pytest.raises(ValueError):
            cn.cbf_obstacle([0, 0], [0, 0], cn.Obstacle([1, 1], 0.2), 0.0, 0.3)


class TestArmKinematics:
    nominal = np.array([-0.55, 0.0, 0.05])
    p_h_max = np.array([0.2, 0.2, 0.2])
    handle = np.array([0.55, 0.0, 0.0])

    def test_centered(self):
        r0, th0 = np.array([0, 0, 0.55]), np.zeros(3)
        r_i = np.array([1.1, 0.0, 0.5])
        nominal = np.array([-0.55, 0.0, 0.05])
        res, _, _ = cn.arm_kinematics(
            (r_i, np.zeros(3)), (r0, th0), self.handle, nominal, self.p_h_max, side="robot"
        )
        np.testing.assert_allclose(res, np.concatenate([-self.p_h_max, -self.p_h_max]), atol=1e-12)

    def test_boundary_active_on_displacement(self):
        r0, th0 = np.array([0.2, 0, 0.55]), np.zeros(3)  # payload moved +x by p_h_max
        r_i = np.array([1.1, 0.0, 0.5])
        nominal = np.array([-0.55, 0.0, 0.05])
        res, _, _ = cn.arm_kinematics(
            (r_i, np.zeros(3)), (r0, th0), self.handle, nominal, self.p_h_max, side="robot"
        )
        assert res[3] == pytest.approx(0.0, abs=1e-12)

    def test_two_sided_evaluations_agree(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            r0 = rng.uniform(-1, 1, 3)
            th0 = rng.uniform(-0.6, 0.6, 3)
            r_i = rng.uniform(-1, 1, 3)
            th_i = rng.uniform(-0.6, 0.6, 3)
            res_robot, _, _ = cn.arm_kinematics(
                (r_i, th_i), (r0, th0), self.handle, self.nominal, self.p_h_max, side="robot"
            )
            res_payload, _, _ = cn.arm_kinematics(
                (r0, th0), (r_i, th_i), self.handle, self.nominal, self.p_h_max, side="payload"
            )
            np.testing.assert_allclose(res_robot, res_payload, atol=1e-12)

    def test_jacobians_match_fd(self):
        rng = np.random.default_rng(8)
        for side in ("robot", "payload"):
            for _ in range(20):
                r_self = rng.uniform(-1, 1, 3)
                th_self = rng.uniform(-0.7, 0.7, 3)
                other = (rng.uniform(-1, 1, 3), rng.uniform(-0.7, 0.7, 3))
                _, j_r, j_t = cn.arm_kinematics(
                    (r_self, th_self), other, self.handle, self.nominal, self.p_h_max, side=side
                )
                fd_r = fd_rows(
                    lambda v: cn.arm_kinematics((v, th_self), other, self.handle, self.nominal, self.p_h_max, side=side)[0],
                    r_self,
                )
                fd_t = fd_rows(
                    lambda v: cn.arm_kinematics((r_self, v), other, self.handle, self.nominal, self.p_h_max, side=side)[0],
                    th_self,
                )
                assert np.abs(j_r - fd_r).max() < 1e-5
                assert np.abs(j_t - fd_t).max() < 1e-5


class TestFormation:
    def test_exact_nominal(self):
        res, _ = cn.formation([1.1, 0, 0.5], (np.zeros(3), np.zeros(3)), [1.1, 0, 0.5], 0.15)
        np.testing.assert_allclose(res, -0.15, atol=1e-14)

    def test_ahead_violation(self):
        res, _ = cn.formation([1.3, 0, 0.5], (np.zeros(3), np.zeros(3)), [1.1, 0, 0.5], 0.15)
        assert res[3] == pytest.approx(0.05, abs=1e-12)

    def test_random_matches_direct_and_fd(self):
        rng = np.random.default_rng(9)
        from scipy.spatial.transform import Rotation

        for _ in range(20):
            r_i = rng.uniform(-2, 2, 3)
            r0 = rng.uniform(-2, 2, 3)
            th0 = rng.uniform(-0.8, 0.8, 3)
            nominal = rng.uniform(-1, 1, 3)
            res, j_r = cn.formation(r_i, (r0, th0), nominal, 0.2)
            y = Rotation.from_euler("ZYX", th0).as_matrix().T @ (r_i - r0) - nominal
            np.testing.assert_allclose(res, np.concatenate([-y - 0.2, y - 0.2]), atol=1e-12)
            fd = fd_rows(lambda v: cn.formation(v, (r0, th0), nominal, 0.2)[0], r_i)
            assert np.abs(j_r - fd).max() < 1e-5


class TestRelaxedLogBarrier:
    def test_log_region_values(self):
        val, d1, _ = cn.relaxed_log_barrier(1.0, 0.1, 1.0)
        assert val == pytest.approx(0.0, abs=1e-15)
        assert d1 == pytest.approx(-1.0, abs=1e-15)

    def test_knot_continuity(self):
        delta, mu = 0.1, 1.0
        above = cn.relaxed_log_barrier(delta + 1e-12, delta, mu)
        below = cn.relaxed_log_barrier(delta - 1e-12, delta, mu)
        for a, b in zip(above, below):
            assert a == pytest.approx(b, rel=1e-9)

    def test_violated_side_finite_convex(self):
        val, _, d2 = cn.relaxed_log_barrier(-0.05, 0.1, 1.0)
        assert np.isfinite(val)
        assert d2 > 0

    def test_c2_continuity_numerically(self):
        delta, mu = 1e-3, 1e-2
        zs = np.linspace(delta - 1e-5, delta + 1e-5, 201)
        vals, d1s, d2s = cn.relaxed_log_barrier(zs, delta, mu)
        num_d1 = np.gradient(vals, zs)
        num_d2 = np.gradient(d1s, zs)
        # third derivative jumps at the knot, so the numeric second derivative
        # carries an O(h |d3|) error there; compare relative to mu/delta^2
        scale = mu / delta**2
        assert np.abs(num_d1[2:-2] - d1s[2:-2]).max() < 1e-3
        assert np.abs(num_d2[2:-2] - d2s[2:-2]).max() < 1e-3 * scale

    def test_derivatives_match_fd(self):
        rng = np.random.default_rng(10)
        delta, mu = 1e-3, 1e-2
        h = 1e-7
        for z in np.concatenate([rng.uniform(-0.5, 2.0, 20), [delta * 0.5, delta * 2]]):
            vp, d1p, _ = cn.relaxed_log_barrier(z + h, delta, mu)
            vm, d1m, _ = cn.relaxed_log_barrier(z - h, delta, mu)
            _, d1, d2 = cn.relaxed_log_barrier(z, delta, mu)
            assert (vp - vm) / (2 * h) == pytest.approx(d1, rel=1e-4, abs=1e-8)
            assert (d1p - d1m) / (2 * h) == pytest.approx(d2, rel=1e-4, abs=1e-6)


class TestTerrainAndRegions:
    def test_terrain_normal_unit_and_slope(self):
        grade = np.tan(np.deg2rad(10.0))
        terrain = cn.Terrain(default_plane=[0.0, grade, 0.0])
        n = terrain.normal(1.0, 0.0)
        assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(n, [-np.sin(np.deg2rad(10)), 0, np.cos(np.deg2rad(10))], atol=1e-12)

    def test_band_lookup(self):
        terrain = cn.Terrain(
            default_plane=[0.0, 0.0, 0.0],
            bands=[cn.TerrainBand([1.0, 2.0, -5.0, 5.0], [-0.4, 0.0, 0.0])],
        )
        assert terrain.height(0.5, 0.0) == 0.0
        assert terrain.height(1.5, 0.0) == -0.4

    def test_empty_region_rejected(self):
        with pytest.raises(ConfigValidationError):
            cn.ConvexRegion([[1.0, 0.0], [-1.0, 0.0]], [-1.0, -1.0])  # x<=-1 and x>=1

    def test_region_contains(self):
        region = cn.ConvexRegion.box(0, 1, 0, 1)
        assert region.contains([0.5, 0.5])
        assert not region.contains([1.5, 0.5])
