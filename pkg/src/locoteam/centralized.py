"""Centralized baseline: the undecomposed joint OCP over payload and robots.

The stacked system keeps every cross-subsystem quantity live (payload pose in
the robot dynamics and grasp constraints, robot wrenches in the payload
dynamics), has no wrench copies and no consensus terms, and is solved by the
same SQP used for the sub-blocks so runtime comparisons isolate problem size.
Stage assembly here is plain numpy; the baseline is deliberately a single
dense problem.
"""

import numpy as np

from . import sqp
from .admm import _interp_series, hover_robot_controls
from .kernels import dynamics as dyn
from .kernels.constraintops import (
    CONE_EPS,
    friction_cone_fixed,
    friction_cone_live,
    relaxed_log_barrier,
    rotated_box,
    terrain_normal,
    terrain_plane,
)
from .kernels.rotation import rotated_offset_jac


class StackedProblem:
    """Joint OCP over ``x = [payload, robots...]``, ``u = [robot controls...]``."""

    def __init__(self, ctx):
        self.ctx = ctx
        n_r = ctx.n_robots
        self.n_r = n_r
        self.nx = 12 + 24 * n_r
        self.nu = 30 * n_r
        self.n_steps = ctx.n_steps
        self.x0 = np.concatenate([ctx.x0_payload] + [ctx.x0_robots[i] for i in range(n_r)])
        self.eq_weight = ctx.eq_weight
        self._masses = np.ascontiguousarray(ctx.robot_masses, dtype=float)
        self._inertias = np.ascontiguousarray(ctx.robot_inertias, dtype=float)
        self._handles = np.ascontiguousarray(ctx.handles, dtype=float)
        self._foot_nom = (
            ctx.foot_nominal
            if ctx.foot_nominal is not None
            else np.array(
                [[0.35, 0.2, -0.55], [0.35, -0.2, -0.55], [-0.35, 0.2, -0.55], [-0.35, -0.2, -0.55]]
            )
        )
        self._kin_hw = ctx.kin_half_widths if ctx.kin_half_widths is not None else np.array([0.25, 0.15, 0.2])
        self._ph_max = ctx.p_h_max if ctx.p_h_max is not None else np.array([0.2, 0.2, 0.2])
        self._form_bnd = ctx.formation_bound if ctx.formation_bound is not None else np.array([0.2, 0.2, 0.2])
        self._tau_lo = ctx.tau_lo if ctx.tau_lo is not None else np.full(3, -5.0)
        self._tau_hi = ctx.tau_hi if ctx.tau_hi is not None else np.full(3, 5.0)

    # ---- indexing helpers -------------------------------------------------
    def x_slice(self, i):
        """State block of robot ``i`` (payload is x[:12])."""
        return slice(12 + 24 * i, 36 + 24 * i)

    def u_slice(self, i):
        return slice(30 * i, 30 * i + 30)

    def split(self, x_traj, u_traj):
        """Per-subsystem views of a stacked trajectory."""
        payload_x = x_traj[:, 0:12]
        robot_x = np.stack([x_traj[:, self.x_slice(i)] for i in range(self.n_r)])
        robot_u = np.stack([u_traj[:, self.u_slice(i)] for i in range(self.n_r)])
        return payload_x, robot_x, robot_u

    # ---- dynamics ---------------------------------------------------------
    def rollout(self, x_prev, u_prev, gains, kff, alpha):
        ctx = self.ctx
        n = u_prev.shape[0]
        x_traj = np.empty((n + 1, self.nx))
        u_traj = np.empty((n, self.nu))
        x_traj[0] = self.x0
        max_res = 0.0
        for k in range(n):
            u = u_prev[k] + alpha * kff[k] + gains[k] @ (x_traj[k] - x_prev[k])
            xn, res, status = dyn.stacked_step(
                x_traj[k], u, ctx.dt, self._handles, ctx.payload_mass,
                ctx.payload_inertia, self._masses, self._inertias, ctx.gravity,
            )
            if status != 0:
                return x_traj, u_traj, np.inf, status
            u_traj[k] = u
            x_traj[k + 1] = xn
            max_res = max(max_res, res)
        return x_traj, u_traj, max_res, 0

    def replay(self, u_traj):
        n = u_traj.shape[0]
        return self.rollout(
            np.zeros((n + 1, self.nx)), u_traj,
            np.zeros((n, self.nu, self.nx)), np.zeros((n, self.nu)), 0.0,
        )

    def linearize(self, x_traj, u_traj):
        ctx = self.ctx
        n = u_traj.shape[0]
        a_seq = np.empty((n, self.nx, self.nx))
        b_seq = np.empty((n, self.nx, self.nu))
        eye = np.eye(self.nx)
        for k in range(n):
            fx, fu = dyn.stacked_jac(
                x_traj[k + 1], u_traj[k], self._handles, ctx.payload_mass,
                ctx.payload_inertia, self._masses, self._inertias, ctx.gravity,
            )
            m_mat = eye - ctx.dt * fx
            a_seq[k] = np.linalg.solve(m_mat, eye)
            b_seq[k] = np.linalg.solve(m_mat, ctx.dt * fu)
        return a_seq, b_seq

    # ---- stage terms ------------------------------------------------------
    def _stage_terms(self, k, x, u, x_next, a_k, b_k, acc):
        """All stage-k terms; ``acc`` collects values and/or derivatives."""
        ctx = self.ctx
        nx, nu = self.nx, self.nu
        terr = (ctx.terr_bounds, ctx.terr_planes, ctx.terr_default)

        # tracking and regularization
        dx0 = x[0:12] - ctx.payload_ref[k]
        acc.add_quad_x(slice(0, 12), ctx.q_payload, dx0)
        for i in range(self.n_r):
            xs = self.x_slice(i)
            us = self.u_slice(i)
            acc.add_quad_x(xs, ctx.q_robot, x[xs] - ctx.robot_refs[i, k])
            acc.add_quad_u(us, ctx.r_robot, u[us])

        th0 = x[6:9]
        r0 = x[0:3]
        for i in range(self.n_r):
            xs = self.x_slice(i)
            base = 12 + 24 * i
            cu = 30 * i
            r_i = x[base : base + 3]
            th_i = x[base + 6 : base + 9]
            f_h = u[cu + 24 : cu + 27]

            # contact equalities and stance terms per foot
            for j in range(4):
                stance = bool(ctx.contact[k, j])
                if stance:
                    eq_base = cu + 12 + 3 * j
                else:
                    eq_base = cu + 3 * j
                for a in range(3):
                    jz = np.zeros(nx + nu)
                    jz[nx + eq_base + a] = 1.0
                    acc.add_eq(u[eq_base + a], jz)
                p = x[base + 12 + 3 * j : base + 15 + 3 * j]
                if stance:
                    plane = terrain_plane(p[0], p[1], *terr)
                    g_val = p[2] - (plane[0] + plane[1] * p[0] + plane[2] * p[1])
                    jz = np.zeros(nx + nu)
                    jz[base + 12 + 3 * j] = -plane[1]
                    jz[base + 13 + 3 * j] = -plane[2]
                    jz[base + 14 + 3 * j] = 1.0
                    acc.add_eq(g_val, jz)
                    nvec = terrain_normal(p[0], p[1], *terr)
                    f = u[cu + 3 * j : cu + 3 * j + 3]
                    res, jf = friction_cone_fixed(f, nvec, ctx.mu_ground, CONE_EPS)
                    for row in range(2):
                        jz = np.zeros(nx + nu)
                        jz[nx + cu + 3 * j : nx + cu + 3 * j + 3] = -jf[row]
                        acc.add_barrier(-res[row], jz)
                    reg = ctx.region_idx[i, k, j]
                    if reg >= 0:
                        for q in range(ctx.region_cnt[reg]):
                            ax, ay, b = ctx.region_hp[reg, q]
                            z = b - ax * p[0] - ay * p[1]
                            jz = np.zeros(nx + nu)
                            jz[base + 12 + 3 * j] = -ax
                            jz[base + 13 + 3 * j] = -ay
                            acc.add_barrier(z, jz)
                # kinematic box
                y, rot_t, jth = rotated_box(th_i, p - r_i, self._foot_nom[j])
                for a in range(3):
                    for sgn in (-1.0, 1.0):
                        z = self._kin_hw[a] - sgn * y[a]
                        jz = np.zeros(nx + nu)
                        jz[base + 12 + 3 * j : base + 15 + 3 * j] = -sgn * rot_t[a]
                        jz[base : base + 3] = sgn * rot_t[a]
                        jz[base + 6 : base + 9] = -sgn * jth[a]
                        acc.add_barrier(z, jz)

            # live grasp cone on the payload-side reaction -f_h
            res, jf, jth0 = friction_cone_live(-f_h, th0, ctx.mu_grasp, CONE_EPS)
            for row in range(2):
                jz = np.zeros(nx + nu)
                jz[nx + cu + 24 : nx + cu + 27] = jf[row]
                jz[6:9] = -jth0[row]
                acc.add_barrier(-res[row], jz)
            # torque box
            for a in range(3):
                jz = np.zeros(nx + nu)
                jz[nx + cu + 27 + a] = 1.0
                acc.add_barrier(u[cu + 27 + a] - self._tau_lo[a], jz)
                jz = np.zeros(nx + nu)
                jz[nx + cu + 27 + a] = -1.0
                acc.add_barrier(self._tau_hi[a] - u[cu + 27 + a], jz)
            # live formation and arm boxes
            self._formation_arm_terms(x, i, acc)

        # obstacle decrease terms, chained through the step Jacobians
        self._cbf_terms(x, x_next, a_k, b_k, acc)
        # payload terrain clearance
        plane = terrain_plane(r0[0], r0[1], *terr)
        z = r0[2] - (plane[0] + plane[1] * r0[0] + plane[2] * r0[1]) - ctx.clearance
        jz = np.zeros(nx + nu)
        jz[0] = -plane[1]
        jz[1] = -plane[2]
        jz[2] = 1.0
        acc.add_barrier(z, jz)

    def _formation_arm_terms(self, x, i, acc):
        ctx = self.ctx
        nx, nu = self.nx, self.nu
        base = 12 + 24 * i
        r0, th0 = x[0:3], x[6:9]
        r_i = x[base : base + 3]
        th_i = x[base + 6 : base + 9]

        y, rot_t0, jth0 = rotated_box(th0, r_i - r0, ctx.formation_offsets[i])
        for a in range(3):
            for sgn in (-1.0, 1.0):
                z = self._form_bnd[a] - sgn * y[a]
                jz = np.zeros(nx + nu)
                jz[base : base + 3] = -sgn * rot_t0[a]
                jz[0:3] = sgn * rot_t0[a]
                jz[6:9] = -sgn * jth0[a]
                acc.add_barrier(z, jz)

        hand, hand_jac = rotated_offset_jac(th0, ctx.handles[i])
        p_hand = r0 + hand
        y, rot_ti, jthi = rotated_box(th_i, p_hand - r_i, ctx.arm_nominal[i])
        d_th0 = rot_ti @ hand_jac
        for a in range(3):
            for sgn in (-1.0, 1.0):
                z = self._ph_max[a] - sgn * y[a]
                jz = np.zeros(nx + nu)
                jz[base : base + 3] = sgn * rot_ti[a]
                jz[base + 6 : base + 9] = -sgn * jthi[a]
                jz[0:3] = -sgn * rot_ti[a]
                jz[6:9] = -sgn * d_th0[a]
                acc.add_barrier(z, jz)

    def _cbf_terms(self, x, x_next, a_k, b_k, acc):
        ctx = self.ctx
        nx, nu = self.nx, self.nu
        if ctx.obstacles.shape[0] == 0:
            return
        bodies = [(0, ctx.r_body_payload)] + [
            (12 + 24 * i, ctx.r_body_robot) for i in range(self.n_r)
        ]
        for off, r_body in bodies:
            for o in range(ctx.obstacles.shape[0]):
                cx, cy, rad = ctx.obstacles[o]
                rad_eff = rad + r_body
                d0 = x[off : off + 2] - (cx, cy)
                d1 = x_next[off : off + 2] - (cx, cy)
                h0 = d0 @ d0 - rad_eff**2
                h1 = d1 @ d1 - rad_eff**2
                z = h1 - (1.0 - ctx.gamma_cbf) * h0
                jz = np.zeros(nx + nu)
                if acc.wants_derivs:
                    jn = np.zeros(nx)
                    jn[off : off + 2] = 2.0 * d1
                    jz[:nx] = a_k.T @ jn
                    jz[nx:] = b_k.T @ jn
                    jz[off : off + 2] += -(1.0 - ctx.gamma_cbf) * 2.0 * d0
                acc.add_barrier(z, jz)

    def _terminal_terms(self, x, acc):
        ctx = self.ctx
        n = self.n_steps
        nx, nu = self.nx, self.nu
        terr = (ctx.terr_bounds, ctx.terr_planes, ctx.terr_default)
        dx0 = x[0:12] - ctx.payload_ref[n]
        acc.add_quad_x(slice(0, 12), ctx.q_payload_term, dx0)
        for i in range(self.n_r):
            xs = self.x_slice(i)
            base = 12 + 24 * i
            acc.add_quad_x(xs, ctx.q_robot_term, x[xs] - ctx.robot_refs[i, n])
            r_i = x[base : base + 3]
            th_i = x[base + 6 : base + 9]
            for j in range(4):
                p = x[base + 12 + 3 * j : base + 15 + 3 * j]
                if bool(ctx.contact[n, j]):
                    plane = terrain_plane(p[0], p[1], *terr)
                    g_val = p[2] - (plane[0] + plane[1] * p[0] + plane[2] * p[1])
                    jz = np.zeros(nx + nu)
                    jz[base + 12 + 3 * j] = -plane[1]
                    jz[base + 13 + 3 * j] = -plane[2]
                    jz[base + 14 + 3 * j] = 1.0
                    acc.add_eq(g_val, jz)
                    reg = ctx.region_idx[i, n, j]
                    if reg >= 0:
                        for q in range(ctx.region_cnt[reg]):
                            ax, ay, b = ctx.region_hp[reg, q]
                            z = b - ax * p[0] - ay * p[1]
                            jz = np.zeros(nx + nu)
                            jz[base + 12 + 3 * j] = -ax
                            jz[base + 13 + 3 * j] = -ay
                            acc.add_barrier(z, jz)
                y, rot_t, jth = rotated_box(th_i, p - r_i, self._foot_nom[j])
                for a in range(3):
                    for sgn in (-1.0, 1.0):
                        z = self._kin_hw[a] - sgn * y[a]
                        jz = np.zeros(nx + nu)
                        jz[base + 12 + 3 * j : base + 15 + 3 * j] = -sgn * rot_t[a]
                        jz[base : base + 3] = sgn * rot_t[a]
                        jz[base + 6 : base + 9] = -sgn * jth[a]
                        acc.add_barrier(z, jz)
            self._formation_arm_terms(x, i, acc)
        plane = terrain_plane(x[0], x[1], *terr)
        z = x[2] - (plane[0] + plane[1] * x[0] + plane[2] * x[1]) - ctx.clearance
        jz = np.zeros(nx + nu)
        jz[0] = -plane[1]
        jz[1] = -plane[2]
        jz[2] = 1.0
        acc.add_barrier(z, jz)

    # ---- solver hooks -----------------------------------------------------
    def cost_parts(self, x_traj, u_traj):
        ctx = self.ctx
        acc = _ValueAccumulator(self.nx, self.nu, ctx.mu_b, ctx.delta_b)
        for k in range(self.n_steps):
            self._stage_terms(k, x_traj[k], u_traj[k], x_traj[k + 1], None, None, acc)
        self._terminal_terms(x_traj[self.n_steps], acc)
        return acc.cost, acc.eq_l1, acc.eq_linf, acc.eq_sq

    def quadraticize(self, x_traj, u_traj, a_seq, b_seq):
        ctx = self.ctx
        n = self.n_steps
        nx, nu = self.nx, self.nu
        gx = np.zeros((n, nx))
        gu = np.zeros((n, nu))
        hxx = np.zeros((n, nx, nx))
        hxu = np.zeros((n, nx, nu))
        huu = np.zeros((n, nu, nu))
        for k in range(n):
            acc = _QuadAccumulator(nx, nu, ctx.mu_b, ctx.delta_b, ctx.eq_weight)
            self._stage_terms(k, x_traj[k], u_traj[k], x_traj[k + 1], a_seq[k], b_seq[k], acc)
            gx[k] = acc.grad[:nx]
            gu[k] = acc.grad[nx:]
            hxx[k] = acc.hess[:nx, :nx]
            hxu[k] = acc.hess[:nx, nx:]
            huu[k] = acc.hess[nx:, nx:]
        acc = _QuadAccumulator(nx, nu, ctx.mu_b, ctx.delta_b, ctx.eq_weight)
        self._terminal_terms(x_traj[n], acc)
        return gx, gu, hxx, hxu, huu, acc.grad[:nx].copy(), acc.hess[:nx, :nx].copy()


class _ValueAccumulator:
    wants_derivs = False

    def __init__(self, nx, nu, mu_b, delta_b):
        self.nx, self.nu = nx, nu
        self.mu_b, self.delta_b = mu_b, delta_b
        self.cost = 0.0
        self.eq_l1 = 0.0
        self.eq_linf = 0.0
        self.eq_sq = 0.0

    def add_quad_x(self, sl, q_diag, dx):
        self.cost += float(dx @ (q_diag * dx))

    def add_quad_u(self, sl, r_diag, u):
        self.cost += float(u @ (r_diag * u))

    def add_barrier(self, z, jz):
        self.cost += relaxed_log_barrier(z, self.delta_b, self.mu_b)[0]

    def add_eq(self, g, jz):
        ag = abs(g)
        self.eq_l1 += ag
        self.eq_sq += g * g
        if ag > self.eq_linf:
            self.eq_linf = ag


class _QuadAccumulator:
    wants_derivs = True

    def __init__(self, nx, nu, mu_b, delta_b, eq_weight):
        self.nx, self.nu = nx, nu
        self.mu_b, self.delta_b = mu_b, delta_b
        self.eq_weight = eq_weight
        self.grad = np.zeros(nx + nu)
        self.hess = np.zeros((nx + nu, nx + nu))

    def add_quad_x(self, sl, q_diag, dx):
        self.grad[sl] += 2.0 * q_diag * dx
        idx = np.arange(sl.start, sl.stop)
        self.hess[idx, idx] += 2.0 * q_diag

    def add_quad_u(self, sl, r_diag, u):
        nx = self.nx
        self.grad[nx + sl.start : nx + sl.stop] += 2.0 * r_diag * u
        idx = np.arange(nx + sl.start, nx + sl.stop)
        self.hess[idx, idx] += 2.0 * r_diag

    def add_barrier(self, z, jz):
        _, d1, d2 = relaxed_log_barrier(z, self.delta_b, self.mu_b)
        nz = np.flatnonzero(jz)
        if nz.size == 0:
            return
        self.grad[nz] += d1 * jz[nz]
        self.hess[np.ix_(nz, nz)] += d2 * np.outer(jz[nz], jz[nz])

    def add_eq(self, g, jz):
        nz = np.flatnonzero(jz)
        if nz.size == 0:
            return
        w = self.eq_weight
        self.grad[nz] += 2.0 * w * g * jz[nz]
        self.hess[np.ix_(nz, nz)] += 2.0 * w * np.outer(jz[nz], jz[nz])


def build_stacked_ocp(ctx):
    """Joint OCP with live cross-subsystem coupling; see :class:`StackedProblem`."""
    return StackedProblem(ctx)


def solve_centralized(problem, x_init, u_init, max_sqp_iters=2):
    """Solve the stacked OCP with the shared SQP solver."""
    return sqp.solve_subproblem(problem, x_init, u_init, max_sqp_iters=max_sqp_iters)


def cold_start_stacked(ctx):
    """Reference-primal initialization with gravity-compensating controls."""
    n_r = ctx.n_robots
    n = ctx.n_steps
    x_init = np.concatenate(
        [ctx.payload_ref] + [ctx.robot_refs[i] for i in range(n_r)], axis=1
    )
    x_init[0, 0:12] = ctx.x0_payload
    for i in range(n_r):
        x_init[0, 12 + 24 * i : 36 + 24 * i] = ctx.x0_robots[i]
    u_init = np.concatenate([hover_robot_controls(ctx, i) for i in range(n_r)], axis=1)
    return x_init, u_init


def shift_stacked(x_traj, u_traj, shift, dt):
    """Warm-start shift of a stacked solution onto the next window's grid."""
    return _interp_series(x_traj, shift, dt), _interp_series(u_traj, shift, dt)


def joint_cost(ctx, payload_x, robot_x, robot_u):
    """Tracking plus robot-control regularization, the planner-independent
    solution-quality measure (no consensus, barrier, or copy terms)."""
    n = ctx.n_steps
    cost = 0.0
    for k in range(n):
        dx0 = payload_x[k] - ctx.payload_ref[k]
        cost += float(dx0 @ (ctx.q_payload * dx0))
        for i in range(ctx.n_robots):
            dxi = robot_x[i, k] - ctx.robot_refs[i, k]
            cost += float(dxi @ (ctx.q_robot * dxi))
            cost += float(robot_u[i, k] @ (ctx.r_robot * robot_u[i, k]))
    dx0 = payload_x[n] - ctx.payload_ref[n]
    cost += float(dx0 @ (ctx.q_payload_term * dx0))
    for i in range(ctx.n_robots):
        dxi = robot_x[i, n] - ctx.robot_refs[i, n]
        cost += float(dxi @ (ctx.q_robot_term * dxi))
    return cost
