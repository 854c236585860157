"""Payload-subproblem stage kernels.

The payload tracks its reference by choosing the wrench copies; the robots'
wrenches and poses are frozen snapshot data. Its grasp-cone normals follow
the live payload orientation, so those rows couple controls and state.
The payload block carries no path equalities.
"""

import numpy as np

from ..accel import njit
from .constraintops import (
    friction_cone_live,
    relaxed_log_barrier,
    terrain_plane,
)
from .dynamics import payload_jac, payload_step
from .rotation import rotated_offset_jac, rotmat

NX = 12


@njit(inline="always")
def _rank1(h, jv, jw, c):
    for a in range(jv.shape[0]):
        va = c * jv[a]
        if va != 0.0:
            for b in range(jw.shape[0]):
                if jw[b] != 0.0:
                    h[a, b] += va * jw[b]


@njit(inline="always")
def _acc(z, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu):
    val, d1, d2 = relaxed_log_barrier(z, delta_b, mu_b)
    for a in range(zx.shape[0]):
        if zx[a] != 0.0:
            gx[a] += d1 * zx[a]
    for a in range(zu.shape[0]):
        if zu[a] != 0.0:
            gu[a] += d1 * zu[a]
    _rank1(hxx, zx, zx, d2)
    _rank1(hxu, zx, zu, d2)
    _rank1(huu, zu, zu, d2)
    return val


@njit
def _payload_stage_ineq(
    k,
    x,
    u,
    handles,
    arm_nom,
    ph_max,
    tau_lo,
    tau_hi,
    mu_grasp,
    eps_cone,
    r_fix,
    th_fix,
    terr_b,
    terr_p,
    terr_d,
    clearance,
    want_derivs,
    mu_b,
    delta_b,
    gx,
    gu,
    hxx,
    hxu,
    huu,
):
    """Control-coupled and state-only barrier terms of one payload stage."""
    n_r = handles.shape[0]
    nu = 6 * n_r
    total = 0.0
    zx = np.zeros(NX)
    zu = np.zeros(nu)
    theta = x[6:9]

    # grasp cones on the copies, normal following the live orientation
    for i in range(n_r):
        f_bar = u[6 * i : 6 * i + 3]
        res, jf, jth = friction_cone_live(f_bar, theta, mu_grasp, eps_cone)
        for r in range(2):
            z = -res[r]
            if want_derivs:
                for a in range(3):
                    zu[6 * i + a] = -jf[r, a]
                    zx[6 + a] = -jth[r, a]
                total += _acc(z, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu)
                for a in range(3):
                    zu[6 * i + a] = 0.0
                    zx[6 + a] = 0.0
            else:
                total += relaxed_log_barrier(z, delta_b, mu_b)[0]

    # torque box applied to the robot-side image -tau_bar
    for i in range(n_r):
        for a in range(3):
            tau_robot = -u[6 * i + 3 + a]
            z_lo = tau_robot - tau_lo[a]
            z_hi = tau_hi[a] - tau_robot
            if want_derivs:
                zu[6 * i + 3 + a] = -1.0
                total += _acc(z_lo, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu)
                zu[6 * i + 3 + a] = 1.0
                total += _acc(z_hi, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu)
                zu[6 * i + 3 + a] = 0.0
            else:
                total += relaxed_log_barrier(z_lo, delta_b, mu_b)[0]
                total += relaxed_log_barrier(z_hi, delta_b, mu_b)[0]

    total += _payload_state_ineq(
        k, x, handles, arm_nom, ph_max, r_fix, th_fix, terr_b, terr_p, terr_d,
        clearance, want_derivs, mu_b, delta_b, gx, hxx,
    )
    return total


@njit
def _payload_state_ineq(
    k,
    x,
    handles,
    arm_nom,
    ph_max,
    r_fix,
    th_fix,
    terr_b,
    terr_p,
    terr_d,
    clearance,
    want_derivs,
    mu_b,
    delta_b,
    gx,
    hxx,
):
    n_r = handles.shape[0]
    total = 0.0
    zx = np.zeros(NX)
    r0 = x[0:3]
    theta = x[6:9]

    # arm workspace from the payload side, robot pose frozen
    for i in range(n_r):
        rot_robot_t = rotmat(th_fix[k, i]).T
        hand, hand_jac = rotated_offset_jac(theta, handles[i])
        v = r0 + hand - r_fix[k, i]
        y = rot_robot_t @ v - arm_nom[i]
        dy_dth = rot_robot_t @ hand_jac
        for a in range(3):
            for sgn in (-1.0, 1.0):
                z = ph_max[a] - sgn * y[a]
                if want_derivs:
                    for b in range(3):
                        zx[b] = -sgn * rot_robot_t[a, b]
                        zx[6 + b] = -sgn * dy_dth[a, b]
                    total += _acc_x(z, zx, mu_b, delta_b, gx, hxx)
                    for b in range(3):
                        zx[b] = 0.0
                        zx[6 + b] = 0.0
                else:
                    total += relaxed_log_barrier(z, delta_b, mu_b)[0]

    # terrain clearance under the payload center
    plane = terrain_plane(r0[0], r0[1], terr_b, terr_p, terr_d)
    z = r0[2] - (plane[0] + plane[1] * r0[0] + plane[2] * r0[1]) - clearance
    if want_derivs:
        zx[0] = -plane[1]
        zx[1] = -plane[2]
        zx[2] = 1.0
        total += _acc_x(z, zx, mu_b, delta_b, gx, hxx)
        zx[0] = 0.0
        zx[1] = 0.0
        zx[2] = 0.0
    else:
        total += relaxed_log_barrier(z, delta_b, mu_b)[0]
    return total


@njit(inline="always")
def _acc_x(z, zx, mu_b, delta_b, gx, hxx):
    val, d1, d2 = relaxed_log_barrier(z, delta_b, mu_b)
    for a in range(NX):
        if zx[a] != 0.0:
            gx[a] += d1 * zx[a]
    _rank1(hxx, zx, zx, d2)
    return val


@njit
def payload_cost(
    x_traj,
    u_traj,
    xref,
    qx,
    qxn,
    ru,
    cons_c,
    rho,
    handles,
    arm_nom,
    ph_max,
    tau_lo,
    tau_hi,
    mu_grasp,
    eps_cone,
    r_fix,
    th_fix,
    terr_b,
    terr_p,
    terr_d,
    clearance,
    obst,
    r_body,
    gamma_cbf,
    mu_b,
    delta_b,
):
    """Smooth + barrier cost of the payload block (no equalities)."""
    n = u_traj.shape[0]
    nu = u_traj.shape[1]
    cost = 0.0
    dummy_gx = np.zeros(NX)
    dummy_gu = np.zeros(nu)
    dummy_h = np.zeros((1, 1))
    for k in range(n):
        x = x_traj[k]
        u = u_traj[k]
        dx = x - xref[k]
        for a in range(NX):
            cost += qx[a] * dx[a] * dx[a]
        for a in range(nu):
            cost += ru[a] * u[a] * u[a]
            resid = u[a] + cons_c[k, a]
            cost += 0.5 * rho * resid * resid
        cost += _payload_stage_ineq(
            k, x, u, handles, arm_nom, ph_max, tau_lo, tau_hi, mu_grasp, eps_cone,
            r_fix, th_fix, terr_b, terr_p, terr_d, clearance, False,
            mu_b, delta_b, dummy_gx, dummy_gu, dummy_h, dummy_h, dummy_h,
        )
        for o in range(obst.shape[0]):
            rad = obst[o, 2] + r_body
            dx0 = x[0] - obst[o, 0]
            dy0 = x[1] - obst[o, 1]
            dx1 = x_traj[k + 1][0] - obst[o, 0]
            dy1 = x_traj[k + 1][1] - obst[o, 1]
            h0 = dx0 * dx0 + dy0 * dy0 - rad * rad
            h1 = dx1 * dx1 + dy1 * dy1 - rad * rad
            z = h1 - (1.0 - gamma_cbf) * h0
            cost += relaxed_log_barrier(z, delta_b, mu_b)[0]
    x = x_traj[n]
    dx = x - xref[n]
    for a in range(NX):
        cost += qxn[a] * dx[a] * dx[a]
    cost += _payload_state_ineq(
        n, x, handles, arm_nom, ph_max, r_fix, th_fix, terr_b, terr_p, terr_d,
        clearance, False, mu_b, delta_b, dummy_gx, dummy_h,
    )
    return cost, 0.0, 0.0, 0.0


@njit
def payload_quad(
    x_traj,
    u_traj,
    a_seq,
    b_seq,
    xref,
    qx,
    qxn,
    ru,
    cons_c,
    rho,
    handles,
    arm_nom,
    ph_max,
    tau_lo,
    tau_hi,
    mu_grasp,
    eps_cone,
    r_fix,
    th_fix,
    terr_b,
    terr_p,
    terr_d,
    clearance,
    obst,
    r_body,
    gamma_cbf,
    mu_b,
    delta_b,
):
    n = u_traj.shape[0]
    nu = u_traj.shape[1]
    gx_all = np.zeros((n, NX))
    gu_all = np.zeros((n, nu))
    hxx_all = np.zeros((n, NX, NX))
    hxu_all = np.zeros((n, NX, nu))
    huu_all = np.zeros((n, nu, nu))
    zx = np.zeros(NX)
    zu = np.zeros(nu)
    for k in range(n):
        x = x_traj[k]
        u = u_traj[k]
        gx = gx_all[k]
        gu = gu_all[k]
        hxx = hxx_all[k]
        hxu = hxu_all[k]
        huu = huu_all[k]
        dx = x - xref[k]
        for a in range(NX):
            gx[a] += 2.0 * qx[a] * dx[a]
            hxx[a, a] += 2.0 * qx[a]
        for a in range(nu):
            gu[a] += 2.0 * ru[a] * u[a]
            huu[a, a] += 2.0 * ru[a]
            resid = u[a] + cons_c[k, a]
            gu[a] += rho * resid
            huu[a, a] += rho
        _payload_stage_ineq(
            k, x, u, handles, arm_nom, ph_max, tau_lo, tau_hi, mu_grasp, eps_cone,
            r_fix, th_fix, terr_b, terr_p, terr_d, clearance, True,
            mu_b, delta_b, gx, gu, hxx, hxu, huu,
        )
        for o in range(obst.shape[0]):
            rad = obst[o, 2] + r_body
            dx0 = x[0] - obst[o, 0]
            dy0 = x[1] - obst[o, 1]
            x_next = x_traj[k + 1]
            dx1 = x_next[0] - obst[o, 0]
            dy1 = x_next[1] - obst[o, 1]
            h0 = dx0 * dx0 + dy0 * dy0 - rad * rad
            h1 = dx1 * dx1 + dy1 * dy1 - rad * rad
            z = h1 - (1.0 - gamma_cbf) * h0
            jn0 = 2.0 * dx1
            jn1 = 2.0 * dy1
            for a in range(NX):
                zx[a] = jn0 * a_seq[k, 0, a] + jn1 * a_seq[k, 1, a]
            zx[0] += -(1.0 - gamma_cbf) * 2.0 * dx0
            zx[1] += -(1.0 - gamma_cbf) * 2.0 * dy0
            for a in range(nu):
                zu[a] = jn0 * b_seq[k, 0, a] + jn1 * b_seq[k, 1, a]
            _acc(z, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu)
            for a in range(NX):
                zx[a] = 0.0
            for a in range(nu):
                zu[a] = 0.0
    g_term = np.zeros(NX)
    h_term = np.zeros((NX, NX))
    x = x_traj[n]
    dx = x - xref[n]
    for a in range(NX):
        g_term[a] += 2.0 * qxn[a] * dx[a]
        h_term[a, a] += 2.0 * qxn[a]
    _payload_state_ineq(
        n, x, handles, arm_nom, ph_max, r_fix, th_fix, terr_b, terr_p, terr_d,
        clearance, True, mu_b, delta_b, g_term, h_term,
    )
    return gx_all, gu_all, hxx_all, hxu_all, huu_all, g_term, h_term


@njit
def payload_linearize(x_traj, u_traj, dt, handles, m0, inertia, gravity):
    n = u_traj.shape[0]
    nu = u_traj.shape[1]
    a_seq = np.empty((n, NX, NX))
    b_seq = np.empty((n, NX, nu))
    eye = np.eye(NX)
    for k in range(n):
        fx, fu = payload_jac(x_traj[k + 1], u_traj[k], handles, m0, inertia, gravity)
        mmat = eye - dt * fx
        a_seq[k] = np.linalg.solve(mmat, eye)
        b_seq[k] = np.linalg.solve(mmat, dt * fu)
    return a_seq, b_seq


@njit
def payload_rollout(x0, x_prev, u_prev, gains, kff, alpha, dt, handles, m0, inertia, gravity):
    n = u_prev.shape[0]
    x_traj = np.empty((n + 1, NX))
    u_traj = np.empty_like(u_prev)
    x_traj[0] = x0
    max_res = 0.0
    for k in range(n):
        u = u_prev[k] + alpha * kff[k] + gains[k] @ (x_traj[k] - x_prev[k])
        xn, res, status = payload_step(x_traj[k], u, dt, handles, m0, inertia, gravity)
        if status != 0:
            return x_traj, u_traj, np.inf, status
        u_traj[k] = u
        x_traj[k + 1] = xn
        if res > max_res:
            max_res = res
    return x_traj, u_traj, max_res, 0
