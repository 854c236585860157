"""Robot-subproblem stage kernels: cost, quadraticization, linearize, rollout.

The robot solves against frozen payload data (grasp point, grasp normal,
payload pose) and a frozen consensus offset ``c = u0_block + w``. Equalities
(contact, stance foot height) enter the quadratic model with weight ``w_eq``
and the merit as an l1 sum; inequalities through the relaxed log barrier.

Stage k couples (x_k, u_k) plus x_{k+1} for the obstacle decrease condition,
whose Jacobian is chained through the step Jacobians A_k, B_k.
"""

import numpy as np

from ..accel import njit
from .constraintops import (
    friction_cone_fixed,
    relaxed_log_barrier,
    rotated_box,
    terrain_normal,
    terrain_plane,
)
from .dynamics import robot_jac, robot_step

NX = 24
NU = 30
N_FEET = 4


@njit(inline="always")
def _rank1(h, jv, jw, c):
    for a in range(jv.shape[0]):
        va = c * jv[a]
        if va != 0.0:
            for b in range(jw.shape[0]):
                if jw[b] != 0.0:
                    h[a, b] += va * jw[b]


@njit(inline="always")
def _acc_barrier(z, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu):
    val, d1, d2 = relaxed_log_barrier(z, delta_b, mu_b)
    for a in range(NX):
        if zx[a] != 0.0:
            gx[a] += d1 * zx[a]
    for a in range(NU):
        if zu[a] != 0.0:
            gu[a] += d1 * zu[a]
    _rank1(hxx, zx, zx, d2)
    _rank1(hxu, zx, zu, d2)
    _rank1(huu, zu, zu, d2)
    return val


@njit(inline="always")
def _acc_barrier_x(z, zx, mu_b, delta_b, gx, hxx):
    val, d1, d2 = relaxed_log_barrier(z, delta_b, mu_b)
    for a in range(NX):
        if zx[a] != 0.0:
            gx[a] += d1 * zx[a]
    _rank1(hxx, zx, zx, d2)
    return val


@njit
def _stage_ineq_terms(
    k,
    x,
    u,
    contact,
    p_hand,
    n_hand,
    r0_fix,
    th0_fix,
    foot_nom,
    kin_hw,
    arm_nom,
    ph_max,
    form_off,
    form_bnd,
    tau_lo,
    tau_hi,
    mu_ground,
    mu_grasp,
    eps_cone,
    terr_b,
    terr_p,
    terr_d,
    reg_hp,
    reg_cnt,
    reg_idx,
    want_derivs,
    mu_b,
    delta_b,
    gx,
    gu,
    hxx,
    hxu,
    huu,
):
    """Barrier terms of one stage shared by the cost and quad kernels.

    With ``want_derivs`` false the derivative accumulators are untouched.
    Returns the summed barrier value (excluding the obstacle terms, which the
    callers handle because they couple consecutive states).
    """
    total = 0.0
    zx = np.zeros(NX)
    zu = np.zeros(NU)

    # stance friction cones per foot
    for j in range(N_FEET):
        if not contact[k, j]:
            continue
        p = x[12 + 3 * j : 15 + 3 * j]
        n = terrain_normal(p[0], p[1], terr_b, terr_p, terr_d)
        f = u[3 * j : 3 * j + 3]
        res, jf = friction_cone_fixed(f, n, mu_ground, eps_cone)
        for r in range(2):
            z = -res[r]
            if want_derivs:
                for a in range(3):
                    zu[3 * j + a] = -jf[r, a]
                total += _acc_barrier(z, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu)
                for a in range(3):
                    zu[3 * j + a] = 0.0
            else:
                total += relaxed_log_barrier(z, delta_b, mu_b)[0]

    # grasp cone on the payload-side reaction -f_h, frozen normal
    f_h = u[24:27]
    res, jf = friction_cone_fixed(-f_h, n_hand[k], mu_grasp, eps_cone)
    for r in range(2):
        z = -res[r]
        if want_derivs:
            for a in range(3):
                zu[24 + a] = jf[r, a]  # chain through d(-f_h)/df_h = -I twice
            total += _acc_barrier(z, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu)
            for a in range(3):
                zu[24 + a] = 0.0
        else:
            total += relaxed_log_barrier(z, delta_b, mu_b)[0]

    # manipulation torque box
    for a in range(3):
        z_lo = u[27 + a] - tau_lo[a]
        z_hi = tau_hi[a] - u[27 + a]
        if want_derivs:
            zu[27 + a] = 1.0
            total += _acc_barrier(z_lo, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu)
            zu[27 + a] = -1.0
            total += _acc_barrier(z_hi, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu)
            zu[27 + a] = 0.0
        else:
            total += relaxed_log_barrier(z_lo, delta_b, mu_b)[0]
            total += relaxed_log_barrier(z_hi, delta_b, mu_b)[0]

    total += _state_ineq_terms(
        k,
        x,
        contact,
        p_hand,
        r0_fix,
        th0_fix,
        foot_nom,
        kin_hw,
        arm_nom,
        ph_max,
        form_off,
        form_bnd,
        reg_hp,
        reg_cnt,
        reg_idx,
        want_derivs,
        mu_b,
        delta_b,
        gx,
        hxx,
    )
    return total


@njit
def _state_ineq_terms(
    k,
    x,
    contact,
    p_hand,
    r0_fix,
    th0_fix,
    foot_nom,
    kin_hw,
    arm_nom,
    ph_max,
    form_off,
    form_bnd,
    reg_hp,
    reg_cnt,
    reg_idx,
    want_derivs,
    mu_b,
    delta_b,
    gx,
    hxx,
):
    """State-only barrier terms, reused at interior and terminal stages."""
    total = 0.0
    zx = np.zeros(NX)
    r = x[0:3]
    theta = x[6:9]

    # foot kinematics boxes
    for j in range(N_FEET):
        p = x[12 + 3 * j : 15 + 3 * j]
        y, rot_t, jth = rotated_box(theta, p - r, foot_nom[j])
        for a in range(3):
            for sgn in (-1.0, 1.0):
                z = kin_hw[a] - sgn * y[a]  # z = -h for h = sgn*y - hw
                if want_derivs:
                    for b in range(3):
                        zx[12 + 3 * j + b] = -sgn * rot_t[a, b]
                        zx[b] = sgn * rot_t[a, b]
                        zx[6 + b] = -sgn * jth[a, b]
                    total += _acc_barrier_x(z, zx, mu_b, delta_b, gx, hxx)
                    for b in range(3):
                        zx[12 + 3 * j + b] = 0.0
                        zx[b] = 0.0
                        zx[6 + b] = 0.0
                else:
                    total += relaxed_log_barrier(z, delta_b, mu_b)[0]

    # stance foothold regions
    for j in range(N_FEET):
        if not contact[k, j]:
            continue
        reg = reg_idx[k, j]
        if reg < 0:
            continue
        p = x[12 + 3 * j : 15 + 3 * j]
        for q in range(reg_cnt[reg]):
            ax, ay, b = reg_hp[reg, q, 0], reg_hp[reg, q, 1], reg_hp[reg, q, 2]
            z = b - ax * p[0] - ay * p[1]
            if want_derivs:
                zx[12 + 3 * j] = -ax
                zx[13 + 3 * j] = -ay
                total += _acc_barrier_x(z, zx, mu_b, delta_b, gx, hxx)
                zx[12 + 3 * j] = 0.0
                zx[13 + 3 * j] = 0.0
            else:
                total += relaxed_log_barrier(z, delta_b, mu_b)[0]

    # formation box around the frozen payload pose
    y, rot_t, _ = rotated_box(th0_fix[k], r - r0_fix[k], form_off)
    for a in range(3):
        for sgn in (-1.0, 1.0):
            z = form_bnd[a] - sgn * y[a]
            if want_derivs:
                for b in range(3):
                    zx[b] = -sgn * rot_t[a, b]
                total += _acc_barrier_x(z, zx, mu_b, delta_b, gx, hxx)
                for b in range(3):
                    zx[b] = 0.0
            else:
                total += relaxed_log_barrier(z, delta_b, mu_b)[0]

    # arm workspace box: grasp point in the live robot frame
    y, rot_t, jth = rotated_box(theta, p_hand[k] - r, arm_nom)
    for a in range(3):
        for sgn in (-1.0, 1.0):
            z = ph_max[a] - sgn * y[a]
            if want_derivs:
                for b in range(3):
                    zx[b] = sgn * rot_t[a, b]
                    zx[6 + b] = -sgn * jth[a, b]
                total += _acc_barrier_x(z, zx, mu_b, delta_b, gx, hxx)
                for b in range(3):
                    zx[b] = 0.0
                    zx[6 + b] = 0.0
            else:
                total += relaxed_log_barrier(z, delta_b, mu_b)[0]
    return total


@njit
def _stage_equalities(
    k,
    x,
    u,
    contact,
    terr_b,
    terr_p,
    terr_d,
    want_derivs,
    w_eq,
    gx,
    gu,
    hxx,
    hxu,
    huu,
):
    """Contact-phase and foot-height equalities; returns (l1, linf, sum_sq)."""
    l1 = 0.0
    linf = 0.0
    sq = 0.0
    for j in range(N_FEET):
        if contact[k, j]:
            base = 3 * N_FEET + 3 * j  # commanded foot velocity block
        else:
            base = 3 * j  # foot force block
        for a in range(3):
            g_val = u[base + a]
            l1 += abs(g_val)
            sq += g_val * g_val
            if abs(g_val) > linf:
                linf = abs(g_val)
            if want_derivs:
                gu[base + a] += 2.0 * w_eq * g_val
                huu[base + a, base + a] += 2.0 * w_eq
    for j in range(N_FEET):
        if not contact[k, j]:
            continue
        p = x[12 + 3 * j : 15 + 3 * j]
        plane = terrain_plane(p[0], p[1], terr_b, terr_p, terr_d)
        g_val = p[2] - (plane[0] + plane[1] * p[0] + plane[2] * p[1])
        l1 += abs(g_val)
        sq += g_val * g_val
        if abs(g_val) > linf:
            linf = abs(g_val)
        if want_derivs:
            jx0, jx1, jx2 = -plane[1], -plane[2], 1.0
            gx[12 + 3 * j] += 2.0 * w_eq * g_val * jx0
            gx[13 + 3 * j] += 2.0 * w_eq * g_val * jx1
            gx[14 + 3 * j] += 2.0 * w_eq * g_val * jx2
            jrow = np.array([jx0, jx1, jx2])
            for a in range(3):
                for b in range(3):
                    hxx[12 + 3 * j + a, 12 + 3 * j + b] += 2.0 * w_eq * jrow[a] * jrow[b]
    return l1, linf, sq


@njit
def _terminal_equalities(x, contact, terr_b, terr_p, terr_d, want_derivs, w_eq, gx, hxx):
    n = contact.shape[0] - 1
    l1 = 0.0
    linf = 0.0
    sq = 0.0
    for j in range(N_FEET):
        if not contact[n, j]:
            continue
        p = x[12 + 3 * j : 15 + 3 * j]
        plane = terrain_plane(p[0], p[1], terr_b, terr_p, terr_d)
        g_val = p[2] - (plane[0] + plane[1] * p[0] + plane[2] * p[1])
        l1 += abs(g_val)
        sq += g_val * g_val
        if abs(g_val) > linf:
            linf = abs(g_val)
        if want_derivs:
            jrow = np.array([-plane[1], -plane[2], 1.0])
            for a in range(3):
                gx[12 + 3 * j + a] += 2.0 * w_eq * g_val * jrow[a]
                for b in range(3):
                    hxx[12 + 3 * j + a, 12 + 3 * j + b] += 2.0 * w_eq * jrow[a] * jrow[b]
    return l1, linf, sq


@njit
def robot_cost(
    x_traj,
    u_traj,
    xref,
    qx,
    qxn,
    ru,
    cons_c,
    rho,
    contact,
    p_hand,
    n_hand,
    r0_fix,
    th0_fix,
    foot_nom,
    kin_hw,
    arm_nom,
    ph_max,
    form_off,
    form_bnd,
    tau_lo,
    tau_hi,
    mu_ground,
    mu_grasp,
    eps_cone,
    terr_b,
    terr_p,
    terr_d,
    reg_hp,
    reg_cnt,
    reg_idx,
    obst,
    r_body,
    gamma_cbf,
    mu_b,
    delta_b,
    w_eq,
):
    """Smooth + barrier cost along a feasible trajectory, plus equality norms.

    Returns (cost, eq_l1, eq_linf, eq_sq); the merit adds ``w_eq * eq_l1``
    while the quadratic model penalizes ``w_eq * eq_sq``.
    """
    n = u_traj.shape[0]
    cost = 0.0
    eq_l1 = 0.0
    eq_linf = 0.0
    eq_sq = 0.0
    dummy_gx = np.zeros(NX)
    dummy_gu = np.zeros(NU)
    dummy_hxx = np.zeros((1, 1))
    dummy_hxu = np.zeros((1, 1))
    dummy_huu = np.zeros((1, 1))
    for k in range(n):
        x = x_traj[k]
        u = u_traj[k]
        dx = x - xref[k]
        for a in range(NX):
            cost += qx[a] * dx[a] * dx[a]
        for a in range(NU):
            cost += ru[a] * u[a] * u[a]
        for a in range(6):
            resid = u[24 + a] + cons_c[k, a]
            cost += 0.5 * rho * resid * resid
        cost += _stage_ineq_terms(
            k, x, u, contact, p_hand, n_hand, r0_fix, th0_fix, foot_nom, kin_hw,
            arm_nom, ph_max, form_off, form_bnd, tau_lo, tau_hi, mu_ground,
            mu_grasp, eps_cone, terr_b, terr_p, terr_d, reg_hp, reg_cnt, reg_idx,
            False, mu_b, delta_b, dummy_gx, dummy_gu, dummy_hxx, dummy_hxu, dummy_huu,
        )
        l1, linf, sq = _stage_equalities(
            k, x, u, contact, terr_b, terr_p, terr_d, False, w_eq,
            dummy_gx, dummy_gu, dummy_hxx, dummy_hxu, dummy_huu,
        )
        eq_l1 += l1
        eq_sq += sq
        if linf > eq_linf:
            eq_linf = linf
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
    # terminal
    x = x_traj[n]
    dx = x - xref[n]
    for a in range(NX):
        cost += qxn[a] * dx[a] * dx[a]
    cost += _state_ineq_terms(
        n, x, contact, p_hand, r0_fix, th0_fix, foot_nom, kin_hw, arm_nom,
        ph_max, form_off, form_bnd, reg_hp, reg_cnt, reg_idx, False,
        mu_b, delta_b, dummy_gx, dummy_hxx,
    )
    l1, linf, sq = _terminal_equalities(
        x, contact, terr_b, terr_p, terr_d, False, w_eq, dummy_gx, dummy_hxx
    )
    eq_l1 += l1
    eq_sq += sq
    if linf > eq_linf:
        eq_linf = linf
    return cost, eq_l1, eq_linf, eq_sq


@njit
def robot_quad(
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
    contact,
    p_hand,
    n_hand,
    r0_fix,
    th0_fix,
    foot_nom,
    kin_hw,
    arm_nom,
    ph_max,
    form_off,
    form_bnd,
    tau_lo,
    tau_hi,
    mu_ground,
    mu_grasp,
    eps_cone,
    terr_b,
    terr_p,
    terr_d,
    reg_hp,
    reg_cnt,
    reg_idx,
    obst,
    r_body,
    gamma_cbf,
    mu_b,
    delta_b,
    w_eq,
):
    """Gradient/Gauss-Newton model of the full stage cost along the iterate."""
    n = u_traj.shape[0]
    gx_all = np.zeros((n, NX))
    gu_all = np.zeros((n, NU))
    hxx_all = np.zeros((n, NX, NX))
    hxu_all = np.zeros((n, NX, NU))
    huu_all = np.zeros((n, NU, NU))
    zx = np.zeros(NX)
    zu = np.zeros(NU)
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
        for a in range(NU):
            gu[a] += 2.0 * ru[a] * u[a]
            huu[a, a] += 2.0 * ru[a]
        for a in range(6):
            resid = u[24 + a] + cons_c[k, a]
            gu[24 + a] += rho * resid
            huu[24 + a, 24 + a] += rho
        _stage_ineq_terms(
            k, x, u, contact, p_hand, n_hand, r0_fix, th0_fix, foot_nom, kin_hw,
            arm_nom, ph_max, form_off, form_bnd, tau_lo, tau_hi, mu_ground,
            mu_grasp, eps_cone, terr_b, terr_p, terr_d, reg_hp, reg_cnt, reg_idx,
            True, mu_b, delta_b, gx, gu, hxx, hxu, huu,
        )
        _stage_equalities(
            k, x, u, contact, terr_b, terr_p, terr_d, True, w_eq,
            gx, gu, hxx, hxu, huu,
        )
        # obstacle decrease terms chained through the step Jacobians
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
            for a in range(NU):
                zu[a] = jn0 * b_seq[k, 0, a] + jn1 * b_seq[k, 1, a]
            _acc_barrier(z, zx, zu, mu_b, delta_b, gx, gu, hxx, hxu, huu)
            for a in range(NX):
                zx[a] = 0.0
            for a in range(NU):
                zu[a] = 0.0
    # terminal
    g_term = np.zeros(NX)
    h_term = np.zeros((NX, NX))
    x = x_traj[n]
    dx = x - xref[n]
    for a in range(NX):
        g_term[a] += 2.0 * qxn[a] * dx[a]
        h_term[a, a] += 2.0 * qxn[a]
    _state_ineq_terms(
        n, x, contact, p_hand, r0_fix, th0_fix, foot_nom, kin_hw, arm_nom,
        ph_max, form_off, form_bnd, reg_hp, reg_cnt, reg_idx, True,
        mu_b, delta_b, g_term, h_term,
    )
    _terminal_equalities(x, contact, terr_b, terr_p, terr_d, True, w_eq, g_term, h_term)
    return gx_all, gu_all, hxx_all, hxu_all, huu_all, g_term, h_term


@njit
def robot_linearize(x_traj, u_traj, dt, m, inertia, gravity, p_hand):
    """Implicit-step Jacobians along a feasible trajectory."""
    n = u_traj.shape[0]
    a_seq = np.empty((n, NX, NX))
    b_seq = np.empty((n, NX, NU))
    eye = np.eye(NX)
    for k in range(n):
        fx, fu = robot_jac(x_traj[k + 1], u_traj[k], p_hand[k + 1], m, inertia, gravity)
        mmat = eye - dt * fx
        a_seq[k] = np.linalg.solve(mmat, eye)
        b_seq[k] = np.linalg.solve(mmat, dt * fu)
    return a_seq, b_seq


@njit
def robot_rollout(x0, x_prev, u_prev, gains, kff, alpha, dt, m, inertia, gravity, p_hand):
    """Closed-loop rollout through the implicit dynamics.

    Returns (X, U, max_step_residual, status).
    """
    n = u_prev.shape[0]
    x_traj = np.empty((n + 1, NX))
    u_traj = np.empty((n, NU))
    x_traj[0] = x0
    max_res = 0.0
    for k in range(n):
        u = u_prev[k] + alpha * kff[k] + gains[k] @ (x_traj[k] - x_prev[k])
        xn, res, status = robot_step(x_traj[k], u, p_hand[k + 1], dt, m, inertia, gravity)
        if status != 0:
            return x_traj, u_traj, np.inf, status
        u_traj[k] = u
        x_traj[k + 1] = xn
        if res > max_res:
            max_res = res
    return x_traj, u_traj, max_res, 0
