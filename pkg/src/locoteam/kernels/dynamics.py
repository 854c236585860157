"""Continuous dynamics, implicit backward-Euler steps, and step Jacobians.

State/control layouts (all float64 1-D arrays):

* payload state (12): ``[r, r_dot, theta, l]``
* payload control (6R): per robot ``[f_bar_i, tau_bar_i]`` wrench copies
* robot state (12 + 3 n_f): ``[r, r_dot, theta, l, p_feet]``
* robot control (6 n_f + 6): ``[f_feet, p_dot_feet, f_h, tau_h]``
* stacked state (12 + 24R): payload block then robot blocks
* stacked control (30R): robot controls only (the payload has none)

The payload copies ``f_bar, tau_bar`` are the negated robot wrenches; the
stacked system applies the robot wrenches to the payload directly with the
reaction sign.

Step status codes: 0 = converged, 1 = gimbal/non-finite guard tripped,
2 = Newton did not converge.
"""

import numpy as np

from ..accel import njit
from .rotation import (
    PITCH_GUARD,
    euler_rates,
    euler_rates_jac,
    rotated_offset_jac,
    rotmat,
    skew,
)

STEP_TOL = 1e-10
STEP_MAX_ITER = 50


@njit
def payload_xdot(x, u, handles, m0, inertia_body, gravity):
    """Payload state derivative under wrench copies applied at the handles."""
    n_r = handles.shape[0]
    out = np.empty(12)
    out[0:3] = x[3:6]
    rot = rotmat(x[6:9])
    acc = gravity.copy()
    ldot = np.zeros(3)
    for i in range(n_r):
        f = u[6 * i : 6 * i + 3]
        acc = acc + f / m0
        arm = rot @ handles[i]
        ldot = ldot + np.cross(arm, f) + u[6 * i + 3 : 6 * i + 6]
    out[3:6] = acc
    out[6:9] = euler_rates(x[6:9], x[9:12], inertia_body)
    out[9:12] = ldot
    return out


@njit
def payload_jac(x, u, handles, m0, inertia_body, gravity):
    """Analytic Jacobians (fx, fu) of :func:`payload_xdot`."""
    n_r = handles.shape[0]
    fx = np.zeros((12, 12))
    fu = np.zeros((12, 6 * n_r))
    for a in range(3):
        fx[a, 3 + a] = 1.0
    _, d_theta, d_l = euler_rates_jac(x[6:9], x[9:12], inertia_body)
    fx[6:9, 6:9] = d_theta
    fx[6:9, 9:12] = d_l
    for i in range(n_r):
        f = u[6 * i : 6 * i + 3]
        arm, arm_jac = rotated_offset_jac(x[6:9], handles[i])
        for a in range(3):
            fx[9:12, 6 + a] += np.cross(arm_jac[:, a], f)
        for a in range(3):
            fu[3 + a, 6 * i + a] = 1.0 / m0
        fu[9:12, 6 * i : 6 * i + 3] = skew(arm)
        for a in range(3):
            fu[9 + a, 6 * i + 3 + a] = 1.0
    return fx, fu


@njit
def robot_xdot(x, u, p_hand, m, inertia_body, gravity):
    """Robot state derivative; ``p_hand`` is the world grasp point (exogenous)."""
    n_f = (x.shape[0] - 12) // 3
    nx = 12 + 3 * n_f
    out = np.empty(nx)
    out[0:3] = x[3:6]
    f_h = u[6 * n_f : 6 * n_f + 3]
    tau_h = u[6 * n_f + 3 : 6 * n_f + 6]
    r = x[0:3]
    acc = gravity + f_h / m
    ldot = np.cross(p_hand - r, f_h) + tau_h
    for j in range(n_f):
        f = u[3 * j : 3 * j + 3]
        p = x[12 + 3 * j : 15 + 3 * j]
        acc = acc + f / m
        ldot = ldot + np.cross(p - r, f)
    out[3:6] = acc
    out[6:9] = euler_rates(x[6:9], x[9:12], inertia_body)
    out[9:12] = ldot
    out[12:nx] = u[3 * n_f : 6 * n_f]
    return out


@njit
def robot_jac(x, u, p_hand, m, inertia_body, gravity):
    """Analytic Jacobians (fx, fu) of :func:`robot_xdot`."""
    n_f = (x.shape[0] - 12) // 3
    nx = 12 + 3 * n_f
    nu = 6 * n_f + 6
    fx = np.zeros((nx, nx))
    fu = np.zeros((nx, nu))
    r = x[0:3]
    f_h = u[6 * n_f : 6 * n_f + 3]
    for a in range(3):
        fx[a, 3 + a] = 1.0
    _, d_theta, d_l = euler_rates_jac(x[6:9], x[9:12], inertia_body)
    fx[6:9, 6:9] = d_theta
    fx[6:9, 9:12] = d_l

    f_total = f_h.copy()
    for j in range(n_f):
        f = u[3 * j : 3 * j + 3]
        p = x[12 + 3 * j : 15 + 3 * j]
        f_total = f_total + f
        fx[9:12, 12 + 3 * j : 15 + 3 * j] = -skew(f)
        fu[9:12, 3 * j : 3 * j + 3] = skew(p - r)
        for a in range(3):
            fu[3 + a, 3 * j + a] = 1.0 / m
    fx[9:12, 0:3] = skew(f_total)
    for a in range(3):
        fu[3 + a, 6 * n_f + a] = 1.0 / m
        fu[9 + a, 6 * n_f + 3 + a] = 1.0
    fu[9:12, 6 * n_f : 6 * n_f + 3] = skew(p_hand - r)
    for a in range(3 * n_f):
        fu[12 + a, 3 * n_f + a] = 1.0
    return fx, fu


@njit
def stacked_xdot(x, u, handles, m0, inertia0, masses, inertias, gravity):
    """Coupled payload+robots derivative under live robot wrenches (no copies)."""
    n_r = handles.shape[0]
    nx = 12 + 24 * n_r
    out = np.empty(nx)
    r0 = x[0:3]
    th0 = x[6:9]
    rot0 = rotmat(th0)
    out[0:3] = x[3:6]
    acc0 = gravity.copy()
    ldot0 = np.zeros(3)
    for i in range(n_r):
        ui = u[30 * i : 30 * (i + 1)]
        f_h = ui[24:27]
        tau_h = ui[27:30]
        acc0 = acc0 - f_h / m0
        arm = rot0 @ handles[i]
        ldot0 = ldot0 + np.cross(arm, -f_h) - tau_h
    out[3:6] = acc0
    out[6:9] = euler_rates(th0, x[9:12], inertia0)
    out[9:12] = ldot0
    for i in range(n_r):
        xi = x[12 + 24 * i : 12 + 24 * (i + 1)]
        ui = u[30 * i : 30 * (i + 1)]
        p_hand = r0 + rot0 @ handles[i]
        out[12 + 24 * i : 12 + 24 * (i + 1)] = robot_xdot(
            xi, ui, p_hand, masses[i], inertias[i], gravity
        )
    return out


@njit
def stacked_jac(x, u, handles, m0, inertia0, masses, inertias, gravity):
    """Analytic Jacobians (fx, fu) of :func:`stacked_xdot`, with cross blocks."""
    n_r = handles.shape[0]
    nx = 12 + 24 * n_r
    nu = 30 * n_r
    fx = np.zeros((nx, nx))
    fu = np.zeros((nx, nu))
    r0 = x[0:3]
    th0 = x[6:9]

    for a in range(3):
        fx[a, 3 + a] = 1.0
    _, d_theta0, d_l0 = euler_rates_jac(th0, x[9:12], inertia0)
    fx[6:9, 6:9] = d_theta0
    fx[6:9, 9:12] = d_l0

    for i in range(n_r):
        ui = u[30 * i : 30 * (i + 1)]
        f_h = ui[24:27]
        arm, arm_jac = rotated_offset_jac(th0, handles[i])
        cu = 30 * i
        # payload rows
        for a in range(3):
            fx[9:12, 6 + a] += np.cross(arm_jac[:, a], -f_h)
            fu[3 + a, cu + 24 + a] = -1.0 / m0
            fu[9 + a, cu + 27 + a] = -1.0
        fu[9:12, cu + 24 : cu + 27] = -skew(arm)
        # robot rows
        cx = 12 + 24 * i
        xi = x[cx : cx + 24]
        p_hand = r0 + arm
        rfx, rfu = robot_jac(xi, ui, p_hand, masses[i], inertias[i], gravity)
        fx[cx : cx + 24, cx : cx + 24] = rfx
        fu[cx : cx + 24, cu : cu + 30] = rfu
        # robot angular momentum depends on the live payload pose via p_hand
        neg_skew_fh = -skew(f_h)
        fx[cx + 9 : cx + 12, 0:3] = neg_skew_fh
        fx[cx + 9 : cx + 12, 6:9] = neg_skew_fh @ arm_jac
    return fx, fu


@njit
def _pitch_ok_payload(x):
    return np.abs(x[7]) < PITCH_GUARD


@njit
def _pitch_ok_robot(x):
    return np.abs(x[7]) < PITCH_GUARD


@njit
def _pitch_ok_stacked(x, n_r):
    if np.abs(x[7]) >= PITCH_GUARD:
        return False
    for i in range(n_r):
        if np.abs(x[12 + 24 * i + 7]) >= PITCH_GUARD:
            return False
    return True


@njit
def payload_step(x, u, dt, handles, m0, inertia_body, gravity):
    """Backward-Euler step for the payload. Returns (x_next, residual, status)."""
    nx = 12
    if not _pitch_ok_payload(x):
        return x.copy(), np.inf, 1
    xn = x + dt * payload_xdot(x, u, handles, m0, inertia_body, gravity)
    eye = np.eye(nx)
    for _ in range(STEP_MAX_ITER):
        if not _pitch_ok_payload(xn):
            return xn, np.inf, 1
        f = payload_xdot(xn, u, handles, m0, inertia_body, gravity)
        res = xn - x - dt * f
        rn = np.sqrt(np.sum(res * res))
        if not np.isfinite(rn):
            return xn, np.inf, 1
        if rn <= STEP_TOL:
            return xn, rn, 0
        fx, _ = payload_jac(xn, u, handles, m0, inertia_body, gravity)
        step = np.linalg.solve(eye - dt * fx, -res)
        alpha = 1.0
        accepted = False
        for _ in range(6):
            cand = xn + alpha * step
            if _pitch_ok_payload(cand):
                fc = payload_xdot(cand, u, handles, m0, inertia_body, gravity)
                rc = cand - x - dt * fc
                rcn = np.sqrt(np.sum(rc * rc))
                if np.isfinite(rcn) and rcn < rn:
                    xn = cand
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            return xn, rn, 2
    f = payload_xdot(xn, u, handles, m0, inertia_body, gravity)
    res = xn - x - dt * f
    rn = np.sqrt(np.sum(res * res))
    if rn <= STEP_TOL:
        return xn, rn, 0
    return xn, rn, 2


@njit
def robot_step(x, u, p_hand, dt, m, inertia_body, gravity):
    """Backward-Euler step for one robot with a fixed grasp point."""
    nx = x.shape[0]
    if not _pitch_ok_robot(x):
        return x.copy(), np.inf, 1
    xn = x + dt * robot_xdot(x, u, p_hand, m, inertia_body, gravity)
    eye = np.eye(nx)
    for _ in range(STEP_MAX_ITER):
        if not _pitch_ok_robot(xn):
            return xn, np.inf, 1
        f = robot_xdot(xn, u, p_hand, m, inertia_body, gravity)
        res = xn - x - dt * f
        rn = np.sqrt(np.sum(res * res))
        if not np.isfinite(rn):
            return xn, np.inf, 1
        if rn <= STEP_TOL:
            return xn, rn, 0
        fx, _ = robot_jac(xn, u, p_hand, m, inertia_body, gravity)
        step = np.linalg.solve(eye - dt * fx, -res)
        alpha = 1.0
        accepted = False
        for _ in range(6):
            cand = xn + alpha * step
            if _pitch_ok_robot(cand):
                fc = robot_xdot(cand, u, p_hand, m, inertia_body, gravity)
                rc = cand - x - dt * fc
                rcn = np.sqrt(np.sum(rc * rc))
                if np.isfinite(rcn) and rcn < rn:
                    xn = cand
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            return xn, rn, 2
    f = robot_xdot(xn, u, p_hand, m, inertia_body, gravity)
    res = xn - x - dt * f
    rn = np.sqrt(np.sum(res * res))
    if rn <= STEP_TOL:
        return xn, rn, 0
    return xn, rn, 2


@njit
def stacked_step(x, u, dt, handles, m0, inertia0, masses, inertias, gravity):
    """Backward-Euler step for the coupled payload+robots system."""
    n_r = handles.shape[0]
    nx = x.shape[0]
    if not _pitch_ok_stacked(x, n_r):
        return x.copy(), np.inf, 1
    xn = x + dt * stacked_xdot(x, u, handles, m0, inertia0, masses, inertias, gravity)
    eye = np.eye(nx)
    for _ in range(STEP_MAX_ITER):
        if not _pitch_ok_stacked(xn, n_r):
            return xn, np.inf, 1
        f = stacked_xdot(xn, u, handles, m0, inertia0, masses, inertias, gravity)
        res = xn - x - dt * f
        rn = np.sqrt(np.sum(res * res))
        if not np.isfinite(rn):
            return xn, np.inf, 1
        if rn <= STEP_TOL:
            return xn, rn, 0
        fx, _ = stacked_jac(xn, u, handles, m0, inertia0, masses, inertias, gravity)
        step = np.linalg.solve(eye - dt * fx, -res)
        alpha = 1.0
        accepted = False
        for _ in range(6):
            cand = xn + alpha * step
            if _pitch_ok_stacked(cand, n_r):
                fc = stacked_xdot(
                    cand, u, handles, m0, inertia0, masses, inertias, gravity
                )
                rc = cand - x - dt * fc
                rcn = np.sqrt(np.sum(rc * rc))
                if np.isfinite(rcn) and rcn < rn:
                    xn = cand
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            return xn, rn, 2
    f = stacked_xdot(xn, u, handles, m0, inertia0, masses, inertias, gravity)
    res = xn - x - dt * f
    rn = np.sqrt(np.sum(res * res))
    if rn <= STEP_TOL:
        return xn, rn, 0
    return xn, rn, 2
