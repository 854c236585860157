"""Rotation and Euler-angle kinematics kernels.

Convention used throughout the package: ``theta = (yaw, pitch, roll)`` with
the world-frame rotation ``R(theta) = Rz(yaw) @ Ry(pitch) @ Rx(roll)`` (ZYX)
and angular velocity expressed in the world frame.
"""

import numpy as np

from ..accel import njit

PITCH_GUARD = np.pi / 2.0 - 1e-6


@njit
def skew(v):
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@njit
def rotmat(theta):
    """World rotation matrix for ZYX Euler angles (yaw, pitch, roll)."""
    cy, sy = np.cos(theta[0]), np.sin(theta[0])
    cp, sp = np.cos(theta[1]), np.sin(theta[1])
    cr, sr = np.cos(theta[2]), np.sin(theta[2])
    out = np.empty((3, 3))
    out[0, 0] = cy * cp
    out[0, 1] = cy * sp * sr - sy * cr
    out[0, 2] = cy * sp * cr + sy * sr
    out[1, 0] = sy * cp
    out[1, 1] = sy * sp * sr + cy * cr
    out[1, 2] = sy * sp * cr - cy * sr
    out[2, 0] = -sp
    out[2, 1] = cp * sr
    out[2, 2] = cp * cr
    return out


@njit
def rotmat_derivs(theta):
    """Rotation matrix and its partials w.r.t. yaw, pitch, roll.

    Returns:
        (R, dR_dyaw, dR_dpitch, dR_droll), each 3x3.
    """
    cy, sy = np.cos(theta[0]), np.sin(theta[0])
    cp, sp = np.cos(theta[1]), np.sin(theta[1])
    cr, sr = np.cos(theta[2]), np.sin(theta[2])

    rz = np.array(((cy, -sy, 0.0), (sy, cy, 0.0), (0.0, 0.0, 1.0)))
    ry = np.array(((cp, 0.0, sp), (0.0, 1.0, 0.0), (-sp, 0.0, cp)))
    rx = np.array(((1.0, 0.0, 0.0), (0.0, cr, -sr), (0.0, sr, cr)))
    dz = np.array(((-sy, -cy, 0.0), (cy, -sy, 0.0), (0.0, 0.0, 0.0)))
    dy = np.array(((-sp, 0.0, cp), (0.0, 0.0, 0.0), (-cp, 0.0, -sp)))
    dx = np.array(((0.0, 0.0, 0.0), (0.0, -sr, -cr), (0.0, cr, -sr)))

    zy = rz @ ry
    rot = zy @ rx
    d_yaw = dz @ ry @ rx
    d_pitch = rz @ dy @ rx
    d_roll = zy @ dx
    return rot, d_yaw, d_pitch, d_roll


@njit
def rotated_offset_jac(theta, d):
    """``R(theta) @ d`` and its 3x3 Jacobian w.r.t. theta (columns per angle)."""
    rot, dy, dp, dr = rotmat_derivs(theta)
    val = rot @ d
    jac = np.empty((3, 3))
    jac[:, 0] = dy @ d
    jac[:, 1] = dp @ d
    jac[:, 2] = dr @ d
    return val, jac


@njit
def rotated_offset_jac_t(theta, v):
    """``R(theta).T @ v`` and its 3x3 Jacobian w.r.t. theta."""
    rot, dy, dp, dr = rotmat_derivs(theta)
    val = rot.T @ v
    jac = np.empty((3, 3))
    jac[:, 0] = dy.T @ v
    jac[:, 1] = dp.T @ v
    jac[:, 2] = dr.T @ v
    return val, jac


@njit
def euler_rate_matrix(theta):
    """Map world angular velocity to (yaw, pitch, roll) rates.

    Valid away from gimbal lock (|pitch| < pi/2); callers guard the input.
    """
    cy, sy = np.cos(theta[0]), np.sin(theta[0])
    cp, sp = np.cos(theta[1]), np.sin(theta[1])
    tp = sp / cp
    out = np.empty((3, 3))
    out[0, 0] = cy * tp
    out[0, 1] = sy * tp
    out[0, 2] = 1.0
    out[1, 0] = -sy
    out[1, 1] = cy
    out[1, 2] = 0.0
    out[2, 0] = cy / cp
    out[2, 1] = sy / cp
    out[2, 2] = 0.0
    return out


@njit
def euler_rate_matrix_derivs(theta):
    """Euler-rate matrix and its partials w.r.t. yaw and pitch (roll partial is zero)."""
    cy, sy = np.cos(theta[0]), np.sin(theta[0])
    cp, sp = np.cos(theta[1]), np.sin(theta[1])
    tp = sp / cp
    sec2 = 1.0 / (cp * cp)

    tmat = np.empty((3, 3))
    tmat[0, 0] = cy * tp
    tmat[0, 1] = sy * tp
    tmat[0, 2] = 1.0
    tmat[1, 0] = -sy
    tmat[1, 1] = cy
    tmat[1, 2] = 0.0
    tmat[2, 0] = cy / cp
    tmat[2, 1] = sy / cp
    tmat[2, 2] = 0.0

    d_yaw = np.zeros((3, 3))
    d_yaw[0, 0] = -sy * tp
    d_yaw[0, 1] = cy * tp
    d_yaw[1, 0] = -cy
    d_yaw[1, 1] = -sy
    d_yaw[2, 0] = -sy / cp
    d_yaw[2, 1] = cy / cp

    d_pitch = np.zeros((3, 3))
    d_pitch[0, 0] = cy * sec2
    d_pitch[0, 1] = sy * sec2
    d_pitch[2, 0] = cy * sp * sec2
    d_pitch[2, 1] = sy * sp * sec2
    return tmat, d_yaw, d_pitch


@njit
def inv3(a):
    """Inverse of a well-conditioned 3x3 matrix via the adjugate."""
    det = (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )
    out = np.empty((3, 3))
    out[0, 0] = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    out[0, 1] = a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]
    out[0, 2] = a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]
    out[1, 0] = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    out[1, 1] = a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
    out[1, 2] = a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]
    out[2, 0] = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    out[2, 1] = a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]
    out[2, 2] = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return out / det


@njit
def world_inertia(theta, inertia_body):
    rot = rotmat(theta)
    return rot @ inertia_body @ rot.T


@njit
def euler_rates(theta, l, inertia_body):
    """Euler-angle rates from world angular momentum: T(theta) @ I_w(theta)^-1 @ l."""
    rot = rotmat(theta)
    iw = rot @ inertia_body @ rot.T
    omega = inv3(iw) @ l
    return euler_rate_matrix(theta) @ omega


@njit
def euler_rates_jac(theta, l, inertia_body):
    """Euler-angle rates with Jacobians w.r.t. theta and l.

    Returns:
        (thdot, d_theta (3x3), d_l (3x3)).
    """
    rot, d0, d1, d2 = rotmat_derivs(theta)
    iw = rot @ inertia_body @ rot.T
    iw_inv = inv3(iw)
    omega = iw_inv @ l
    tmat, t_yaw, t_pitch = euler_rate_matrix_derivs(theta)
    thdot = tmat @ omega

    d_theta = np.zeros((3, 3))
    for a in range(3):
        if a == 0:
            dr = d0
        elif a == 1:
            dr = d1
        else:
            dr = d2
        diw = dr @ inertia_body @ rot.T + rot @ inertia_body @ dr.T
        domega = -(iw_inv @ (diw @ omega))
        col = tmat @ domega
        if a == 0:
            col = col + t_yaw @ omega
        elif a == 1:
            col = col + t_pitch @ omega
        d_theta[:, a] = col
    d_l = tmat @ iw_inv
    return thdot, d_theta, d_l
