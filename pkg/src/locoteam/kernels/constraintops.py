"""Jitted constraint primitives shared by the public evaluators and stage kernels.

Residual conventions: equalities as ``g(.) = 0``, inequalities as
``h(.) <= 0``. Barrier arguments use ``z = -h`` (positive when feasible).
"""

import numpy as np

from ..accel import njit
from .rotation import rotated_offset_jac, rotmat_derivs

CONE_EPS = 1e-3


@njit
def relaxed_log_barrier(z, delta, mu_b):
    """Relaxed log barrier value and first/second derivatives at ``z``.

    ``-mu_b log(z)`` for ``z > delta``, quadratic extension below; C2 at the
    knot and finite everywhere.
    """
    if z > delta:
        return -mu_b * np.log(z), -mu_b / z, mu_b / (z * z)
    t = (z - 2.0 * delta) / delta
    val = mu_b * (0.5 * t * t - 0.5 - np.log(delta))
    return val, mu_b * t / delta, mu_b / (delta * delta)


@njit
def smoothed_norm(v, eps):
    """``sqrt(|v|^2 + eps^2) - eps`` and its gradient (defined at the origin)."""
    s = np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + eps * eps)
    return s - eps, v / s


@njit
def friction_cone_fixed(f, n, mu, eps):
    """Cone residuals ``[-f.n, |f_t|_s - mu f.n]`` and Jacobian w.r.t. ``f``."""
    fn = f[0] * n[0] + f[1] * n[1] + f[2] * n[2]
    ft = f - fn * n
    s, ds = smoothed_norm(ft, eps)
    res = np.empty(2)
    res[0] = -fn
    res[1] = s - mu * fn
    jf = np.empty((2, 3))
    jf[0] = -n
    # d|f_t|_s/df = ds @ (I - n n^T)
    jf[1] = ds - (ds[0] * n[0] + ds[1] * n[1] + ds[2] * n[2]) * n - mu * n
    return res, jf


@njit
def friction_cone_live(f, theta, mu, eps):
    """Cone residuals against the rotated z-axis ``n = R(theta) e_z``.

    Returns (res, J_f, J_theta); used where the grasp normal follows a live
    payload orientation.
    """
    ez = np.zeros(3)
    ez[2] = 1.0
    n, dn = rotated_offset_jac(theta, ez)
    fn = f[0] * n[0] + f[1] * n[1] + f[2] * n[2]
    ft = f - fn * n
    s, ds = smoothed_norm(ft, eps)
    res = np.empty(2)
    res[0] = -fn
    res[1] = s - mu * fn
    jf = np.empty((2, 3))
    jf[0] = -n
    jf[1] = ds - (ds[0] * n[0] + ds[1] * n[1] + ds[2] * n[2]) * n - mu * n
    jth = np.empty((2, 3))
    for a in range(3):
        dna = dn[:, a]
        dfn = f[0] * dna[0] + f[1] * dna[1] + f[2] * dna[2]
        jth[0, a] = -dfn
        dft = -dfn * n - fn * dna
        jth[1, a] = (ds[0] * dft[0] + ds[1] * dft[1] + ds[2] * dft[2]) - mu * dfn
    return res, jf, jth


@njit
def rotated_box(theta, v, nominal):
    """``y = R(theta)^T v - nominal`` with rotation and d y / d theta.

    Returns (y, rot_t, j_theta); the Jacobian w.r.t. ``v`` is ``rot_t``.
    """
    rot, dy_, dp_, dr_ = rotmat_derivs(theta)
    y = rot.T @ v - nominal
    jth = np.empty((3, 3))
    jth[:, 0] = dy_.T @ v
    jth[:, 1] = dp_.T @ v
    jth[:, 2] = dr_.T @ v
    rot_t = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            rot_t[i, j] = rot[j, i]
    return y, rot_t, jth


@njit
def terrain_plane(px, py, band_bounds, band_planes, default_plane):
    """Plane coefficients ``(c, sx, sy)`` of the terrain patch under (px, py)."""
    for b in range(band_bounds.shape[0]):
        if (
            band_bounds[b, 0] <= px
            and px <= band_bounds[b, 1]
            and band_bounds[b, 2] <= py
            and py <= band_bounds[b, 3]
        ):
            return band_planes[b]
    return default_plane


@njit
def terrain_height(px, py, band_bounds, band_planes, default_plane):
    plane = terrain_plane(px, py, band_bounds, band_planes, default_plane)
    return plane[0] + plane[1] * px + plane[2] * py


@njit
def terrain_normal(px, py, band_bounds, band_planes, default_plane):
    plane = terrain_plane(px, py, band_bounds, band_planes, default_plane)
    n = np.array([-plane[1], -plane[2], 1.0])
    return n / np.sqrt(n[0] * n[0] + n[1] * n[1] + 1.0)


@njit
def cbf_pair_residual(p_xy, p_next_xy, cx, cy, rad_eff, gamma):
    """Discrete CBF decrease residual ``(1-gamma) h(p) - h(p_next) <= 0``."""
    dx, dy = p_xy[0] - cx, p_xy[1] - cy
    dx1, dy1 = p_next_xy[0] - cx, p_next_xy[1] - cy
    h0 = dx * dx + dy * dy - rad_eff * rad_eff
    h1 = dx1 * dx1 + dy1 * dy1 - rad_eff * rad_eff
    return (1.0 - gamma) * h0 - h1
