"""Constraint evaluators for the trajectory optimization subproblems.

Conventions: equalities return residuals with ``g(.) = 0``, inequalities with
``h(.) <= 0``; feasibility means every equality residual is (near) zero and
every inequality residual is non-positive. Each evaluator also returns
Jacobians with respect to its differentiable arguments.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigValidationError
from .kernels import constraintops as ops
from .kernels.rotation import rotated_offset_jac, rotmat

CONE_EPS = ops.CONE_EPS
DEFAULT_CBF_GAMMA = 0.1
DEFAULT_CLEARANCE = 0.3


@dataclass(frozen=True)
class TerrainBand:
    """Axis-aligned rectangular terrain patch with an affine height plane."""

    bounds: np.ndarray  # [x_lo, x_hi, y_lo, y_hi]
    plane: np.ndarray  # height = c + sx*x + sy*y

    def __post_init__(self):
        object.__setattr__(self, "bounds", np.asarray(self.bounds, dtype=float).reshape(4))
        object.__setattr__(self, "plane", np.asarray(self.plane, dtype=float).reshape(3))


@dataclass(frozen=True)
class Terrain:
    """Piecewise-planar analytic terrain: patches over a default plane."""

    default_plane: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bands: tuple = ()
    mu: float = 0.7

    def __post_init__(self):
        object.__setattr__(
            self, "default_plane", np.asarray(self.default_plane, dtype=float).reshape(3)
        )
        object.__setattr__(self, "bands", tuple(self.bands))
        if not 0.0 < self.mu:
            raise ConfigValidationError("terrain.mu must be positive")

    def kernel_pack(self):
        if self.bands:
            bounds = np.stack([b.bounds for b in self.bands])
            planes = np.stack([b.plane for b in self.bands])
        else:
            bounds = np.zeros((0, 4))
            planes = np.zeros((0, 3))
        return bounds, planes, self.default_plane

    def plane_at(self, x, y):
        bounds, planes, default = self.kernel_pack()
        return np.asarray(ops.terrain_plane(float(x), float(y), bounds, planes, default))

    def height(self, x, y):
        c, sx, sy = self.plane_at(x, y)
        return float(c + sx * x + sy * y)

    def normal(self, x, y):
        bounds, planes, default = self.kernel_pack()
        return np.asarray(ops.terrain_normal(float(x), float(y), bounds, planes, default))


@dataclass(frozen=True)
class ConvexRegion:
    """Foothold region as half-planes ``a . p_xy <= b``."""

    halfplanes_a: np.ndarray
    halfplanes_b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.halfplanes_a, dtype=float).reshape(-1, 2)
        b = np.asarray(self.halfplanes_b, dtype=float).reshape(-1)
        if a.shape[0] != b.size:
            raise ConfigValidationError("region half-plane sizes disagree")
        object.__setattr__(self, "halfplanes_a", a)
        object.__setattr__(self, "halfplanes_b", b)
        if self.interior_point() is None:
            raise ConfigValidationError("convex region is empty")

    @classmethod
    def box(cls, x_lo, x_hi, y_lo, y_hi):
        a = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
        b = np.array([-x_lo, x_hi, -y_lo, y_hi])
        return cls(a, b)

    def interior_point(self, tol=1e-9):
        """A feasible point, or None if no candidate satisfies all half-planes."""
        a, b = self.halfplanes_a, self.halfplanes_b
        candidates = [np.zeros(2)]
        q = a.shape[0]
        for i in range(q):
            norm_sq = a[i] @ a[i]
            if norm_sq > 0:
                candidates.append(a[i] * (b[i] - 1.0) / norm_sq)
            for j in range(i + 1, q):
                mat = np.stack([a[i], a[j]])
                if abs(np.linalg.det(mat)) > 1e-12:
                    candidates.append(np.linalg.solve(mat, np.array([b[i], b[j]])))
        best = None
        best_slack = -np.inf
        for p in candidates:
            slack = float(np.min(b - a @ p))
            if slack > best_slack:
                best_slack = slack
                best = p
        if best_slack >= -tol:
            return best
        return None

    def center(self):
        p = self.interior_point()
        return p if p is not None else np.zeros(2)

    def contains(self, p_xy, tol=1e-9):
        return bool(np.all(self.halfplanes_a @ np.asarray(p_xy, float) - self.halfplanes_b <= tol))


@dataclass(frozen=True)
class Obstacle:
    """Vertical cylinder blocking robot and payload footprints."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not self.radius > 0:
            raise ConfigValidationError("obstacle radius must be positive")


@dataclass(frozen=True)
class WrenchBox:
    """Per-axis bounds on the manipulation torque."""

    tau_min: np.ndarray
    tau_max: np.ndarray

    def __post_init__(self):
        tau_min = np.asarray(self.tau_min, dtype=float).reshape(3)
        tau_max = np.asarray(self.tau_max, dtype=float).reshape(3)
        object.__setattr__(self, "tau_min", tau_min)
        object.__setattr__(self, "tau_max", tau_max)
        if np.any(tau_min > tau_max):
            raise ConfigValidationError("tau_min must be elementwise <= tau_max")

    @classmethod
    def symmetric(cls, bound=5.0):
        b = float(bound)
        return cls([-b, -b, -b], [b, b, b])


def friction_cone(f, n, mu):
    """Cone residuals ``[-f.n, |f_t|_s - mu f.n]`` and Jacobian w.r.t. ``f``.

    The tangential norm is smoothed so the residual stays differentiable at
    the cone apex.
    """
    f = np.asarray(f, dtype=float).reshape(3)
    n = np.asarray(n, dtype=float).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError("n must be a unit vector")
    res, jf = ops.friction_cone_fixed(f, n, mu, CONE_EPS)
    return np.asarray(res), np.asarray(jf)


def manipulation_wrench_constraints(f_h, tau_h, n_h, mu, box):
    """Grasp wrench residuals: cone on the payload-side reaction plus torque box.

    Returns (res(8,), J_f(8,3), J_tau(8,3)); rows are [cone(2), tau lower(3),
    tau upper(3)].
    """
    f_h = np.asarray(f_h, dtype=float).reshape(3)
    tau_h = np.asarray(tau_h, dtype=float).reshape(3)
    cone_res, cone_jf = friction_cone(-f_h, n_h, mu)
    res = np.concatenate([cone_res, box.tau_min - tau_h, tau_h - box.tau_max])
    j_f = np.zeros((8, 3))
    j_f[0:2] = -cone_jf
    j_tau = np.zeros((8, 3))
    j_tau[2:5] = -np.eye(3)
    j_tau[5:8] = np.eye(3)
    return res, j_f, j_tau


def contact_equalities(in_contact, p_dot_foot, f_foot):
    """Stance pins the foot velocity to zero; swing pins the force to zero.

    Returns (res(3,), J_pdot(3,3), J_f(3,3)).
    """
    p_dot_foot = np.asarray(p_dot_foot, dtype=float).reshape(3)
    f_foot = np.asarray(f_foot, dtype=float).reshape(3)
    if in_contact:
        return p_dot_foot.copy(), np.eye(3), np.zeros((3, 3))
    return f_foot.copy(), np.zeros((3, 3)), np.eye(3)


def foot_kinematics_box(p_foot, r_base, theta_base, nominal_offset, half_widths):
    """Bound the body-frame foot offset inside a box around its nominal value.

    Returns (res(6,), J_p(6,3), J_r(6,3), J_theta(6,3)) with rows
    [lower(3), upper(3)].
    """
    p_foot = np.asarray(p_foot, dtype=float).reshape(3)
    r_base = np.asarray(r_base, dtype=float).reshape(3)
    theta_base = np.asarray(theta_base, dtype=float).reshape(3)
    nominal = np.asarray(nominal_offset, dtype=float).reshape(3)
    hw = np.asarray(half_widths, dtype=float).reshape(3)
    y, rot_t, jth = ops.rotated_box(theta_base, p_foot - r_base, nominal)
    res = np.concatenate([-y - hw, y - hw])
    j_p = np.vstack([-rot_t, rot_t])
    j_r = np.vstack([rot_t, -rot_t])
    j_th = np.vstack([-jth, jth])
    return res, j_p, j_r, j_th


def foot_placement(p_foot, terrain, region=None, in_contact=True):
    """Stance-foot terrain-height equality plus optional region half-planes.

    Returns (eq_res, eq_jac, ineq_res, ineq_jac) with Jacobians w.r.t. the
    foot position; swing feet produce empty residuals.
    """
    p_foot = np.asarray(p_foot, dtype=float).reshape(3)
    if not in_contact:
        return (np.zeros(0), np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3)))
    c, sx, sy = terrain.plane_at(p_foot[0], p_foot[1])
    eq = np.array([p_foot[2] - (c + sx * p_foot[0] + sy * p_foot[1])])
    eq_jac = np.array([[-sx, -sy, 1.0]])
    if region is None:
        return eq, eq_jac, np.zeros(0), np.zeros((0, 3))
    ineq = region.halfplanes_a @ p_foot[:2] - region.halfplanes_b
    ineq_jac = np.hstack([region.halfplanes_a, np.zeros((region.halfplanes_b.size, 1))])
    return eq, eq_jac, ineq, ineq_jac


def cbf_obstacle(p_k, p_k1, obstacle, gamma, r_body):
    """Discrete-time CBF decrease condition for one obstacle.

    ``h(p) = |p_xy - c|^2 - (radius + r_body)^2``; the residual
    ``(1-gamma) h(p_k) - h(p_k1) <= 0`` forbids approaching the boundary
    faster than the allowed decay.

    Returns (res(1,), J_pk(1,2), J_pk1(1,2)).
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    p_k = np.asarray(p_k, dtype=float).reshape(-1)[:2]
    p_k1 = np.asarray(p_k1, dtype=float).reshape(-1)[:2]
    rad = obstacle.radius + r_body
    res = ops.cbf_pair_residual(p_k, p_k1, obstacle.center[0], obstacle.center[1], rad, gamma)
    j_k = (1.0 - gamma) * 2.0 * (p_k - obstacle.center).reshape(1, 2)
    j_k1 = -2.0 * (p_k1 - obstacle.center).reshape(1, 2)
    return np.array([res]), j_k, j_k1


def arm_kinematics(pose_self, pose_other_fixed, handle_offset, nominal_arm_offset, p_h_max, side):
    """Box on the grasp point expressed in the robot frame, from either side.

    ``side="robot"``: the robot pose is live, the payload pose fixed; the
    Jacobian is w.r.t. ``(r_i, theta_i)``. ``side="payload"``: the payload
    pose is live with the robot pose fixed; the Jacobian is w.r.t.
    ``(r_0, theta_0)``.

    Returns (res(6,), J_pos(6,3), J_theta(6,3)).
    """
    r_self = np.asarray(pose_self[0], dtype=float).reshape(3)
    th_self = np.asarray(pose_self[1], dtype=float).reshape(3)
    r_other = np.asarray(pose_other_fixed[0], dtype=float).reshape(3)
    th_other = np.asarray(pose_other_fixed[1], dtype=float).reshape(3)
    handle_offset = np.asarray(handle_offset, dtype=float).reshape(3)
    nominal = np.asarray(nominal_arm_offset, dtype=float).reshape(3)
    p_h_max = np.asarray(p_h_max, dtype=float).reshape(3)

    if side == "robot":
        p_hand = r_other + rotmat(th_other) @ handle_offset
        y, rot_t, jth = ops.rotated_box(th_self, p_hand - r_self, nominal)
        res = np.concatenate([-y - p_h_max, y - p_h_max])
        j_r = np.vstack([rot_t, -rot_t])
        j_t = np.vstack([-jth, jth])
        return res, j_r, j_t
    if side == "payload":
        rot_robot_t = rotmat(th_other).T  # robot frame, held fixed
        hand, hand_jac = rotated_offset_jac(th_self, handle_offset)
        p_hand = r_self + hand
        y = rot_robot_t @ (p_hand - r_other) - nominal
        res = np.concatenate([-y - p_h_max, y - p_h_max])
        dy_dr0 = rot_robot_t
        dy_dth0 = rot_robot_t @ hand_jac
        j_r = np.vstack([-dy_dr0, dy_dr0])
        j_t = np.vstack([-dy_dth0, dy_dth0])
        return res, j_r, j_t
    raise ValueError("side must be 'robot' or 'payload'")


def formation(r_i, payload_pose_fixed, nominal_offset, bound):
    """Keep the robot base near its nominal payload-frame offset.

    Returns (res(6,), J_r(6,3)) w.r.t. the robot position.
    """
    r_i = np.asarray(r_i, dtype=float).reshape(3)
    r0 = np.asarray(payload_pose_fixed[0], dtype=float).reshape(3)
    th0 = np.asarray(payload_pose_fixed[1], dtype=float).reshape(3)
    nominal = np.asarray(nominal_offset, dtype=float).reshape(3)
    bound = np.broadcast_to(np.asarray(bound, dtype=float), (3,)).astype(float)
    rot_t = rotmat(th0).T
    y = rot_t @ (r_i - r0) - nominal
    res = np.concatenate([-y - bound, y - bound])
    j_r = np.vstack([-rot_t, rot_t])
    return res, j_r


def relaxed_log_barrier(z, delta, mu_b):
    """Relaxed log barrier: value and first/second derivatives at ``z``.

    Accepts scalars or arrays (elementwise).
    """
    if delta <= 0 or mu_b <= 0:
        raise ValueError("delta and mu_b must be positive")
    z_arr = np.asarray(z, dtype=float)
    if z_arr.ndim == 0:
        return ops.relaxed_log_barrier(float(z_arr), delta, mu_b)
    vals = np.empty(z_arr.shape)
    d1 = np.empty(z_arr.shape)
    d2 = np.empty(z_arr.shape)
    flat_v, flat_1, flat_2 = vals.reshape(-1), d1.reshape(-1), d2.reshape(-1)
    for i, zi in enumerate(z_arr.reshape(-1)):
        flat_v[i], flat_1[i], flat_2[i] = ops.relaxed_log_barrier(float(zi), delta, mu_b)
    return vals, d1, d2


def grasp_normal(theta0):
    """Payload-frame z-axis rotated into the world: the grasp normal."""
    return rotmat(np.asarray(theta0, dtype=float).reshape(3))[:, 2].copy()
