"""Rigid-body types, payload/robot dynamics, and implicit-step utilities.

Every body is a single rigid body with state ``[r, r_dot, theta, l]``:
world position, linear velocity, ZYX Euler angles ``(yaw, pitch, roll)``,
and world-frame angular momentum. Robots append ``n_f`` stacked foot
positions. Angular kinematics close through ``omega = I_w(theta)^-1 l`` and
``theta_dot = T(theta) omega``.

All functions are pure; the heavy lifting lives in :mod:`locoteam.kernels`.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError, LinearizationError, SingularityError
from .kernels import dynamics as _dyn
from .kernels import rotation as _rot

PITCH_LIMIT = _rot.PITCH_GUARD
DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


def _vec(value, n, name):
    out = np.asarray(value, dtype=float).reshape(-1)
    if out.size != n:
        raise ValueError(f"{name} must have {n} entries, got {out.size}")
    return out


@dataclass(frozen=True)
class RigidBodyState:
    """Position, linear velocity, Euler angles, and angular momentum of one body."""

    r: np.ndarray
    r_dot: np.ndarray
    theta: np.ndarray
    l: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", _vec(self.r, 3, "r"))
        object.__setattr__(self, "r_dot", _vec(self.r_dot, 3, "r_dot"))
        object.__setattr__(self, "theta", _vec(self.theta, 3, "theta"))
        object.__setattr__(self, "l", _vec(self.l, 3, "l"))
        vec = self.as_vector()
        if not np.all(np.isfinite(vec)):
            raise ValueError("rigid body state must be finite")
        if abs(self.theta[1]) >= np.pi / 2:
            raise ValueError("pitch must stay strictly inside (-pi/2, pi/2)")

    def as_vector(self):
        return np.concatenate([self.r, self.r_dot, self.theta, self.l])

    @classmethod
    def from_vector(cls, x):
        x = _vec(x, 12, "state vector")
        return cls(x[0:3], x[3:6], x[6:9], x[9:12])


@dataclass(frozen=True)
class RobotState:
    """Robot base state plus ``n_f`` stacked foot positions."""

    body: RigidBodyState
    p_feet: np.ndarray

    def __post_init__(self):
        feet = np.asarray(self.p_feet, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(feet)):
            raise ValueError("foot positions must be finite")
        object.__setattr__(self, "p_feet", feet)

    @property
    def n_feet(self):
        return self.p_feet.shape[0]

    def as_vector(self):
        return np.concatenate([self.body.as_vector(), self.p_feet.reshape(-1)])

    @classmethod
    def from_vector(cls, x, n_feet=4):
        x = _vec(x, 12 + 3 * n_feet, "robot state vector")
        return cls(RigidBodyState.from_vector(x[:12]), x[12:].reshape(n_feet, 3))


@dataclass(frozen=True)
class RobotControl:
    """Foot forces, foot velocities, and the manipulation wrench of one robot."""

    f_feet: np.ndarray
    p_dot_feet: np.ndarray
    f_h: np.ndarray
    tau_h: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "f_feet", np.asarray(self.f_feet, dtype=float).reshape(-1, 3)
        )
        object.__setattr__(
            self, "p_dot_feet", np.asarray(self.p_dot_feet, dtype=float).reshape(-1, 3)
        )
        object.__setattr__(self, "f_h", _vec(self.f_h, 3, "f_h"))
        object.__setattr__(self, "tau_h", _vec(self.tau_h, 3, "tau_h"))
        if self.f_feet.shape != self.p_dot_feet.shape:
            raise ValueError("f_feet and p_dot_feet must have matching shapes")
        if not np.all(np.isfinite(self.as_vector())):
            raise ValueError("robot control must be finite")

    def as_vector(self):
        return np.concatenate(
            [
                self.f_feet.reshape(-1),
                self.p_dot_feet.reshape(-1),
                self.f_h,
                self.tau_h,
            ]
        )

    @classmethod
    def from_vector(cls, u, n_feet=4):
        u = _vec(u, 6 * n_feet + 6, "robot control vector")
        nf3 = 3 * n_feet
        return cls(u[:nf3], u[nf3 : 2 * nf3], u[2 * nf3 : 2 * nf3 + 3], u[2 * nf3 + 3 :])


@dataclass(frozen=True)
class PayloadControl:
    """Payload-side copies of every robot's manipulation wrench."""

    f_bar: np.ndarray
    tau_bar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f_bar", np.asarray(self.f_bar, dtype=float).reshape(-1, 3))
        object.__setattr__(
            self, "tau_bar", np.asarray(self.tau_bar, dtype=float).reshape(-1, 3)
        )
        if self.f_bar.shape != self.tau_bar.shape:
            raise ValueError("f_bar and tau_bar must have matching shapes")
        if not np.all(np.isfinite(self.as_vector())):
            raise ValueError("payload control must be finite")

    @property
    def n_robots(self):
        return self.f_bar.shape[0]

    def as_vector(self):
        out = np.empty(6 * self.n_robots)
        for i in range(self.n_robots):
            out[6 * i : 6 * i + 3] = self.f_bar[i]
            out[6 * i + 3 : 6 * i + 6] = self.tau_bar[i]
        return out

    @classmethod
    def from_vector(cls, u):
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.size % 6 != 0:
            raise ValueError("payload control vector length must be a multiple of 6")
        w = u.reshape(-1, 6)
        return cls(w[:, :3], w[:, 3:])


@dataclass(frozen=True)
class BodyParams:
    """Mass, body-frame inertia, gravity, and (payload only) handle offsets."""

    mass: float
    inertia_body: np.ndarray
    handle_offsets: np.ndarray | None = None
    gravity: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_GRAVITY))

    def __post_init__(self):
        inertia = np.asarray(self.inertia_body, dtype=float).reshape(3, 3)
        object.__setattr__(self, "inertia_body", inertia)
        object.__setattr__(self, "gravity", _vec(self.gravity, 3, "gravity"))
        if self.handle_offsets is not None:
            object.__setattr__(
                self,
                "handle_offsets",
                np.asarray(self.handle_offsets, dtype=float).reshape(-1, 3),
            )
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ValueError("inertia_body must be symmetric")
        if np.linalg.eigvalsh(inertia).min() <= 0:
            raise ValueError("inertia_body must be positive definite")


def _as_array(value, kind):
    if isinstance(value, (RigidBodyState, RobotState, RobotControl, PayloadControl)):
        return value.as_vector()
    return np.asarray(value, dtype=float).reshape(-1)


def _check_pitch(theta):
    if abs(theta[1]) >= PITCH_LIMIT:
        raise SingularityError(
            f"pitch {theta[1]:.9f} rad is within 1e-6 of gimbal lock"
        )


def euler_rate_map(theta):
    """3x3 map from world angular velocity to (yaw, pitch, roll) rates.

    Raises:
        SingularityError: if |pitch| is within 1e-6 rad of pi/2.
    """
    theta = _vec(theta, 3, "theta")
    _check_pitch(theta)
    return _rot.euler_rate_matrix(theta)


def rotation_matrix(theta):
    """World rotation matrix for ZYX Euler angles (yaw, pitch, roll)."""
    return _rot.rotmat(_vec(theta, 3, "theta"))


def world_inertia(theta, inertia_body):
    """World-frame inertia ``R(theta) I_b R(theta)^T``."""
    theta = _vec(theta, 3, "theta")
    inertia_body = np.asarray(inertia_body, dtype=float).reshape(3, 3)
    return _rot.world_inertia(theta, inertia_body)


def arm_ee_position(r0, theta0, handle_offset):
    """World grasp point: payload position plus the rotated handle offset."""
    r0 = _vec(r0, 3, "r0")
    theta0 = _vec(theta0, 3, "theta0")
    handle_offset = _vec(handle_offset, 3, "handle_offset")
    return r0 + _rot.rotmat(theta0) @ handle_offset


def payload_dynamics(state, control, params):
    """Payload state derivative under the robots' wrench copies.

    Args:
        state: RigidBodyState or 12-vector.
        control: PayloadControl or 6R-vector of wrench copies.
        params: payload BodyParams (must carry handle_offsets).

    Returns:
        12-vector state derivative.
    """
    x = _as_array(state, "state")
    u = _as_array(control, "control")
    if params.handle_offsets is None:
        raise ValueError("payload params must define handle_offsets")
    if u.size != 6 * params.handle_offsets.shape[0]:
        raise ValueError("control size does not match the number of handles")
    _check_pitch(x[6:9])
    return _dyn.payload_xdot(
        x, u, params.handle_offsets, params.mass, params.inertia_body, params.gravity
    )


def robot_dynamics(state, control, payload_pose, params, handle_offset=None):
    """Robot state derivative with the grasp point held at a fixed payload pose.

    Args:
        state: RobotState or (12 + 3 n_f)-vector.
        control: RobotControl or (6 n_f + 6)-vector.
        payload_pose: either a world grasp point (3-vector) or a tuple
            ``(r0, theta0)``; with the tuple form ``handle_offset`` locates
            the grasp point on the payload.
        params: robot BodyParams.
    """
    x = _as_array(state, "state")
    u = _as_array(control, "control")
    if isinstance(payload_pose, tuple):
        r0, theta0 = payload_pose
        if handle_offset is None:
            raise ValueError("handle_offset required with a (r0, theta0) pose")
        p_hand = arm_ee_position(r0, theta0, handle_offset)
    else:
        p_hand = _vec(payload_pose, 3, "payload_pose")
    _check_pitch(x[6:9])
    return _dyn.robot_xdot(x, u, p_hand, params.mass, params.inertia_body, params.gravity)


def _fd_jacobians(dynamics, x, u, h=1e-6):
    n, m = x.size, u.size
    fx = np.empty((n, n))
    fu = np.empty((n, m))
    for i in range(n):
        dx = np.zeros(n)
        dx[i] = h
        fx[:, i] = (
            np.asarray(dynamics(x + dx, u)) - np.asarray(dynamics(x - dx, u))
        ) / (2 * h)
    for i in range(m):
        du = np.zeros(m)
        du[i] = h
        fu[:, i] = (
            np.asarray(dynamics(x, u + du)) - np.asarray(dynamics(x, u - du))
        ) / (2 * h)
    return fx, fu


def step_backward_euler(dynamics, x, u, dt, jac=None, tol=1e-10, max_iter=50):
    """Implicit backward-Euler step ``x' = x + dt f(x', u)``.

    Solved with a damped Newton iteration; ``jac(x, u) -> (fx, fu)`` supplies
    analytic derivatives, otherwise finite differences are used.

    Raises:
        IntegrationError: if the residual norm cannot be driven below ``tol``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    eye = np.eye(x.size)

    def residual(xn):
        return xn - x - dt * np.asarray(dynamics(xn, u)).reshape(-1)

    xn = x + dt * np.asarray(dynamics(x, u)).reshape(-1)
    res = residual(xn)
    rn = float(np.linalg.norm(res))
    for _ in range(max_iter):
        if rn <= tol:
            return xn
        if jac is not None:
            fx = np.asarray(jac(xn, u)[0])
        else:
            fx = _fd_jacobians(dynamics, xn, u)[0]
        try:
            step = np.linalg.solve(eye - dt * fx, -res)
        except np.linalg.LinAlgError as exc:
            raise IntegrationError(
                f"implicit step linear solve failed: {exc}", residual=rn
            ) from exc
        alpha = 1.0
        accepted = False
        for _ in range(8):
            cand = xn + alpha * step
            cres = residual(cand)
            crn = float(np.linalg.norm(cres))
            if np.isfinite(crn) and crn < rn:
                xn, res, rn = cand, cres, crn
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
    if rn <= tol:
        return xn
    raise IntegrationError(
        f"backward Euler did not converge (residual {rn:.3e} > {tol:.1e})",
        residual=rn,
    )


def linearize_step(dynamics, x, u, dt, jac=None):
    """Jacobians of the implicit step via the implicit function theorem.

    Returns ``(A, B)`` with ``A = (I - dt fx)^-1`` and ``B = A dt fu``
    evaluated at the converged endpoint of :func:`step_backward_euler`.

    Raises:
        LinearizationError: if ``I - dt fx`` is singular.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    x_next = step_backward_euler(dynamics, x, u, dt, jac=jac)
    if jac is not None:
        fx, fu = jac(x_next, u)
    else:
        fx, fu = _fd_jacobians(dynamics, x_next, u)
    m = np.eye(x.size) - dt * np.asarray(fx)
    try:
        a_mat = np.linalg.solve(m, np.eye(x.size))
        b_mat = np.linalg.solve(m, dt * np.asarray(fu))
    except np.linalg.LinAlgError as exc:
        raise LinearizationError(f"I - dt*fx is singular: {exc}") from exc
    return a_mat, b_mat


def payload_step(state, control, params, dt):
    """Backward-Euler step of the payload using the analytic kernels."""
    x = _as_array(state, "state")
    u = _as_array(control, "control")
    xn, resid, status = _dyn.payload_step(
        x, u, dt, params.handle_offsets, params.mass, params.inertia_body, params.gravity
    )
    _raise_step_status(status, resid)
    return xn


def robot_step(state, control, p_hand, params, dt):
    """Backward-Euler step of one robot using the analytic kernels."""
    x = _as_array(state, "state")
    u = _as_array(control, "control")
    xn, resid, status = _dyn.robot_step(
        x, u, _vec(p_hand, 3, "p_hand"), dt, params.mass, params.inertia_body, params.gravity
    )
    _raise_step_status(status, resid)
    return xn


def _raise_step_status(status, resid):
    if status == 1:
        raise SingularityError("state reached the gimbal-lock guard during the step")
    if status == 2:
        raise IntegrationError(
            f"implicit step did not converge (residual {resid:.3e})", residual=resid
        )
