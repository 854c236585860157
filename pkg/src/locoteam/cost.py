"""Tracking costs, consensus penalties, and stage quadraticization.

Stage cost is ``(x - x_ref)^T Q (x - x_ref) + u^T R u`` with diagonal Q, R;
the terminal step drops the control term and scales Q. Coupling between the
wrench copies and the robot wrenches enters through the scaled
augmented-Lagrangian penalty ``(rho/2) |A_i u_i + B_i u_0 + w_i|^2``.
"""

from dataclasses import dataclass, field

import numpy as np

from .kernels.constraintops import relaxed_log_barrier as _barrier

DEFAULT_RHO = 10.0
DEFAULT_MU_B = 1e-2
DEFAULT_DELTA_B = 1e-3
DEFAULT_EQ_WEIGHT = 1e4


def _payload_q_default():
    return np.array([400.0] * 3 + [10.0] * 3 + [200.0] * 3 + [1.0] * 3)


def _robot_q_default():
    return np.concatenate([_payload_q_default(), np.full(12, 20.0)])


def _robot_r_default():
    return np.array([1e-3] * 12 + [1.0] * 12 + [1e-3] * 6)


def _payload_r_default():
    return np.full(6, 1e-3)


@dataclass(frozen=True)
class CostWeights:
    """Diagonal tracking/regularization weights for both subsystem kinds."""

    payload_q: np.ndarray = field(default_factory=_payload_q_default)
    robot_q: np.ndarray = field(default_factory=_robot_q_default)
    robot_r: np.ndarray = field(default_factory=_robot_r_default)
    payload_r_per_wrench: np.ndarray = field(default_factory=_payload_r_default)
    terminal_scale: float = 10.0

    def __post_init__(self):
        for name in ("payload_q", "robot_q", "robot_r", "payload_r_per_wrench"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            object.__setattr__(self, name, arr)
            if np.any(arr < 0):
                raise ValueError(f"{name} entries must be non-negative")

    def payload_r(self, n_robots):
        return np.tile(self.payload_r_per_wrench, n_robots)


@dataclass(frozen=True)
class ConsensusPenalty:
    """Scaled AL penalty data for one robot's wrench consensus constraint."""

    rho: float
    robot_index: int  # 0-based
    n_robots: int
    n_feet: int = 4

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def a_matrix(self):
        """Selection of (f_h, tau_h) from the robot control, with + sign."""
        n_u = 6 * self.n_feet + 6
        a = np.zeros((6, n_u))
        a[:, 6 * self.n_feet :] = np.eye(6)
        return a

    def b_matrix(self):
        """Selection of this robot's wrench copy from the payload control."""
        b = np.zeros((6, 6 * self.n_robots))
        b[:, 6 * self.robot_index : 6 * self.robot_index + 6] = np.eye(6)
        return b

    def residual(self, u_robot, u_payload):
        return self.a_matrix() @ u_robot + self.b_matrix() @ u_payload


def stage_cost(x, u, x_ref, q_diag, r_diag=None):
    """Quadratic tracking plus control regularization; pass ``u=None`` at the
    terminal step to omit the control term."""
    x = np.asarray(x, dtype=float).reshape(-1)
    x_ref = np.asarray(x_ref, dtype=float).reshape(-1)
    q_diag = np.asarray(q_diag, dtype=float).reshape(-1)
    dx = x - x_ref
    val = float(dx @ (q_diag * dx))
    if u is not None and r_diag is not None:
        u = np.asarray(u, dtype=float).reshape(-1)
        r_diag = np.asarray(r_diag, dtype=float).reshape(-1)
        val += float(u @ (r_diag * u))
    return val


def consensus_penalty(own_wrench, counterpart_wrench_fixed, w, rho):
    """Scaled AL consensus term summed over the horizon.

    Args:
        own_wrench: (N, 6) or (N, 6R) wrench entries of the side being solved
            (robot: its ``(f_h, tau_h)``; payload: the full copy vector).
        counterpart_wrench_fixed: matching fixed values from the other side.
        w: scaled duals with the same shape.
        rho: penalty parameter.
    """
    own = np.atleast_2d(np.asarray(own_wrench, dtype=float))
    other = np.atleast_2d(np.asarray(counterpart_wrench_fixed, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    resid = own + other + w
    return float(0.5 * rho * np.sum(resid * resid))


def quadraticize_stage(
    x,
    u,
    x_ref,
    q_diag,
    r_diag,
    consensus=None,
    barriers=(),
    eq_terms=(),
    eq_weight=DEFAULT_EQ_WEIGHT,
):
    """Gradient and Gauss-Newton Hessian blocks of the full local stage cost.

    Args:
        consensus: optional ``(sel_start, c, rho)``: penalty
            ``(rho/2) |u[sel:sel+len(c)] + c|^2``.
        barriers: iterable of ``(z, jx, ju, mu_b, delta)`` scalar inequality
            entries entering as ``beta(z(x, u))``.
        eq_terms: iterable of ``(g, jx, ju)`` scalar equality residuals
            entering as ``eq_weight * g^2``.

    Returns:
        (gx, gu, hxx, hxu, huu); Hessian blocks are symmetric.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    x_ref = np.asarray(x_ref, dtype=float).reshape(-1)
    q_diag = np.asarray(q_diag, dtype=float).reshape(-1)
    r_diag = np.asarray(r_diag, dtype=float).reshape(-1)
    nx, nu = x.size, u.size

    gx = 2.0 * q_diag * (x - x_ref)
    gu = 2.0 * r_diag * u
    hxx = np.diag(2.0 * q_diag)
    huu = np.diag(2.0 * r_diag)
    hxu = np.zeros((nx, nu))

    if consensus is not None:
        sel, c, rho = consensus
        c = np.asarray(c, dtype=float).reshape(-1)
        resid = u[sel : sel + c.size] + c
        gu[sel : sel + c.size] += rho * resid
        huu[sel : sel + c.size, sel : sel + c.size] += rho * np.eye(c.size)

    for z, jx, ju, mu_b, delta in barriers:
        jx = np.zeros(nx) if jx is None else np.asarray(jx, dtype=float).reshape(nx)
        ju = np.zeros(nu) if ju is None else np.asarray(ju, dtype=float).reshape(nu)
        _, d1, d2 = _barrier(float(z), delta, mu_b)
        gx += d1 * jx
        gu += d1 * ju
        hxx += d2 * np.outer(jx, jx)
        huu += d2 * np.outer(ju, ju)
        hxu += d2 * np.outer(jx, ju)

    for g, jx, ju in eq_terms:
        jx = np.zeros(nx) if jx is None else np.asarray(jx, dtype=float).reshape(nx)
        ju = np.zeros(nu) if ju is None else np.asarray(ju, dtype=float).reshape(nu)
        gx += 2.0 * eq_weight * g * jx
        gu += 2.0 * eq_weight * g * ju
        hxx += 2.0 * eq_weight * np.outer(jx, jx)
        huu += 2.0 * eq_weight * np.outer(ju, ju)
        hxu += 2.0 * eq_weight * np.outer(jx, ju)

    return gx, gu, hxx, hxu, huu
