"""Riccati-based SQP for a single subsystem optimal control problem.

The solver iterates: linearize the implicit dynamics along the iterate,
quadraticize the augmented-Lagrangian stage cost (barriers plus quadratic
equality penalties), run the LQR backward pass, and roll the nonlinear
dynamics forward under a backtracking line search. Iterates stay dynamically
feasible because candidates are produced by rollouts, so the merit function
is exactly the penalized objective the quadratic model approximates.

Problem objects supply array-level hooks (see :mod:`locoteam.subproblems`);
:class:`LinearQuadraticProblem` is the reference implementation used to
validate the solver against dense QP oracles.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .cost import DEFAULT_EQ_WEIGHT
from .errors import SolverError
from .kernels.riccati import REG_CAP, REG_INIT, backward_pass

DEFAULT_ALPHAS = tuple(0.5**i for i in range(11))
ARMIJO_C = 1e-4


@dataclass
class SolveReport:
    """Outcome of one subproblem solve."""

    x_traj: np.ndarray
    u_traj: np.ndarray
    iterations: int
    merit: float
    cost: float
    eq_linf: float
    max_defect: float
    step_sizes: list = field(default_factory=list)
    step_norm: float = 0.0
    wall_time: float = 0.0
    reg_max: float = 0.0


def regularize_hessian(h, reg_init=REG_INIT, reg_cap=REG_CAP):
    """Smallest identity shift (0 or reg_init*10^k) making ``h`` factorizable.

    Raises:
        SolverError: if the required shift exceeds ``reg_cap``.
    """
    h = np.asarray(h, dtype=float)
    if not np.allclose(h, h.T, atol=1e-12):
        raise ValueError("hessian must be symmetric")
    min_eig = float(np.linalg.eigvalsh(h).min())
    if min_eig > 0.0:
        return h.copy()
    lam = reg_init
    while lam <= reg_cap:
        if min_eig + lam > 0.0:
            return h + lam * np.eye(h.shape[0])
        lam *= 10.0
    raise SolverError(f"hessian regularization exceeded cap {reg_cap:g}")


def riccati_backward_pass(a_seq, b_seq, quad):
    """Feedback gains, feedforward steps, and expected decrease for an LQ model.

    ``quad`` is ``(gx, gu, hxx, hxu, huu, g_term, h_term)``.

    Raises:
        SolverError: if per-stage regularization exceeds the cap.
    """
    gx, gu, hxx, hxu, huu, g_term, h_term = quad
    gains, kff, dv1, dv2, max_reg, status = backward_pass(
        np.ascontiguousarray(a_seq),
        np.ascontiguousarray(b_seq),
        np.ascontiguousarray(gx),
        np.ascontiguousarray(gu),
        np.ascontiguousarray(hxx),
        np.ascontiguousarray(hxu),
        np.ascontiguousarray(huu),
        np.ascontiguousarray(g_term),
        np.ascontiguousarray(h_term),
        REG_INIT,
        REG_CAP,
    )
    if status != 0:
        raise SolverError(f"backward-pass regularization exceeded cap {REG_CAP:g}")
    return gains, kff, dv1, dv2, max_reg


def forward_rollout(problem, x_prev, u_prev, gains, kff, alpha):
    """Closed-loop rollout ``u = u_prev + alpha k + K (x - x_prev)``.

    With ``alpha == 0`` and zero gains this re-integrates the previous
    controls, producing a defect-free copy of the trajectory.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return problem.rollout(x_prev, u_prev, gains, kff, alpha)


def _merit(problem, x_traj, u_traj):
    # merit is the exact objective of the quadratic model: stage cost plus the
    # quadratic equality penalty (dynamics feasibility is kept by the rollout)
    cost, _, eq_linf, eq_sq = problem.cost_parts(x_traj, u_traj)
    w_eq = getattr(problem, "eq_weight", DEFAULT_EQ_WEIGHT)
    return cost + w_eq * eq_sq, cost, eq_linf


def solve_subproblem(problem, x_init, u_init, max_sqp_iters=1, alphas=DEFAULT_ALPHAS):
    """Run up to ``max_sqp_iters`` SQP iterations from the given guess.

    The initial guess is re-integrated open loop to remove dynamics defects;
    the first state of ``x_init`` must match the problem's initial state.

    Raises:
        SolverError: on a non-finite initial cost or backward-pass failure.
    """
    t_start = time.perf_counter()
    x_init = np.asarray(x_init, dtype=float)
    u_init = np.asarray(u_init, dtype=float)
    if not np.allclose(x_init[0], problem.x0, atol=1e-9):
        raise SolverError("initial guess does not start at the problem's state")
    n_steps, nu, nx = u_init.shape[0], problem.nu, problem.nx
    zero_gains = np.zeros((n_steps, nu, nx))
    zero_kff = np.zeros((n_steps, nu))

    x_cur, u_cur, defect, status = problem.rollout(x_init, u_init, zero_gains, zero_kff, 0.0)
    if status != 0:
        raise SolverError("initial guess could not be integrated")
    merit, cost, eq_linf = _merit(problem, x_cur, u_cur)
    if not np.isfinite(merit):
        raise SolverError("non-finite cost at the initial guess")

    step_sizes = []
    step_norm = 0.0
    reg_max = 0.0
    iterations = 0
    for _ in range(max_sqp_iters):
        a_seq, b_seq = problem.linearize(x_cur, u_cur)
        quad = problem.quadraticize(x_cur, u_cur, a_seq, b_seq)
        gains, kff, dv1, dv2, it_reg = riccati_backward_pass(a_seq, b_seq, quad)
        reg_max = max(reg_max, it_reg)
        iterations += 1
        step_norm = float(np.abs(kff).max()) if kff.size else 0.0
        if step_norm <= 1e-12:
            step_sizes.append(0.0)
            break

        accepted = None
        best = None
        for alpha in alphas:
            x_cand, u_cand, defect_c, status_c = problem.rollout(
                x_cur, u_cur, gains, kff, alpha
            )
            if status_c != 0:
                continue
            merit_c, cost_c, eq_c = _merit(problem, x_cand, u_cand)
            if not np.isfinite(merit_c):
                continue
            cand = (alpha, x_cand, u_cand, merit_c, cost_c, eq_c, defect_c)
            if merit_c <= merit + ARMIJO_C * alpha * dv1:
                accepted = cand
                break
            if merit_c < merit and (best is None or merit_c < best[3]):
                best = cand
        if accepted is None:
            accepted = best
        if accepted is None:
            step_sizes.append(0.0)
            break
        alpha, x_cur, u_cur, merit, cost, eq_linf, defect = accepted
        step_sizes.append(alpha)

    return SolveReport(
        x_traj=x_cur,
        u_traj=u_cur,
        iterations=iterations,
        merit=float(merit),
        cost=float(cost),
        eq_linf=float(eq_linf),
        max_defect=float(defect),
        step_sizes=step_sizes,
        step_norm=step_norm,
        wall_time=time.perf_counter() - t_start,
        reg_max=float(reg_max),
    )


class LinearQuadraticProblem:
    """Affine dynamics with quadratic cost; the solver's reference problem.

    Dynamics ``x+ = A x + B u + c``; stage cost
    ``x^T Q x + q^T x + u^T R u + r^T u`` and terminal
    ``x^T Qf x + qf^T x`` (matching the package's no-half convention).
    """

    def __init__(self, x0, a_mat, b_mat, c_vec, q_mat, q_vec, r_mat, r_vec, qf_mat, qf_vec, n_steps):
        self.x0 = np.asarray(x0, dtype=float)
        self.a_mat = np.asarray(a_mat, dtype=float)
        self.b_mat = np.asarray(b_mat, dtype=float)
        self.c_vec = np.asarray(c_vec, dtype=float)
        self.q_mat = np.asarray(q_mat, dtype=float)
        self.q_vec = np.asarray(q_vec, dtype=float)
        self.qf_mat = np.asarray(qf_mat, dtype=float)
        self.qf_vec = np.asarray(qf_vec, dtype=float)
        self.n_steps = n_steps
        self.nx = self.x0.size
        self.nu = self.b_mat.shape[1]
        self.r_mat = np.asarray(r_mat, dtype=float)
        r_vec = np.asarray(r_vec, dtype=float)
        # the linear control cost may vary per step: broadcast (nu,) -> (N, nu)
        if r_vec.ndim == 1:
            r_vec = np.broadcast_to(r_vec, (n_steps, self.nu)).copy()
        self.r_vec = r_vec
        self.eq_weight = DEFAULT_EQ_WEIGHT

    def step(self, x, u):
        return self.a_mat @ x + self.b_mat @ u + self.c_vec

    def rollout(self, x_prev, u_prev, gains, kff, alpha):
        n = u_prev.shape[0]
        x_traj = np.empty((n + 1, self.nx))
        u_traj = np.empty((n, self.nu))
        x_traj[0] = self.x0
        for k in range(n):
            u = u_prev[k] + alpha * kff[k] + gains[k] @ (x_traj[k] - x_prev[k])
            u_traj[k] = u
            x_traj[k + 1] = self.step(x_traj[k], u)
        return x_traj, u_traj, 0.0, 0

    def linearize(self, x_traj, u_traj):
        n = u_traj.shape[0]
        return (
            np.broadcast_to(self.a_mat, (n, self.nx, self.nx)).copy(),
            np.broadcast_to(self.b_mat, (n, self.nx, self.nu)).copy(),
        )

    def quadraticize(self, x_traj, u_traj, a_seq, b_seq):
        n = u_traj.shape[0]
        gx = np.empty((n, self.nx))
        gu = np.empty((n, self.nu))
        for k in range(n):
            gx[k] = 2.0 * self.q_mat @ x_traj[k] + self.q_vec
            gu[k] = 2.0 * self.r_mat @ u_traj[k] + self.r_vec[k]
        hxx = np.broadcast_to(2.0 * self.q_mat, (n, self.nx, self.nx)).copy()
        huu = np.broadcast_to(2.0 * self.r_mat, (n, self.nu, self.nu)).copy()
        hxu = np.zeros((n, self.nx, self.nu))
        g_term = 2.0 * self.qf_mat @ x_traj[n] + self.qf_vec
        h_term = 2.0 * self.qf_mat
        return gx, gu, hxx, hxu, huu, g_term, h_term

    def cost_parts(self, x_traj, u_traj):
        n = u_traj.shape[0]
        cost = 0.0
        for k in range(n):
            x, u = x_traj[k], u_traj[k]
            cost += x @ self.q_mat @ x + self.q_vec @ x
            cost += u @ self.r_mat @ u + self.r_vec[k] @ u
        x = x_traj[n]
        cost += x @ self.qf_mat @ x + self.qf_vec @ x
        return float(cost), 0.0, 0.0, 0.0

    def dense_solution(self):
        """Condensed dense QP solution over the stacked controls (oracle)."""
        n, nx, nu = self.n_steps, self.nx, self.nu
        # x_k = phi_k + sum_j G[k][j] u_j  (affine in the stacked controls)
        phi = [self.x0]
        for _ in range(n):
            phi.append(self.a_mat @ phi[-1] + self.c_vec)
        gmap = np.zeros((n + 1, n, nx, nu))
        for k in range(1, n + 1):
            for j in range(k):
                block = self.b_mat
                for _ in range(k - 1 - j):
                    block = self.a_mat @ block
                gmap[k, j] = block
        dim = n * nu
        hess = np.zeros((dim, dim))
        grad = np.zeros(dim)
        for k in range(n + 1):
            q_mat = self.q_mat if k < n else self.qf_mat
            q_vec = self.q_vec if k < n else self.qf_vec
            for j in range(min(k, n)):
                grad[j * nu : (j + 1) * nu] += gmap[k, j].T @ (2.0 * q_mat @ phi[k] + q_vec)
                for l in range(min(k, n)):
                    hess[j * nu : (j + 1) * nu, l * nu : (l + 1) * nu] += (
                        2.0 * gmap[k, j].T @ q_mat @ gmap[k, l]
                    )
        for k in range(n):
            hess[k * nu : (k + 1) * nu, k * nu : (k + 1) * nu] += 2.0 * self.r_mat
            grad[k * nu : (k + 1) * nu] += self.r_vec[k]
        u_flat = np.linalg.solve(hess, -grad)
        u_opt = u_flat.reshape(n, nu)
        x_traj, u_traj, _, _ = self.rollout(
            np.zeros((n + 1, nx)), u_opt, np.zeros((n, nu, nx)), np.zeros((n, nu)), 0.0
        )
        return x_traj, u_traj
