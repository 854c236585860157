"""Consensus-ADMM coordinator over the payload and robot sub-blocks.

One iteration runs Gauss-Seidel: the payload block solves first against the
robots' latest wrenches and poses, then every robot block solves in parallel
against the fresh payload solution, and finally the scaled duals absorb the
remaining wrench mismatch. Sub-blocks exchange immutable snapshots only; the
coordinator is the single writer of :class:`AdmmState`.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import sqp
from .errors import SolverError
from .kernels.rotation import rotmat
from .subproblems import (
    PayloadProblemData,
    PayloadSubproblem,
    RobotProblemData,
    RobotSubproblem,
)

DEFAULT_EPSILON = 5e-3
DEFAULT_MAX_ADMM_ITERS = 2
DEFAULT_MAX_SQP_ITERS = 1


@dataclass
class WindowContext:
    """Everything one MPC window needs to pose its sub-block OCPs."""

    dt: float
    n_steps: int
    # bodies
    payload_mass: float
    payload_inertia: np.ndarray
    robot_masses: np.ndarray  # (R,)
    robot_inertias: np.ndarray  # (R, 3, 3)
    gravity: np.ndarray
    handles: np.ndarray  # (R, 3)
    # initial states
    x0_payload: np.ndarray  # (12,)
    x0_robots: np.ndarray  # (R, 24)
    # references
    payload_ref: np.ndarray  # (N+1, 12)
    robot_refs: np.ndarray  # (R, N+1, 24)
    # weights and solver settings
    q_payload: np.ndarray
    q_payload_term: np.ndarray
    r_payload: np.ndarray  # (6R,)
    q_robot: np.ndarray
    q_robot_term: np.ndarray
    r_robot: np.ndarray
    rho: float = 10.0
    mu_b: float = 1e-2
    delta_b: float = 1e-3
    eq_weight: float = 1e4
    # contacts and geometry
    contact: np.ndarray = None  # (N+1, 4), shared trot schedule
    foot_nominal: np.ndarray = None
    kin_half_widths: np.ndarray = None
    arm_nominal: np.ndarray = None  # (R, 3)
    p_h_max: np.ndarray = None
    formation_offsets: np.ndarray = None  # (R, 3)
    formation_bound: np.ndarray = None
    tau_lo: np.ndarray = None
    tau_hi: np.ndarray = None
    mu_ground: float = 0.7
    mu_grasp: float = 0.7
    terr_bounds: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    terr_planes: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    terr_default: np.ndarray = field(default_factory=lambda: np.zeros(3))
    region_hp: np.ndarray = field(default_factory=lambda: np.zeros((0, 1, 3)))
    region_cnt: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    region_idx: np.ndarray = None  # (R, N+1, 4)
    obstacles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    r_body_robot: float = 0.35
    r_body_payload: float = 0.5
    gamma_cbf: float = 0.1
    clearance: float = 0.3

    @property
    def n_robots(self):
        return self.handles.shape[0]

    def __post_init__(self):
        if self.contact is None:
            self.contact = np.ones((self.n_steps + 1, 4), dtype=bool)
        if self.formation_offsets is None:
            self.formation_offsets = np.zeros((self.n_robots, 3))
        if self.arm_nominal is None:
            self.arm_nominal = np.zeros((self.n_robots, 3))
        if self.region_idx is None:
            self.region_idx = np.full((self.n_robots, self.n_steps + 1, 4), -1, dtype=np.int64)


@dataclass
class SubTrajectories:
    """Primal iterates of every sub-block over one window."""

    payload_x: np.ndarray  # (N+1, 12)
    payload_u: np.ndarray  # (N, 6R)
    robot_x: np.ndarray  # (R, N+1, 24)
    robot_u: np.ndarray  # (R, N, 30)

    def copy(self):
        return SubTrajectories(
            self.payload_x.copy(),
            self.payload_u.copy(),
            self.robot_x.copy(),
            self.robot_u.copy(),
        )


@dataclass
class AdmmState:
    """Coordinator-owned iterate: primals, scaled duals, and bookkeeping."""

    trajs: SubTrajectories
    duals: np.ndarray  # (R, N, 6)
    rho: float
    iteration: int = 0
    residual_history: list = field(default_factory=list)
    payload_version: int = 0
    consumed_payload_versions: list = field(default_factory=list)
    error: str = None


@dataclass
class ConsensusResidual:
    """Stacked per-step wrench mismatches and the time-scaled criterion."""

    s: np.ndarray  # (N, 6R)
    criterion: float


@dataclass
class WindowReport:
    init_criterion: float
    criteria: list
    iterations: int
    met_tolerance: bool
    payload_solve_times: list
    robot_solve_times: list
    wall_time: float
    error: str = None


def consensus_residual(trajs, dt):
    """Newton-pair violations ``s[k] = [u_i_wrench + u0_block]`` and the
    criterion ``dt * sum_k |s[k]|_2``."""
    n_r = trajs.robot_u.shape[0]
    n = trajs.payload_u.shape[0]
    s = np.empty((n, 6 * n_r))
    for i in range(n_r):
        s[:, 6 * i : 6 * i + 6] = trajs.robot_u[i, :, 24:30] + trajs.payload_u[:, 6 * i : 6 * i + 6]
    criterion = float(dt * np.linalg.norm(s, axis=1).sum())
    return ConsensusResidual(s, criterion)


def hover_robot_controls(ctx, i):
    """Moment-balanced gravity-compensating stance controls (cold start).

    Vertical foot forces are chosen per step by least squares to supply the
    robot's weight plus its payload share while cancelling the pitch/roll
    moment of the grasp force about the base, so the open-loop replay of the
    guess stays upright.
    """
    u = np.zeros((ctx.n_steps, 30))
    share = ctx.payload_mass * abs(ctx.gravity[2]) / ctx.n_robots
    f_h = np.array([0.0, 0.0, -share])
    x0 = ctx.x0_robots[i]
    rot0 = rotmat(ctx.x0_payload[6:9])
    hand0 = ctx.x0_payload[0:3] + rot0 @ ctx.handles[i]
    total = ctx.robot_masses[i] * abs(ctx.gravity[2]) + share
    for k in range(ctx.n_steps):
        stance = np.flatnonzero(ctx.contact[k])
        u[k, 26] = f_h[2]
        if stance.size == 0:
            continue
        # balance along the guess's own coasting rollout: base and payload
        # drift at their initial velocities while stance feet stay pinned
        drift = k * ctx.dt
        r_base = x0[0:3] + drift * x0[3:6]
        p_hand = hand0 + drift * ctx.x0_payload[3:6]
        m_arm = np.cross(p_hand - r_base, f_h)
        # rows: sum fz, moment-x (y_j fz), moment-y (-x_j fz)
        a_ls = np.zeros((3, stance.size))
        for col, j in enumerate(stance):
            lever = x0[12 + 3 * j : 15 + 3 * j] - r_base
            a_ls[0, col] = 1.0
            a_ls[1, col] = lever[1]
            a_ls[2, col] = -lever[0]
        b_ls = np.array([total, -m_arm[0], -m_arm[1]])
        fz = np.linalg.lstsq(a_ls, b_ls, rcond=None)[0]
        for col, j in enumerate(stance):
            u[k, 3 * j + 2] = fz[col]
    return u


def cold_start(ctx):
    """Reference-primal, zero-dual initialization for the first window."""
    n_r = ctx.n_robots
    robot_u = np.stack([hover_robot_controls(ctx, i) for i in range(n_r)])
    payload_u = np.zeros((ctx.n_steps, 6 * n_r))
    for i in range(n_r):
        payload_u[:, 6 * i : 6 * i + 6] = -robot_u[i, :, 24:30]
    trajs = SubTrajectories(
        payload_x=ctx.payload_ref.copy(),
        payload_u=payload_u,
        robot_x=ctx.robot_refs.copy(),
        robot_u=robot_u,
    )
    trajs.payload_x[0] = ctx.x0_payload
    trajs.robot_x[:, 0] = ctx.x0_robots
    duals = np.zeros((n_r, ctx.n_steps, 6))
    return AdmmState(trajs=trajs, duals=duals, rho=ctx.rho)


def _interp_series(series, shift, dt):
    """Linear interpolation of a (T, ...) series shifted by ``shift`` seconds,
    holding the final entry beyond the old grid."""
    n = series.shape[0]
    out = np.empty_like(series)
    for k in range(n):
        t = k + shift / dt
        if t <= 0:
            out[k] = series[0]
        elif t >= n - 1:
            out[k] = series[n - 1]
        else:
            lo = int(np.floor(t))
            lam = t - lo
            out[k] = (1 - lam) * series[lo] + lam * series[lo + 1]
    return out


def warm_start_shift(state, shift, dt):
    """Shift the previous window's primal and dual solutions by ``shift``.

    States, controls, and duals are linearly interpolated onto the new grid
    with the tail held at the final old value; the caller then overwrites the
    first states with the current observation.
    """
    if shift < 0:
        raise ValueError("shift must be non-negative")
    trajs = state.trajs
    new_trajs = SubTrajectories(
        payload_x=_interp_series(trajs.payload_x, shift, dt),
        payload_u=_interp_series(trajs.payload_u, shift, dt),
        robot_x=np.stack([_interp_series(trajs.robot_x[i], shift, dt) for i in range(trajs.robot_x.shape[0])]),
        robot_u=np.stack([_interp_series(trajs.robot_u[i], shift, dt) for i in range(trajs.robot_u.shape[0])]),
    )
    new_duals = np.stack([_interp_series(state.duals[i], shift, dt) for i in range(state.duals.shape[0])])
    return AdmmState(
        trajs=new_trajs,
        duals=new_duals,
        rho=state.rho,
        iteration=0,
        payload_version=0,
    )


def _payload_subproblem(ctx, trajs, duals, robots_version):
    n_r = ctx.n_robots
    n = ctx.n_steps
    cons_c = np.empty((n, 6 * n_r))
    r_fix = np.empty((n + 1, n_r, 3))
    th_fix = np.empty((n + 1, n_r, 3))
    for i in range(n_r):
        cons_c[:, 6 * i : 6 * i + 6] = trajs.robot_u[i, :, 24:30] + duals[i]
        r_fix[:, i] = trajs.robot_x[i, :, 0:3]
        th_fix[:, i] = trajs.robot_x[i, :, 6:9]
    data = PayloadProblemData(
        dt=ctx.dt,
        mass=ctx.payload_mass,
        inertia=ctx.payload_inertia,
        gravity=ctx.gravity,
        handles=ctx.handles,
        x_ref=ctx.payload_ref,
        q_diag=ctx.q_payload,
        q_term=ctx.q_payload_term,
        r_diag=ctx.r_payload,
        cons_c=cons_c,
        r_fix=r_fix,
        th_fix=th_fix,
        rho=ctx.rho,
        arm_nominal=ctx.arm_nominal,
        p_h_max=ctx.p_h_max,
        tau_lo=ctx.tau_lo,
        tau_hi=ctx.tau_hi,
        mu_grasp=ctx.mu_grasp,
        terr_bounds=ctx.terr_bounds,
        terr_planes=ctx.terr_planes,
        terr_default=ctx.terr_default,
        clearance=ctx.clearance,
        obstacles=ctx.obstacles,
        r_body=ctx.r_body_payload,
        gamma_cbf=ctx.gamma_cbf,
        mu_b=ctx.mu_b,
        delta_b=ctx.delta_b,
        eq_weight=ctx.eq_weight,
        robots_version=robots_version,
    )
    return PayloadSubproblem(ctx.x0_payload, data)


def _robot_subproblem(ctx, i, payload_x, payload_u, dual_i, payload_version):
    n = ctx.n_steps
    p_hand = np.empty((n + 1, 3))
    n_hand = np.empty((n + 1, 3))
    for k in range(n + 1):
        rot = rotmat(payload_x[k, 6:9])
        p_hand[k] = payload_x[k, 0:3] + rot @ ctx.handles[i]
        n_hand[k] = rot[:, 2]
    data = RobotProblemData(
        dt=ctx.dt,
        mass=float(ctx.robot_masses[i]),
        inertia=ctx.robot_inertias[i],
        gravity=ctx.gravity,
        x_ref=ctx.robot_refs[i],
        q_diag=ctx.q_robot,
        q_term=ctx.q_robot_term,
        r_diag=ctx.r_robot,
        contact=ctx.contact,
        p_hand=p_hand,
        n_hand=n_hand,
        r0_fix=payload_x[:, 0:3],
        th0_fix=payload_x[:, 6:9],
        cons_c=payload_u[:, 6 * i : 6 * i + 6] + dual_i,
        rho=ctx.rho,
        foot_nominal=ctx.foot_nominal,
        kin_half_widths=ctx.kin_half_widths,
        arm_nominal=ctx.arm_nominal[i],
        p_h_max=ctx.p_h_max,
        formation_offset=ctx.formation_offsets[i],
        formation_bound=ctx.formation_bound,
        tau_lo=ctx.tau_lo,
        tau_hi=ctx.tau_hi,
        mu_ground=ctx.mu_ground,
        mu_grasp=ctx.mu_grasp,
        terr_bounds=ctx.terr_bounds,
        terr_planes=ctx.terr_planes,
        terr_default=ctx.terr_default,
        region_hp=ctx.region_hp,
        region_cnt=ctx.region_cnt,
        region_idx=ctx.region_idx[i],
        obstacles=ctx.obstacles,
        r_body=ctx.r_body_robot,
        gamma_cbf=ctx.gamma_cbf,
        mu_b=ctx.mu_b,
        delta_b=ctx.delta_b,
        eq_weight=ctx.eq_weight,
        payload_version=payload_version,
    )
    return RobotSubproblem(ctx.x0_robots[i], data)


def _solve_robot(args):
    ctx, i, payload_x, payload_u, dual_i, version, x_init, u_init, max_sqp_iters = args
    problem = _robot_subproblem(ctx, i, payload_x, payload_u, dual_i, version)
    x_init = x_init.copy()
    x_init[0] = ctx.x0_robots[i]
    t0 = time.perf_counter()
    report = sqp.solve_subproblem(problem, x_init, u_init, max_sqp_iters=max_sqp_iters)
    return i, report, time.perf_counter() - t0, problem.payload_version


def admm_iteration(state, ctx, max_sqp_iters=DEFAULT_MAX_SQP_ITERS, executor=None):
    """One Gauss-Seidel sweep: payload update, parallel robot updates, duals.

    A solver failure in any sub-block aborts the sweep and returns the last
    consistent state with the error recorded.
    """
    trajs = state.trajs.copy()
    duals = state.duals.copy()
    n_r = ctx.n_robots
    m_next = state.iteration + 1

    # payload block against the robots' iteration-m snapshot
    payload_times = []
    try:
        payload_problem = _payload_subproblem(ctx, trajs, duals, robots_version=state.iteration)
        x_init = trajs.payload_x.copy()
        x_init[0] = ctx.x0_payload
        t0 = time.perf_counter()
        payload_report = sqp.solve_subproblem(
            payload_problem, x_init, trajs.payload_u, max_sqp_iters=max_sqp_iters
        )
        payload_times.append(time.perf_counter() - t0)
    except SolverError as exc:
        return replace(state, error=f"payload solve failed: {exc}"), [], []
    trajs.payload_x = payload_report.x_traj
    trajs.payload_u = payload_report.u_traj

    # robot blocks against the fresh payload solution, mutually independent
    payload_x_snap = trajs.payload_x.copy()
    payload_u_snap = trajs.payload_u.copy()
    jobs = [
        (
            ctx,
            i,
            payload_x_snap,
            payload_u_snap,
            duals[i],
            m_next,
            trajs.robot_x[i],
            trajs.robot_u[i],
            max_sqp_iters,
        )
        for i in range(n_r)
    ]
    robot_times = [0.0] * n_r
    consumed = [0] * n_r
    try:
        results = list(executor.map(_solve_robot, jobs)) if executor is not None else [
            _solve_robot(job) for job in jobs
        ]
    except SolverError as exc:
        return replace(state, error=f"robot solve failed: {exc}"), payload_times, []
    for i, report, wall, version in sorted(results, key=lambda item: item[0]):
        trajs.robot_x[i] = report.x_traj
        trajs.robot_u[i] = report.u_traj
        robot_times[i] = wall
        consumed[i] = version

    # scaled dual update on the wrench mismatch
    for i in range(n_r):
        duals[i] += trajs.robot_u[i, :, 24:30] + trajs.payload_u[:, 6 * i : 6 * i + 6]

    new_state = AdmmState(
        trajs=trajs,
        duals=duals,
        rho=state.rho,
        iteration=m_next,
        residual_history=list(state.residual_history),
        payload_version=m_next,
        consumed_payload_versions=consumed,
        error=None,
    )
    return new_state, payload_times, robot_times


def solve_window(
    ctx,
    init_state,
    max_admm_iters=DEFAULT_MAX_ADMM_ITERS,
    max_sqp_iters=DEFAULT_MAX_SQP_ITERS,
    epsilon=DEFAULT_EPSILON,
    executor=None,
):
    """Run ADMM sweeps until the consensus criterion beats ``epsilon`` or the
    iteration budget is spent. Returns (trajectories, state, report)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    t_start = time.perf_counter()
    state = init_state
    state.trajs.payload_x[0] = ctx.x0_payload
    state.trajs.robot_x[:, 0] = ctx.x0_robots
    init_criterion = consensus_residual(state.trajs, ctx.dt).criterion
    criteria = []
    payload_times = []
    robot_times = []
    error = None
    for _ in range(max_admm_iters):
        state, p_times, r_times = admm_iteration(
            state, ctx, max_sqp_iters=max_sqp_iters, executor=executor
        )
        if state.error is not None:
            error = state.error
            break
        payload_times.extend(p_times)
        robot_times.append(r_times)
        criterion = consensus_residual(state.trajs, ctx.dt).criterion
        criteria.append(criterion)
        state.residual_history.append(criterion)
        if criterion < epsilon:
            break
    report = WindowReport(
        init_criterion=init_criterion,
        criteria=criteria,
        iterations=len(criteria),
        met_tolerance=bool(criteria and criteria[-1] < epsilon),
        payload_solve_times=payload_times,
        robot_solve_times=robot_times,
        wall_time=time.perf_counter() - t_start,
        error=error,
    )
    return state.trajs, state, report


def make_executor(n_workers):
    """Thread pool for the robot sub-block solves (kernels release the GIL)."""
    return ThreadPoolExecutor(max_workers=max(1, n_workers))
