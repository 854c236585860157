"""Array-level payload/robot subproblem objects consumed by the SQP solver.

Each subproblem owns immutable snapshot data for one ADMM sub-block solve:
references, gait flags, the frozen counterpart trajectories, consensus
offsets ``c = counterpart_wrench + dual``, and scenario geometry. Methods
dispatch to the jitted stage kernels.
"""

from dataclasses import dataclass, field

import numpy as np

from .cost import DEFAULT_DELTA_B, DEFAULT_EQ_WEIGHT, DEFAULT_MU_B, DEFAULT_RHO
from .kernels import stage_payload as spk
from .kernels import stage_robot as srk
from .kernels.constraintops import CONE_EPS

_EMPTY_BOUNDS = np.zeros((0, 4))
_EMPTY_PLANES = np.zeros((0, 3))
_EMPTY_OBSTACLES = np.zeros((0, 3))
_EMPTY_REGIONS = np.zeros((0, 1, 3))
_EMPTY_REGION_CNT = np.zeros(0, dtype=np.int64)


def _f(x):
    return np.ascontiguousarray(np.asarray(x, dtype=float))


@dataclass
class RobotProblemData:
    """Frozen per-window data of one robot sub-block."""

    dt: float
    mass: float
    inertia: np.ndarray
    gravity: np.ndarray
    x_ref: np.ndarray  # (N+1, 24)
    q_diag: np.ndarray
    q_term: np.ndarray
    r_diag: np.ndarray
    contact: np.ndarray  # (N+1, 4) bool
    p_hand: np.ndarray  # (N+1, 3) frozen grasp points
    n_hand: np.ndarray  # (N+1, 3) frozen grasp normals
    r0_fix: np.ndarray  # (N+1, 3) frozen payload positions
    th0_fix: np.ndarray  # (N+1, 3) frozen payload orientations
    cons_c: np.ndarray  # (N, 6) wrench copy + dual
    rho: float = DEFAULT_RHO
    foot_nominal: np.ndarray = None
    kin_half_widths: np.ndarray = None
    arm_nominal: np.ndarray = None
    p_h_max: np.ndarray = None
    formation_offset: np.ndarray = None
    formation_bound: np.ndarray = None
    tau_lo: np.ndarray = None
    tau_hi: np.ndarray = None
    mu_ground: float = 0.7
    mu_grasp: float = 0.7
    terr_bounds: np.ndarray = field(default_factory=lambda: _EMPTY_BOUNDS.copy())
    terr_planes: np.ndarray = field(default_factory=lambda: _EMPTY_PLANES.copy())
    terr_default: np.ndarray = field(default_factory=lambda: np.zeros(3))
    region_hp: np.ndarray = field(default_factory=lambda: _EMPTY_REGIONS.copy())
    region_cnt: np.ndarray = field(default_factory=lambda: _EMPTY_REGION_CNT.copy())
    region_idx: np.ndarray = None  # (N+1, 4) int64, -1 = unconstrained
    obstacles: np.ndarray = field(default_factory=lambda: _EMPTY_OBSTACLES.copy())
    r_body: float = 0.35
    gamma_cbf: float = 0.1
    mu_b: float = DEFAULT_MU_B
    delta_b: float = DEFAULT_DELTA_B
    eq_weight: float = DEFAULT_EQ_WEIGHT
    payload_version: int = 0  # data-flow tag: ADMM iteration of the frozen payload


class RobotSubproblem:
    """One robot's OCP with frozen payload data; solver-facing interface."""

    nx = 24
    nu = 30

    def __init__(self, x0, data: RobotProblemData):
        self.x0 = _f(x0).reshape(24)
        d = data
        n_steps = d.cons_c.shape[0]
        self.n_steps = n_steps
        self.data = d
        self.eq_weight = d.eq_weight
        self.payload_version = d.payload_version

        self._dyn_args = (d.dt, d.mass, _f(d.inertia), _f(d.gravity), _f(d.p_hand))
        foot_nom = d.foot_nominal if d.foot_nominal is not None else np.array(
            [[0.35, 0.2, -0.55], [0.35, -0.2, -0.55], [-0.35, 0.2, -0.55], [-0.35, -0.2, -0.55]]
        )
        kin_hw = d.kin_half_widths if d.kin_half_widths is not None else np.array([0.25, 0.15, 0.2])
        arm_nom = d.arm_nominal if d.arm_nominal is not None else np.zeros(3)
        ph_max = d.p_h_max if d.p_h_max is not None else np.array([0.2, 0.2, 0.2])
        form_off = d.formation_offset if d.formation_offset is not None else np.zeros(3)
        form_bnd = d.formation_bound if d.formation_bound is not None else np.array([0.2, 0.2, 0.2])
        tau_lo = d.tau_lo if d.tau_lo is not None else np.full(3, -5.0)
        tau_hi = d.tau_hi if d.tau_hi is not None else np.full(3, 5.0)
        region_idx = (
            d.region_idx
            if d.region_idx is not None
            else np.full((n_steps + 1, 4), -1, dtype=np.int64)
        )
        self._stage_args = (
            _f(d.x_ref),
            _f(d.q_diag),
            _f(d.q_term),
            _f(d.r_diag),
            _f(d.cons_c),
            float(d.rho),
            np.ascontiguousarray(d.contact, dtype=np.bool_),
            _f(d.p_hand),
            _f(d.n_hand),
            _f(d.r0_fix),
            _f(d.th0_fix),
            _f(foot_nom),
            _f(kin_hw),
            _f(arm_nom),
            _f(ph_max),
            _f(form_off),
            _f(form_bnd),
            _f(tau_lo),
            _f(tau_hi),
            float(d.mu_ground),
            float(d.mu_grasp),
            CONE_EPS,
            _f(d.terr_bounds),
            _f(d.terr_planes),
            _f(d.terr_default),
            _f(d.region_hp),
            np.ascontiguousarray(d.region_cnt, dtype=np.int64),
            np.ascontiguousarray(region_idx, dtype=np.int64),
            _f(d.obstacles),
            float(d.r_body),
            float(d.gamma_cbf),
            float(d.mu_b),
            float(d.delta_b),
            float(d.eq_weight),
        )

    def rollout(self, x_prev, u_prev, gains, kff, alpha):
        return srk.robot_rollout(
            self.x0, _f(x_prev), _f(u_prev), _f(gains), _f(kff), float(alpha), *self._dyn_args
        )

    def replay(self, u_traj):
        n = u_traj.shape[0]
        return self.rollout(
            np.zeros((n + 1, self.nx)), u_traj, np.zeros((n, self.nu, self.nx)), np.zeros((n, self.nu)), 0.0
        )

    def linearize(self, x_traj, u_traj):
        return srk.robot_linearize(_f(x_traj), _f(u_traj), *self._dyn_args)

    def quadraticize(self, x_traj, u_traj, a_seq, b_seq):
        return srk.robot_quad(_f(x_traj), _f(u_traj), a_seq, b_seq, *self._stage_args)

    def cost_parts(self, x_traj, u_traj):
        return srk.robot_cost(_f(x_traj), _f(u_traj), *self._stage_args)


@dataclass
class PayloadProblemData:
    """Frozen per-window data of the payload sub-block."""

    dt: float
    mass: float
    inertia: np.ndarray
    gravity: np.ndarray
    handles: np.ndarray  # (R, 3) handle offsets in the payload frame
    x_ref: np.ndarray  # (N+1, 12)
    q_diag: np.ndarray
    q_term: np.ndarray
    r_diag: np.ndarray  # (6R,)
    cons_c: np.ndarray  # (N, 6R) robot wrenches + duals
    r_fix: np.ndarray  # (N+1, R, 3) frozen robot positions
    th_fix: np.ndarray  # (N+1, R, 3) frozen robot orientations
    rho: float = DEFAULT_RHO
    arm_nominal: np.ndarray = None  # (R, 3)
    p_h_max: np.ndarray = None
    tau_lo: np.ndarray = None
    tau_hi: np.ndarray = None
    mu_grasp: float = 0.7
    terr_bounds: np.ndarray = field(default_factory=lambda: _EMPTY_BOUNDS.copy())
    terr_planes: np.ndarray = field(default_factory=lambda: _EMPTY_PLANES.copy())
    terr_default: np.ndarray = field(default_factory=lambda: np.zeros(3))
    clearance: float = 0.3
    obstacles: np.ndarray = field(default_factory=lambda: _EMPTY_OBSTACLES.copy())
    r_body: float = 0.5
    gamma_cbf: float = 0.1
    mu_b: float = DEFAULT_MU_B
    delta_b: float = DEFAULT_DELTA_B
    eq_weight: float = DEFAULT_EQ_WEIGHT
    robots_version: int = 0  # data-flow tag of the frozen robot snapshots


class PayloadSubproblem:
    """Payload OCP over the wrench copies with frozen robot data."""

    nx = 12

    def __init__(self, x0, data: PayloadProblemData):
        self.x0 = _f(x0).reshape(12)
        d = data
        self.data = d
        self.n_steps = d.cons_c.shape[0]
        self.nu = d.cons_c.shape[1]
        self.eq_weight = d.eq_weight
        self.robots_version = d.robots_version
        n_r = d.handles.shape[0]

        self._dyn_args = (d.dt, _f(d.handles), float(d.mass), _f(d.inertia), _f(d.gravity))
        arm_nom = d.arm_nominal if d.arm_nominal is not None else np.zeros((n_r, 3))
        ph_max = d.p_h_max if d.p_h_max is not None else np.array([0.2, 0.2, 0.2])
        tau_lo = d.tau_lo if d.tau_lo is not None else np.full(3, -5.0)
        tau_hi = d.tau_hi if d.tau_hi is not None else np.full(3, 5.0)
        self._stage_args = (
            _f(d.x_ref),
            _f(d.q_diag),
            _f(d.q_term),
            _f(d.r_diag),
            _f(d.cons_c),
            float(d.rho),
            _f(d.handles),
            _f(arm_nom),
            _f(ph_max),
            _f(tau_lo),
            _f(tau_hi),
            float(d.mu_grasp),
            CONE_EPS,
            _f(d.r_fix),
            _f(d.th_fix),
            _f(d.terr_bounds),
            _f(d.terr_planes),
            _f(d.terr_default),
            float(d.clearance),
            _f(d.obstacles),
            float(d.r_body),
            float(d.gamma_cbf),
            float(d.mu_b),
            float(d.delta_b),
        )

    def rollout(self, x_prev, u_prev, gains, kff, alpha):
        dt, handles, mass, inertia, gravity = self._dyn_args
        return spk.payload_rollout(
            self.x0,
            _f(x_prev),
            _f(u_prev),
            _f(gains),
            _f(kff),
            float(alpha),
            dt,
            handles,
            mass,
            inertia,
            gravity,
        )

    def replay(self, u_traj):
        n = u_traj.shape[0]
        return self.rollout(
            np.zeros((n + 1, self.nx)), u_traj, np.zeros((n, self.nu, self.nx)), np.zeros((n, self.nu)), 0.0
        )

    def linearize(self, x_traj, u_traj):
        dt, handles, mass, inertia, gravity = self._dyn_args
        return spk.payload_linearize(_f(x_traj), _f(u_traj), dt, handles, mass, inertia, gravity)

    def quadraticize(self, x_traj, u_traj, a_seq, b_seq):
        return spk.payload_quad(_f(x_traj), _f(u_traj), a_seq, b_seq, *self._stage_args)

    def cost_parts(self, x_traj, u_traj):
        return spk.payload_cost(_f(x_traj), _f(u_traj), *self._stage_args)
