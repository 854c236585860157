"""Contact scheduling and reference-trajectory generation.

The trot alternates the diagonal foot pairs {0,3} and {1,2}: each pair is in
stance for ``phase_duration`` out of a gait cycle of
``phase_duration / duty_factor``, the second pair offset by half a cycle.
Contact flags are a pure function of absolute time, so schedules built for
overlapping MPC windows agree wherever they overlap.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigValidationError
from .kernels.rotation import rotmat

PAIR_A = (0, 3)
PAIR_B = (1, 2)
DEFAULT_PHASE = 0.35
DEFAULT_DUTY = 0.5
MAX_REF_TILT = 0.3


@dataclass(frozen=True)
class GaitSchedule:
    """Boolean contact table over one horizon plus the generating parameters."""

    contact: np.ndarray  # (n_steps + 1, n_feet)
    pattern: str
    phase_duration: float
    duty_factor: float
    t_start: float
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "contact", np.asarray(self.contact, dtype=bool))

    @property
    def n_steps(self):
        return self.contact.shape[0] - 1

    def flags(self, k):
        return self.contact[k]


def _trot_flag(t, phase_duration, cycle, pair_offset):
    tm = np.mod(t - pair_offset, cycle)
    return tm < phase_duration


def build_gait_schedule(
    pattern,
    t_start,
    horizon,
    dt,
    phase_duration=DEFAULT_PHASE,
    duty_factor=DEFAULT_DUTY,
    n_feet=4,
):
    """Contact table covering ``horizon`` from absolute time ``t_start``.

    ``stance`` keeps every foot planted; ``trot`` alternates diagonal pairs.
    Flags are sampled at interval midpoints of the absolute time grid, which
    makes the schedule independent of ``t_start`` modulo the grid.
    """
    if dt <= 0:
        raise ConfigValidationError("gait dt must be positive")
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > 1e-9:
        raise ConfigValidationError("dt must divide the horizon")
    if not 0.0 < duty_factor <= 1.0:
        raise ConfigValidationError("duty_factor must lie in (0, 1]")
    if phase_duration <= 0.0:
        raise ConfigValidationError("phase_duration must be positive")

    contact = np.ones((n_steps + 1, n_feet), dtype=bool)
    if pattern == "stance":
        pass
    elif pattern == "trot":
        if n_feet != 4:
            raise ConfigValidationError("trot requires four feet")
        cycle = phase_duration / duty_factor
        for k in range(n_steps + 1):
            t_mid = t_start + (k + 0.5) * dt
            a = _trot_flag(t_mid, phase_duration, cycle, 0.0)
            b = _trot_flag(t_mid, phase_duration, cycle, 0.5 * cycle)
            for j in PAIR_A:
                contact[k, j] = a
            for j in PAIR_B:
                contact[k, j] = b
    else:
        raise ConfigValidationError(f"unknown gait pattern {pattern!r}")
    return GaitSchedule(contact, pattern, phase_duration, duty_factor, t_start, dt)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Sampled per-subsystem references over one MPC window."""

    times: np.ndarray  # (N + 1,)
    payload: np.ndarray  # (N + 1, 12)
    robots: np.ndarray  # (R, N + 1, 24)
    swing_clearance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "payload", np.asarray(self.payload, dtype=float))
        object.__setattr__(self, "robots", np.asarray(self.robots, dtype=float))
        if not (np.all(np.isfinite(self.payload)) and np.all(np.isfinite(self.robots))):
            raise ValueError("reference trajectories must be finite")


@dataclass(frozen=True)
class ReferencePlan:
    """Continuous-time reference generator queried per MPC window.

    Payload position is piecewise linear through the waypoints, yaw follows
    the shortest arc, robot bases ride the payload frame at their formation
    offsets with height taken from the terrain, and feet sit at nominal
    stance points under each base.
    """

    waypoint_times: np.ndarray  # (W,)
    waypoint_poses: np.ndarray  # (W, 4): x, y, z, yaw
    formation_offsets: np.ndarray  # (R, 3)
    foot_offsets: np.ndarray  # (n_f, 3)
    terrain: object = None
    base_height: float = 0.55
    swing_clearance: float = 0.05
    _yaw_unwrapped: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        times = np.asarray(self.waypoint_times, dtype=float).reshape(-1)
        poses = np.asarray(self.waypoint_poses, dtype=float).reshape(-1, 4)
        if times.size < 2:
            raise ConfigValidationError("at least two waypoints are required")
        if times.size != poses.shape[0]:
            raise ConfigValidationError("waypoint times/poses length mismatch")
        if np.any(np.diff(times) <= 0):
            raise ConfigValidationError("waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoint_times", times)
        object.__setattr__(self, "waypoint_poses", poses)
        object.__setattr__(
            self, "formation_offsets", np.asarray(self.formation_offsets, dtype=float).reshape(-1, 3)
        )
        object.__setattr__(
            self, "foot_offsets", np.asarray(self.foot_offsets, dtype=float).reshape(-1, 3)
        )
        yaw = poses[:, 3].copy()
        for i in range(1, yaw.size):
            while yaw[i] - yaw[i - 1] > np.pi:
                yaw[i] -= 2 * np.pi
            while yaw[i] - yaw[i - 1] < -np.pi:
                yaw[i] += 2 * np.pi
        object.__setattr__(self, "_yaw_unwrapped", yaw)

    @property
    def n_robots(self):
        return self.formation_offsets.shape[0]

    @property
    def end_time(self):
        return float(self.waypoint_times[-1])

    def payload_pose(self, t):
        """Interpolated payload position and yaw at time ``t`` (clamped)."""
        times = self.waypoint_times
        t = float(np.clip(t, times[0], times[-1]))
        idx = int(np.searchsorted(times, t, side="right") - 1)
        idx = min(max(idx, 0), times.size - 2)
        t0, t1 = times[idx], times[idx + 1]
        lam = (t - t0) / (t1 - t0)
        pos = (1 - lam) * self.waypoint_poses[idx, :3] + lam * self.waypoint_poses[idx + 1, :3]
        yaw = (1 - lam) * self._yaw_unwrapped[idx] + lam * self._yaw_unwrapped[idx + 1]
        return pos, float(yaw)

    def _terrain_height(self, x, y):
        if self.terrain is None:
            return 0.0
        return self.terrain.height(x, y)

    def robot_base_position(self, t, i):
        pos, yaw = self.payload_pose(t)
        offset = rotmat(np.array([yaw, 0.0, 0.0])) @ self.formation_offsets[i]
        base = pos + offset
        base[2] = self._terrain_height(base[0], base[1]) + self.base_height
        return base, yaw

    def sample_window(self, t_start, n_steps, dt):
        """ReferenceTrajectory for one window of ``n_steps`` intervals."""
        times = t_start + dt * np.arange(n_steps + 1)
        payload = np.zeros((n_steps + 1, 12))
        robots = np.zeros((self.n_robots, n_steps + 1, 24))
        n_f = self.foot_offsets.shape[0]
        for k, t in enumerate(times):
            pos, yaw = self.payload_pose(t)
            payload[k, 0:3] = pos
            payload[k, 6] = yaw
            for i in range(self.n_robots):
                base, byaw = self.robot_base_position(t, i)
                robots[i, k, 0:3] = base
                robots[i, k, 6] = byaw
                rot_yaw = rotmat(np.array([byaw, 0.0, 0.0]))
                for j in range(n_f):
                    foot = base + rot_yaw @ self.foot_offsets[j]
                    foot[2] = self._terrain_height(foot[0], foot[1])
                    robots[i, k, 12 + 3 * j : 15 + 3 * j] = foot
        # velocity references from forward differences of the position refs
        for k in range(n_steps):
            payload[k, 3:6] = (payload[k + 1, 0:3] - payload[k, 0:3]) / dt
            robots[:, k, 3:6] = (robots[:, k + 1, 0:3] - robots[:, k, 0:3]) / dt
        if n_steps > 0:
            payload[n_steps, 3:6] = payload[n_steps - 1, 3:6]
            robots[:, n_steps, 3:6] = robots[:, n_steps - 1, 3:6]
        return ReferenceTrajectory(times, payload, robots, self.swing_clearance)


def generate_references(
    waypoints,
    formation_offsets,
    gait,
    horizon,
    dt,
    terrain=None,
    foot_offsets=None,
    base_height=0.55,
    t_start=0.0,
):
    """Sampled references for one window; see :class:`ReferencePlan`.

    ``waypoints`` rows are ``(t, x, y, z, yaw)``. The gait argument fixes the
    sampling grid alignment only; contact flags live in the schedule itself.
    """
    waypoints = np.asarray(waypoints, dtype=float).reshape(-1, 5)
    if foot_offsets is None:
        foot_offsets = np.array(
            [[0.35, 0.2, -0.55], [0.35, -0.2, -0.55], [-0.35, 0.2, -0.55], [-0.35, -0.2, -0.55]]
        )
    plan = ReferencePlan(
        waypoint_times=waypoints[:, 0],
        waypoint_poses=waypoints[:, 1:5],
        formation_offsets=formation_offsets,
        foot_offsets=foot_offsets,
        terrain=terrain,
        base_height=base_height,
    )
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > 1e-9:
        raise ConfigValidationError("dt must divide the horizon")
    return plan.sample_window(t_start, n_steps, dt)
