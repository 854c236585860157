"""Shared scenario fixtures for coordinator-level tests."""

import numpy as np

from locoteam.admm import WindowContext
from locoteam.cost import CostWeights
from locoteam.kernels.rotation import rotmat

FOOT_NOMINAL = np.array(
    [[0.35, 0.2, -0.55], [0.35, -0.2, -0.55], [-0.35, 0.2, -0.55], [-0.35, -0.2, -0.55]]
)


def two_robot_context(n_steps=20, dt=0.05, vx=0.0, contact=None, obstacles=None):
    """Flat-ground two-robot team carrying a 10 kg payload, optionally moving
    along +x at ``vx``."""
    weights = CostWeights()
    handles = np.array([[0.55, 0.0, 0.0], [-0.55, 0.0, 0.0]])
    formation = np.array([[1.1, 0.0, 0.0], [-1.1, 0.0, 0.0]])
    arm_nominal = np.array([[-0.55, 0.0, 0.0], [0.55, 0.0, 0.0]])
    n_r = 2

    payload_ref = np.zeros((n_steps + 1, 12))
    payload_ref[:, 0] = vx * dt * np.arange(n_steps + 1)
    payload_ref[:, 2] = 0.55
    payload_ref[:, 3] = vx

    robot_refs = np.zeros((n_r, n_steps + 1, 24))
    for i in range(n_r):
        for k in range(n_steps + 1):
            base = payload_ref[k, 0:3] + formation[i]
            robot_refs[i, k, 0:3] = base
            robot_refs[i, k, 3] = vx
            for j in range(4):
                robot_refs[i, k, 12 + 3 * j : 15 + 3 * j] = base + FOOT_NOMINAL[j]
                robot_refs[i, k, 14 + 3 * j] = 0.0

    x0_payload = payload_ref[0].copy()
    x0_robots = robot_refs[:, 0].copy()

    return WindowContext(
        dt=dt,
        n_steps=n_steps,
        payload_mass=10.0,
        payload_inertia=np.diag([0.48, 1.08, 1.42]),
        robot_masses=np.array([50.0, 50.0]),
        robot_inertias=np.stack([np.diag([2.1, 4.3, 4.8])] * 2),
        gravity=np.array([0.0, 0.0, -9.81]),
        handles=handles,
        x0_payload=x0_payload,
        x0_robots=x0_robots,
        payload_ref=payload_ref,
        robot_refs=robot_refs,
        q_payload=weights.payload_q,
        q_payload_term=weights.terminal_scale * weights.payload_q,
        r_payload=weights.payload_r(n_r),
        q_robot=weights.robot_q,
        q_robot_term=weights.terminal_scale * weights.robot_q,
        r_robot=weights.robot_r,
        contact=contact,
        foot_nominal=FOOT_NOMINAL,
        arm_nominal=arm_nominal,
        formation_offsets=formation,
        obstacles=obstacles if obstacles is not None else np.zeros((0, 3)),
    )


def rotate_context_yaw(ctx, yaw):
    """Rotate a context's world data by a yaw angle (for symmetry tests)."""
    rot = rotmat(np.array([yaw, 0.0, 0.0]))
    out = ctx
    for arr in (out.payload_ref, *out.robot_refs):
        arr[:, 0:3] = arr[:, 0:3] @ rot.T
        arr[:, 3:6] = arr[:, 3:6] @ rot.T
        arr[:, 6] += yaw
    return out
