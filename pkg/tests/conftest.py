import numpy as np
import pytest

import iktrack as ik


@pytest.fixture(scope="session")
def human66():
    return ik.generate_human_chain(66, seed=7)


@pytest.fixture(scope="session")
def human48():
    return ik.generate_human_chain(48, seed=7)


def base_only_model(position_target=True, orientation_target=False):
    """Single floating link, no joints."""
    return ik.KinematicModel(
        links=[ik.Link("base")],
        joints=[],
        base_link="base",
        position_targets=["base"] if position_target else [],
        orientation_targets=["base"] if orientation_target else [],
    )


def single_joint_model(axis=(0.0, 0.0, 1.0), offset=(0.0, 0.0, 0.0), tip_offset=(1.0, 0.0, 0.0),
                       pos_limits=None, vel_limit=None):
    """base -- joint(axis) -- link1 -- fixed-at-zero joint -- tip.

    The second joint carries the tip offset so the tip frame sits beyond the
    moving joint; tests keep its angle at zero.
    """
    return ik.KinematicModel(
        links=[ik.Link("base"), ik.Link("link1"), ik.Link("tip")],
        joints=[
            ik.Joint("j1", "base", "link1", axis=np.asarray(axis, float),
                     origin_xyz=np.asarray(offset, float),
                     pos_limits=pos_limits, vel_limit=vel_limit),
            ik.Joint("j2", "link1", "tip", axis=np.array([0.0, 0.0, 1.0]),
                     origin_xyz=np.asarray(tip_offset, float)),
        ],
        base_link="base",
        position_targets=["base"],
        orientation_targets=["base", "tip"],
    )


def hinge_model(pos_limits=None, vel_limit=None):
    """One revolute joint; base and arm orientations are both targeted, so the
    arm angle is a genuine 1-DoF problem."""
    return ik.KinematicModel(
        links=[ik.Link("base"), ik.Link("arm")],
        joints=[ik.Joint("hinge", "base", "arm", axis=np.array([0.0, 0.0, 1.0]),
                         origin_xyz=np.array([0.2, 0.0, 0.0]),
                         pos_limits=pos_limits, vel_limit=vel_limit)],
        base_link="base",
        position_targets=["base"],
        orientation_targets=["base", "arm"],
    )


def rodrigues(axis, angle):
    """Independent axis-angle rotation for oracles."""
    a = np.asarray(axis, float)
    n = np.linalg.norm(a)
    if n == 0.0 or angle == 0.0:
        return np.eye(3)
    a = a / n
    k = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def static_sample(model, q, t=0.0):
    """Sample equal to the forward kinematics of q with zero velocities."""
    positions, rotations = model.stacked_forward_kinematics(q)
    return ik.TargetSample(t=t, positions=positions, rotations=rotations,
                           lin_vels=np.zeros((model.n_p, 3)),
                           ang_vels=np.zeros((model.n_o, 3)))
