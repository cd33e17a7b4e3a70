"""Shared robot parameter presets for the Bolt biped and Solo quadruped."""

from __future__ import annotations

import math
from dataclasses import dataclass

GRAVITY = 9.81
K_REL_DEFAULT = 10.7


@dataclass(frozen=True)
class RobotPreset:
    """Template-model and joint-limit numbers for one robot.

    ``target_speeds`` are the medium/high desired forward velocities in m/s.
    Joint limits apply to every actuated revolute joint.
    """

    name: str
    mass: float                       # total mass [kg]
    hip_height: float                 # standing hip height r0 [m]
    k_rel: float                      # dimensionless spring constant
    n_stance_legs: int                # legs expected in simultaneous contact
    target_speeds: tuple[float, float]
    joint_pos_limit: float            # [rad], symmetric
    joint_vel_limit: float            # [rad/s], symmetric
    joint_torque_limit: float         # [N*m], symmetric


BOLT = RobotPreset(
    name="bolt",
    mass=1.3,
    hip_height=0.35,
    k_rel=K_REL_DEFAULT,
    n_stance_legs=1,
    target_speeds=(1.05, 2.10),
    joint_pos_limit=math.pi,
    joint_vel_limit=4.0 * math.pi,
    joint_torque_limit=2.7,
)

SOLO = RobotPreset(
    name="solo",
    mass=2.2,
    hip_height=0.24,
    k_rel=K_REL_DEFAULT,
    n_stance_legs=2,
    target_speeds=(0.60, 0.96),
    joint_pos_limit=math.pi,
    joint_vel_limit=4.0 * math.pi,
    joint_torque_limit=2.7,
)

PRESETS = {p.name: p for p in (BOLT, SOLO)}


def get_preset(name: str) -> RobotPreset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown robot preset {name!r}; choose from {sorted(PRESETS)}") from None
