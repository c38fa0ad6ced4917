"""Kinematics, tendon transmission and task simulation for a 2-DoF robot wrist on a 6-DoF arm."""

from .config import ConfigError, RunConfig, load_config
from .hand import DEFAULT_ROM, PalmWorkspace, RangeOfMotion, WristState, synergy_expand, wrist_chain, wrist_fk
from .ik import (
    ConfigChangeEvent,
    Constraints,
    DampedLeastSquaresIK,
    IKOptions,
    joint_travel,
    solve_ik,
    time_proxy,
    track_trajectory,
)
from .kinematics import DHParam, KinematicChain, Transform, compose_chains, forward_kinematics, jacobian
from .servo import SimBus, bus_transaction, decode_frame, encode_frame, sim_bus_step
from .tasks import TaskReport, TaskScenario, compare_conditions, run_task
from .transmission import ServoTransmission, TransmissionConfig, angle_to_servo, servo_to_angle, wrist_command

__version__ = "0.1.0"

__all__ = [
    "ConfigChangeEvent",
    "ConfigError",
    "Constraints",
    "DEFAULT_ROM",
    "DHParam",
    "DampedLeastSquaresIK",
    "IKOptions",
    "KinematicChain",
    "PalmWorkspace",
    "RangeOfMotion",
    "RunConfig",
    "ServoTransmission",
    "SimBus",
    "TaskReport",
    "TaskScenario",
    "Transform",
    "TransmissionConfig",
    "WristState",
    "angle_to_servo",
    "bus_transaction",
    "compare_conditions",
    "compose_chains",
    "decode_frame",
    "encode_frame",
    "forward_kinematics",
    "jacobian",
    "joint_travel",
    "load_config",
    "run_task",
    "servo_to_angle",
    "sim_bus_step",
    "solve_ik",
    "synergy_expand",
    "time_proxy",
    "track_trajectory",
    "wrist_chain",
    "wrist_command",
    "wrist_fk",
]
