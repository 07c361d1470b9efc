"""Multibody simulator and gait toolkit for a 12-link articulated snake robot.

The heavy lifting lives in the C++ extension; this package re-exports the
bound entry points.
"""

from cobra_sim._core import (  # noqa: F401
    ContactParams,
    GaitSpec,
    Metrics,
    RobotModel,
    build_cobra_model,
    contact_candidate_points,
    forward_kinematics,
    friction_force,
    gap_flat,
    hexring_configuration,
    normal_force,
    run_scenario_config,
    sidewinding_targets,
    spiral_configuration,
    lateral_rolling_targets,
    vertical_undulation_targets,
)

__all__ = [
    "ContactParams",
    "GaitSpec",
    "Metrics",
    "RobotModel",
    "build_cobra_model",
    "contact_candidate_points",
    "forward_kinematics",
    "friction_force",
    "gap_flat",
    "hexring_configuration",
    "normal_force",
    "run_scenario_config",
    "sidewinding_targets",
    "spiral_configuration",
    "lateral_rolling_targets",
    "vertical_undulation_targets",
]
