"""Impact-time guidance under field-of-view and acceleration limits."""

from .actuator import G0, ActuatorConfig
from .guidance import GuidanceGains
from .runner import ConfigError, RunMetrics, ScenarioConfig, TrajectoryRecord, run_batch, run_scenario
from .sensing import NoiseConfig

__all__ = [
    "G0", "ActuatorConfig", "GuidanceGains", "NoiseConfig", "ConfigError",
    "RunMetrics", "ScenarioConfig", "TrajectoryRecord", "run_batch", "run_scenario",
]
