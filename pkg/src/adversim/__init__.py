"""adversim: closed-loop adversarial traffic scenario generation and training."""

__version__ = "0.1.0"

from .scenario import (Scenario, ScenarioSet, Track, Vec2, VehicleState,  # noqa: F401
                       load_scenario, load_scenario_set, save_scenario,
                       save_scenario_set, state_at)
