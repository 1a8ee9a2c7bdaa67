"""Ground-truth trajectory and sensor readings for a scenario."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dynamics, observation, rngstreams
from .errors import SimulationError


@dataclass
class TruthData:
    """True states on the observation grid plus per-agent sensor readings.

    ``states[i]`` is the state at time ``times[i]``. ``readings[i - 1][l]``
    is agent l's noisy observation at step i >= 1. No observation is taken
    at step 0: the filter forecasts before it assimilates, and differential
    sensors need a predecessor state.
    """

    times: np.ndarray
    states: np.ndarray
    readings: list

    @property
    def n_steps(self) -> int:
        return len(self.readings)

    def observations_at(self, step: int) -> list:
        if not 1 <= step <= self.n_steps:
            raise SimulationError(f"no observations at step {step}")
        return self.readings[step - 1]


def simulate_truth(scenario) -> TruthData:
    """Integrate the true state and draw every agent's observations.

    Each agent's sensor fires once per observation time; neighbors later
    receive that same realization. Process noise comes from the reserved
    truth streams, so the trajectory is independent of the agent count.
    """
    model = scenario.model_def()
    params = scenario.dynamics_params()
    specs = scenario.observation_specs()
    n_sub = dynamics.substep_count(scenario.dt_obs, scenario.dt_int)
    n_steps = scenario.n_steps

    states = np.empty((n_steps + 1, model.dim))
    states[0] = np.asarray(scenario.x0, dtype=float)
    for step in range(1, n_steps + 1):
        noise = None
        if params.sigma > 0:
            noise = rngstreams.stream(
                scenario.seed, step, rngstreams.TRUTH_AGENT, 0, rngstreams.TRUTH_PROCESS
            ).standard_normal((n_sub, model.noise_dim))
        try:
            states[step] = dynamics.advance(states[step - 1], n_sub, model, params, noise)
        except SimulationError as exc:
            raise SimulationError(
                f"truth integration failed at t={step * scenario.dt_obs:.6g}: {exc}"
            ) from exc

    quadrant = scenario.observation.quadrant_angle
    readings = []
    for step in range(1, n_steps + 1):
        per_agent = []
        for l, spec in enumerate(specs):
            rng = rngstreams.stream(scenario.seed, step, l, 0, rngstreams.TRUTH_OBS)
            per_agent.append(
                observation.observe(
                    spec,
                    states[step],
                    states[step - 1],
                    rng,
                    quadrant_angle=quadrant,
                    origin_mode="error",
                )
            )
        readings.append(per_agent)

    return TruthData(times=scenario.times(), states=states, readings=readings)
