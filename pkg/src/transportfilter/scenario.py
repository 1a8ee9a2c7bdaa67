"""Scenario files: schema, loading, validation, and resolution.

A scenario is a JSON document describing one experiment end to end: the
dynamics model and its parameters, the time grid, the agent network with
observation models, and the filter settings (PCA, solver, consensus). The
bundled ``table2.json`` and ``table3.json`` scenarios describe the linear
translation-only setup and the combined translation/attitude setup.

Every validation failure is reported individually by name. ``resolve``
materializes all defaults into a plain dictionary whose reload reproduces
the run byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import dynamics, network, observation, rngstreams
from .errors import ScenarioError
from .transport import SolverOptions

MODEL_NAMES = ("cw-translation", "cw-full")


@dataclass(frozen=True)
class AgentSpec:
    """One agent: its sensor and who it listens to."""

    id: str
    obs_dims: tuple
    obs_type: str
    noise_std: float
    neighbors: tuple

    def __post_init__(self):
        object.__setattr__(self, "obs_dims", tuple(int(d) for d in self.obs_dims))
        object.__setattr__(self, "neighbors", tuple(str(n) for n in self.neighbors))


@dataclass(frozen=True)
class ConsensusOptions:
    iterations: int = 1
    literal: bool = False


@dataclass(frozen=True)
class PcaOptions:
    enabled: bool = False
    q_x: int | None = None
    q_y: int | None = None
    center: bool = True
    anchored_lift: bool = True


@dataclass(frozen=True)
class DynamicsOptions:
    quat_sign: float = -1.0
    omega_orbit: tuple | None = None


@dataclass(frozen=True)
class ObservationOptions:
    quadrant_angle: bool = True


@dataclass(frozen=True)
class InitOptions:
    """Initial particle distribution: per-block Gaussian around x0."""

    translation_mean_offset: float = 3.0
    translation_var: float = 25.0
    attitude_mean_offset: float = 0.1
    attitude_var: float = 0.04


@dataclass(frozen=True)
class ScenarioConfig:
    model: str
    alpha: float
    sigma_process: float
    dt_int: float
    dt_obs: float
    t_end: float
    x0: tuple
    particles: int
    agents: tuple
    gamma: float = 0.1
    seed: int = 0
    consensus: ConsensusOptions = field(default_factory=ConsensusOptions)
    pca: PcaOptions = field(default_factory=PcaOptions)
    solver: SolverOptions = field(default_factory=SolverOptions)
    dynamics: DynamicsOptions = field(default_factory=DynamicsOptions)
    observation: ObservationOptions = field(default_factory=ObservationOptions)
    init: InitOptions = field(default_factory=InitOptions)

    @property
    def state_dim(self) -> int:
        return dynamics.MODELS[self.model].dim

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.dt_obs)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt_obs

    def model_def(self) -> dynamics.DynamicsModel:
        return dynamics.MODELS[self.model]

    def dynamics_params(self) -> dynamics.DynamicsParams:
        return dynamics.DynamicsParams(
            alpha=self.alpha,
            sigma=self.sigma_process,
            dt_int=self.dt_int,
            quat_sign=self.dynamics.quat_sign,
            omega_orbit=self.dynamics.omega_orbit,
        )

    def agent_index(self, agent_id: str) -> int:
        for i, spec in enumerate(self.agents):
            if spec.id == agent_id:
                return i
        raise ScenarioError(f"unknown agent id {agent_id!r}")

    def topology(self) -> network.Topology:
        ids = [a.id for a in self.agents]
        lists = [[ids.index(n) for n in a.neighbors] for a in self.agents]
        return network.topology_from_neighbor_lists(len(ids), lists)

    def observation_specs(self) -> list:
        return [
            observation.ObservationSpec(a.obs_type, a.obs_dims, a.noise_std)
            for a in self.agents
        ]

    def stacked_dims(self) -> list:
        topo = self.topology()
        specs = self.observation_specs()
        return [observation.stacked_dim(l, topo, specs) for l in range(self.n_agents)]


_GROUP_FIELDS = {
    "consensus": {"iterations", "literal"},
    "pca": {"enabled", "q_x", "q_y", "center", "anchored_lift"},
    "solver": {"method", "max_iters", "tol"},
    "dynamics": {"quat_sign", "omega_orbit"},
    "observation": {"quadrant_angle"},
    "init": {
        "translation_mean_offset",
        "translation_var",
        "attitude_mean_offset",
        "attitude_var",
    },
}

_TOP_FIELDS = {
    "model", "alpha", "sigma_process", "dt_int", "dt_obs", "t_end", "x0",
    "particles", "gamma", "seed", "agents",
} | set(_GROUP_FIELDS)

_AGENT_FIELDS = {"id", "obs_dims", "obs_type", "noise_std", "neighbors"}


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ScenarioError(message)


def _group(raw: dict, name: str) -> dict:
    value = raw.get(name, {})
    _require(isinstance(value, dict), f"{name} must be an object")
    unknown = set(value) - set(_GROUP_FIELDS[name])
    _require(not unknown, f"unknown {name} option(s): {sorted(unknown)}")
    return value


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    """Build and fully validate a scenario from parsed JSON."""
    _require(isinstance(raw, dict), "scenario must be a JSON object")
    unknown = set(raw) - _TOP_FIELDS
    _require(not unknown, f"unknown scenario option(s): {sorted(unknown)}")
    for name in ("model", "alpha", "sigma_process", "dt_int", "dt_obs", "t_end", "x0", "particles", "agents"):
        _require(name in raw, f"missing required field {name!r}")

    model = raw["model"]
    _require(model in MODEL_NAMES, f"model must be one of {MODEL_NAMES}, got {model!r}")
    n = dynamics.MODELS[model].dim

    alpha = float(raw["alpha"])
    _require(alpha > 0, "alpha must be positive")
    sigma = float(raw["sigma_process"])
    _require(sigma >= 0, "sigma_process must be nonnegative")
    dt_int = float(raw["dt_int"])
    _require(dt_int > 0, "dt_int must be positive")
    dt_obs = float(raw["dt_obs"])
    _require(dt_obs > 0, "dt_obs must be positive")
    t_end = float(raw["t_end"])
    _require(t_end > 0, "t_end must be positive")
    ratio = dt_obs / dt_int
    _require(
        abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio) and round(ratio) >= 1,
        f"dt_obs {dt_obs} must be an integer multiple of dt_int {dt_int}",
    )
    steps = t_end / dt_obs
    _require(
        abs(steps - round(steps)) <= 1e-9 * max(1.0, steps) and round(steps) >= 1,
        f"t_end {t_end} must be a positive integer multiple of dt_obs {dt_obs}",
    )

    x0 = tuple(float(v) for v in raw["x0"])
    _require(len(x0) == n, f"x0 must have length {n} for model {model}, got {len(x0)}")
    _require(all(math.isfinite(v) for v in x0), "x0 entries must be finite")

    particles = int(raw["particles"])
    _require(particles >= 1, "particles must be at least 1")

    seed = int(raw.get("seed", 0))
    _require(0 <= seed <= rngstreams.MAX_SEED, "seed must fit in 64 bits")

    gamma = float(raw.get("gamma", 0.1))

    agents_raw = raw["agents"]
    _require(isinstance(agents_raw, list) and agents_raw, "agents must be a non-empty list")
    agents = []
    ids = []
    for entry in agents_raw:
        _require(isinstance(entry, dict), "each agent must be an object")
        unknown = set(entry) - _AGENT_FIELDS
        _require(not unknown, f"unknown agent option(s): {sorted(unknown)}")
        for name in _AGENT_FIELDS:
            _require(name in entry, f"agent missing required field {name!r}")
        agent = AgentSpec(
            id=str(entry["id"]),
            obs_dims=entry["obs_dims"],
            obs_type=str(entry["obs_type"]),
            noise_std=float(entry["noise_std"]),
            neighbors=entry["neighbors"],
        )
        _require(agent.id not in ids, f"duplicate agent id {agent.id!r}")
        ids.append(agent.id)
        agents.append(agent)
    for agent in agents:
        try:
            spec = observation.ObservationSpec(agent.obs_type, agent.obs_dims, agent.noise_std)
        except Exception as exc:
            raise ScenarioError(f"agent {agent.id}: {exc}") from exc
        _require(
            max(spec.dims) < n,
            f"agent {agent.id}: observed dims {spec.dims} exceed state dimension {n}",
        )
        _require(agent.neighbors, f"agent {agent.id}: neighbor list is empty")
        for nbr in agent.neighbors:
            _require(nbr in ids, f"agent {agent.id}: unknown neighbor {nbr!r}")
        _require(
            agent.id in agent.neighbors,
            f"agent {agent.id}: neighbor list must include the agent itself",
        )
        _require(
            len(set(agent.neighbors)) == len(agent.neighbors),
            f"agent {agent.id}: duplicate neighbors",
        )

    consensus_raw = _group(raw, "consensus")
    consensus = ConsensusOptions(
        iterations=int(consensus_raw.get("iterations", 1)),
        literal=bool(consensus_raw.get("literal", False)),
    )
    _require(consensus.iterations >= 1, "consensus.iterations must be at least 1")

    pca_raw = _group(raw, "pca")
    pca = PcaOptions(
        enabled=bool(pca_raw.get("enabled", False)),
        q_x=None if pca_raw.get("q_x") is None else int(pca_raw["q_x"]),
        q_y=None if pca_raw.get("q_y") is None else int(pca_raw["q_y"]),
        center=bool(pca_raw.get("center", True)),
        anchored_lift=bool(pca_raw.get("anchored_lift", True)),
    )

    solver_raw = _group(raw, "solver")
    try:
        solver = SolverOptions(
            method=str(solver_raw.get("method", "closed-form")),
            max_iters=int(solver_raw.get("max_iters", 10_000)),
            tol=float(solver_raw.get("tol", 1e-5)),
        )
    except ValueError as exc:
        raise ScenarioError(f"solver: {exc}") from exc

    dynamics_raw = _group(raw, "dynamics")
    omega_orbit = dynamics_raw.get("omega_orbit")
    if omega_orbit is not None:
        _require(
            isinstance(omega_orbit, (list, tuple)) and len(omega_orbit) == 3,
            "dynamics.omega_orbit must be a list of three numbers or null",
        )
        omega_orbit = tuple(float(v) for v in omega_orbit)
    dyn = DynamicsOptions(
        quat_sign=float(dynamics_raw.get("quat_sign", -1.0)),
        omega_orbit=omega_orbit,
    )
    _require(dyn.quat_sign in (-1.0, 1.0), "dynamics.quat_sign must be -1 or +1")

    obs_raw = _group(raw, "observation")
    obs = ObservationOptions(quadrant_angle=bool(obs_raw.get("quadrant_angle", True)))

    init_raw = _group(raw, "init")
    init = InitOptions(
        translation_mean_offset=float(init_raw.get("translation_mean_offset", 3.0)),
        translation_var=float(init_raw.get("translation_var", 25.0)),
        attitude_mean_offset=float(init_raw.get("attitude_mean_offset", 0.1)),
        attitude_var=float(init_raw.get("attitude_var", 0.04)),
    )
    _require(init.translation_var >= 0, "init.translation_var must be nonnegative")
    _require(init.attitude_var >= 0, "init.attitude_var must be nonnegative")

    scenario = ScenarioConfig(
        model=model,
        alpha=alpha,
        sigma_process=sigma,
        dt_int=dt_int,
        dt_obs=dt_obs,
        t_end=t_end,
        x0=x0,
        particles=particles,
        agents=tuple(agents),
        gamma=gamma,
        seed=seed,
        consensus=consensus,
        pca=pca,
        solver=solver,
        dynamics=dyn,
        observation=obs,
        init=init,
    )

    topo = scenario.topology()
    _require(network.is_connected(topo), "network is not connected")
    network.check_gamma(gamma, topo)

    if pca.enabled:
        _require(pca.q_x is not None, "pca.q_x is required when pca is enabled")
        _require(pca.q_y is not None, "pca.q_y is required when pca is enabled")
        _require(1 <= pca.q_x <= n, f"pca.q_x must lie in [1, {n}]")
        _require(pca.q_x <= particles, "pca.q_x must not exceed the particle count")
        d_bars = scenario.stacked_dims()
        _require(
            1 <= pca.q_y <= max(d_bars),
            f"pca.q_y must lie in [1, {max(d_bars)}] for this network",
        )

    return scenario


def load_scenario(path) -> ScenarioConfig:
    """Load and validate a scenario file; bundled names resolve if no file exists."""
    resolved = resolve_scenario_path(path)
    try:
        text = resolved.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"parse error in {resolved} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return scenario_from_dict(raw)


def resolve_scenario_path(path) -> Path:
    """An existing file wins; otherwise fall back to the bundled scenarios."""
    candidate = Path(path)
    if candidate.exists():
        return candidate
    bundled = resources.files(__package__) / "scenarios" / candidate.name
    if candidate.name == str(candidate) and bundled.is_file():
        return Path(str(bundled))
    raise ScenarioError(f"scenario file not found: {path}")


def resolve(scenario: ScenarioConfig) -> dict:
    """Plain dictionary with every default materialized."""
    return {
        "model": scenario.model,
        "alpha": scenario.alpha,
        "sigma_process": scenario.sigma_process,
        "dt_int": scenario.dt_int,
        "dt_obs": scenario.dt_obs,
        "t_end": scenario.t_end,
        "x0": list(scenario.x0),
        "particles": scenario.particles,
        "gamma": scenario.gamma,
        "seed": scenario.seed,
        "consensus": {
            "iterations": scenario.consensus.iterations,
            "literal": scenario.consensus.literal,
        },
        "pca": {
            "enabled": scenario.pca.enabled,
            "q_x": scenario.pca.q_x,
            "q_y": scenario.pca.q_y,
            "center": scenario.pca.center,
            "anchored_lift": scenario.pca.anchored_lift,
        },
        "solver": {
            "method": scenario.solver.method,
            "max_iters": scenario.solver.max_iters,
            "tol": scenario.solver.tol,
        },
        "dynamics": {
            "quat_sign": scenario.dynamics.quat_sign,
            "omega_orbit": None
            if scenario.dynamics.omega_orbit is None
            else list(scenario.dynamics.omega_orbit),
        },
        "observation": {"quadrant_angle": scenario.observation.quadrant_angle},
        "init": {
            "translation_mean_offset": scenario.init.translation_mean_offset,
            "translation_var": scenario.init.translation_var,
            "attitude_mean_offset": scenario.init.attitude_mean_offset,
            "attitude_var": scenario.init.attitude_var,
        },
        "agents": [
            {
                "id": a.id,
                "obs_dims": list(a.obs_dims),
                "obs_type": a.obs_type,
                "noise_std": a.noise_std,
                "neighbors": list(a.neighbors),
            }
            for a in scenario.agents
        ],
    }


def with_overrides(scenario: ScenarioConfig, *, seed=None, particles=None, gamma=None, pca_enabled=None, solver_method=None) -> ScenarioConfig:
    """Re-validate the scenario with command-line overrides applied."""
    raw = resolve(scenario)
    if seed is not None:
        raw["seed"] = int(seed)
    if particles is not None:
        raw["particles"] = int(particles)
    if gamma is not None:
        raw["gamma"] = float(gamma)
    if pca_enabled is not None:
        raw["pca"]["enabled"] = bool(pca_enabled)
    if solver_method is not None:
        raw["solver"]["method"] = str(solver_method)
    return scenario_from_dict(raw)
