"""Filter orchestration: forecast, transport-map assimilation, consensus.

One filter step is bulk-synchronous with three phases. All agents forecast
their particles through the dynamics, then every agent conditions its
ensemble on the realized neighborhood observation through an affine
triangular map fitted in a per-step PCA latent space, and finally the
consensus update averages information across the network. Step 0 logs the
initial ensembles; no assimilation happens before the first forecast.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics, network, observation, pca, rngstreams, transport
from .errors import (
    DimensionError,
    EstimationError,
    SimulationError,
    TransportFilterError,
)
from .network import ParticleEnsemble
from .transport import SolverOptions


@dataclass(frozen=True)
class AssimilationOptions:
    """Dimension-reduction and solver settings for the map update."""

    pca_enabled: bool = False
    q_x: int | None = None
    q_y: int | None = None
    center: bool = True
    anchored_lift: bool = True
    quadrant_angle: bool = True
    solver: SolverOptions = field(default_factory=SolverOptions)

    @staticmethod
    def from_scenario(scenario) -> "AssimilationOptions":
        return AssimilationOptions(
            pca_enabled=scenario.pca.enabled,
            q_x=scenario.pca.q_x,
            q_y=scenario.pca.q_y,
            center=scenario.pca.center,
            anchored_lift=scenario.pca.anchored_lift,
            quadrant_angle=scenario.observation.quadrant_angle,
            solver=scenario.solver,
        )


@dataclass
class FilterState:
    """Per-agent ensembles plus the pre-forecast snapshots of the last step."""

    ensembles: list
    snapshots: list | None
    step: int
    time: float


@dataclass(frozen=True)
class MetricsRow:
    step: int
    time: float
    agent: str
    mse: float
    mean: np.ndarray
    std: np.ndarray


@dataclass
class MetricsLog:
    """Per-agent per-step summary of a run, ordered by (step, agent)."""

    agent_ids: list
    state_dim: int
    rows: list = field(default_factory=list)

    def append(self, row: MetricsRow) -> None:
        self.rows.append(row)

    def agent_series(self, agent_id: str):
        """(times, mses) for one agent across all logged steps."""
        times = [r.time for r in self.rows if r.agent == agent_id]
        mses = [r.mse for r in self.rows if r.agent == agent_id]
        return np.asarray(times), np.asarray(mses)

    def max_mse(self) -> float:
        return max(r.mse for r in self.rows)


def pca_map_update(states, snapshot, agent, topology, specs, y_star, options: AssimilationOptions, seed: int, step: int) -> np.ndarray:
    """Condition one agent's ensemble on its realized neighborhood observation.

    Per-particle predicted observations are sampled, PCA bases are fitted on
    the predicted observations and on the particles, an affine triangular
    map is estimated from the latent pairs, and every particle is pushed
    through the composed prior-to-posterior transformation conditioned on
    the projected observation. Lifting back preserves each particle's
    component orthogonal to the retained subspace. With PCA disabled both
    projections are the identity.
    """
    states = np.asarray(states, dtype=float)
    m, n = states.shape
    d_bar = observation.stacked_dim(agent, topology, specs)
    y_star = np.asarray(y_star, dtype=float).reshape(-1)
    if y_star.size != d_bar:
        raise DimensionError(
            f"agent {agent}: observation has dimension {y_star.size}, expected {d_bar}"
        )
    y_samples = observation.sample_predicted_observations(
        agent, topology, specs, states, snapshot, seed, step,
        quadrant_angle=options.quadrant_angle,
    )
    if options.pca_enabled:
        # The retained dimensions are clamped per agent: a stacked
        # observation can be shorter than the configured q_y.
        q_y = min(options.q_y, d_bar, m)
        q_x = min(options.q_x, n, m)
        proj_y = pca.fit(y_samples, q_y, center=options.center)
        proj_x = pca.fit(states, q_x, center=options.center)
    else:
        proj_y = pca.identity_projection(d_bar)
        proj_x = pca.identity_projection(n)
    latent_y = pca.project(proj_y, y_samples)
    latent_x = pca.project(proj_x, states)
    joint = np.column_stack([latent_y, latent_x])
    if not np.any(joint.var(axis=0) > 0.0):
        # A fully degenerate ensemble carries no sampling spread; the
        # conditional update reduces to the identity.
        return states.copy()
    try:
        tmap = transport.estimate_map(joint, latent_y.shape[1], options.solver)
    except EstimationError as exc:
        raise EstimationError(
            f"map estimation failed for agent {agent} at step {step}: {exc}"
        ) from exc
    y_star_latent = pca.project(proj_y, y_star)
    latent_post = transport.prior_to_posterior(tmap, y_star_latent, latent_y, latent_x)
    if options.anchored_lift:
        updated = pca.lift(proj_x, latent_post, states)
    else:
        updated = pca.reconstruct(proj_x, latent_post)
    if not np.all(np.isfinite(updated)):
        raise SimulationError(
            f"non-finite particle after assimilation (agent {agent}, step {step})"
        )
    return updated


def consensus_filter_step(state: FilterState, scenario, truth) -> FilterState:
    """Advance all agents by one observation interval.

    Phases run strictly in sequence: every agent forecasts, then every agent
    assimilates the true observations of its neighborhood, then the
    consensus update runs. Differential sensors compare post-forecast
    particles against the pre-forecast snapshots taken here.
    """
    step = state.step + 1
    model = scenario.model_def()
    params = scenario.dynamics_params()
    topology = scenario.topology()
    specs = scenario.observation_specs()
    options = AssimilationOptions.from_scenario(scenario)

    snapshots = [e.states.copy() for e in state.ensembles]

    forecasted = [
        dynamics.forecast(e.states, scenario.dt_obs, model, params, scenario.seed, step, l)
        for l, e in enumerate(state.ensembles)
    ]

    per_agent_obs = truth.observations_at(step)
    assimilated = []
    for l in range(scenario.n_agents):
        y_star = observation.stacked_true_observation(l, topology, per_agent_obs)
        assimilated.append(
            pca_map_update(
                forecasted[l], snapshots[l], l, topology, specs, y_star,
                options, scenario.seed, step,
            )
        )

    updated = assimilated
    for _ in range(scenario.consensus.iterations):
        updated = network.consensus_step(
            updated, topology, scenario.gamma, scenario.consensus.literal
        )

    if model.has_attitude:
        # Affine assimilation and averaging move quaternions off the unit
        # sphere; re-project so every step ends on the constraint manifold.
        for states in updated:
            quat = states[:, dynamics.QUAT]
            norms = np.linalg.norm(quat, axis=1, keepdims=True)
            if np.any(norms < 1e-8):
                raise SimulationError(
                    f"quaternion collapsed to zero during step {step}"
                )
            states[:, dynamics.QUAT] = quat / norms

    ensembles = [ParticleEnsemble(l, s, step) for l, s in enumerate(updated)]
    return FilterState(
        ensembles=ensembles,
        snapshots=snapshots,
        step=step,
        time=step * scenario.dt_obs,
    )


def initial_ensemble(scenario, agent: int) -> np.ndarray:
    """Draw an agent's starting particles around x0.

    The translation block is Gaussian with a constant mean offset and
    isotropic variance; for the combined model the attitude block gets its
    own offset and variance, and the quaternion components are renormalized
    jointly after sampling.
    """
    model = scenario.model_def()
    n = model.dim
    x0 = np.asarray(scenario.x0, dtype=float)
    mean = x0.copy()
    std = np.empty(n)
    mean[:6] += scenario.init.translation_mean_offset
    std[:6] = np.sqrt(scenario.init.translation_var)
    if model.has_attitude:
        mean[6:] += scenario.init.attitude_mean_offset
        std[6:] = np.sqrt(scenario.init.attitude_var)
    noise = rngstreams.particle_normals(
        scenario.seed, 0, agent, rngstreams.INIT, scenario.particles, (n,)
    )
    particles = mean + std * noise
    if model.has_attitude:
        quat = particles[:, dynamics.QUAT]
        particles[:, dynamics.QUAT] = quat / np.linalg.norm(quat, axis=1, keepdims=True)
    return particles


def _log_step(metrics: MetricsLog, scenario, ensembles, truth_state, step: int, time: float) -> None:
    for ensemble in ensembles:
        mean = ensemble.mean()
        std = ensemble.states.std(axis=0)
        error = mean - truth_state
        metrics.append(
            MetricsRow(
                step=step,
                time=time,
                agent=scenario.agents[ensemble.agent].id,
                mse=float(error @ error),
                mean=mean,
                std=std,
            )
        )


def run_filter(scenario, truth, on_step=None) -> MetricsLog:
    """Run the full filter over the truth's observation grid.

    Records squared error of each agent's ensemble mean against the true
    state at every observation time, along with per-dimension ensemble
    means and standard deviations. Step 0 logs the initial ensembles.
    ``on_step``, when given, is called with the FilterState after every
    step (diagnostics hook; it must not mutate the state).
    """
    if truth.n_steps != scenario.n_steps:
        raise SimulationError(
            f"truth has {truth.n_steps} steps, scenario expects {scenario.n_steps}"
        )
    metrics = MetricsLog(
        agent_ids=[a.id for a in scenario.agents], state_dim=scenario.state_dim
    )
    ensembles = [
        ParticleEnsemble(l, initial_ensemble(scenario, l), 0)
        for l in range(scenario.n_agents)
    ]
    state = FilterState(ensembles=ensembles, snapshots=None, step=0, time=0.0)
    _log_step(metrics, scenario, state.ensembles, truth.states[0], 0, 0.0)
    if on_step is not None:
        on_step(state)
    for step in range(1, scenario.n_steps + 1):
        try:
            state = consensus_filter_step(state, scenario, truth)
        except TransportFilterError as exc:
            # Callers can flush what was logged before the failing step.
            exc.partial_metrics = metrics
            raise
        _log_step(metrics, scenario, state.ensembles, truth.states[step], step, state.time)
        if on_step is not None:
            on_step(state)
    return metrics
