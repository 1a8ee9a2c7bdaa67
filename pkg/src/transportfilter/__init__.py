"""Distributed nonlinear filtering with affine triangular transport maps.

Networked agents assimilate heterogeneous partial observations of a shared
dynamic state by fitting monotone triangular maps to joint
(observation, state) particle samples in a per-step PCA latent space, and
exchange information through consensus averaging. Bundled scenarios cover
linear Clohessy-Wiltshire translation and combined translation/attitude
satellite relative motion.
"""

from .errors import (
    DimensionError,
    EstimationError,
    NonMonotoneMapError,
    ScenarioError,
    SimulationError,
    TransportFilterError,
    UndefinedAngleError,
)
from .filtering import (
    AssimilationOptions,
    FilterState,
    MetricsLog,
    MetricsRow,
    consensus_filter_step,
    initial_ensemble,
    pca_map_update,
    run_filter,
)
from .network import ParticleEnsemble, Topology, consensus_step, is_connected
from .observation import ObservationSpec, observe, sample_predicted_observations, stack_neighbors
from .pca import PcaProjection, fit as pca_fit, lift, project
from .scenario import AgentSpec, ScenarioConfig, load_scenario, resolve, with_overrides
from .simulate import TruthData, simulate_truth
from .transport import (
    AffineTriangularMap,
    MapComponent,
    SolverOptions,
    closed_form_gaussian_map,
    component_gradient,
    component_objective,
    estimate_component,
    estimate_map,
    evaluate,
    invert_lower_block,
    prior_to_posterior,
)

__version__ = "0.1.0"

__all__ = [
    "AffineTriangularMap",
    "AgentSpec",
    "AssimilationOptions",
    "DimensionError",
    "EstimationError",
    "FilterState",
    "MapComponent",
    "MetricsLog",
    "MetricsRow",
    "NonMonotoneMapError",
    "ObservationSpec",
    "ParticleEnsemble",
    "PcaProjection",
    "ScenarioConfig",
    "ScenarioError",
    "SimulationError",
    "SolverOptions",
    "Topology",
    "TransportFilterError",
    "TruthData",
    "UndefinedAngleError",
    "closed_form_gaussian_map",
    "component_gradient",
    "component_objective",
    "consensus_filter_step",
    "consensus_step",
    "estimate_component",
    "estimate_map",
    "evaluate",
    "initial_ensemble",
    "invert_lower_block",
    "is_connected",
    "lift",
    "load_scenario",
    "observe",
    "pca_fit",
    "pca_map_update",
    "prior_to_posterior",
    "project",
    "resolve",
    "run_filter",
    "sample_predicted_observations",
    "simulate_truth",
    "stack_neighbors",
    "with_overrides",
]
