"""Observation functions and neighbor stacking.

Four sensor forms are supported on selected state indices:

    direct        y = x[dims]
    differential  y = x_curr[dims] - x_prev[dims]
    rangefinder   y = ||x[dims]||_2
    angle         y = atan2(x[dims[1]], x[dims[0]])

Independent Gaussian noise of the configured standard deviation is added to
every output component, including the nonlinear ones. The angle form uses
the quadrant-aware two-argument arctangent with range (-pi, pi] by default;
a flag restores the literal arctan(y/x) branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rngstreams
from .errors import DimensionError, UndefinedAngleError

KINDS = ("direct", "differential", "rangefinder", "angle")

# Below this magnitude on both selected components the angle is undefined.
ORIGIN_EPS = 1e-12


@dataclass(frozen=True)
class ObservationSpec:
    """Sensor kind, observed state indices, and noise level."""

    kind: str
    dims: tuple
    noise_std: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DimensionError(f"unknown observation kind {self.kind!r}")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) == 0:
            raise DimensionError("observation needs at least one state index")
        if any(d < 0 for d in dims):
            raise DimensionError(f"negative state index in {dims}")
        if self.kind == "angle" and len(dims) != 2:
            raise DimensionError(f"angle observation needs exactly 2 indices, got {len(dims)}")
        if self.noise_std < 0:
            raise DimensionError("noise_std must be nonnegative")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "noise_std", float(self.noise_std))

    @property
    def output_dim(self) -> int:
        return 1 if self.kind in ("rangefinder", "angle") else len(self.dims)


def noiseless(spec: ObservationSpec, x_curr, x_prev=None, *, quadrant_angle: bool = True, origin_mode: str = "error") -> np.ndarray:
    """Evaluate the observation function without noise.

    Accepts a single state vector or rows of states. ``origin_mode`` selects
    what an angle observation does when both components vanish: "error"
    raises, "zero" returns 0 so a stray particle cannot abort a filter step.
    """
    x = np.asarray(x_curr, dtype=float)
    if max(spec.dims) >= x.shape[-1]:
        raise DimensionError(
            f"observation indices {spec.dims} exceed state dimension {x.shape[-1]}"
        )
    if spec.kind == "direct":
        return x[..., spec.dims]
    if spec.kind == "differential":
        if x_prev is None:
            raise DimensionError("differential observation requires the previous state")
        prev = np.asarray(x_prev, dtype=float)
        return x[..., spec.dims] - prev[..., spec.dims]
    if spec.kind == "rangefinder":
        return np.linalg.norm(x[..., spec.dims], axis=-1, keepdims=True)
    # angle
    a = x[..., spec.dims[0]]
    b = x[..., spec.dims[1]]
    at_origin = (np.abs(a) < ORIGIN_EPS) & (np.abs(b) < ORIGIN_EPS)
    if np.any(at_origin):
        if origin_mode == "error":
            raise UndefinedAngleError(
                f"angle observation undefined at the origin (dims {spec.dims})"
            )
        a = np.where(at_origin, 1.0, a)
        b = np.where(at_origin, 0.0, b)
    if quadrant_angle:
        theta = np.arctan2(b, a)
        theta = np.where(theta == -np.pi, np.pi, theta)
    else:
        with np.errstate(divide="ignore"):
            theta = np.arctan(b / a)
    return theta[..., None]


def observe(spec: ObservationSpec, x_curr, x_prev=None, rng=None, *, quadrant_angle: bool = True, origin_mode: str = "error") -> np.ndarray:
    """Noisy observation: the noiseless value plus independent Gaussian noise."""
    values = noiseless(spec, x_curr, x_prev, quadrant_angle=quadrant_angle, origin_mode=origin_mode)
    if spec.noise_std > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_std > 0")
        values = values + spec.noise_std * rng.standard_normal(values.shape)
    return values


def stacked_dim(agent: int, topology, specs) -> int:
    """Total dimension of the concatenated neighbor observation vector."""
    return int(sum(specs[l].output_dim for l in topology.neighbors(agent)))


def stack_neighbors(agent: int, topology, specs, x_curr, x_prev=None, rng=None, *, quadrant_angle: bool = True, origin_mode: str = "error") -> np.ndarray:
    """Concatenate fresh noisy observations of all neighbors of an agent.

    Neighbors contribute in ascending id order, so the layout is fixed for
    a given topology.
    """
    blocks = [
        observe(specs[l], x_curr, x_prev, rng, quadrant_angle=quadrant_angle, origin_mode=origin_mode)
        for l in topology.neighbors(agent)
    ]
    return np.concatenate(blocks, axis=-1)


def stacked_true_observation(agent: int, topology, per_agent_obs) -> np.ndarray:
    """Concatenate already-realized sensor readings over an agent's neighbors.

    Every agent's sensor fires once per step; neighbors receive that same
    realization, so stacking selects from the shared per-agent readings.
    """
    return np.concatenate([per_agent_obs[l] for l in topology.neighbors(agent)], axis=-1)


def sample_predicted_observations(agent: int, topology, specs, ensemble_curr, ensemble_prev, seed: int, step: int, *, quadrant_angle: bool = True) -> np.ndarray:
    """Per-particle stacked noisy observations of an agent's neighborhood.

    Particle i of the previous ensemble must correspond to particle i of the
    current one (differential sensors read both). Noise for particle i comes
    from the stream keyed (step, agent, particle=i, PREDICTED_OBS); angle
    observations of a particle sitting at the origin return 0 rather than
    aborting the step.
    """
    x = np.asarray(ensemble_curr, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"ensemble must be 2-D, got shape {x.shape}")
    if ensemble_prev is not None:
        prev = np.asarray(ensemble_prev, dtype=float)
        if prev.shape != x.shape:
            raise DimensionError(
                f"previous ensemble shape {prev.shape} does not match {x.shape}"
            )
    neighbors = topology.neighbors(agent)
    blocks = [
        noiseless(specs[l], x, ensemble_prev, quadrant_angle=quadrant_angle, origin_mode="zero")
        for l in neighbors
    ]
    base = np.concatenate(blocks, axis=-1)
    stds = np.concatenate(
        [np.full(specs[l].output_dim, specs[l].noise_std) for l in neighbors]
    )
    if np.any(stds > 0):
        noise = rngstreams.particle_normals(
            seed, step, agent, rngstreams.PREDICTED_OBS, x.shape[0], (base.shape[1],)
        )
        base = base + noise * stds
    return base
