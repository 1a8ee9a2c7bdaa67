"""Static agent topology and consensus averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ScenarioError


@dataclass(frozen=True)
class Topology:
    """Binary adjacency matrix; row l lists the agents l receives from.

    Every agent is its own neighbor (self-loops required) and the matrix is
    fixed for the lifetime of a run.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"adjacency must be square, got shape {a.shape}")
        if not np.all((a == 0) | (a == 1)):
            raise DimensionError("adjacency entries must be 0 or 1")
        if not np.all(np.diag(a) == 1):
            raise DimensionError("every agent must appear in its own neighbor set")
        a = a.astype(np.int8)
        a.flags.writeable = False
        object.__setattr__(self, "adjacency", a)

    @property
    def n_agents(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, agent: int) -> tuple:
        """Ascending neighbor ids of an agent, itself included."""
        if not 0 <= agent < self.n_agents:
            raise DimensionError(f"agent {agent} outside [0, {self.n_agents})")
        return tuple(int(i) for i in np.flatnonzero(self.adjacency[agent]))

    def degree(self, agent: int) -> int:
        return len(self.neighbors(agent))

    @property
    def max_degree(self) -> int:
        return int(self.adjacency.sum(axis=1).max())


def topology_from_neighbor_lists(n_agents: int, neighbor_lists) -> Topology:
    """Build a topology from per-agent neighbor index lists."""
    a = np.zeros((n_agents, n_agents), dtype=np.int8)
    for l, nbrs in enumerate(neighbor_lists):
        for k in nbrs:
            if not 0 <= k < n_agents:
                raise DimensionError(f"neighbor index {k} outside [0, {n_agents})")
            a[l, k] = 1
    return Topology(a)


def is_connected(topology: Topology) -> bool:
    """Graph search on the symmetrized adjacency matrix."""
    n = topology.n_agents
    sym = (topology.adjacency + topology.adjacency.T) > 0
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        node = stack.pop()
        for other in np.flatnonzero(sym[node]):
            if not seen[other]:
                seen[other] = True
                stack.append(int(other))
    return bool(seen.all())


def check_gamma(gamma: float, topology: Topology) -> None:
    """Stability guard for the consensus step size."""
    if not 0 < gamma < 1 or gamma * topology.max_degree >= 1:
        raise ScenarioError(
            f"gamma out of stable range: need 0 < gamma < 1 and "
            f"gamma * max degree < 1, got gamma={gamma} with max degree "
            f"{topology.max_degree}"
        )


def consensus_step(states, topology: Topology, gamma: float, literal: bool = False):
    """One synchronous averaging update across all agents.

    Neighbor ensemble means are computed from the pre-update ensembles, then
    every particle of every agent moves by gamma times the summed pull
    toward those means. With ``literal=True`` the summand uses the agent's
    own mean for every neighbor, which scales the self-pull by the degree.
    Ensemble sizes may differ across agents; state dimensions may not.
    """
    if len(states) != topology.n_agents:
        raise DimensionError(
            f"got {len(states)} ensembles for {topology.n_agents} agents"
        )
    arrays = [np.asarray(s, dtype=float) for s in states]
    dims = {a.shape[-1] for a in arrays}
    if len(dims) != 1:
        raise DimensionError(f"ensembles disagree on state dimension: {sorted(dims)}")
    check_gamma(gamma, topology)
    means = [a.mean(axis=0) for a in arrays]
    updated = []
    for l, x in enumerate(arrays):
        nbrs = topology.neighbors(l)
        if literal:
            pull = len(nbrs) * (means[l] - x)
        else:
            pull = sum(means[k] for k in nbrs) - len(nbrs) * x
        updated.append(x + gamma * pull)
    return updated


@dataclass
class ParticleEnsemble:
    """M state vectors approximating one agent's posterior at a time step."""

    agent: int
    states: np.ndarray
    step: int = 0

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        if s.ndim != 2:
            raise DimensionError(f"particle states must be 2-D, got shape {s.shape}")
        self.states = s

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def mean(self) -> np.ndarray:
        return self.states.mean(axis=0)
