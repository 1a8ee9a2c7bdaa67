"""Affine monotone triangular transport maps.

A triangular map on R^d sends component k to a function of inputs 1..k only.
Restricting every component to an affine function with a strictly positive
weight on its own (diagonal) input keeps the map invertible by forward
substitution and makes maximum-likelihood estimation against a standard
normal reference a set of independent convex problems, one per component:

    L_k(u) = (1/M) sum_i [ 1/2 * U_k(z_i)^2 - log u_k ],
    U_k(z) = u_0 + sum_{l<=k} u_l z_l.

For the affine family the exact joint optimum is available in closed form:
with mu and Sigma the sample mean and (population) covariance, the minimizer
is z -> L (z - mu) where L is the inverse of the lower Cholesky factor of
Sigma. The iterative solver exists to mirror the optimization formulation
and for future non-affine component families; both routes must agree.

Maps over a joint (observation, state) space carry an upper observation
block of size ``obs_block_size``; only the lower state block is needed for
conditional sampling, so estimation fills the upper block with identity
placeholders unless asked otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EstimationError, NonMonotoneMapError

# Hard floor keeping diagonal weights strictly positive during optimization.
DIAGONAL_FLOOR = 1e-10

# Relative jitter added to sample covariances before Cholesky factorization;
# guards rank deficiency from duplicate particles.
COVARIANCE_JITTER = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    """Estimation settings: 'closed-form' or iterative 'gradient' method."""

    method: str = "closed-form"
    max_iters: int = 10_000
    tol: float = 1e-5

    def __post_init__(self):
        if self.method not in ("closed-form", "gradient"):
            raise ValueError(f"unknown solver method {self.method!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class MapComponent:
    """One row of a triangular map: z -> intercept + weights . z[:index].

    ``index`` is the 1-based position in the map, so there are exactly
    ``index`` weights and ``weights[-1]`` multiplies the diagonal input.
    Positivity of the diagonal weight is required wherever the map is
    evaluated or inverted, but not at construction, so that objective
    evaluation can signal an infeasible iterate instead of crashing.
    """

    index: int
    intercept: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        if self.index < 1:
            raise DimensionError(f"component index must be >= 1, got {self.index}")
        if w.ndim != 1 or w.size != self.index:
            raise DimensionError(
                f"component {self.index} needs {self.index} weights, got shape {w.shape}"
            )
        if not (np.all(np.isfinite(w)) and math.isfinite(self.intercept)):
            raise DimensionError(f"component {self.index} has non-finite coefficients")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def diagonal(self) -> float:
        return float(self.weights[-1])


def identity_component(index: int) -> MapComponent:
    w = np.zeros(index)
    w[-1] = 1.0
    return MapComponent(index, 0.0, w)


@dataclass(frozen=True)
class AffineTriangularMap:
    """Lower-triangular affine map split into observation and state blocks.

    Components 1..obs_block_size read observation inputs only; components
    obs_block_size+1..dim_total additionally read state inputs and form the
    block used for conditional sampling. Every diagonal weight must be
    strictly positive.
    """

    dim_total: int
    components: tuple
    obs_block_size: int = 0

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != self.dim_total:
            raise DimensionError(
                f"expected {self.dim_total} components, got {len(comps)}"
            )
        for pos, comp in enumerate(comps, start=1):
            if comp.index != pos:
                raise DimensionError(
                    f"component at position {pos} has index {comp.index}"
                )
            if comp.diagonal <= 0:
                raise NonMonotoneMapError(
                    f"component {pos} has non-positive diagonal weight {comp.diagonal}"
                )
        if not 0 <= self.obs_block_size <= self.dim_total:
            raise DimensionError(
                f"obs_block_size {self.obs_block_size} outside [0, {self.dim_total}]"
            )
        object.__setattr__(self, "components", comps)

    @property
    def state_dim(self) -> int:
        return self.dim_total - self.obs_block_size


def _dense_rows(components, dim_total):
    """Stack components into a dense (len, dim_total) weight matrix + intercepts."""
    weights = np.zeros((len(components), dim_total))
    intercepts = np.empty(len(components))
    for row, comp in enumerate(components):
        weights[row, : comp.index] = comp.weights
        intercepts[row] = comp.intercept
    return weights, intercepts


def evaluate(tmap: AffineTriangularMap, z) -> np.ndarray:
    """Apply the full map. Accepts a single vector or rows of vectors."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != tmap.dim_total:
        raise DimensionError(
            f"input has dimension {z.shape[-1]}, map expects {tmap.dim_total}"
        )
    weights, intercepts = _dense_rows(tmap.components, tmap.dim_total)
    return z @ weights.T + intercepts


def evaluate_lower_block(tmap: AffineTriangularMap, z) -> np.ndarray:
    """Apply only the state-block components to full (obs, state) inputs."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != tmap.dim_total:
        raise DimensionError(
            f"input has dimension {z.shape[-1]}, map expects {tmap.dim_total}"
        )
    lower = tmap.components[tmap.obs_block_size :]
    weights, intercepts = _dense_rows(lower, tmap.dim_total)
    return z @ weights.T + intercepts


def invert_lower_block(tmap: AffineTriangularMap, y_star, r) -> np.ndarray:
    """Solve the state block for its inputs given observation values y_star.

    Forward substitution over the state components: each affine component is
    solved for its diagonal input using y_star and the previously recovered
    entries. ``r`` may be a single vector or rows of vectors.
    """
    d_bar = tmap.obs_block_size
    n_x = tmap.state_dim
    y_star = np.asarray(y_star, dtype=float).reshape(-1)
    if y_star.size != d_bar:
        raise DimensionError(
            f"conditioning vector has dimension {y_star.size}, expected {d_bar}"
        )
    r = np.asarray(r, dtype=float)
    single = r.ndim == 1
    rows = np.atleast_2d(r)
    if rows.shape[-1] != n_x:
        raise DimensionError(
            f"residual has dimension {rows.shape[-1]}, expected {n_x}"
        )
    x = np.empty_like(rows)
    for j, comp in enumerate(tmap.components[d_bar:]):
        w = comp.weights
        known = comp.intercept + w[:d_bar] @ y_star
        if j > 0:
            known = known + x[:, :j] @ w[d_bar : d_bar + j]
        x[:, j] = (rows[:, j] - known) / w[-1]
    return x[0] if single else x


def prior_to_posterior(tmap: AffineTriangularMap, y_star, y_latents, x_latents) -> np.ndarray:
    """Transport joint prior samples to posterior samples conditioned on y_star.

    Each (y_i, x_i) pair is pushed through the state block of the map and
    pulled back through its inverse anchored at y_star. When y_i equals
    y_star the result is x_i unchanged.
    """
    y_latents = np.asarray(y_latents, dtype=float)
    x_latents = np.asarray(x_latents, dtype=float)
    joint = np.concatenate([y_latents, x_latents], axis=-1)
    references = evaluate_lower_block(tmap, joint)
    return invert_lower_block(tmap, y_star, references)


def _samples_matrix(samples, k: int) -> np.ndarray:
    z = np.asarray(samples, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.shape[0] < 1:
        raise DimensionError(f"samples must be a nonempty 2-D array, got shape {z.shape}")
    if z.shape[1] < k:
        raise DimensionError(
            f"component {k} needs samples with at least {k} columns, got {z.shape[1]}"
        )
    if not np.all(np.isfinite(z)):
        raise DimensionError("samples contain non-finite entries")
    return z[:, :k]


def component_objective(comp: MapComponent, samples) -> float:
    """Sample average of 1/2 * U(z)^2 - log u_k; +inf when u_k <= 0."""
    z = _samples_matrix(samples, comp.index)
    if comp.diagonal <= 0:
        return math.inf
    vals = z @ comp.weights + comp.intercept
    return 0.5 * float(np.mean(vals**2)) - math.log(comp.diagonal)


def component_gradient(comp: MapComponent, samples) -> np.ndarray:
    """Gradient of the component objective w.r.t. (intercept, weights).

    Entry l is mean_i U(z_i) * z_il (with z_i0 = 1 for the intercept), minus
    1/u_k on the diagonal entry.
    """
    z = _samples_matrix(samples, comp.index)
    if comp.diagonal <= 0:
        raise NonMonotoneMapError(
            f"component {comp.index} gradient undefined for diagonal {comp.diagonal}"
        )
    m = z.shape[0]
    vals = z @ comp.weights + comp.intercept
    grad = np.empty(comp.index + 1)
    grad[0] = vals.mean()
    grad[1:] = (vals @ z) / m
    grad[-1] -= 1.0 / comp.diagonal
    return grad


def _check_covariance(z: np.ndarray, k: int) -> None:
    centered = z - z.mean(axis=0)
    cov = centered.T @ centered / z.shape[0]
    cov = np.atleast_2d(cov)
    jitter = COVARIANCE_JITTER * np.trace(cov) / cov.shape[0]
    try:
        np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise EstimationError(
            f"component {k}: sample covariance of inputs 1..{k} is singular"
        ) from exc


def estimate_component(samples, k: int, solver: SolverOptions = SolverOptions(), start: MapComponent | None = None) -> MapComponent:
    """Minimize the component objective by projected gradient descent.

    The log barrier of the objective keeps iterates away from u_k = 0; steps
    that would cross the hard floor are backtracked. Step sizes use the
    Barzilai-Borwein estimate safeguarded by an Armijo line search. The
    problem is convex, so the result is start-independent up to tolerance.
    """
    z = _samples_matrix(samples, k)
    m = z.shape[0]
    if m < k + 1:
        raise EstimationError(f"component {k}: need at least {k + 1} samples, got {m}")
    _check_covariance(z, k)

    # Gram matrix of (1, z); objective = 1/2 u' G u - log u_k.
    ztilde = np.column_stack([np.ones(m), z])
    gram = ztilde.T @ ztilde / m

    if start is None:
        u = np.zeros(k + 1)
        u[-1] = 1.0 / math.sqrt(gram[-1, -1] - gram[0, -1] ** 2)
    else:
        if start.index != k:
            raise DimensionError(f"starting component has index {start.index}, expected {k}")
        if start.diagonal <= 0:
            raise NonMonotoneMapError("starting component must have a positive diagonal")
        u = np.concatenate([[start.intercept], start.weights])

    def value(vec):
        if vec[-1] <= 0:
            return math.inf
        return 0.5 * float(vec @ gram @ vec) - math.log(vec[-1])

    def gradient(vec):
        g = gram @ vec
        g[-1] -= 1.0 / vec[-1]
        return g

    f = value(u)
    g = gradient(u)
    step = 1.0 / (np.trace(gram) + 1.0 / u[-1] ** 2)
    residual = float(np.linalg.norm(g))
    for _ in range(solver.max_iters):
        if residual <= solver.tol:
            return MapComponent(k, u[0], u[1:])
        gnorm_sq = residual * residual
        while True:
            candidate = u - step * g
            if candidate[-1] >= DIAGONAL_FLOOR:
                f_new = value(candidate)
                if f_new <= f - 1e-4 * step * gnorm_sq:
                    break
            step *= 0.5
            if step < 1e-18:
                raise EstimationError(
                    f"component {k}: line search stalled (residual {residual:.3e})"
                )
        g_new = gradient(candidate)
        du = candidate - u
        dg = g_new - g
        curvature = float(du @ dg)
        step = float(du @ du) / curvature if curvature > 0 else step * 2.0
        step = min(max(step, 1e-16), 1e16)
        u, g, f = candidate, g_new, f_new
        residual = float(np.linalg.norm(g))
    if residual <= solver.tol:
        return MapComponent(k, u[0], u[1:])
    raise EstimationError(
        f"component {k}: no convergence within {solver.max_iters} iterations "
        f"(residual {residual:.3e})"
    )


def closed_form_gaussian_map(samples, obs_block_size: int = 0) -> AffineTriangularMap:
    """Exact affine-family optimum: z -> L (z - mu) with L inv-Cholesky.

    ``mu`` and ``Sigma`` are the sample mean and population covariance; L is
    the inverse of the lower Cholesky factor of Sigma, so the pushforward of
    the empirical Gaussian fit is standard normal.
    """
    z = np.asarray(samples, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    dim = z.shape[1]
    z = _samples_matrix(z, dim)
    mu = z.mean(axis=0)
    centered = z - mu
    cov = centered.T @ centered / z.shape[0]
    jitter = COVARIANCE_JITTER * np.trace(cov) / dim
    try:
        chol = np.linalg.cholesky(cov + jitter * np.eye(dim))
    except np.linalg.LinAlgError as exc:
        raise EstimationError("sample covariance is not positive definite") from exc
    lmat = np.linalg.solve(chol, np.eye(dim))
    shift = lmat @ mu
    components = [
        MapComponent(k + 1, -shift[k], lmat[k, : k + 1]) for k in range(dim)
    ]
    return AffineTriangularMap(dim, tuple(components), obs_block_size)


def estimate_map(samples, obs_block_size: int, solver: SolverOptions = SolverOptions(), estimate_obs_block: bool = False) -> AffineTriangularMap:
    """Estimate the map for joint samples, fitting the state block only.

    Observation-block components are identity placeholders unless
    ``estimate_obs_block`` is set; only the state block enters conditional
    sampling. Components are independent and could be fit in parallel.
    """
    z = np.asarray(samples, dtype=float)
    if z.ndim != 2:
        raise DimensionError(f"samples must be 2-D, got shape {z.shape}")
    dim = z.shape[1]
    if not 0 <= obs_block_size <= dim:
        raise DimensionError(f"obs_block_size {obs_block_size} outside [0, {dim}]")
    first = 0 if estimate_obs_block else obs_block_size
    if solver.method == "closed-form":
        full = closed_form_gaussian_map(z)
        fitted = full.components[first:]
    else:
        fitted = [estimate_component(z, k, solver) for k in range(first + 1, dim + 1)]
    components = [identity_component(k) for k in range(1, first + 1)]
    components.extend(fitted)
    return AffineTriangularMap(dim, tuple(components), obs_block_size)
