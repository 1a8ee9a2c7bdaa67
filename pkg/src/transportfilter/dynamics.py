"""Relative-motion dynamics: linear Clohessy-Wiltshire translation and
nonlinear attitude with quaternion kinematics.

State layouts (Hill frame):

    cw-translation (n=6):  (x, y, z, xdot, ydot, zdot)
    cw-full       (n=13):  translation, then angular velocity (indices 6-8),
                           then unit quaternion (indices 9-12, scalar first)

Forecasting integrates the deterministic drift with classical RK4 substeps
and adds Euler-Maruyama diffusion increments sigma*sqrt(dt) to every
non-quaternion component after each substep; quaternions are renormalized
each substep instead, since additive noise would break the unit constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rngstreams
from .errors import DimensionError, SimulationError

TRANSLATION_DIM = 6
FULL_DIM = 13
OMEGA = slice(6, 9)
QUAT = slice(9, 13)


@dataclass(frozen=True)
class DynamicsParams:
    """Orbital rate, process-noise level, and integrator step.

    ``quat_sign`` selects the prefactor of the quaternion kinematics
    (-1 reproduces the minus-one-half convention used here; +1 gives the
    common plus-one-half convention). ``omega_orbit`` is the Hill-frame
    angular velocity; None means (0, 0, alpha), a frame rotating at the
    orbital rate about its normal axis.
    """

    alpha: float
    sigma: float
    dt_int: float
    quat_sign: float = -1.0
    omega_orbit: tuple | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.dt_int <= 0:
            raise ValueError("dt_int must be positive")
        if self.quat_sign not in (-1.0, 1.0):
            raise ValueError("quat_sign must be -1 or +1")
        if self.omega_orbit is not None:
            vec = tuple(float(v) for v in self.omega_orbit)
            if len(vec) != 3 or not all(math.isfinite(v) for v in vec):
                raise ValueError("omega_orbit must be three finite values")
            object.__setattr__(self, "omega_orbit", vec)

    def hill_rate(self) -> np.ndarray:
        if self.omega_orbit is not None:
            return np.asarray(self.omega_orbit)
        return np.array([0.0, 0.0, self.alpha])


def cw_matrix(alpha: float) -> np.ndarray:
    """System matrix of the linear CW translation dynamics."""
    a = np.zeros((6, 6))
    a[0, 3] = a[1, 4] = a[2, 5] = 1.0
    a[3, 0] = 3.0 * alpha**2
    a[3, 4] = 2.0 * alpha
    a[4, 3] = -2.0 * alpha
    a[5, 2] = -(alpha**2)
    return a


def cross_operator(omega) -> np.ndarray:
    """Skew-symmetric matrix with cross_operator(w) @ v == cross(w, v)."""
    w = np.asarray(omega, dtype=float).reshape(3)
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def rotation_from_quaternion(q) -> np.ndarray:
    """Scalar-first quaternion to direction cosine matrix.

    Accepts a single quaternion or rows of quaternions. Inputs within 1e-6
    of unit norm are renormalized; anything farther off is rejected.
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise DimensionError(f"quaternion must have 4 components, got {q.shape[-1]}")
    norm = np.linalg.norm(q, axis=-1)
    if np.any(norm < 1e-8):
        raise SimulationError("near-zero quaternion has no orientation")
    if np.any(np.abs(norm - 1.0) > 1e-6):
        worst = float(np.max(np.abs(norm - 1.0)))
        raise SimulationError(f"quaternion norm deviates from 1 by {worst:.3e}")
    q = q / norm[..., None]
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rot = np.empty(q.shape[:-1] + (3, 3))
    rot[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    rot[..., 0, 1] = 2.0 * (x * y - w * z)
    rot[..., 0, 2] = 2.0 * (x * z + w * y)
    rot[..., 1, 0] = 2.0 * (x * y + w * z)
    rot[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    rot[..., 1, 2] = 2.0 * (y * z - w * x)
    rot[..., 2, 0] = 2.0 * (x * z - w * y)
    rot[..., 2, 1] = 2.0 * (y * z + w * x)
    rot[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return rot


def attitude_drift(q, omega, params: DynamicsParams):
    """Time derivatives (q_dot, omega_dot) of the relative attitude.

    omega_dot = [omega]_x R(q) omega_orbit for a torque-free deputy (zero
    inertial angular acceleration); q_dot follows the quaternion kinematics
    with the configured sign convention. Vectorized over leading axes.
    """
    q = np.asarray(q, dtype=float)
    omega = np.asarray(omega, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-8):
        raise SimulationError("near-zero quaternion in attitude drift")
    rot = rotation_from_quaternion(q / norm)
    hill = rot @ params.hill_rate()
    omega_dot = np.cross(omega, hill)
    s = 0.5 * params.quat_sign
    q1, q2, q3, q4 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    w1, w2, w3 = omega[..., 0], omega[..., 1], omega[..., 2]
    q_dot = np.stack(
        [
            s * (-q2 * w1 - q3 * w2 - q4 * w3),
            s * (q1 * w1 + q4 * w2 - q3 * w3),
            s * (-q4 * w1 + q1 * w2 + q2 * w3),
            s * (q3 * w1 - q2 * w2 + q1 * w3),
        ],
        axis=-1,
    )
    return q_dot, omega_dot


def translation_drift(states, params: DynamicsParams) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    return states @ cw_matrix(params.alpha).T


def full_drift(states, params: DynamicsParams) -> np.ndarray:
    """Deterministic derivative of the combined 13-dimensional state."""
    states = np.asarray(states, dtype=float)
    if states.shape[-1] != FULL_DIM:
        raise DimensionError(f"full state must have {FULL_DIM} components")
    out = np.empty_like(states)
    out[..., :TRANSLATION_DIM] = states[..., :TRANSLATION_DIM] @ cw_matrix(params.alpha).T
    q_dot, omega_dot = attitude_drift(states[..., QUAT], states[..., OMEGA], params)
    out[..., OMEGA] = omega_dot
    out[..., QUAT] = q_dot
    return out


@dataclass(frozen=True)
class DynamicsModel:
    name: str
    dim: int
    has_attitude: bool

    @property
    def noise_dim(self) -> int:
        # Noise enters every non-quaternion component.
        return self.dim - 4 if self.has_attitude else self.dim

    def drift(self, states, params: DynamicsParams) -> np.ndarray:
        if self.has_attitude:
            return full_drift(states, params)
        return translation_drift(states, params)


CW_TRANSLATION = DynamicsModel("cw-translation", TRANSLATION_DIM, False)
CW_FULL = DynamicsModel("cw-full", FULL_DIM, True)

MODELS = {m.name: m for m in (CW_TRANSLATION, CW_FULL)}


def rk4_step(drift, state, dt: float):
    """One classical Runge-Kutta step; drift maps state to derivative."""
    if dt <= 0:
        raise SimulationError("integration step must be positive")
    k1 = drift(state)
    k2 = drift(state + 0.5 * dt * k1)
    k3 = drift(state + 0.5 * dt * k2)
    k4 = drift(state + dt * k3)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise SimulationError("non-finite state after integration step")
    return out


def substep_count(dt_obs: float, dt_int: float) -> int:
    ratio = dt_obs / dt_int
    count = round(ratio)
    if count < 1 or abs(ratio - count) > 1e-9 * max(1.0, abs(ratio)):
        raise SimulationError(
            f"dt_obs {dt_obs} is not an integer multiple of dt_int {dt_int}"
        )
    return count


def advance(states, n_sub: int, model: DynamicsModel, params: DynamicsParams, noise=None):
    """Advance rows of states by n_sub RK4 substeps with optional diffusion.

    ``noise`` has shape (rows, n_sub, noise_dim) of standard normals; it is
    scaled by sigma*sqrt(dt_int) and added after each substep. Quaternions
    are renormalized every substep.
    """
    x = np.array(states, dtype=float)
    scale = params.sigma * math.sqrt(params.dt_int)

    def drift(s):
        return model.drift(s, params)

    for j in range(n_sub):
        x = rk4_step(drift, x, params.dt_int)
        if noise is not None and scale > 0:
            x[..., : model.noise_dim] += scale * noise[..., j, :]
        if model.has_attitude:
            x[..., QUAT] /= np.linalg.norm(x[..., QUAT], axis=-1, keepdims=True)
    return x


def forecast(states, dt_obs: float, model: DynamicsModel, params: DynamicsParams, seed: int, step: int, agent: int) -> np.ndarray:
    """Propagate every particle independently over one observation interval.

    Per-particle noise comes from the stream keyed (step, agent, particle,
    FORECAST), so results are reproducible for a fixed scenario seed no
    matter how particles are scheduled.
    """
    x = np.asarray(states, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DimensionError(
            f"ensemble must have shape (M, {model.dim}), got {x.shape}"
        )
    n_sub = substep_count(dt_obs, params.dt_int)
    noise = None
    if params.sigma > 0:
        noise = rngstreams.particle_normals(
            seed, step, agent, rngstreams.FORECAST, x.shape[0], (n_sub, model.noise_dim)
        )
    try:
        return advance(x, n_sub, model, params, noise)
    except SimulationError as exc:
        raise SimulationError(f"forecast failed at step {step}, agent {agent}: {exc}") from exc
