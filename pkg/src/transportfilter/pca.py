"""Principal component analysis with anchored lifting.

Projections are centered by default and truncation keeps the directions of
largest sample variance. Lifting back to the full space is anchored on a
reference vector so that only the retained subspace is modified: components
orthogonal to the basis pass through untouched instead of being zeroed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class PcaProjection:
    """Centered orthonormal truncated basis.

    ``basis`` columns are unit-norm principal directions in descending
    variance order; ``explained_variances`` holds the matching eigenvalues
    of the population sample covariance.
    """

    mean: np.ndarray
    basis: np.ndarray
    explained_variances: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        basis = np.asarray(self.basis, dtype=float)
        variances = np.asarray(self.explained_variances, dtype=float)
        if basis.ndim != 2 or mean.ndim != 1 or basis.shape[0] != mean.size:
            raise DimensionError(
                f"inconsistent projection shapes: mean {mean.shape}, basis {basis.shape}"
            )
        if variances.shape != (basis.shape[1],):
            raise DimensionError(
                f"expected {basis.shape[1]} explained variances, got {variances.shape}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "explained_variances", variances)

    @property
    def input_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def q(self) -> int:
        return self.basis.shape[1]


def fit(samples, q: int, center: bool = True) -> PcaProjection:
    """Fit a rank-q projection on rows of samples.

    The decomposition uses the population covariance (denominator M). Each
    basis column is flipped so its largest-magnitude entry is positive, ties
    broken by lowest index, which makes the fit deterministic. With
    ``center=False`` the mean is taken as zero and the second-moment matrix
    is decomposed instead.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"samples must be 2-D, got shape {x.shape}")
    m, n = x.shape
    if not 1 <= q <= min(n, m):
        raise DimensionError(f"q={q} outside [1, min(n={n}, M={m})]")
    if not np.all(np.isfinite(x)):
        raise DimensionError("samples contain non-finite entries")
    mean = x.mean(axis=0) if center else np.zeros(n)
    centered = x - mean
    cov = centered.T @ centered / m
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:q]
    variances = np.clip(eigenvalues[order], 0.0, None)
    basis = eigenvectors[:, order]
    for col in range(q):
        pivot = np.argmax(np.abs(basis[:, col]))
        if basis[pivot, col] < 0:
            basis[:, col] = -basis[:, col]
    return PcaProjection(mean, basis, variances)


def identity_projection(n: int) -> PcaProjection:
    """Full-rank no-op projection used when dimension reduction is disabled."""
    return PcaProjection(np.zeros(n), np.eye(n), np.ones(n))


def project(p: PcaProjection, x) -> np.ndarray:
    """Latent coordinates basis' (x - mean). Accepts vectors or rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.input_dim:
        raise DimensionError(
            f"input has dimension {x.shape[-1]}, projection expects {p.input_dim}"
        )
    return (x - p.mean) @ p.basis


def lift(p: PcaProjection, w, anchor) -> np.ndarray:
    """Replace the in-subspace part of anchor with latent coordinates w.

    Returns anchor + basis (w - project(anchor)); the orthogonal complement
    of the anchor, including its off-subspace mean offset, is preserved
    exactly. Accepts vectors or aligned rows.
    """
    w = np.asarray(w, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    if w.shape[-1] != p.q:
        raise DimensionError(f"latent input has dimension {w.shape[-1]}, expected {p.q}")
    return anchor + (w - project(p, anchor)) @ p.basis.T


def reconstruct(p: PcaProjection, w) -> np.ndarray:
    """Literal reconstruction mean + basis w (drops the orthogonal complement)."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != p.q:
        raise DimensionError(f"latent input has dimension {w.shape[-1]}, expected {p.q}")
    return p.mean + w @ p.basis.T
