"""Visibility-weighted reduction of spherical-harmonic color coefficients.

Pixel-aligned scenes are only ever observed from the cameras that produced
them, so most of the SH color space is dead weight. A small set of rays is
sampled through each view (a 3x3 grid of image positions), the mean absolute
basis response along those rays gives a per-basis visibility weight, and a
weighted eigenbasis of the coefficient matrix maps the D-dimensional color
vectors to k <= D components:

    forward:  Z = W^T diag(w) X
    inverse:  X^ = diag(w)^-1 W Z

with W the top-k eigenvectors of the uncentered second moment of diag(w) X.
At k = D the mapping is exactly invertible; for k < D the discarded energy is
the sum of the trailing eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .scene import CameraView
from .sh import eval_sh_bases, num_bases

WEIGHT_FLOOR = 1e-4
DEFAULT_COMPONENTS = 6
RAY_GRID = 3


def sample_view_directions(cameras: Sequence[CameraView], grid: int = RAY_GRID) -> np.ndarray:
    """World-space unit ray directions through a grid x grid pattern per view.

    Rays pass through image positions ((c + 0.5)/grid * W, (r + 0.5)/grid * H)
    and point from the camera into the scene.
    """
    if grid < 1:
        raise ValidationError(f"ray grid must be >= 1, got {grid}")
    dirs = []
    for cam in cameras:
        u = (np.arange(grid) + 0.5) / grid * cam.width
        v = (np.arange(grid) + 0.5) / grid * cam.height
        uu, vv = np.meshgrid(u, v)
        rays_cam = np.stack(
            [(uu - cam.cx) / cam.fx, (vv - cam.cy) / cam.fy, np.ones_like(uu)], axis=-1
        ).reshape(-1, 3)
        rays = rays_cam @ cam.R  # R^T applied to row vectors
        dirs.append(rays / np.linalg.norm(rays, axis=1, keepdims=True))
    if not dirs:
        return np.zeros((0, 3))
    return np.concatenate(dirs, axis=0)


def visibility_weights(dirs: np.ndarray, degree: int, floor: float = WEIGHT_FLOOR) -> np.ndarray:
    """Mean |basis response| along the sampled rays, one weight per coefficient.

    Each basis function's weight is replicated across the three color channels
    to match the coefficient layout (index 3*b + channel), and floored at
    `floor` so never-visible bases stay invertible.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    if dirs.ndim != 2 or dirs.shape[1] != 3 or dirs.shape[0] == 0:
        raise ValidationError(f"need a nonempty (N, 3) direction array, got {dirs.shape}")
    basis = np.abs(eval_sh_bases(degree, dirs)).mean(axis=0)
    return np.repeat(np.maximum(basis, floor), 3)


@dataclass
class ReductionBasis:
    """Fitted reduction: weights (D,), orthonormal matrix (D, k), eigenvalues (k,)."""

    weights: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.weights.shape[0]:
            raise ValidationError(
                f"basis matrix {self.matrix.shape} does not match {self.weights.shape[0]} weights"
            )
        if np.any(self.weights <= 0):
            raise ValidationError("visibility weights must be positive")
        if self.eigenvalues is None:
            self.eigenvalues = np.zeros(self.matrix.shape[1])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def identity(cls, dim: int) -> "ReductionBasis":
        """Pass-through basis (k = D, unit weights); used when reduction is disabled."""
        return cls(weights=np.ones(dim), matrix=np.eye(dim))

    def forward(self, coeffs: np.ndarray) -> np.ndarray:
        """Reduce (D, M) coefficient columns to (k, M) components."""
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.shape[0] != self.dim:
            raise ValidationError(f"coefficients have {coeffs.shape[0]} rows, basis is {self.dim}-dim")
        return self.matrix.T @ (self.weights[:, None] * coeffs)

    def inverse(self, components: np.ndarray) -> np.ndarray:
        """Expand (k, M) components back to (D, M) coefficients."""
        components = np.asarray(components, dtype=np.float64)
        if components.shape[0] != self.k:
            raise ValidationError(f"components have {components.shape[0]} rows, basis keeps {self.k}")
        return (self.matrix @ components) / self.weights[:, None]


def fit_reduction_basis(coeffs: np.ndarray, weights: np.ndarray, k: int) -> ReductionBasis:
    """Fit the weighted eigenbasis of (D, M) coefficient columns.

    The uncentered second moment C = (1/M) Y Y^T of the weighted coefficients
    Y = diag(w) X is eigendecomposed; the k eigenvectors with the largest
    eigenvalues are kept, ordered by descending eigenvalue (ties broken by
    original index) and sign-canonicalized so each column's largest-magnitude
    entry is positive. Deterministic for identical inputs.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if coeffs.ndim != 2:
        raise ValidationError(f"coefficients must be (D, M), got {coeffs.shape}")
    d, m = coeffs.shape
    if weights.shape[0] != d:
        raise ValidationError(f"{weights.shape[0]} weights for {d}-dim coefficients")
    if not 1 <= k <= d:
        raise ValidationError(f"k must be in [1, {d}], got {k}")
    if m == 0:
        raise ValidationError("cannot fit a basis to zero coefficient columns")

    y = weights[:, None] * coeffs
    second_moment = (y @ y.T) / m
    eigvals, eigvecs = np.linalg.eigh(second_moment)
    order = np.argsort(-eigvals, kind="stable")[:k]
    vals = eigvals[order]
    vecs = eigvecs[:, order]
    for col in range(vecs.shape[1]):
        lead = int(np.argmax(np.abs(vecs[:, col])))
        if vecs[lead, col] < 0:
            vecs[:, col] = -vecs[:, col]
    return ReductionBasis(weights=weights, matrix=vecs, eigenvalues=vals)
