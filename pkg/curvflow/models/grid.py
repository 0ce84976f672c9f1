from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from curvflow.utils.errors import GridError


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """
    Nodes and quadrature weights on S^1 or S^2.

    n=1: ``theta`` holds N equispaced angles in [0, 2pi) and ``phi`` is None.
    n=2: cell-centred colatitudes ``theta`` (N_theta rows, none at a pole) and
    longitudes ``phi`` (N_phi columns, even). Field values use the node shape
    ``(N,)`` or ``(N_theta, N_phi)``; weights have the same shape and sum to |S^n|.
    """

    n: int
    theta: np.ndarray
    phi: Optional[np.ndarray]
    weights: np.ndarray
    h_theta: float
    h_phi: float
    points: np.ndarray = field(repr=False)
    frame: np.ndarray = field(repr=False)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.weights.shape

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def area(self) -> float:
        return 2.0 * np.pi if self.n == 1 else 4.0 * np.pi

    @property
    def h_min(self) -> float:
        if self.n == 1:
            return self.h_theta
        return min(self.h_theta, float(np.sin(self.theta[0])) * self.h_phi)

    def describe(self) -> dict:
        if self.n == 1:
            return {"n": 1, "n_theta": int(self.theta.size)}
        return {"n": 2, "n_theta": int(self.theta.size), "n_phi": int(self.phi.size)}


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridError(f"field shape {values.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values.ravel()))[0])
            raise GridError(f"non-finite field value at node {bad}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)


@dataclass(frozen=True, eq=False)
class FrameTensorField:
    """Gradient ``(..., n)`` and covariant Hessian ``(..., n, n)`` in the orthonormal frame."""

    grid: SphereGrid
    gradient: np.ndarray
    hessian: np.ndarray

    @property
    def gradient_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.gradient ** 2, axis=-1))
