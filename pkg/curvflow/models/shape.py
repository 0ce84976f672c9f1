from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from curvflow.models.grid import ScalarField, SphereGrid


@dataclass(frozen=True, eq=False)
class SupportShape:
    """
    Convex body through its support function u on the normal directions x.

    Caches: ``du`` (..., n), ``hess`` = D^2 u and ``h`` = D^2 u + u I (..., n, n),
    ``radii`` ascending eigenvalues of h, ``rho`` = |Du + u x| and ``det_h`` = 1/K.
    """

    u: ScalarField
    du: np.ndarray = field(repr=False)
    hess: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    radii: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    det_h: np.ndarray = field(repr=False)

    representation = "support"

    @property
    def grid(self) -> SphereGrid:
        return self.u.grid

    @property
    def values(self) -> np.ndarray:
        return self.u.values

    @property
    def is_convex(self) -> bool:
        return bool(np.min(self.radii) > 0)

    @property
    def gauss_curvature(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / self.det_h


@dataclass(frozen=True, eq=False)
class RadialShape:
    """
    Star-shaped hypersurface through its radial function rho on directions xi.

    Caches: ``gamma`` = log rho, ``dgamma``, ``d2gamma``, ``omega`` = sqrt(1 + |D gamma|^2),
    the symmetrized Weingarten matrix ``weingarten`` and ascending ``curvatures``.
    """

    rho: ScalarField
    gamma: np.ndarray = field(repr=False)
    dgamma: np.ndarray = field(repr=False)
    d2gamma: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    weingarten: np.ndarray = field(repr=False)
    curvatures: np.ndarray = field(repr=False)

    representation = "radial"

    @property
    def grid(self) -> SphereGrid:
        return self.rho.grid

    @property
    def values(self) -> np.ndarray:
        return self.rho.values

    @property
    def support_values(self) -> np.ndarray:
        """u = rho / omega, the support function evaluated at the normal of each point."""
        return self.rho.values / self.omega

    @property
    def gauss_curvature(self) -> np.ndarray:
        return np.prod(self.curvatures, axis=-1)


ShapeState = Union[SupportShape, RadialShape]
