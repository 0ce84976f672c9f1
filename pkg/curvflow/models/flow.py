from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional, Tuple

import numpy as np

from curvflow import config
from curvflow.models.curvature import CurvatureSpec
from curvflow.models.grid import SphereGrid
from curvflow.models.shape import ShapeState
from curvflow.utils.errors import ConfigError

VARIANTS = (
    "radial_original",
    "radial_normalized",
    "support_original",
    "support_normalized_sigma_k",
    "support_normalized_gauss",
)

HISTORY_FIELDS = (
    "step", "t", "tau", "dt", "min_rho", "max_rho", "osc_rho", "max_grad_gamma", "min_lambda",
    "eta", "phi", "q_min", "q_max", "u_p", "v_q", "j_pq", "residual",
)


@dataclass(frozen=True)
class PsiSpec:
    """
    psi(x) = scale * (c0 + sum_e a_e <x, e>^2)^power over coordinate axes e.

    Configs only set ``c0`` and ``axes``; ``scale`` and ``power`` appear when a
    problem's psi is mapped to the psi of the flow that solves it.
    """

    c0: float = 1.0
    axes: Tuple[Tuple[int, float], ...] = ()
    scale: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        if len(self.axes) > 3:
            raise ConfigError("psi takes at most 3 axis directions")
        if len({axis for axis, _ in self.axes}) != len(self.axes):
            raise ConfigError("psi axis directions must be distinct")
        if not self.scale > 0:
            raise ConfigError(f"psi scale must be positive, got {self.scale}")

    @property
    def is_constant(self) -> bool:
        return not self.axes

    @property
    def is_unit(self) -> bool:
        return self.is_constant and self.scale * self.c0 ** self.power == 1.0

    def base(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        n = points.shape[-1] - 1
        values = np.full(points.shape[:-1], float(self.c0))
        for axis, a in self.axes:
            if not 0 <= axis <= n:
                raise ConfigError(f"psi axis {axis} out of range for n={n}")
            values = values + a * points[..., axis] ** 2
        return values

    def at(self, points: np.ndarray) -> np.ndarray:
        """psi at unit vectors of shape (..., n+1)."""
        base = self.base(points)
        if np.min(base) <= 0:
            raise ConfigError(f"psi is not positive on the grid (min {float(np.min(base)):.3g})")
        return self.scale * base ** self.power

    def values(self, grid: SphereGrid) -> np.ndarray:
        return self.at(grid.points)

    def transformed(self, scale: float, power: float) -> "PsiSpec":
        """The spec of scale * psi^power."""
        return PsiSpec(self.c0, self.axes, scale * self.scale ** power, self.power * power)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"c0": self.c0, "axes": [{"axis": axis, "a": a} for axis, a in self.axes]}
        if self.scale != 1.0 or self.power != 1.0:
            data.update(scale=self.scale, power=self.power)
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "PsiSpec":
        if not data:
            return cls()
        axes = tuple((int(item["axis"]), float(item["a"])) for item in data.get("axes", []))
        return cls(
            float(data.get("c0", 1.0)), axes, float(data.get("scale", 1.0)), float(data.get("power", 1.0))
        )


@dataclass(frozen=True)
class FlowConfig:
    variant: str
    alpha: float
    delta: float
    curvature: CurvatureSpec
    psi: PsiSpec = PsiSpec()
    n_theta: int = 16
    n_phi: Optional[int] = None
    dt_safety: float = config.DEFAULT_DT_SAFETY
    t_end: float = 1.0
    stop_osc_tol: float = 1e-3
    stop_residual_tol: float = 0.0
    max_steps: int = config.DEFAULT_MAX_STEPS
    prescale: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown flow variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0 < self.dt_safety <= 1:
            raise ConfigError(f"dt_safety must lie in (0, 1], got {self.dt_safety}")
        if self.t_end < 0 or self.max_steps < 0:
            raise ConfigError("t_end and max_steps must be nonnegative")
        if self.is_radial and not self.psi.is_unit:
            raise ConfigError("radial variants require psi == 1")
        if self.variant == "support_normalized_gauss":
            c = self.curvature
            if c.kind != "sigma_k_root" or c.k != c.n or not c.on_radii:
                raise ConfigError("support_normalized_gauss needs a sigma_k_root spec with k = n on principal_radii")

    @property
    def n(self) -> int:
        return self.curvature.n

    @property
    def beta(self) -> float:
        return self.curvature.beta

    @property
    def exponent_sum(self) -> float:
        return self.alpha + self.delta + self.beta

    @property
    def is_radial(self) -> bool:
        return self.variant.startswith("radial")

    @property
    def is_original(self) -> bool:
        return self.variant.endswith("original")

    @property
    def representation(self) -> str:
        return "radial" if self.is_radial else "support"

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["curvature"] = self.curvature.to_dict()
        data["psi"] = self.psi.to_dict()
        data["n"] = self.n
        if data["n_phi"] is None:
            del data["n_phi"]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FlowConfig":
        n = int(data["n"])
        known = {f.name for f in fields(cls)} - {"curvature", "psi"}
        kwargs = {key: data[key] for key in known if key in data}
        return cls(
            curvature=CurvatureSpec.from_dict(data["curvature"], n),
            psi=PsiSpec.from_dict(data.get("psi")),
            **kwargs,
        )


@dataclass(frozen=True)
class FlowRecord:
    step: int
    t: float
    tau: float
    dt: float
    min_rho: float
    max_rho: float
    osc_rho: float
    max_grad_gamma: float
    min_lambda: float
    eta: float
    phi: float
    q_min: float
    q_max: float
    u_p: float
    v_q: float
    j_pq: float
    residual: float

    def as_row(self) -> Tuple[Any, ...]:
        return tuple(getattr(self, name) for name in HISTORY_FIELDS)


@dataclass(frozen=True, eq=False)
class FlowState:
    shape: ShapeState
    t: float = 0.0
    step: int = 0
    dt: float = 0.0
    phi: float = 1.0


@dataclass(eq=False)
class FlowResult:
    shape: ShapeState
    history: list
    verdict: str
    steps: int
    t: float
    phi: float = 1.0
    prescale: float = 1.0
    t_star: Optional[float] = None
    rescaled: Optional[Dict[str, float]] = None
    exponential_rate: Optional[Tuple[float, float]] = None

    @property
    def final(self) -> FlowRecord:
        return self.history[-1]
