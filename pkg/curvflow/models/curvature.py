from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

from curvflow.utils.errors import CurvatureSpecError

KINDS = ("sigma_k_root", "quotient", "power_mean")
ARGUMENTS = ("principal_curvatures", "principal_radii")


@dataclass(frozen=True)
class CurvatureSpec:
    """
    The symmetric function f and its convention.

    sigma_k_root: f = sigma_k^{1/k}, cone Gamma_k
    quotient:     f = (sigma_l / sigma_k)^{1/(l-k)}, cone Gamma_l
    power_mean:   f = (sum v_i^m)^{1/m} with m < 0, cone Gamma_+

    ``argument`` says whether f eats principal curvatures (kappa) or radii (lambda).
    """

    kind: str
    n: int
    beta: float = 1.0
    argument: str = "principal_curvatures"
    k: Optional[int] = None
    l: Optional[int] = None
    m: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CurvatureSpecError(f"unknown curvature kind {self.kind!r}; expected one of {KINDS}")
        if self.argument not in ARGUMENTS:
            raise CurvatureSpecError(f"unknown curvature argument {self.argument!r}")
        if self.n < 1:
            raise CurvatureSpecError(f"dimension n must be positive, got {self.n}")
        if not self.beta > 0:
            raise CurvatureSpecError(f"beta must be positive, got {self.beta}")

        if self.kind == "sigma_k_root":
            if self.k is None or not 1 <= self.k <= self.n:
                raise CurvatureSpecError(f"sigma_k_root needs 1 <= k <= n={self.n}, got k={self.k}")
        elif self.kind == "quotient":
            if self.k is None or self.l is None or not 0 <= self.k < self.l <= self.n:
                raise CurvatureSpecError(
                    f"quotient needs 0 <= k < l <= n={self.n}, got k={self.k}, l={self.l}"
                )
        elif self.m is None or not self.m < 0:
            raise CurvatureSpecError(f"power_mean needs m < 0, got m={self.m}")

    @property
    def on_radii(self) -> bool:
        return self.argument == "principal_radii"

    @property
    def cone_order(self) -> Optional[int]:
        """Order of the Garding cone, or None for the positive cone."""
        if self.kind == "sigma_k_root":
            return self.k
        if self.kind == "quotient":
            return self.l
        return None

    def to_dict(self) -> Dict[str, Any]:
        data = {"kind": self.kind, "argument": self.argument, "beta": self.beta}
        data.update({key: value for key, value in asdict(self).items() if key in ("k", "l", "m") and value is not None})
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n: int) -> "CurvatureSpec":
        extra = set(data) - {"kind", "argument", "beta", "k", "l", "m"}
        if extra:
            raise CurvatureSpecError(f"unknown curvature keys: {sorted(extra)}")
        if "kind" not in data:
            raise CurvatureSpecError("curvature spec needs a 'kind'")
        return cls(
            kind=data["kind"],
            n=n,
            beta=float(data.get("beta", 1.0)),
            argument=data.get("argument", "principal_curvatures"),
            k=data.get("k"),
            l=data.get("l"),
            m=data.get("m"),
        )
