from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional

from curvflow.models.flow import PsiSpec
from curvflow.utils.errors import ConfigError

EQUATIONS = ("lp_minkowski", "lp_cm", "lp_dual_minkowski", "lp_dual_cm", "soliton")


@dataclass(frozen=True)
class Exponents:
    p: float
    q: float
    q_star: Optional[float]  # math.inf on the 0 < q <= 1 branch, None for q <= 0
    alpha: float
    delta: float
    beta: float
    n: int

    def to_dict(self) -> Dict[str, Any]:
        q_star = self.q_star
        if q_star is not None and q_star == float("inf"):
            q_star = "inf"
        return {"p": self.p, "q": self.q, "q_star": q_star, "alpha": self.alpha,
                "delta": self.delta, "beta": self.beta, "n": self.n}


@dataclass(frozen=True)
class ProblemSpec:
    """
    lp_minkowski       sigma_n(h) = u^{p-1} psi
    lp_cm              sigma_k(h) = u^{p-1} psi                  1 <= k <= n-1
    lp_dual_minkowski  det h      = rho^{n+1-q} u^{p-1} psi
    lp_dual_cm         sigma_k(h) = rho^{k+1-q} u^{p-1} psi      1 <= k <= n-1
    soliton            psi u^{alpha-1} rho^delta sigma_k^{beta/k}(h) = eta
    with h = D^2 u + u I. For solitons (p, q) encode (alpha, delta) through the
    stationary equation of the sigma_k normalized flow.
    """

    equation: str
    n: int
    p: float
    q: float
    psi: PsiSpec = PsiSpec()
    k: Optional[int] = None
    beta: float = 1.0

    def __post_init__(self):
        if self.equation not in EQUATIONS:
            raise ConfigError(f"unknown equation {self.equation!r}; expected one of {EQUATIONS}")
        if not self.beta > 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.equation in ("lp_minkowski", "lp_dual_minkowski"):
            if self.k not in (None, self.n):
                raise ConfigError(f"{self.equation} is a Gauss curvature equation, k must be n")
            object.__setattr__(self, "k", self.n)
        elif self.equation in ("lp_cm", "lp_dual_cm"):
            if self.k is None or not 1 <= self.k <= self.n - 1:
                raise ConfigError(f"{self.equation} needs 1 <= k <= n-1, got k={self.k}")
        elif self.k is None or not 1 <= self.k <= self.n:
            raise ConfigError(f"soliton needs 1 <= k <= n, got k={self.k}")
        if self.equation in ("lp_minkowski", "lp_cm") and self.q != self.k + 1:
            # no rho dependence: the dual exponent is pinned
            object.__setattr__(self, "q", float(self.k + 1))

    def to_dict(self) -> Dict[str, Any]:
        return {"equation": self.equation, "n": self.n, "k": self.k, "p": self.p, "q": self.q,
                "beta": self.beta, "psi": self.psi.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n: int) -> "ProblemSpec":
        data = dict(data)
        if "alpha" in data or "delta" in data:
            if data["equation"] != "soliton" or data.get("k") is None:
                raise ConfigError("alpha/delta only describe a soliton with explicit k")
            beta, k = float(data.get("beta", 1.0)), int(data["k"])
            data["p"] = 1 + k * (1 - float(data.pop("alpha", 0.0))) / beta
            data["q"] = k + 1 + k * float(data.pop("delta", 0.0)) / beta
        if "p" not in data:
            raise ConfigError(f"{data['equation']} needs p")
        return cls(
            equation=data["equation"],
            n=n,
            p=float(data["p"]),
            q=float(data.get("q", (data.get("k") or n) + 1)),
            psi=PsiSpec.from_dict(data.get("psi")),
            k=data.get("k"),
            beta=float(data.get("beta", 1.0)),
        )
