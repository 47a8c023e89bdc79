"""Linear hierarchical model with replication, parametrisations, and the
tail-based stability table.

    Y_ij = X_i + Z1_ij,   j = 1..m_i
    X_i  = Theta + Z2_i,  i = 1..m

with a flat prior on Theta.  ``m = m_1 = 1`` is the two-line model used by
most of the diagnostics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import ErrorDist, TailClass


class Stability(str, enum.Enum):
    UNIFORM = "U"
    GEOMETRIC = "G"
    NONGEOMETRIC = "N"


@dataclass(frozen=True)
class Parametrisation:
    """Which Gibbs sampler to run.

    ``variant`` is one of ``centred``, ``noncentred``, ``partial`` (needs
    ``rho`` in [0, 1]), ``grouped`` (Cauchy observation error with Gaussian
    hidden error, auxiliary precisions Q) or ``hybrid`` (centred step with
    probability ``p_mix``, non-centred otherwise).
    """

    variant: str
    rho: float | None = None
    p_mix: float | None = None
    likelihood_q_rate: bool = False

    def __post_init__(self) -> None:
        if self.variant not in ("centred", "noncentred", "partial", "grouped", "hybrid"):
            raise ValueError(f"unknown parametrisation {self.variant!r}")
        if self.variant == "partial":
            if self.rho is None or not 0.0 <= self.rho <= 1.0:
                raise ValueError(f"partial centring needs rho in [0, 1], got {self.rho}")
        elif self.rho is not None:
            raise ValueError("rho only applies to the partially centred sampler")
        if self.variant == "hybrid":
            if self.p_mix is None:
                object.__setattr__(self, "p_mix", 0.5)
            if not 0.0 < self.p_mix < 1.0:
                raise ValueError(f"hybrid p_mix must lie in (0, 1), got {self.p_mix}")
        elif self.p_mix is not None:
            raise ValueError("p_mix only applies to the hybrid sampler")
        if self.likelihood_q_rate and self.variant != "grouped":
            raise ValueError("likelihood_q_rate only applies to the grouped sampler")

    @classmethod
    def centred(cls) -> Parametrisation:
        return cls("centred")

    @classmethod
    def noncentred(cls) -> Parametrisation:
        return cls("noncentred")

    @classmethod
    def partial(cls, rho: float) -> Parametrisation:
        return cls("partial", rho=float(rho))

    @classmethod
    def grouped(cls, likelihood_q_rate: bool = False) -> Parametrisation:
        return cls("grouped", likelihood_q_rate=likelihood_q_rate)

    @classmethod
    def hybrid(cls, p_mix: float = 0.5) -> Parametrisation:
        return cls("hybrid", p_mix=float(p_mix))

    @property
    def kernel_id(self) -> str:
        if self.variant == "partial":
            return f"partial({self.rho:g})"
        if self.variant == "hybrid":
            return f"hybrid({self.p_mix:g})"
        if self.variant == "grouped" and self.likelihood_q_rate:
            return "grouped(likelihood-rate)"
        return self.variant

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"variant": self.variant}
        if self.rho is not None:
            out["rho"] = self.rho
        if self.p_mix is not None:
            out["p_mix"] = self.p_mix
        if self.likelihood_q_rate:
            out["likelihood_q_rate"] = True
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any] | str) -> Parametrisation:
        if isinstance(obj, str):
            aliases = {"P0": "centred", "P1": "noncentred", "centered": "centred", "noncentered": "noncentred"}
            return cls(aliases.get(obj, obj))
        extra = set(obj) - {"variant", "rho", "p_mix", "likelihood_q_rate"}
        if extra:
            raise ValueError(f"unknown keys in parametrisation: {sorted(extra)}")
        return cls(obj["variant"], obj.get("rho"), obj.get("p_mix"), bool(obj.get("likelihood_q_rate", False)))


CENTRED = Parametrisation.centred()
NONCENTRED = Parametrisation.noncentred()


@dataclass(frozen=True)
class HierModel:
    f1: ErrorDist
    f2: ErrorDist
    y: tuple[np.ndarray, ...] = field(default=(np.zeros(1),))

    def __post_init__(self) -> None:
        rows = self.y
        if isinstance(rows, (int, float, np.floating)):
            rows = [[float(rows)]]
        rows = tuple(np.atleast_1d(np.asarray(r, dtype=float)).copy() for r in rows)
        if len(rows) == 0:
            raise ValueError("need at least one random effect (m >= 1)")
        for i, r in enumerate(rows):
            if r.ndim != 1 or r.size == 0:
                raise ValueError(f"row {i} of y must be a non-empty vector")
            if not np.all(np.isfinite(r)):
                raise ValueError(f"row {i} of y has non-finite entries")
            r.setflags(write=False)
        object.__setattr__(self, "y", rows)

    @classmethod
    def simple(cls, f1: ErrorDist, f2: ErrorDist, y: float = 0.0) -> HierModel:
        return cls(f1, f2, ([float(y)],))

    @property
    def m(self) -> int:
        return len(self.y)

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.size for r in self.y], dtype=np.int64)

    @property
    def is_simple(self) -> bool:
        return self.m == 1 and self.y[0].size == 1

    @property
    def y0(self) -> float:
        """The single observation of the two-line model."""
        if not self.is_simple:
            raise ValueError("model has replication; y0 is only defined for m = m_1 = 1")
        return float(self.y[0][0])

    @property
    def y_flat(self) -> np.ndarray:
        return np.concatenate(self.y)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)]).astype(np.int64)

    @property
    def model_id(self) -> str:
        return f"({self.f1.letter},{self.f2.letter})"

    def shifted(self, c: float) -> HierModel:
        return HierModel(self.f1, self.f2, tuple(r + c for r in self.y))

    def to_json(self) -> dict[str, Any]:
        return {"f1": self.f1.to_json(), "f2": self.f2.to_json(), "y": [r.tolist() for r in self.y]}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> HierModel:
        extra = set(obj) - {"f1", "f2", "y"}
        if extra:
            raise ValueError(f"unknown keys in model: {sorted(extra)}")
        y = obj.get("y", [[0.0]])
        if isinstance(y, (int, float)):
            y = [[y]]
        return cls(ErrorDist.from_json(obj["f1"]), ErrorDist.from_json(obj["f2"]), tuple(y))


def joint_log_density(model: HierModel, x: Sequence[float] | np.ndarray, theta: float) -> float:
    """log p(y, x | theta) with both error densities normalised."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.m,):
        raise ValueError(f"x has shape {x.shape}, model needs ({model.m},)")
    total = 0.0
    for xi, yi in zip(x, model.y):
        total += float(np.sum(model.f1.log_density(yi - xi))) + float(model.f2.log_density(xi - theta))
    return total


def to_noncentred(x, theta: float) -> np.ndarray:
    return np.asarray(x, dtype=float) - theta


def from_noncentred(xt, theta: float) -> np.ndarray:
    return np.asarray(xt, dtype=float) + theta


def _p0_table(t1: TailClass, t2: TailClass, ratio: float) -> Stability:
    C, E = TailClass.POLYNOMIAL, TailClass.EXPONENTIAL
    if t2 == C:
        return Stability.UNIFORM
    if t1 == C:
        return Stability.NONGEOMETRIC
    if t1 == E and t2 == E:
        # heavier hidden error (ratio > 1) leaves X near the data: P0 is tight
        return Stability.UNIFORM if ratio > 1.0 else Stability.GEOMETRIC
    if t2 == E:
        return Stability.UNIFORM
    return Stability.GEOMETRIC


def theoretical_stability(model: HierModel, par: Parametrisation) -> Stability:
    """Table lookup by tail classes.

    The (E,E) cell uses ``ratio = scale(f2) / scale(f1)``; equal scales give
    geometric ergodicity for both samplers.  The non-centred sampler is the
    centred one with the two error laws interchanged.
    """
    if par.variant not in ("centred", "noncentred"):
        raise ValueError(f"{par.kernel_id} is not covered by the tail table (only centred/noncentred)")
    t1, t2 = model.f1.tail_class(), model.f2.tail_class()
    if par.variant == "centred":
        return _p0_table(t1, t2, model.f2.scale / model.f1.scale)
    return _p0_table(t2, t1, model.f1.scale / model.f2.scale)
