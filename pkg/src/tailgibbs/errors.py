"""Symmetric error families for the observation and hidden equations."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import stats

from . import _dens
from ._accel import jit

KINDS = ("cauchy", "dexp", "gauss", "exppower")
_CODES = {"cauchy": _dens.CAUCHY, "dexp": _dens.DEXP, "gauss": _dens.GAUSS, "exppower": _dens.EXPPOWER}
_LETTERS = {"cauchy": "C", "dexp": "E", "gauss": "G", "exppower": "L"}


class TailClass(enum.IntEnum):
    """Tail weight, ordered from heaviest to lightest (C < E < G < L)."""

    POLYNOMIAL = 0
    EXPONENTIAL = 1
    GAUSSIAN = 2
    LIGHTER_THAN_GAUSSIAN = 3

    @property
    def letter(self) -> str:
        return "CEGL"[self.value]


@dataclass(frozen=True)
class ErrorDist:
    """A zero-centred error law.

    ``scale`` is a true scale parameter for every family:

    * cauchy:   1 / (pi s (1 + (x/s)^2))
    * dexp:     exp(-|x|/s) / (2 s)
    * gauss:    N(0, s^2)
    * exppower: beta / (2 s Gamma(1/beta)) exp(-|x/s|^beta), beta > 2
    """

    kind: str
    scale: float = 1.0
    beta: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _CODES:
            raise ValueError(f"unknown error family {self.kind!r}; expected one of {KINDS}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if self.kind == "exppower":
            if self.beta is None or not self.beta > 2:
                raise ValueError(f"exppower needs beta > 2, got {self.beta}")
        elif self.beta is not None:
            raise ValueError(f"beta only applies to exppower, got beta={self.beta} for {self.kind}")
        object.__setattr__(self, "scale", float(self.scale))
        if self.beta is not None:
            object.__setattr__(self, "beta", float(self.beta))

    # constructors
    @classmethod
    def cauchy(cls, scale: float = 1.0) -> ErrorDist:
        return cls("cauchy", scale)

    @classmethod
    def dexp(cls, scale: float = 1.0) -> ErrorDist:
        return cls("dexp", scale)

    @classmethod
    def gauss(cls, scale: float = 1.0) -> ErrorDist:
        return cls("gauss", scale)

    @classmethod
    def exppower(cls, scale: float = 1.0, beta: float = 3.0) -> ErrorDist:
        return cls("exppower", scale, beta)

    @property
    def code(self) -> int:
        return _CODES[self.kind]

    @property
    def letter(self) -> str:
        return _LETTERS[self.kind]

    @property
    def beta_or_zero(self) -> float:
        return self.beta if self.beta is not None else 0.0

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.scale
        if self.kind == "cauchy":
            out = -math.log(math.pi * self.scale) - np.log1p(z * z)
        elif self.kind == "dexp":
            out = -math.log(2.0 * self.scale) - np.abs(z)
        elif self.kind == "gauss":
            out = -0.5 * math.log(2.0 * math.pi) - math.log(self.scale) - 0.5 * z * z
        else:
            b = self.beta
            out = math.log(b) - math.log(2.0 * self.scale) - math.lgamma(1.0 / b) - np.abs(z) ** b
        return out if out.ndim else float(out)

    def density(self, x):
        return np.exp(self.log_density(x))

    def frozen(self):
        """Equivalent ``scipy.stats`` frozen law (used for CDFs and quantiles)."""
        if self.kind == "cauchy":
            return stats.cauchy(scale=self.scale)
        if self.kind == "dexp":
            return stats.laplace(scale=self.scale)
        if self.kind == "gauss":
            return stats.norm(scale=self.scale)
        return stats.gennorm(self.beta, scale=self.scale)

    def cdf(self, x):
        return self.frozen().cdf(x)

    def ppf(self, q):
        return self.frozen().ppf(q)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if size is None:
            return _dens.draw(self.code, self.scale, self.beta_or_zero, rng)
        return _draw_many(self.code, self.scale, self.beta_or_zero, int(size), rng)

    def tail_class(self) -> TailClass:
        return {
            "cauchy": TailClass.POLYNOMIAL,
            "dexp": TailClass.EXPONENTIAL,
            "gauss": TailClass.GAUSSIAN,
            "exppower": TailClass.LIGHTER_THAN_GAUSSIAN,
        }[self.kind]

    def with_scale(self, scale: float) -> ErrorDist:
        return ErrorDist(self.kind, scale, self.beta)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "scale": self.scale}
        if self.beta is not None:
            out["beta"] = self.beta
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> ErrorDist:
        extra = set(obj) - {"kind", "scale", "beta"}
        if extra:
            raise ValueError(f"unknown keys in error distribution: {sorted(extra)}")
        return cls(obj["kind"], obj.get("scale", 1.0), obj.get("beta"))

    @classmethod
    def from_letter(cls, letter: str, scale: float = 1.0, beta: float = 3.0) -> ErrorDist:
        kind = {v: k for k, v in _LETTERS.items()}[letter.upper()]
        return cls(kind, scale, beta if kind == "exppower" else None)

    def __str__(self) -> str:
        if self.kind == "exppower":
            return f"{self.letter}(scale={self.scale:g}, beta={self.beta:g})"
        return f"{self.letter}(scale={self.scale:g})"


@jit
def _draw_many(kind, scale, beta, n, rng):
    out = np.empty(n)
    for i in range(n):
        out[i] = _dens.draw(kind, scale, beta, rng)
    return out


def log_density(dist: ErrorDist, x):
    return dist.log_density(x)


def sample(dist: ErrorDist, rng: np.random.Generator, size: int | None = None):
    return dist.sample(rng, size)


def tail_class(dist: ErrorDist) -> TailClass:
    return dist.tail_class()
