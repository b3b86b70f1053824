"""The profile B of the gradient energy, with its structural-bound checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NegativeArgument

DEFAULT_GRID = np.logspace(-6, 6, 10_000)


@dataclass(frozen=True)
class Profile:
    """B(t) = t^p/p (``power``) or the kappa-regularized family.

    For ``regularized`` we use B'(t) = (kappa^2 + t^2)^((p-2)/2) t, whose
    antiderivative ((kappa^2 + t^2)^(p/2) - kappa^p)/p is closed form for
    every p, so no quadrature is needed.
    """

    kind: str
    p: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("power", "regularized"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if not self.p > 1:
            raise ValueError(f"profile exponent must satisfy p > 1, got {self.p}")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")
        if self.kind == "power" and self.kappa != 0.0:
            raise ValueError("power profile has kappa = 0")

    @classmethod
    def power(cls, p):
        return cls("power", float(p))

    @classmethod
    def regularized(cls, p, kappa):
        return cls("regularized", float(p), float(kappa))

    def with_kappa(self, kappa):
        if kappa == 0.0:
            return Profile.power(self.p)
        return Profile.regularized(self.p, kappa)

    def kernel_args(self):
        code = _kernels.POWER if self.kind == "power" else _kernels.REGULARIZED
        return code, self.p, self.kappa

    def B(self, t):
        return self.evaluate(t)[0]

    def dB(self, t):
        return self.evaluate(t)[1]

    def evaluate(self, t):
        """Return (B, B', B'') at t >= 0 (scalar or array)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise NegativeArgument("profile is defined for t >= 0 only")
        p, k = self.p, self.kappa
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "power" or k == 0.0:
                B = t**p / p
                dB = t ** (p - 1.0)
                d2B = (p - 1.0) * t ** (p - 2.0)
            else:
                w = k * k + t * t
                B = k**p * np.expm1(0.5 * p * np.log1p((t / k) ** 2)) / p
                dB = w ** (0.5 * (p - 2.0)) * t
                d2B = w ** (0.5 * (p - 4.0)) * ((p - 1.0) * t * t + k * k)
        if B.ndim == 0:
            return float(B), float(dB), float(d2B)
        return B, dB, d2B

    def describe(self):
        return {"kind": self.kind, "p": self.p, "kappa": self.kappa}


def from_config(spec: dict) -> Profile:
    kind = spec.get("kind", "power")
    p = float(spec["p"])
    if kind == "power":
        return Profile.power(p)
    if kind == "regularized":
        return Profile.regularized(p, float(spec.get("kappa", 0.0)))
    raise ValueError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class BoundsReport:
    gamma_hat: float
    Gamma_hat: float
    gamma2_hat: float
    Gamma2_hat: float
    t_min: float
    t_max: float
    passed: bool

    def as_dict(self):
        return dict(self.__dict__)


def check_structural_bounds(pr: Profile, t_grid=None) -> BoundsReport:
    """Tightest constants with gamma (k+t)^(p-2) t <= B'(t) <= Gamma (k+t)^(p-2) t.

    The ``gamma2``/``Gamma2`` pair is the same fit for B'' against
    (k+t)^(p-2).
    """
    t = DEFAULT_GRID if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t_grid must lie in (0, inf)")
    _, dB, d2B = pr.evaluate(t)
    base = (pr.kappa + t) ** (pr.p - 2.0)
    r1 = dB / (base * t)
    r2 = d2B / base
    vals = [r1.min(), r1.max(), r2.min(), r2.max()]
    passed = bool(np.all(np.isfinite(vals)) and min(vals) > 0)
    return BoundsReport(*map(float, vals), float(t.min()), float(t.max()), passed)


def bprime_times_t_vs_B(pr: Profile, t_grid=None) -> float:
    """Max of B'(t) t / B(t) on the grid; the constant C in B'(t) t <= C B(t)."""
    t = DEFAULT_GRID if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t_grid must lie in (0, inf)")
    B, dB, _ = pr.evaluate(t)
    return float(np.max(dB * t / B))
