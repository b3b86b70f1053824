"""Star-shaped planar domains given as polar graphs r < rho(theta) around the origin.

Points are addressed on the mapped polar grid x = s rho(theta) (cos theta,
sin theta) with s_i = i / n_r (i = 0 is the pole, i = n_r the boundary) and
theta_j = 2 pi j / n_theta.  Array layout is ``(n_r + 1, n_theta)``.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

_DETERMINISTIC = False


@contextlib.contextmanager
def deterministic_summation(enabled=True):
    """Use exactly rounded (order independent) sums inside quadratures."""
    global _DETERMINISTIC
    prev, _DETERMINISTIC = _DETERMINISTIC, enabled
    try:
        yield
    finally:
        _DETERMINISTIC = prev


def quad_sum(values, weights) -> float:
    prod = np.asarray(values, dtype=float) * weights
    if _DETERMINISTIC:
        return math.fsum(prod.ravel())
    return float(np.sum(prod))


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    normals: np.ndarray | None = None

    def integrate(self, values) -> float:
        return quad_sum(values, self.weights)


@dataclass(frozen=True)
class StarDomain:
    """Smooth domain {s < 1} star-shaped with respect to the origin.

    ``kind`` is ``disk`` (params: radius), ``ellipse`` (a, b) or ``fourier``
    (a0, cos coefficients a_1.., sin coefficients b_1..).
    """

    kind: str
    params: tuple
    n_r: int = 64
    n_theta: int = 64
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.n_r < 3 or self.n_theta < 4:
            raise ValueError("need n_r >= 3 and n_theta >= 4")
        if self.kind not in ("disk", "ellipse", "fourier"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        th = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        if not np.min(self.rho(th)) > 0:
            raise ValueError("radius function must stay positive")

    # -- constructors -------------------------------------------------------

    @classmethod
    def disk(cls, radius=1.0, n_r=64, n_theta=64):
        return cls("disk", (float(radius),), n_r, n_theta)

    @classmethod
    def ellipse(cls, a, b, n_r=64, n_theta=64):
        return cls("ellipse", (float(a), float(b)), n_r, n_theta)

    @classmethod
    def fourier(cls, a0, cos=(), sin=(), n_r=64, n_theta=64):
        k = max(len(cos), len(sin))
        c = tuple(float(v) for v in cos) + (0.0,) * (k - len(cos))
        s = tuple(float(v) for v in sin) + (0.0,) * (k - len(sin))
        return cls("fourier", (float(a0), c, s), n_r, n_theta)

    def refined(self, n_r, n_theta=None):
        return replace(self, n_r=int(n_r), n_theta=int(n_theta if n_theta is not None else n_r))

    def describe(self):
        if self.kind == "disk":
            geo = {"radius": self.params[0]}
        elif self.kind == "ellipse":
            geo = {"a": self.params[0], "b": self.params[1]}
        else:
            geo = {"a0": self.params[0], "cos": list(self.params[1]), "sin": list(self.params[2])}
        return {"kind": self.kind, **geo, "n_r": self.n_r, "n_theta": self.n_theta}

    # -- geometry -----------------------------------------------------------

    def rho(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "disk":
            return np.full_like(theta, self.params[0])
        if self.kind == "ellipse":
            a, b = self.params
            return a * b / np.sqrt((b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2)
        a0, c, s = self.params
        out = np.full_like(theta, a0)
        for k, (ck, sk) in enumerate(zip(c, s), start=1):
            out = out + ck * np.cos(k * theta) + sk * np.sin(k * theta)
        return out

    def drho(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "disk":
            return np.zeros_like(theta)
        if self.kind == "ellipse":
            a, b = self.params
            q = (b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2
            return -a * b * (a * a - b * b) * np.sin(theta) * np.cos(theta) / q**1.5
        _, c, s = self.params
        out = np.zeros_like(theta)
        for k, (ck, sk) in enumerate(zip(c, s), start=1):
            out = out - k * ck * np.sin(k * theta) + k * sk * np.cos(k * theta)
        return out

    def boundary_point(self, theta):
        r = self.rho(theta)
        return np.stack([r * np.cos(theta), r * np.sin(theta)])

    def outward_normal(self, theta):
        """Unit outward normal at the boundary point with polar angle theta."""
        theta = np.asarray(theta, dtype=float)
        r, dr = self.rho(theta), self.drho(theta)
        er = np.stack([np.cos(theta), np.sin(theta)])
        et = np.stack([-np.sin(theta), np.cos(theta)])
        return (r * er - dr * et) / np.hypot(r, dr)

    def x_dot_normal(self, theta):
        r, dr = self.rho(theta), self.drho(theta)
        return r * r / np.hypot(r, dr)

    # -- grid ---------------------------------------------------------------

    @property
    def h_s(self):
        return 1.0 / self.n_r

    @property
    def h_theta(self):
        return 2.0 * np.pi / self.n_theta

    @property
    def s(self):
        return np.arange(self.n_r + 1) / self.n_r

    @property
    def theta(self):
        return self.h_theta * np.arange(self.n_theta)

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def nodes(self):
        """Cartesian node coordinates, shape (2, n_r + 1, n_theta)."""

        def build():
            th = self.theta
            r = self.s[:, None] * self.rho(th)[None, :]
            return np.stack([r * np.cos(th), r * np.sin(th)])

        return self._cached("nodes", build)

    def volume_rule(self) -> QuadratureRule:
        """Product rule exact for integrands piecewise linear in s.

        Weight of node (i, j) is h_theta rho_j^2 times the integral of s
        against the i-th hat function: h^2/6 at the pole, s_i h inside and
        h/2 - h^2/6 on the boundary ring.
        """

        def build():
            h = self.h_s
            c = self.s * h
            c[0] = h * h / 6.0
            c[-1] = h / 2.0 - h * h / 6.0
            w = c[:, None] * (self.h_theta * self.rho(self.theta) ** 2)[None, :]
            return QuadratureRule(self.nodes(), w, "volume")

        return self._cached("volume", build)

    def boundary_rule(self) -> QuadratureRule:
        """Periodic trapezoid in theta with arclength weights."""

        def build():
            th = self.theta
            ds = np.hypot(self.rho(th), self.drho(th)) * self.h_theta
            return QuadratureRule(self.boundary_point(th), ds, "boundary", self.outward_normal(th))

        return self._cached("boundary", build)

    def area(self):
        return self.volume_rule().weights.sum()


def outward_normal(d: StarDomain, theta):
    return d.outward_normal(theta)


def star_shape_classify(d: StarDomain, tol=1e-12):
    """Classify by the minimum of x . eta over the boundary nodes."""
    m = float(np.min(d.x_dot_normal(d.theta)))
    if m > tol:
        return "strictly_star_shaped", m
    if m >= -tol:
        return "star_shaped", m
    return "not_star_shaped", m


def integrate_volume(d: StarDomain, f) -> float:
    """Integrate a point function f(x1, x2) over the domain."""
    rule = d.volume_rule()
    return rule.integrate(f(rule.nodes[0], rule.nodes[1]))


def integrate_boundary(d: StarDomain, f) -> float:
    """Integrate f(x1, x2, eta1, eta2) against arclength on the boundary."""
    rule = d.boundary_rule()
    x, eta = rule.nodes, rule.normals
    return rule.integrate(f(x[0], x[1], eta[0], eta[1]))


def from_config(spec: dict, n_r=64, n_theta=None) -> StarDomain:
    kind = spec.get("kind", "disk")
    n_theta = n_theta or n_r
    if kind == "disk":
        return StarDomain.disk(float(spec.get("radius", 1.0)), n_r, n_theta)
    if kind == "ellipse":
        return StarDomain.ellipse(float(spec["a"]), float(spec["b"]), n_r, n_theta)
    if kind == "fourier":
        return StarDomain.fourier(
            float(spec["a0"]),
            [float(v) for v in spec.get("cos", [])],
            [float(v) for v in spec.get("sin", [])],
            n_r,
            n_theta,
        )
    raise ValueError(f"unknown domain kind {kind!r}")
