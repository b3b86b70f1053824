"""Grid fields on a StarDomain: stencils, the stress field, manufactured sources
and solution-quality diagnostics.

Derivatives use second-order differences in s (one-sided at the pole and at
the boundary ring) and FFT differentiation in theta.  At the pole every
theta column holds the same point; its gradient is the least-squares fit of
the one-sided ray derivatives across all directions.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .domain import StarDomain, quad_sum
from .sources import GridSource, SourceModel

GRADIENT_FLOOR = 1e-10


@dataclass
class GridField:
    values: np.ndarray
    domain: StarDomain

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = (self.domain.n_r + 1, self.domain.n_theta)
        if self.values.shape != shape:
            raise ValueError(f"field has shape {self.values.shape}, domain grid is {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def from_function(cls, domain: StarDomain, f):
        x = domain.nodes()
        return cls(np.broadcast_to(f(x[0], x[1]), x.shape[1:]).copy(), domain)

    @property
    def trace(self):
        return self.values[-1]

    def scale(self):
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path):
        x = self.domain.nodes()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r_index", "theta_index", "x1", "x2", "value"])
            for i in range(self.values.shape[0]):
                for j in range(self.values.shape[1]):
                    w.writerow([i, j, repr(float(x[0, i, j])), repr(float(x[1, i, j])), repr(float(self.values[i, j]))])


@dataclass
class VectorField:
    c1: np.ndarray
    c2: np.ndarray
    domain: StarDomain

    def norm(self):
        return np.hypot(self.c1, self.c2)


@dataclass
class CriticalMask:
    mask: np.ndarray
    floor: float

    @property
    def fraction(self):
        """Masked share of distinct grid points (the pole row is one point)."""
        m = self.mask
        count = int(m[0].any()) + int(m[1:].sum())
        return count / (1 + m[1:].size)


def _theta_derivative(values):
    n = values.shape[-1]
    k = np.fft.rfftfreq(n, 1.0 / n)
    if n % 2 == 0:
        k[-1] = 0.0
    return np.fft.irfft(1j * k * np.fft.rfft(values, axis=-1), n=n, axis=-1)


def _polar_gradient(values, d: StarDomain, radial_derivative=None):
    rd = radial_derivative or _kernels.radial_derivative
    th = d.theta
    rho, drho = d.rho(th), d.drho(th)
    cos, sin = np.cos(th), np.sin(th)
    us = rd(values, d.h_s)
    ut = _theta_derivative(values)
    a = us / rho
    b = np.empty_like(a)
    b[1:] = (ut[1:] / d.s[1:, None] - drho * a[1:]) / rho
    b[0] = 0.0
    g1 = a * cos - b * sin
    g2 = a * sin + b * cos
    # least-squares fit of the ray derivatives a0_j = grad u(0) . e_r(theta_j)
    n = d.n_theta
    g1[0] = 2.0 / n * np.sum(a[0] * cos)
    g2[0] = 2.0 / n * np.sum(a[0] * sin)
    return g1, g2


def gradient(u: GridField) -> VectorField:
    g1, g2 = _polar_gradient(u.values, u.domain)
    return VectorField(g1, g2, u.domain)


def divergence(v: VectorField) -> GridField:
    d = v.domain
    a1, _ = _polar_gradient(v.c1, d)
    _, b2 = _polar_gradient(v.c2, d)
    div = a1 + b2
    # pole row holds a single point; keep it single-valued
    div[0] = div[0].mean()
    return GridField(div, d)


def critical_floor(grad: VectorField) -> float:
    scale = float(np.max(grad.norm()))
    return GRADIENT_FLOOR * scale if scale > 0 else np.inf


@dataclass
class StressEvaluation:
    """Pointwise quantities along a gradient field (masked nodes hold zeros)."""

    grad: VectorField
    H: np.ndarray
    B: np.ndarray
    dB: np.ndarray
    stress: VectorField
    mask: CriticalMask


def evaluate_stress(u: GridField, pr, a, grad: VectorField | None = None) -> StressEvaluation:
    grad = grad if grad is not None else gradient(u)
    floor = critical_floor(grad)
    acode, aprm = a.kernel_args()
    pcode, p, kappa = pr.kernel_args()
    B, dB, H, s1, s2, mask = _kernels.pointwise_stress(grad.c1, grad.c2, acode, aprm, pcode, p, kappa, floor)
    return StressEvaluation(grad, H, B, dB, VectorField(s1, s2, u.domain), CriticalMask(mask, floor))


def stress_field(u: GridField, pr, a):
    """S = B'(H(grad u)) grad H(grad u), zero on the critical mask."""
    ev = evaluate_stress(u, pr, a)
    return ev.stress, ev.mask


def manufactured_source(u: GridField, pr, a, warn_fraction=0.01) -> GridSource:
    """The x-dependent source f = -div S that makes (u, f) solve the equation."""
    S, mask = stress_field(u, pr, a)
    if mask.fraction > warn_fraction:
        warnings.warn(
            f"{100 * mask.fraction:.2f}% of grid points fall in the critical set",
            RuntimeWarning,
            stacklevel=2,
        )
    f = divergence(S)
    f.values *= -1.0
    gf = gradient(f)
    return GridSource(u.domain, f.values, (gf.c1, gf.c2), mask.fraction)


def weak_residual(u: GridField, src: SourceModel, pr, a, phi: GridField) -> float:
    """int S . grad phi - int g(x, u) phi under the volume quadrature."""
    d = u.domain
    rule = d.volume_rule()
    x = rule.nodes
    S, _ = stress_field(u, pr, a)
    gphi = gradient(phi)
    lhs = quad_sum(S.c1 * gphi.c1 + S.c2 * gphi.c2, rule.weights)
    rhs = quad_sum(src.g(x[0], x[1], u.values) * phi.values, rule.weights)
    return lhs - rhs


def interior_weights(d: StarDomain, e: float):
    """Volume weights restricted to E = {s <= e}, e snapped to a grid node."""
    m = int(round(e * d.n_r))
    if not 2 <= m < d.n_r:
        raise ValueError("interior subdomain must be compactly inside and resolved")
    h = d.h_s
    c = np.zeros(d.n_r + 1)
    c[1:m] = d.s[1:m] * h
    c[0] = h * h / 6.0
    c[m] = d.s[m] * h / 2.0 - h * h / 6.0
    return c[:, None] * (d.h_theta * d.rho(d.theta) ** 2)[None, :]


@dataclass
class StressDiagnostic:
    resolutions: list
    values: list
    ratios: list

    def as_dict(self):
        return dict(self.__dict__)


def stress_seminorm(u: GridField, pr, a, e=0.5) -> float:
    """Discrete int_E |grad S|^2 over E = {s <= e}."""
    S, _ = stress_field(u, pr, a)
    g1, g2 = gradient(GridField(S.c1, u.domain)), gradient(GridField(S.c2, u.domain))
    dens = g1.c1**2 + g1.c2**2 + g2.c1**2 + g2.c2**2
    return quad_sum(dens, interior_weights(u.domain, e))


def stress_sobolev_diagnostic(fields, pr, a, e=0.5) -> StressDiagnostic:
    """int_E |grad S|^2 across a refinement sequence, with successive ratios."""
    vals = [stress_seminorm(u, pr, a, e) for u in fields]
    ratios = [vals[k + 1] / vals[k] if vals[k] != 0 else float("nan") for k in range(len(vals) - 1)]
    return StressDiagnostic([u.domain.n_r for u in fields], vals, ratios)


def gradient_power_seminorm(u: GridField, p, e=0.5) -> float:
    """int_E |grad(|grad u|^(p-1))|^2; reported as a diagnostic only."""
    g = gradient(u)
    w = GridField(g.norm() ** (p - 1.0), u.domain)
    gw = gradient(w)
    return quad_sum(gw.c1**2 + gw.c2**2, interior_weights(u.domain, e))


# ------------------------------------------------------------- sample fields


def bump(center=(0.0, 0.0), radius=1.0, power=5, amplitude=1.0):
    """amplitude * (1 - |x - c|^2 / radius^2)^power inside the ball, 0 outside.

    C^(power - 1) across the support boundary.
    """
    cx, cy = center

    def f(x1, x2):
        q = 1.0 - ((x1 - cx) ** 2 + (x2 - cy) ** 2) / radius**2
        return amplitude * np.where(q > 0, np.maximum(q, 0.0) ** power, 0.0)

    return f
