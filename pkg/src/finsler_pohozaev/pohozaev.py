"""Both sides of the Pohozaev identity and its consequences.

The volume and boundary sides are always assembled from the same grid
field and the same quadrature rules, and nothing is back-substituted from
the equation, so the residual is a genuine consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import reporting
from .anisotropy import Euclidean
from .domain import StarDomain, quad_sum
from .errors import SupercriticalDimensionPair, SupportEscapesGrid, TraceNotZero, WrongSpecialization
from .field import GridField, evaluate_stress, manufactured_source
from .profile import Profile
from .sources import SourceModel

DIM = 2


@dataclass
class IdentityReport:
    volume_terms: dict
    boundary_terms: dict
    resolution: tuple
    masked_fraction: float
    lhs: float = field(init=False)
    rhs: float = field(init=False)
    residual_abs: float = field(init=False)
    residual_rel: float = field(init=False)

    def __post_init__(self):
        self.lhs = sum(self.volume_terms.values())
        self.rhs = sum(self.boundary_terms.values())
        self.residual_abs = abs(self.lhs - self.rhs)
        scale = max(abs(v) for v in self.terms().values())
        self.residual_rel = self.residual_abs / scale if scale > 0 else 0.0

    def terms(self):
        return {**self.volume_terms, **self.boundary_terms}

    def as_dict(self):
        return {
            "volume_terms": self.volume_terms,
            "boundary_terms": self.boundary_terms,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual_abs": self.residual_abs,
            "residual_rel": self.residual_rel,
            "resolution": list(self.resolution),
            "masked_fraction": self.masked_fraction,
        }

    def to_json(self):
        return reporting.dumps(self.as_dict())

    def csv_header(self):
        return ["n_r", "n_theta", *self.volume_terms, *self.boundary_terms,
                "lhs", "rhs", "residual_abs", "residual_rel", "masked_fraction"]

    def csv_row(self):
        vals = [*self.volume_terms.values(), *self.boundary_terms.values(),
                self.lhs, self.rhs, self.residual_abs, self.residual_rel, self.masked_fraction]
        return [self.resolution[0], self.resolution[1], *map(reporting.fmt, vals)]


def _boundary_geometry(d: StarDomain):
    rule = d.boundary_rule()
    return rule.nodes, rule.normals, rule.weights


def identity_sides(u: GridField, src: SourceModel, pr: Profile, a, d: StarDomain | None = None) -> IdentityReport:
    """Evaluate every term of the identity on the grid of ``u``.

    u need not vanish on the boundary.
    """
    d = d or u.domain
    if d != u.domain:
        raise ValueError("field lives on a different grid")
    rule = d.volume_rule()
    x = rule.nodes
    ev = evaluate_stress(u, pr, a)
    G = src.G(x[0], x[1], u.values)
    xG = src.x_dot_grad_x_G(x[0], x[1], u.values)
    w = rule.weights
    vol = {
        "N_int_G": DIM * quad_sum(G, w),
        "int_x_dot_grad_x_G": quad_sum(xG, w),
        "minus_N_int_B": -DIM * quad_sum(ev.B, w),
        "int_dB_H": quad_sum(ev.dB * ev.H, w),
    }
    xb, eta, ds = _boundary_geometry(d)
    x_eta = xb[0] * eta[0] + xb[1] * eta[1]
    g1, g2 = ev.grad.c1[-1], ev.grad.c2[-1]
    x_grad_u = xb[0] * g1 + xb[1] * g2
    S_eta = ev.stress.c1[-1] * eta[0] + ev.stress.c2[-1] * eta[1]
    bnd = {
        "bdry_G_x_eta": quad_sum(G[-1] * x_eta, ds),
        "minus_bdry_B_x_eta": -quad_sum(ev.B[-1] * x_eta, ds),
        "bdry_dB_x_grad_u_gradH_eta": quad_sum(x_grad_u * S_eta, ds),
    }
    return IdentityReport(vol, bnd, (d.n_r, d.n_theta), ev.mask.fraction)


def _require_plap(pr, a, src=None):
    if pr.kind != "power":
        raise WrongSpecialization("classical form needs the power profile B(t) = t^p/p")
    if not isinstance(a, Euclidean):
        raise WrongSpecialization("classical form needs the Euclidean norm")
    if src is not None and src.x_dependent:
        raise WrongSpecialization("classical form needs an autonomous source g = g(u)")


def classical_plap_form(u: GridField, src: SourceModel, pr: Profile, a, d: StarDomain | None = None) -> IdentityReport:
    """The p-Laplacian identity written with |grad u| and u_eta directly."""
    _require_plap(pr, a, src)
    d = d or u.domain
    p = pr.p
    rule = d.volume_rule()
    x = rule.nodes
    ev = evaluate_stress(u, pr, a)
    mod = np.hypot(ev.grad.c1, ev.grad.c2)
    keep = ~ev.mask.mask & (mod > 0)
    safe = np.where(keep, mod, 1.0)
    mod_p = np.where(keep, safe**p, 0.0)
    mod_pm2 = np.where(keep, safe ** (p - 2.0), 0.0)
    G = src.G(x[0], x[1], u.values)
    w = rule.weights
    vol = {
        "N_int_G": DIM * quad_sum(G, w),
        "minus_(N-p)/p_int_grad_u_p": -(DIM - p) / p * quad_sum(mod_p, w),
    }
    xb, eta, ds = _boundary_geometry(d)
    x_eta = xb[0] * eta[0] + xb[1] * eta[1]
    g1, g2 = ev.grad.c1[-1], ev.grad.c2[-1]
    u_eta = g1 * eta[0] + g2 * eta[1]
    x_grad_u = xb[0] * g1 + xb[1] * g2
    bnd = {
        "bdry_G_x_eta": quad_sum(G[-1] * x_eta, ds),
        "minus_bdry_grad_u_p_x_eta_over_p": -quad_sum(mod_p[-1] * x_eta, ds) / p,
        "bdry_grad_u_p-2_x_grad_u_u_eta": quad_sum(mod_pm2[-1] * x_grad_u * u_eta, ds),
    }
    return IdentityReport(vol, bnd, (d.n_r, d.n_theta), ev.mask.fraction)


def specialization_gap(generic: IdentityReport, classical: IdentityReport) -> float:
    """Largest termwise difference, relative to the largest generic term.

    The generic pair -N int B + int B'(H) H is compared with the single
    classical term -(N-p)/p int |grad u|^p; the other terms map one to one.
    """
    gv, gb = generic.volume_terms, generic.boundary_terms
    cv, cb = list(classical.volume_terms.values()), list(classical.boundary_terms.values())
    pairs = [
        (gv["N_int_G"] + gv["int_x_dot_grad_x_G"], cv[0]),
        (gv["minus_N_int_B"] + gv["int_dB_H"], cv[1]),
        (gb["bdry_G_x_eta"], cb[0]),
        (gb["minus_bdry_B_x_eta"], cb[1]),
        (gb["bdry_dB_x_grad_u_gradH_eta"], cb[2]),
        (generic.lhs, classical.lhs),
        (generic.rhs, classical.rhs),
    ]
    scale = max(abs(v) for v in generic.terms().values()) or 1.0
    return max(abs(g - c) for g, c in pairs) / scale


@dataclass
class DirichletReduction:
    reduced: float
    unreduced: float
    power_form: float | None
    relative_gap: float

    def as_dict(self):
        return dict(self.__dict__)


def _check_trace(u: GridField, tol):
    scale = max(u.scale(), 1e-300)
    t = float(np.max(np.abs(u.trace)))
    if t > tol * scale:
        raise TraceNotZero(f"boundary trace {t:.3e} exceeds {tol:.1e} x field scale")


def dirichlet_boundary_reduction(u: GridField, src: SourceModel, pr: Profile, a, d=None, tol=1e-8) -> DirichletReduction:
    """Boundary side for zero-trace u, using grad u = u_eta eta on the boundary.

    Returns the reduced integral of [G(x,0) - B(H) + B'(H) H](x . eta), the
    unreduced boundary sum from :func:`identity_sides`, and for the power
    profile ((p-1)/p) int H^p(grad u)(x . eta).
    """
    d = d or u.domain
    _check_trace(u, tol)
    rep = identity_sides(u, src, pr, a, d)
    ev = evaluate_stress(u, pr, a)
    xb, eta, ds = _boundary_geometry(d)
    x_eta = xb[0] * eta[0] + xb[1] * eta[1]
    G0 = src.G(xb[0], xb[1], np.zeros_like(xb[0]))
    dens = G0 - ev.B[-1] + ev.dB[-1] * ev.H[-1]
    reduced = quad_sum(dens * x_eta, ds)
    power_form = None
    if pr.kind == "power":
        power_form = (pr.p - 1.0) / pr.p * quad_sum(ev.H[-1] ** pr.p * x_eta, ds)
    unreduced = rep.rhs
    scale = max(abs(v) for v in rep.boundary_terms.values()) or 1.0
    ref = power_form if power_form is not None else reduced
    gap = max(abs(unreduced - reduced), abs(unreduced - ref)) / scale
    return DirichletReduction(reduced, unreduced, power_form, gap)


@dataclass
class NonexistenceReport:
    min_value: float
    condition_holds: bool
    argmin_boundary_index: int
    argmin_direction: tuple
    argmin_t: float
    min_G0: float
    min_s: float
    power_prediction: float | None

    def as_dict(self):
        return dict(self.__dict__)


def nonexistence_scan(src: SourceModel, pr: Profile, a, d: StarDomain, t_grid=None, n_directions=256, tol=1e-12) -> NonexistenceReport:
    """Minimum of G(x,0) - B(H(xi)) + B'(H(xi)) H(xi) over x on the boundary.

    With xi = t omega and H 1-homogeneous, only s = t H(omega) matters, so
    the sample minimum splits into min_x G(x,0) plus the minimum over
    (omega, t) of B'(s) s - B(s).
    """
    t = np.logspace(-6, 3, 200) if t_grid is None else np.asarray(t_grid, dtype=float)
    th = 2.0 * np.pi * np.arange(n_directions) / n_directions
    omega = np.stack([np.cos(th), np.sin(th)], axis=-1)
    s = t[None, :] * a.value(omega)[:, None]
    B, dB, _ = pr.evaluate(s)
    phi = dB * s - B
    xb = d.boundary_point(d.theta)
    G0 = np.broadcast_to(src.G(xb[0], xb[1], np.zeros_like(xb[0])), xb[0].shape)
    i = int(np.argmin(G0))
    k, m = np.unravel_index(int(np.argmin(phi)), phi.shape)
    value = float(G0[i] + phi[k, m])
    pred = None
    if pr.kind == "power":
        pred = float((1.0 - 1.0 / pr.p) * s.min() ** pr.p + G0.min())
    return NonexistenceReport(
        min_value=value,
        condition_holds=bool(value >= -tol),
        argmin_boundary_index=i,
        argmin_direction=(float(omega[k, 0]), float(omega[k, 1])),
        argmin_t=float(t[m]),
        min_G0=float(G0[i]),
        min_s=float(s.min()),
        power_prediction=pred,
    )


def critical_exponent(p, N):
    """p* - 1 = (N(p-1) + p)/(N - p) for 1 < p < N."""
    if not p > 1:
        raise ValueError("need p > 1")
    if p >= N:
        raise SupercriticalDimensionPair(f"p = {p} >= N = {N}: no critical Sobolev exponent")
    return (N * (p - 1) + p) / (N - p)


def power_source_coefficient(m, p, N):
    """N/(m+1) - (N-p)/p; positive exactly when m < p* - 1."""
    return N / (m + 1.0) - (N - p) / p


def subcritical_functional(u: GridField, src: SourceModel, pr: Profile, a, d=None, tol=1e-8) -> float:
    """N int G(u) - ((N-p)/p) int g(u) u for a zero-trace u."""
    _require_plap_like(pr, src)
    d = d or u.domain
    _check_trace(u, tol)
    rule = d.volume_rule()
    x = rule.nodes
    G = src.G(x[0], x[1], u.values)
    g = src.g(x[0], x[1], u.values)
    return DIM * quad_sum(G, rule.weights) - (DIM - pr.p) / pr.p * quad_sum(g * u.values, rule.weights)


def _require_plap_like(pr, src):
    if pr.kind != "power":
        raise WrongSpecialization("the critical-exponent functional needs the power profile")
    if src.x_dependent:
        raise WrongSpecialization("the critical-exponent functional needs g = g(u)")


@dataclass
class WholespaceReport:
    lhs: float
    lhs_proof_sign: float
    rhs: float
    residual_abs: float
    residual_rel: float
    residual_rel_proof_sign: float
    term_scale: float
    decay_table: list
    support_radius: float

    def as_dict(self):
        return dict(self.__dict__)


def wholespace_check(u: GridField, pr: Profile, a, radii, src: SourceModel | None = None, support_tol=1e-14) -> WholespaceReport:
    """Whole-space identity for a compactly supported u on a large disk.

    Integrals over R^2 are truncated at the disk, which must contain the
    support with a margin of three rings.  ``decay_table`` lists
    (r_n, r_n int_{|x| = r_n} (B(H(grad u)) + |G|) ds) on grid circles.
    """
    d = u.domain
    if d.kind != "disk":
        raise ValueError("whole-space check runs on a centred disk")
    if pr.kind != "power":
        raise ValueError("whole-space identity assumes kappa = 0 (power profile)")
    scale = max(u.scale(), 1e-300)
    if np.max(np.abs(u.values[-3:])) > support_tol * scale:
        raise SupportEscapesGrid("u does not vanish on the outer rings of the disk")
    # outside the support grad u = 0, so most of the disk is critical by design
    src = src if src is not None else manufactured_source(u, pr, a, warn_fraction=1.0)
    rule = d.volume_rule()
    x = rule.nodes
    w = rule.weights
    ev = evaluate_stress(u, pr, a)
    G = src.G(x[0], x[1], u.values)
    xG = src.x_dot_grad_x_G(x[0], x[1], u.values)
    nG = DIM * quad_sum(G, w)
    ixG = quad_sum(xG, w)
    nB = DIM * quad_sum(ev.B, w)
    dBH = quad_sum(ev.dB * ev.H, w)
    lhs, lhs2, rhs = nG + ixG, nG - ixG, nB - dBH
    term_scale = max(abs(nG), abs(ixG), abs(nB), abs(dBH)) or 1.0
    R = d.params[0]
    table = []
    for r in radii:
        i = int(round(r / R * d.n_r))
        if not 0 < i <= d.n_r:
            raise SupportEscapesGrid(f"radius {r} is outside the grid")
        ri = d.s[i] * R
        dens = ev.B[i] + np.abs(G[i])
        table.append((ri, ri * quad_sum(dens, np.full(d.n_theta, ri * d.h_theta))))
    nz = np.abs(u.values) > support_tol * scale
    support = float(np.max(np.hypot(x[0], x[1])[nz])) if nz.any() else 0.0
    return WholespaceReport(
        lhs=lhs,
        lhs_proof_sign=lhs2,
        rhs=rhs,
        residual_abs=abs(lhs - rhs),
        residual_rel=abs(lhs - rhs) / term_scale,
        residual_rel_proof_sign=abs(lhs2 - rhs) / term_scale,
        term_scale=term_scale,
        decay_table=table,
        support_radius=support,
    )
