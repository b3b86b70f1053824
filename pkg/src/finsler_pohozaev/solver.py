"""Zero-trace solutions by direct minimization of int B(H(grad u)) - G(x, u).

The energy is discretized with P1 triangles on the nodes of the polar grid
(central-difference energies have checkerboard null modes).  Descent
directions come from a secant preconditioner, the weighted stiffness
matrix with weights B'(H)/H and tensor D^2(H^2/2), accepted through
Armijo backtracking.  For p != 2 the degenerate problem is approached
through a geometric kappa-continuation of the regularized profile.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import splu

from . import _kernels
from .anisotropy import Ellipsoidal, Euclidean
from .domain import StarDomain
from .errors import LineSearchFailure, MaxIterations, NotCoercive
from .field import GridField
from .profile import Profile
from .sources import ConstantSource, GridSource, PowerSource, SeparableSource, ShiftedPrimitive

log = logging.getLogger(__name__)

# relative energy decrement below which no step can be resolved in float64
ROUNDOFF = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    decrement_tolerance: float = 1e-13
    stage_decrement_tolerance: float = 1e-9
    kappa0: float = 0.1
    kappa_factor: float = 0.1
    kappa_min: float = 1e-3
    kappa_target: float = 0.0
    stage_iterations: int = 40
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 60
    max_step: float = 2.0

    def __post_init__(self):
        if self.gradient_tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("tolerances and iteration limits must be positive")
        if not 0 < self.kappa_factor < 1 or self.kappa0 <= 0:
            raise ValueError("kappa schedule must decrease geometrically from kappa0 > 0")
        if not 0 < self.backtrack < 1 or not 0 < self.armijo < 1:
            raise ValueError("line-search parameters must lie in (0, 1)")

    def schedule(self, p, target=None):
        """kappa0, kappa0 * factor, ... down to kappa_min, then the target."""
        target = self.kappa_target if target is None else target
        if p == 2.0:
            return [target]
        out, k = [], 0
        while (kappa := round(self.kappa0 * self.kappa_factor**k, 15)) > max(self.kappa_min, target):
            out.append(kappa)
            k += 1
        return out + [target]


@dataclass
class SolveResult:
    u: GridField
    iterations: int
    energy: float
    gradient_norm: float
    kappa_path: list
    energy_history: list = field(default_factory=list)
    stage_energies: list = field(default_factory=list)
    converged: bool = False

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "energy": self.energy,
            "gradient_norm": self.gradient_norm,
            "kappa_path": self.kappa_path,
            "stage_energies": self.stage_energies,
            "converged": self.converged,
        }


# --------------------------------------------------------------------- mesh


class PolarMesh:
    """P1 triangles in the computational (s, theta) rectangle.

    Each grid cell is split in two along alternating diagonals; element
    gradients and areas use the exact polar Jacobian at the computational
    centroid, so the curved boundary is represented without a polygonal
    deficit.  The pole row collapses to a single node (index 0).
    """

    def __init__(self, d: StarDomain):
        self.domain = d
        nr, nt = d.n_r, d.n_theta
        X = d.nodes()
        self.points = np.concatenate([[[0.0, 0.0]], np.stack([X[0, 1:].ravel(), X[1, 1:].ravel()], axis=-1)])

        def idx(i, j):
            return np.where(i == 0, 0, 1 + (i - 1) * nt + (j % nt))

        h, k = d.h_s, d.h_theta
        j = np.arange(nt)
        # corner order: (i, j), (i+1, j), (i+1, j+1), (i, j+1)
        plain, flipped = ((0, 1, 2), (0, 2, 3)), ((0, 1, 3), (1, 2, 3))
        tris, comp = [], []
        for i in range(nr):
            ci = np.array([i, i + 1, i + 1, i])[:, None] + 0 * j
            cj = np.stack([j, j, j + 1, j + 1])
            flip = (i + j) % 2 == 1
            for t_no, t_fl in zip(plain, flipped):
                vi = np.where(flip, ci[list(t_fl)], ci[list(t_no)])
                vj = np.where(flip, cj[list(t_fl)], cj[list(t_no)])
                tris.append(idx(vi, vj).T)
                comp.append(np.stack([vi.T * h, vj.T * k], -1))
        self.tri = np.ascontiguousarray(np.concatenate(tris))
        P = np.concatenate(comp)
        s0, t0 = P[:, 0, 0], P[:, 0, 1]
        s1, t1 = P[:, 1, 0], P[:, 1, 1]
        s2, t2 = P[:, 2, 0], P[:, 2, 1]
        det = (s1 - s0) * (t2 - t0) - (s2 - s0) * (t1 - t0)
        bs = np.stack([t1 - t2, t2 - t0, t0 - t1], -1) / det[:, None]
        bt = np.stack([s2 - s1, s0 - s2, s1 - s0], -1) / det[:, None]
        sc, tc = P[..., 0].mean(axis=1), P[..., 1].mean(axis=1)
        rho, drho = d.rho(tc)[:, None], d.drho(tc)[:, None]
        cos, sin = np.cos(tc)[:, None], np.sin(tc)[:, None]
        ar = bs / rho
        at = (bt / sc[:, None] - drho * ar) / rho
        self.bx = np.ascontiguousarray(ar * cos - at * sin)
        self.by = np.ascontiguousarray(ar * sin + at * cos)
        self.area = 0.5 * np.abs(det) * sc * rho[:, 0] ** 2
        n = len(self.points)
        self.mass = np.bincount(self.tri.ravel(), np.repeat(self.area / 3.0, 3), minlength=n)
        self.free = np.ones(n, dtype=bool)
        self.free[1 + (nr - 1) * nt :] = False

    def to_grid(self, u):
        d = self.domain
        vals = np.empty((d.n_r + 1, d.n_theta))
        vals[0] = u[0]
        vals[1:] = u[1:].reshape(d.n_r, d.n_theta)
        return GridField(vals, d)

    def from_grid(self, f: GridField):
        return np.concatenate([[f.values[0].mean()], f.values[1:].ravel()])

    def element_gradients(self, u):
        ue = u[self.tri]
        return np.einsum("ij,ij->i", self.bx, ue), np.einsum("ij,ij->i", self.by, ue)


class _Energy:
    def __init__(self, mesh: PolarMesh, src, pr: Profile, a):
        self.mesh, self.src, self.pr, self.a = mesh, src, pr, a
        self.acode, self.aprm = a.kernel_args()
        d = mesh.domain
        self.X = d.nodes()

    def _source(self, u, which):
        U = self.mesh.to_grid(u).values
        vals = getattr(self.src, which)(self.X[0], self.X[1], U)
        return self.mesh.from_grid(GridField(np.broadcast_to(vals, U.shape), self.mesh.domain))

    def value_and_grad(self, u):
        pcode, p, kappa = self.pr.kernel_args()
        m = self.mesh
        e, g = _kernels.p1_energy_gradient(m.tri, m.bx, m.by, m.area, u, self.acode, self.aprm, pcode, p, kappa)
        e -= float(np.dot(m.mass, self._source(u, "G")))
        g = g - m.mass * self._source(u, "g")
        return e, g

    def value(self, u):
        pcode, p, kappa = self.pr.kernel_args()
        m = self.mesh
        e, _ = _kernels.p1_energy_gradient(m.tri, m.bx, m.by, m.area, u, self.acode, self.aprm, pcode, p, kappa)
        return e - float(np.dot(m.mass, self._source(u, "G")))

    def preconditioner(self, u):
        """Secant stiffness on the free nodes: weights B'(H)/H, tensor D^2(H^2/2)."""
        m = self.mesh
        gx, gy = m.element_gradients(u)
        xi = np.stack([gx, gy], axis=-1)
        H = self.a.value(xi)
        _, dB, d2B = self.pr.evaluate(H)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(H > 0, dB / H, d2B)
        finite = np.isfinite(w) & (w > 0)
        top = np.max(w[finite]) if finite.any() else 1.0
        w = np.clip(np.where(finite, w, top), 1e-8 * top, top)
        return self._assemble(w[:, None, None] * self._metric(xi, H))

    def _assemble(self, M):
        m = self.mesh
        k11 = m.area * M[:, 0, 0]
        k12 = m.area * M[:, 0, 1]
        k22 = m.area * M[:, 1, 1]
        bx, by = m.bx, m.by
        local = (
            k11[:, None, None] * bx[:, :, None] * bx[:, None, :]
            + k12[:, None, None] * (bx[:, :, None] * by[:, None, :] + by[:, :, None] * bx[:, None, :])
            + k22[:, None, None] * by[:, :, None] * by[:, None, :]
        )
        rows = np.repeat(m.tri, 3, axis=1).ravel()
        cols = np.tile(m.tri, (1, 3)).ravel()
        n = len(m.points)
        K = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))
        f = m.free
        return K[f][:, f].tocsc()

    def _metric(self, xi, H):
        n = len(xi)
        if isinstance(self.a, Euclidean):
            return np.broadcast_to(np.eye(2), (n, 2, 2))
        if isinstance(self.a, Ellipsoidal):
            return np.broadcast_to(self.a.A, (n, 2, 2))
        out = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
        ok = H > 1e-12 * max(H.max(), 1e-300)
        g = self.a.gradient(xi[ok])
        out[ok] = g[:, :, None] * g[:, None, :] + H[ok, None, None] * self.a.hessian(xi[ok])
        return out


def _factor(P):
    return splu(P, permc_spec="MMD_AT_PLUS_A")


def _check_coercive(src, pr):
    base = src.base if isinstance(src, ShiftedPrimitive) else src
    if isinstance(base, (ConstantSource, GridSource)):
        return
    if isinstance(base, SeparableSource) and base.x_only:
        return
    if isinstance(base, PowerSource):
        if base.lam <= 0 or base.m < pr.p - 1.0:
            return
        raise NotCoercive(
            f"g(u) = |u|^(m-1) u with m = {base.m} >= p - 1 = {pr.p - 1}: energy is unbounded below"
        )
    raise NotCoercive(f"cannot certify coercivity for source {base.describe()}")


def energy(u: GridField, src, pr: Profile, a, d: StarDomain | None = None) -> float:
    """Discrete energy sum_T |T| B(H(grad u_T)) - sum_i m_i G(x_i, u_i)."""
    d = d or u.domain
    mesh = PolarMesh(d)
    return _Energy(mesh, src, pr, a).value(mesh.from_grid(u))


def _step(fun: _Energy, u, d, e, slope, cfg: SolverConfig):
    """Line minimization over (0, max_step], Armijo-checked, backtracking as fallback.

    Returns (alpha, trial, energy) or None when no step decreases the energy.
    """
    phi = lambda t: fun.value(u + t * d)  # noqa: E731
    best = minimize_scalar(phi, bounds=(0.0, cfg.max_step), method="bounded", options={"xatol": 1e-3})
    candidates = [float(best.x)]
    alpha = 1.0
    for _ in range(cfg.max_backtracks):
        candidates.append(alpha)
        alpha *= cfg.backtrack
    for alpha in candidates:
        trial = u + alpha * d
        et = fun.value(trial)
        if et < e and et <= e + cfg.armijo * alpha * slope:
            return alpha, trial, et
    return None


def _descend(fun: _Energy, u, cfg: SolverConfig, max_iter, history, kappa, strict):
    dtol = cfg.decrement_tolerance if strict else cfg.stage_decrement_tolerance
    m = fun.mesh
    f = m.free
    e, g = fun.value_and_grad(u)
    history.append((kappa, e))
    for it in range(max_iter + 1):
        gf = g[f]
        gnorm = float(np.max(np.abs(gf / m.mass[f])))
        if gnorm <= cfg.gradient_tolerance:
            return u, e, gnorm, it, True
        d = np.zeros_like(u)
        d[f] = -_factor(fun.preconditioner(u)).solve(gf)
        slope = float(np.dot(g, d))
        if slope >= 0:
            d[f] = -gf / m.mass[f]
            slope = float(np.dot(g, d))
        # the decrement -g.d is the energy drop a full Newton-like step predicts
        if -slope <= dtol * max(abs(e), 1e-300):
            return u, e, gnorm, it, True
        if it == max_iter:
            break
        step = _step(fun, u, d, e, slope, cfg)
        if step is None:
            if -slope <= ROUNDOFF * max(abs(e), 1e-300):
                return u, e, gnorm, it, True
            raise LineSearchFailure(f"no energy decrease along the descent direction (slope {slope:.3e})")
        _, u, _ = step
        e, g = fun.value_and_grad(u)
        history.append((kappa, e))
    if strict:
        raise MaxIterations(f"gradient norm {gnorm:.3e}, decrement {-slope:.3e} after {max_iter} iterations")
    return u, e, gnorm, max_iter, False


def solve_dirichlet(src, pr: Profile, a, d: StarDomain, cfg: SolverConfig | None = None, u0: GridField | None = None) -> SolveResult:
    """Minimize the energy over fields vanishing on the boundary ring.

    For p != 2 the profile is continued from kappa0 down to its own kappa
    (0 for the power profile), each stage warm-started from the last.
    Intermediate stages stop early; only the final stage raises
    :class:`MaxIterations`.
    """
    cfg = cfg or SolverConfig()
    _check_coercive(src, pr)
    mesh = PolarMesh(d)
    target = pr.kappa if pr.kind == "regularized" else None
    schedule = cfg.schedule(pr.p, target)
    if u0 is None:
        u = np.zeros(len(mesh.points))
        _, g0 = _Energy(mesh, src, pr, a).value_and_grad(u)
        if not np.any(g0[mesh.free]):
            # u = 0 is critical (g(x, 0) = 0): start off it, and skip the
            # continuation, whose near-quadratic stages would make 0 a local minimum
            s = np.concatenate([[0.0], np.repeat(d.s[1:], d.n_theta)])
            u = 1.0 - s**2
            schedule = schedule[-1:]
    else:
        u = mesh.from_grid(u0)
    u[~mesh.free] = 0.0
    history, stages, path = [], [], []
    total = 0
    gnorm, e, ok = np.inf, 0.0, False
    for k, kappa in enumerate(schedule):
        last = k == len(schedule) - 1
        fun = _Energy(mesh, src, pr.with_kappa(kappa), a)
        budget = cfg.max_iterations if last else cfg.stage_iterations
        u, e, gnorm, its, ok = _descend(fun, u, cfg, budget, history, kappa, strict=last)
        total += its
        path.append(kappa)
        stages.append((kappa, e, its))
        log.debug("kappa=%g energy=%.12e |grad|=%.3e iterations=%d", kappa, e, gnorm, its)
    return SolveResult(mesh.to_grid(u), total, e, gnorm, path, history, stages, ok)


@dataclass(frozen=True)
class RadialOracle:
    """u(r) = ((p-1)/p) N^(-1/(p-1)) (R^(p/(p-1)) - r^(p/(p-1)))."""

    p: float
    N: int
    R: float

    @property
    def coefficient(self):
        return (self.p - 1.0) / self.p * self.N ** (-1.0 / (self.p - 1.0))

    @property
    def exponent(self):
        return self.p / (self.p - 1.0)

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return self.coefficient * (self.R**self.exponent - r**self.exponent)

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        return -self.coefficient * self.exponent * r ** (self.exponent - 1.0)

    def __call__(self, x1, x2):
        return self.radial(np.hypot(x1, x2))


def torsion_oracle(p, N=2, R=1.0) -> RadialOracle:
    """Closed-form solution of -div(|grad u|^(p-2) grad u) = 1 on the ball B_R."""
    if not p > 1 or not R > 0:
        raise ValueError("need p > 1 and R > 0")
    return RadialOracle(float(p), int(N), float(R))
