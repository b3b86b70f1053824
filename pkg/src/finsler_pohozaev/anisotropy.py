"""Finsler norms H: value, gradient and Hessian, plus numerical hypothesis checks.

Batch evaluators take arrays whose *last* axis holds the N components of
xi, so ``xi.shape == (..., N)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateGradient, NotUniformlyElliptic

DEGENERACY_FLOOR = 1e-14
ELLIPTICITY_FLOOR = 1e-12


class Anisotropy:
    """Base class.  Subclasses are immutable; every method is reentrant."""

    kind: str = ""
    dim: int = 2

    def value(self, xi):
        raise NotImplementedError

    def gradient(self, xi):
        raise NotImplementedError

    def hessian(self, xi):
        raise NotImplementedError

    def kernel_args(self):
        """(code, params) consumed by the compiled 2D kernels."""
        raise NotImplementedError

    def evaluate(self, xi, scale=1.0):
        """Return ``(H, gradH, hessH)`` at a single nonzero vector ``xi``.

        Raises DegenerateGradient when ``|xi| < 1e-14 * scale``; callers
        working on grids mask such points instead of regularizing H.
        """
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {xi.shape}")
        if np.linalg.norm(xi) < DEGENERACY_FLOOR * scale:
            raise DegenerateGradient(f"|xi| = {np.linalg.norm(xi):.3e} is below the degeneracy floor")
        return float(self.value(xi)), self.gradient(xi), self.hessian(xi)

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Euclidean(Anisotropy):
    dim: int = 2
    kind: str = field(default="euclidean", init=False)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dimension must be at least 2")

    def value(self, xi):
        return np.linalg.norm(np.asarray(xi, dtype=float), axis=-1)

    def gradient(self, xi):
        xi = np.asarray(xi, dtype=float)
        return xi / self.value(xi)[..., None]

    def hessian(self, xi):
        xi = np.asarray(xi, dtype=float)
        r = self.value(xi)[..., None, None]
        e = xi[..., :, None] / r
        eye = np.eye(self.dim)
        return (eye - e * np.swapaxes(e, -1, -2)) / r

    def kernel_args(self):
        return _kernels.EUCLIDEAN, np.zeros(3)

    def describe(self):
        return {"kind": self.kind, "dim": self.dim}


@dataclass(frozen=True)
class Ellipsoidal(Anisotropy):
    """H(xi) = sqrt(xi^T A xi) for a symmetric positive-definite A."""

    matrix: tuple
    kind: str = field(default="ellipsoidal", init=False)
    dim: int = field(default=2, init=False)

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
            raise ValueError("matrix must be square with N >= 2")
        if not np.allclose(A, A.T, rtol=0, atol=1e-14 * np.abs(A).max()):
            raise ValueError("matrix must be symmetric")
        if np.linalg.eigvalsh(A).min() <= 0:
            raise ValueError("matrix must be positive definite")
        object.__setattr__(self, "matrix", tuple(map(tuple, A.tolist())))
        object.__setattr__(self, "dim", A.shape[0])

    @property
    def A(self):
        return np.array(self.matrix)

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", xi, self.A, xi))

    def gradient(self, xi):
        xi = np.asarray(xi, dtype=float)
        return (xi @ self.A) / self.value(xi)[..., None]

    def hessian(self, xi):
        # closed form (A H^2 - (A xi)(A xi)^T) / H^3
        xi = np.asarray(xi, dtype=float)
        H = self.value(xi)[..., None, None]
        Axi = (xi @ self.A)[..., :, None]
        return (self.A * H**2 - Axi * np.swapaxes(Axi, -1, -2)) / H**3

    def kernel_args(self):
        if self.dim != 2:
            raise ValueError("grid kernels are two-dimensional")
        A = self.A
        return _kernels.ELLIPSOIDAL, np.array([A[0, 0], A[0, 1], A[1, 1]])

    def describe(self):
        return {"kind": self.kind, "matrix": [list(r) for r in self.matrix]}


@dataclass(frozen=True)
class SmoothedLq(Anisotropy):
    """H(xi) = L(xi) - N^(1/q) eps with L(xi) = (sum_i (xi_i^2 + eps^2)^(q/2))^(1/q).

    L is the l^q norm of the vector (sqrt(xi_i^2 + eps^2)), hence convex and
    C^infinity for eps > 0; the shift normalizes H(0) = 0.  With ``eps > 0``
    H is only approximately 1-homogeneous (quadratic near 0); the defect is largest for
    |xi| comparable to eps and is reported by :func:`check_homogeneity`.
    """

    q: float
    eps: float = 0.0
    dim: int = 2
    kind: str = field(default="smoothed-lq", init=False)

    def __post_init__(self):
        if not self.q > 1:
            raise ValueError("exponent q must exceed 1")
        if self.eps < 0:
            raise ValueError("smoothing eps must be non-negative")
        if self.dim < 2:
            raise ValueError("dimension must be at least 2")

    def _t(self, xi):
        return np.asarray(xi, dtype=float) ** 2 + self.eps**2

    def _L(self, xi):
        return np.sum(self._t(xi) ** (0.5 * self.q), axis=-1) ** (1.0 / self.q)

    def value(self, xi):
        return np.maximum(self._L(xi) - self.dim ** (1.0 / self.q) * self.eps, 0.0)

    def _a(self, xi):
        xi = np.asarray(xi, dtype=float)
        t = self._t(xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t > 0, t ** (0.5 * self.q - 1.0) * xi, 0.0)

    def gradient(self, xi):
        L = self._L(xi)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            return L ** (1.0 - self.q) * self._a(xi)

    def hessian(self, xi):
        xi = np.asarray(xi, dtype=float)
        q, eps = self.q, self.eps
        L = self._L(xi)[..., None, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            if eps == 0.0:
                d = (q - 1.0) * np.abs(xi) ** (q - 2.0)
            else:
                t = self._t(xi)
                d = t ** (0.5 * q - 2.0) * ((q - 1.0) * xi**2 + eps**2)
        g = self.gradient(xi)[..., :, None]
        diag = d[..., :, None] * np.eye(self.dim)
        return L ** (1.0 - q) * diag - (q - 1.0) / L * (g * np.swapaxes(g, -1, -2))

    def kernel_args(self):
        if self.dim != 2:
            raise ValueError("grid kernels are two-dimensional")
        return _kernels.SMOOTHED_LQ, np.array([self.q, self.eps, 0.0])

    def describe(self):
        return {"kind": self.kind, "q": self.q, "eps": self.eps, "dim": self.dim}


def from_config(spec: dict) -> Anisotropy:
    kind = spec.get("kind", "euclidean")
    if kind == "euclidean":
        return Euclidean(dim=int(spec.get("dim", 2)))
    if kind == "ellipsoidal":
        entries = [float(v) for v in spec["matrix"]]
        n = int(round(np.sqrt(len(entries))))
        if n * n != len(entries):
            raise ValueError("ellipsoidal matrix needs N*N row-major entries")
        return Ellipsoidal(np.array(entries).reshape(n, n))
    if kind in ("smoothed-lq", "lq"):
        return SmoothedLq(float(spec["q"]), float(spec.get("eps", 0.0)), int(spec.get("dim", 2)))
    raise ValueError(f"unknown anisotropy kind {kind!r}")


# ------------------------------------------------------------------ sampling


def _sphere_sweep(dim, n):
    """Deterministic, quasi-uniform points on the Euclidean unit sphere."""
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    # Fibonacci lattice in 3D; R2-sequence mapped through the Gaussian
    # quantile for higher dimensions.
    if dim == 3:
        k = np.arange(n) + 0.5
        z = 1.0 - 2.0 * k / n
        phi = np.pi * (1.0 + 5**0.5) * k
        r = np.sqrt(1.0 - z * z)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    from scipy.stats import norm, qmc

    pts = norm.ppf(qmc.Halton(d=dim, scramble=False).random(n + 1)[1:])
    return pts / np.linalg.norm(pts, axis=-1, keepdims=True)


def _refine(objective, best, rng, rounds, n_local, radius):
    """Seeded random local search on the sphere around ``best`` (minimizes)."""
    best_val = objective(best[None, :])[0]
    for _ in range(rounds):
        cand = best + radius * rng.standard_normal((n_local, best.size))
        cand /= np.linalg.norm(cand, axis=-1, keepdims=True)
        vals = objective(cand)
        k = np.nanargmin(vals)
        if vals[k] < best_val:
            best, best_val = cand[k], vals[k]
        radius *= 0.5
    return best, best_val


def _sphere_minimum(objective, dim, n_samples, seed, rounds=50, n_local=16):
    pts = _sphere_sweep(dim, n_samples)
    vals = objective(pts)
    k = int(np.nanargmin(vals))
    rng = np.random.default_rng(seed)
    radius = 2.0 * np.pi / max(n_samples, 1) if dim == 2 else n_samples ** (-1.0 / (dim - 1))
    _, best = _refine(objective, pts[k], rng, rounds, n_local, radius)
    return float(min(best, vals[k]))


# ---------------------------------------------------------------- hypotheses


def check_homogeneity(a: Anisotropy, n_samples: int = 10_000, seed: int = 0) -> float:
    """Max over random (s, xi) of |H(s xi) - |s| H(xi)| / (|s| H(xi))."""
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_samples, a.dim)) * np.exp(rng.uniform(-3, 3, (n_samples, 1)))
    s = rng.choice([-1.0, 1.0], n_samples) * np.exp(rng.uniform(-4, 4, n_samples))
    H = a.value(xi)
    Hs = a.value(s[:, None] * xi)
    return float(np.max(np.abs(Hs - np.abs(s) * H) / (np.abs(s) * H)))


def check_euler(a: Anisotropy, n_samples: int = 10_000, seed: int = 0) -> float:
    """Max relative defect of <grad H(xi), xi> = H(xi)."""
    rng = np.random.default_rng(seed + 1)
    xi = rng.standard_normal((n_samples, a.dim)) * np.exp(rng.uniform(-3, 3, (n_samples, 1)))
    H = a.value(xi)
    lhs = np.sum(a.gradient(xi) * xi, axis=-1)
    return float(np.max(np.abs(lhs - H) / H))


def check_hessian_annihilates(a: Anisotropy, n_samples: int = 1000, seed: int = 0) -> float:
    """Max of |D^2H(xi) xi| / (|D^2H(xi)| |xi|): zero for 1-homogeneous H."""
    rng = np.random.default_rng(seed + 2)
    xi = rng.standard_normal((n_samples, a.dim))
    D = a.hessian(xi)
    Dx = np.einsum("...ij,...j->...i", D, xi)
    scale = np.linalg.norm(D, axis=(-2, -1)) * np.linalg.norm(xi, axis=-1)
    return float(np.max(np.linalg.norm(Dx, axis=-1) / scale))


def _tangential_min_eig(a: Anisotropy, omega):
    xi = omega / a.value(omega)[:, None]
    g = a.gradient(xi)
    D = a.hessian(xi)
    if a.dim == 2:
        v = np.stack([-g[:, 1], g[:, 0]], axis=-1)
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        return np.einsum("ki,kij,kj->k", v, D, v)
    out = np.empty(len(omega))
    for k in range(len(omega)):
        # orthonormal basis of grad H^perp from a full QR of [g | I]
        Q, _ = np.linalg.qr(np.column_stack([g[k], np.eye(a.dim)]))
        P = Q[:, 1 : a.dim]
        out[k] = np.linalg.eigvalsh(P.T @ D[k] @ P).min()
    return out


def estimate_ellipticity(a: Anisotropy, n_boundary_samples: int = 10_000, seed: int = 0) -> float:
    """Estimate the uniform-ellipticity constant on {H = 1}.

    Raises NotUniformlyElliptic when the estimate is not above 1e-12.  Note
    that unsmoothed l^q with q > 2 has flat points on the coordinate axes,
    which the sweep hits exactly.
    """
    lam = _sphere_minimum(lambda w: _tangential_min_eig(a, w), a.dim, n_boundary_samples, seed)
    if not lam > ELLIPTICITY_FLOOR:
        raise NotUniformlyElliptic(f"estimated ellipticity constant {lam:.3e} is not positive")
    return lam


def estimate_norm_equivalence(a: Anisotropy, n_samples: int = 10_000, seed: int = 0):
    """(min H, max H) over the Euclidean unit sphere."""
    c1 = _sphere_minimum(a.value, a.dim, n_samples, seed)
    c2 = -_sphere_minimum(lambda w: -a.value(w), a.dim, n_samples, seed + 1)
    return c1, c2


@dataclass(frozen=True)
class AnisotropyReport:
    lambda_hat: float
    c1_hat: float
    c2_hat: float
    max_homogeneity_error: float
    max_euler_error: float
    sample_count: int

    def as_dict(self):
        return dict(self.__dict__)


def check_hypotheses(a: Anisotropy, n_samples: int = 10_000, seed: int = 0) -> AnisotropyReport:
    c1, c2 = estimate_norm_equivalence(a, n_samples, seed)
    return AnisotropyReport(
        lambda_hat=estimate_ellipticity(a, n_samples, seed),
        c1_hat=c1,
        c2_hat=c2,
        max_homogeneity_error=check_homogeneity(a, n_samples, seed),
        max_euler_error=check_euler(a, n_samples, seed),
        sample_count=n_samples,
    )
