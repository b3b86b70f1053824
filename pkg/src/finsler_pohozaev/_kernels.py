"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is picked once at import time.  Set ``FINSLER_POHOZAEV_BACKEND``
to ``numpy`` to force the fallback, or to ``numba`` to require numba.  Both
backends expose the same three kernels:

``radial_derivative(u, h)``
    d/ds along axis 0 of a polar grid array (central inside, second-order
    one-sided at both ends).
``pointwise_stress(xi1, xi2, acode, aprm, pcode, p, kappa, floor)``
    B(H), B'(H), H and the stress B'(H) grad H at every gradient sample.
``p1_energy_gradient(tri, bx, by, area, u, acode, aprm, pcode, p, kappa)``
    sum |T| B(H(grad u_T)) and its nodal gradient for P1 triangles.

Anisotropy codes: 0 euclidean, 1 ellipsoidal (a11, a12, a22), 2 smoothed
l^q (q, eps).  Profile codes: 0 power, 1 regularized.
"""

import math
import os

import numpy as np

EUCLIDEAN, ELLIPSOIDAL, SMOOTHED_LQ = 0, 1, 2
POWER, REGULARIZED = 0, 1

_requested = os.environ.get("FINSLER_POHOZAEV_BACKEND", "").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:
    if _requested == "numba":
        raise
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA and _requested != "numpy" else "numpy"


# ---------------------------------------------------------------- numpy path


def radial_derivative_numpy(u, h):
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    out[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return out


def _profile_numpy(t, pcode, p, kappa):
    if pcode == POWER or kappa == 0.0:
        return t**p / p, t ** (p - 1.0)
    ratio = (t / kappa) ** 2
    B = kappa**p * np.expm1(0.5 * p * np.log1p(ratio)) / p
    Bp = (kappa * kappa + t * t) ** (0.5 * (p - 2.0)) * t
    return B, Bp


def _norm_grad_numpy(x, y, acode, aprm):
    if acode == EUCLIDEAN:
        H = np.hypot(x, y)
        with np.errstate(invalid="ignore", divide="ignore"):
            return H, x / H, y / H
    if acode == ELLIPSOIDAL:
        a11, a12, a22 = aprm[0], aprm[1], aprm[2]
        ax = a11 * x + a12 * y
        ay = a12 * x + a22 * y
        H = np.sqrt(x * ax + y * ay)
        with np.errstate(invalid="ignore", divide="ignore"):
            return H, ax / H, ay / H
    q, eps = aprm[0], aprm[1]
    tx = x * x + eps * eps
    ty = y * y + eps * eps
    L = (tx ** (0.5 * q) + ty ** (0.5 * q)) ** (1.0 / q)
    H = np.maximum(L - 2.0 ** (1.0 / q) * eps, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        fx = np.where(tx > 0.0, tx ** (0.5 * q - 1.0) * x, 0.0)
        fy = np.where(ty > 0.0, ty ** (0.5 * q - 1.0) * y, 0.0)
        scale = L ** (1.0 - q)
        return H, scale * fx, scale * fy


def pointwise_stress_numpy(xi1, xi2, acode, aprm, pcode, p, kappa, floor):
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    r = np.hypot(xi1, xi2)
    mask = r < floor
    skip = mask | (r == 0.0)
    x = np.where(skip, 1.0, xi1)
    y = np.where(skip, 0.0, xi2)
    H, g1, g2 = _norm_grad_numpy(x, y, acode, aprm)
    H = np.where(skip, 0.0, H)
    B, Bp = _profile_numpy(H, pcode, p, kappa)
    s1 = np.where(skip, 0.0, Bp * g1)
    s2 = np.where(skip, 0.0, Bp * g2)
    return B, Bp, H, s1, s2, mask


def p1_energy_gradient_numpy(tri, bx, by, area, u, acode, aprm, pcode, p, kappa):
    ue = u[tri]
    gx = np.einsum("ij,ij->i", bx, ue)
    gy = np.einsum("ij,ij->i", by, ue)
    B, _, _, s1, s2, _ = pointwise_stress_numpy(gx, gy, acode, aprm, pcode, p, kappa, 0.0)
    energy = float(np.dot(area, B))
    contrib = area[:, None] * (s1[:, None] * bx + s2[:, None] * by)
    grad = np.bincount(tri.ravel(), weights=contrib.ravel(), minlength=u.shape[0])
    return energy, grad


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _profile_scalar(t, pcode, p, kappa):
        if t == 0.0:
            return 0.0, 0.0
        if pcode == POWER or kappa == 0.0:
            bp = t ** (p - 1.0)
            return t * bp / p, bp
        ratio = (t / kappa) ** 2
        B = kappa**p * math.expm1(0.5 * p * math.log1p(ratio)) / p
        Bp = (kappa * kappa + t * t) ** (0.5 * (p - 2.0)) * t
        return B, Bp

    @numba.njit(cache=True)
    def _modulus(x, y):
        # hypot is slow; only needed where x^2 + y^2 under- or overflows
        r2 = x * x + y * y
        if 1e-300 < r2 < 1e300:
            return math.sqrt(r2)
        return math.hypot(x, y)

    @numba.njit(cache=True)
    def _norm_grad_scalar(x, y, acode, aprm):
        if acode == EUCLIDEAN:
            H = _modulus(x, y)
            return H, x / H, y / H
        if acode == ELLIPSOIDAL:
            ax = aprm[0] * x + aprm[1] * y
            ay = aprm[1] * x + aprm[2] * y
            H = math.sqrt(x * ax + y * ay)
            return H, ax / H, ay / H
        q = aprm[0]
        eps = aprm[1]
        tx = x * x + eps * eps
        ty = y * y + eps * eps
        L = (tx ** (0.5 * q) + ty ** (0.5 * q)) ** (1.0 / q)
        H = max(L - 2.0 ** (1.0 / q) * eps, 0.0)
        fx = tx ** (0.5 * q - 1.0) * x if tx > 0.0 else 0.0
        fy = ty ** (0.5 * q - 1.0) * y if ty > 0.0 else 0.0
        scale = L ** (1.0 - q)
        return H, scale * fx, scale * fy

    @numba.njit(cache=True)
    def radial_derivative_numba(u, h):
        n, m = u.shape
        out = np.empty((n, m))
        inv = 1.0 / (2.0 * h)
        # row-major sweep: contiguous in j
        for j in range(m):
            out[0, j] = (-3.0 * u[0, j] + 4.0 * u[1, j] - u[2, j]) * inv
        for i in range(1, n - 1):
            for j in range(m):
                out[i, j] = (u[i + 1, j] - u[i - 1, j]) * inv
        for j in range(m):
            out[n - 1, j] = (3.0 * u[n - 1, j] - 4.0 * u[n - 2, j] + u[n - 3, j]) * inv
        return out

    @numba.njit(cache=True)
    def _pointwise_flat(x1, x2, acode, aprm, pcode, p, kappa, floor):
        n = x1.shape[0]
        B = np.zeros(n)
        Bp = np.zeros(n)
        H = np.zeros(n)
        s1 = np.zeros(n)
        s2 = np.zeros(n)
        mask = np.zeros(n, dtype=np.bool_)
        for k in range(n):
            x = x1[k]
            y = x2[k]
            r = _modulus(x, y)
            if r < floor:
                mask[k] = True
                continue
            if r == 0.0:
                continue
            h, g1, g2 = _norm_grad_scalar(x, y, acode, aprm)
            b, bp = _profile_scalar(h, pcode, p, kappa)
            H[k] = h
            B[k] = b
            Bp[k] = bp
            s1[k] = bp * g1
            s2[k] = bp * g2
        return B, Bp, H, s1, s2, mask

    @numba.njit(cache=True)
    def _p1_flat(tri, bx, by, area, u, acode, aprm, pcode, p, kappa):
        grad = np.zeros(u.shape[0])
        energy = 0.0
        for t in range(tri.shape[0]):
            i0 = tri[t, 0]
            i1 = tri[t, 1]
            i2 = tri[t, 2]
            gx = bx[t, 0] * u[i0] + bx[t, 1] * u[i1] + bx[t, 2] * u[i2]
            gy = by[t, 0] * u[i0] + by[t, 1] * u[i1] + by[t, 2] * u[i2]
            if gx == 0.0 and gy == 0.0:
                continue
            h, g1, g2 = _norm_grad_scalar(gx, gy, acode, aprm)
            b, bp = _profile_scalar(h, pcode, p, kappa)
            energy += area[t] * b
            f1 = area[t] * bp * g1
            f2 = area[t] * bp * g2
            grad[i0] += f1 * bx[t, 0] + f2 * by[t, 0]
            grad[i1] += f1 * bx[t, 1] + f2 * by[t, 1]
            grad[i2] += f1 * bx[t, 2] + f2 * by[t, 2]
        return energy, grad

    def pointwise_stress_numba(xi1, xi2, acode, aprm, pcode, p, kappa, floor):
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        shape = np.broadcast(xi1, xi2).shape
        x1 = np.ascontiguousarray(np.broadcast_to(xi1, shape)).ravel()
        x2 = np.ascontiguousarray(np.broadcast_to(xi2, shape)).ravel()
        out = _pointwise_flat(
            x1, x2, int(acode), np.asarray(aprm, dtype=float), int(pcode),
            float(p), float(kappa), float(floor),
        )
        return tuple(a.reshape(shape) for a in out)

    def p1_energy_gradient_numba(tri, bx, by, area, u, acode, aprm, pcode, p, kappa):
        energy, grad = _p1_flat(
            tri, bx, by, area, np.ascontiguousarray(u, dtype=float), int(acode),
            np.asarray(aprm, dtype=float), int(pcode), float(p), float(kappa),
        )
        return float(energy), grad

    def radial_derivative_numba_wrapped(u, h):
        return radial_derivative_numba(np.ascontiguousarray(u, dtype=float), float(h))


KERNELS = {
    "numpy": (radial_derivative_numpy, pointwise_stress_numpy, p1_energy_gradient_numpy),
}
if HAVE_NUMBA:
    KERNELS["numba"] = (
        radial_derivative_numba_wrapped,
        pointwise_stress_numba,
        p1_energy_gradient_numba,
    )

radial_derivative, pointwise_stress, p1_energy_gradient = KERNELS[BACKEND]
