"""Right-hand sides g(x, s) together with their primitives G and x-gradients of G.

Every model evaluates on broadcastable coordinate arrays ``x1, x2`` and
state arrays ``t``:

* ``g(x1, x2, s)``
* ``G(x1, x2, t)``: integral of g(x, .) over [0, t]
* ``grad_x_G(x1, x2, t)``: the pair (G_{x_1}, G_{x_2})
"""

from __future__ import annotations

import numpy as np

_GL_CACHE = {}


def _gauss_legendre01(n):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


def integrate_in_state(fun, t, atol=1e-12, n0=8, n_max=512):
    """Vectorized int_0^t fun(s) ds by Gauss-Legendre with order doubling.

    Stops when two successive orders agree to ``atol`` everywhere.
    """
    t = np.asarray(t, dtype=float)
    prev = None
    n = n0
    while n <= n_max:
        nodes, weights = _gauss_legendre01(n)
        vals = sum(w * fun(x * t) for x, w in zip(nodes, weights))
        cur = t * vals
        if prev is not None and np.max(np.abs(cur - prev), initial=0.0) <= atol:
            return cur
        prev = cur
        n *= 2
    return prev


class SourceModel:
    x_dependent = True

    def g(self, x1, x2, s):
        raise NotImplementedError

    def G(self, x1, x2, t):
        return integrate_in_state(lambda s: self.g(x1, x2, s), t)

    def grad_x_G(self, x1, x2, t):
        raise NotImplementedError

    def x_dot_grad_x_G(self, x1, x2, t):
        G1, G2 = self.grad_x_G(x1, x2, t)
        return x1 * G1 + x2 * G2

    def describe(self) -> dict:
        return {"kind": type(self).__name__}


class ConstantSource(SourceModel):
    """g(x, s) = c."""

    x_dependent = False

    def __init__(self, value=1.0):
        self.value = float(value)

    def g(self, x1, x2, s):
        return np.broadcast_to(self.value, np.broadcast(x1, s).shape).astype(float)

    def G(self, x1, x2, t):
        return self.value * np.broadcast_to(t, np.broadcast(x1, t).shape).astype(float)

    def grad_x_G(self, x1, x2, t):
        z = np.zeros(np.broadcast(x1, t).shape)
        return z, z

    def describe(self):
        return {"kind": "constant", "value": self.value}


class PowerSource(SourceModel):
    """g(s) = lam |s|^(m-1) s with G(t) = lam |t|^(m+1)/(m+1)."""

    x_dependent = False

    def __init__(self, m, lam=1.0):
        if not m > 0:
            raise ValueError("power source needs m > 0")
        self.m = float(m)
        self.lam = float(lam)

    def g(self, x1, x2, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(self.lam * np.sign(s) * np.abs(s) ** self.m, np.broadcast(x1, s).shape)

    def G(self, x1, x2, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.lam * np.abs(t) ** (self.m + 1.0) / (self.m + 1.0), np.broadcast(x1, t).shape)

    def grad_x_G(self, x1, x2, t):
        z = np.zeros(np.broadcast(x1, t).shape)
        return z, z

    def describe(self):
        return {"kind": "power", "m": self.m, "lam": self.lam}


class SeparableSource(SourceModel):
    """g(x, s) = f(x) phi(s); G and G_x are closed form given Phi = int_0 phi.

    ``grad_f(x1, x2)`` returns the pair of partials of f.  Without phi the
    source is x-dependent only: phi = 1, Phi(t) = t.
    """

    def __init__(self, f, grad_f, phi=None, Phi=None):
        if (phi is None) != (Phi is None):
            raise ValueError("give both phi and its primitive Phi, or neither")
        self.f = f
        self.grad_f = grad_f
        self.x_only = phi is None
        self.phi = phi if phi is not None else (lambda s: np.ones_like(np.asarray(s, dtype=float)))
        self.Phi = Phi if Phi is not None else (lambda t: np.asarray(t, dtype=float))

    def g(self, x1, x2, s):
        return self.f(x1, x2) * self.phi(s)

    def G(self, x1, x2, t):
        return self.f(x1, x2) * self.Phi(t)

    def grad_x_G(self, x1, x2, t):
        f1, f2 = self.grad_f(x1, x2)
        P = self.Phi(t)
        return f1 * P, f2 * P

    def describe(self):
        return {"kind": "separable"}


class GeneralSource(SourceModel):
    """Arbitrary C^1 g(x, s); primitives by Gauss-Legendre quadrature in s."""

    def __init__(self, g, g_x, atol=1e-12):
        self._g = g
        self._g_x = g_x
        self.atol = atol

    def g(self, x1, x2, s):
        return self._g(x1, x2, s)

    def G(self, x1, x2, t):
        return integrate_in_state(lambda s: self._g(x1, x2, s), t, self.atol)

    def grad_x_G(self, x1, x2, t):
        G1 = integrate_in_state(lambda s: self._g_x(x1, x2, s)[0], t, self.atol)
        G2 = integrate_in_state(lambda s: self._g_x(x1, x2, s)[1], t, self.atol)
        return G1, G2

    def describe(self):
        return {"kind": "general"}


class GridSource(SourceModel):
    """x-dependent source g(x, s) = f(x) known only at grid nodes.

    Produced by :func:`finsler_pohozaev.field.manufactured_source`.  It can
    be evaluated on the full node array of its domain or on the boundary
    ring (arrays of shape ``(n_theta,)``).
    """

    def __init__(self, domain, f, grad_f, masked_fraction=0.0):
        self.domain = domain
        self.f = np.asarray(f, dtype=float)
        self.grad_f = (np.asarray(grad_f[0], dtype=float), np.asarray(grad_f[1], dtype=float))
        self.masked_fraction = masked_fraction

    def _pick(self, arr, x1):
        shape = np.shape(x1)
        if shape == arr.shape:
            return arr
        if shape == arr.shape[1:]:
            return arr[-1]
        raise ValueError(
            f"grid source lives on a {arr.shape} grid; cannot evaluate at shape {shape}"
        )

    def g(self, x1, x2, s):
        return self._pick(self.f, x1) * np.ones_like(np.asarray(s, dtype=float))

    def G(self, x1, x2, t):
        return self._pick(self.f, x1) * t

    def grad_x_G(self, x1, x2, t):
        return self._pick(self.grad_f[0], x1) * t, self._pick(self.grad_f[1], x1) * t

    def describe(self):
        return {"kind": "manufactured", "masked_fraction": self.masked_fraction}


class ShiftedPrimitive(SourceModel):
    """Same g as ``base`` but with G(x, 0) = offset.

    Only meaningful for the nonexistence scan, which probes G(x, 0).
    """

    def __init__(self, base, offset):
        self.base = base
        self.offset = float(offset)
        self.x_dependent = base.x_dependent

    def g(self, x1, x2, s):
        return self.base.g(x1, x2, s)

    def G(self, x1, x2, t):
        return self.base.G(x1, x2, t) + self.offset

    def grad_x_G(self, x1, x2, t):
        return self.base.grad_x_G(x1, x2, t)

    def describe(self):
        return {**self.base.describe(), "offset": self.offset}


def from_config(spec: dict) -> SourceModel:
    kind = spec.get("kind", "constant")
    if kind == "constant":
        src = ConstantSource(float(spec.get("value", 1.0)))
    elif kind == "power":
        src = PowerSource(float(spec["m"]), float(spec.get("lam", 1.0)))
    elif kind == "manufactured":
        return None
    else:
        raise ValueError(f"unknown source kind {kind!r}")
    offset = float(spec.get("offset", 0.0))
    return ShiftedPrimitive(src, offset) if offset else src
