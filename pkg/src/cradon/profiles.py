"""Radial profiles and their Wirtinger derivatives.

A radial function on C^k is written ``G(|u|^2)``; a profile supplies ``G``,
``G'`` and ``G''`` as functions of the squared radius ``x = |u|^2``. With
those three, every Wirtinger derivative of order <= 2 has a closed form:

    d/du_j      G = G' conj(u_j)
    d/dubar_j   G = G' u_j
    d/du_j d/dubar_k G = G'' conj(u_j) u_k + G' [j == k]
    d/du_j d/du_k    G = G'' conj(u_j) conj(u_k)

The same helpers serve the one-variable case (s-derivatives on the
sinogram side) and the two-variable case (derivatives on C^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

MAX_ORDER = 2


class Profile:
    """Base class: ``values(x)`` returns ``(G, G', G'')`` at squared radius x."""

    support: float | None = None  # squared-radius support bound, None if unbounded

    def values(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.values(x)[0]


@dataclass(frozen=True)
class GaussianProfile(Profile):
    width: float = 1.0

    def values(self, x):
        x = np.asarray(x, dtype=float)
        a2 = self.width**2
        g = np.exp(-x / a2)
        return g, -g / a2, g / a2**2


def _flat_bump(v):
    """exp(-1/(1-v)) and its first two v-derivatives, zero for v >= 1."""
    v = np.asarray(v, dtype=float)
    inside = v < 1.0
    one_minus = np.where(inside, 1.0 - v, 1.0)
    f = np.where(inside, np.exp(-1.0 / one_minus), 0.0)
    d1 = -f / one_minus**2
    d2 = f * (1.0 / one_minus**4 - 2.0 / one_minus**3)
    return f, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


@dataclass(frozen=True)
class BumpProfile(Profile):
    """exp(-1/(1 - x/rho^2)) on x < rho^2, zero outside."""

    radius: float = 1.0

    @property
    def support(self):
        return self.radius**2

    def values(self, x):
        r2 = self.radius**2
        f, d1, d2 = _flat_bump(np.asarray(x, dtype=float) / r2)
        return f, d1 / r2, d2 / r2**2


@dataclass(frozen=True)
class BumpRadonProfile(Profile):
    """Complex-hyperplane integral of the unit-amplitude bump of radius rho.

    A hyperplane at distance d from the bump centre cuts a disk of radius
    sqrt(rho^2 - d^2); integrating in polar coordinates and substituting
    y = 1/(1 - u/rho^2) gives pi rho^2 E_2(a)/a with a = 1/(1 - d^2/rho^2).
    The x-derivative is -pi times the bump itself.
    """

    radius: float = 1.0

    @property
    def support(self):
        return self.radius**2

    def values(self, x):
        x = np.asarray(x, dtype=float)
        r2 = self.radius**2
        v = x / r2
        inside = v < 1.0
        a = 1.0 / np.where(inside, 1.0 - v, 1.0)
        g = np.where(inside, math.pi * r2 * special.expn(2, a) / a, 0.0)
        f, fd1, _ = _flat_bump(v)
        return g, -math.pi * f, -math.pi * fd1 / r2


def _smoothstep(t):
    """C-infinity step S(t): 0 for t <= 0, 1 for t >= 1, with S' and S''."""
    t = np.asarray(t, dtype=float)
    mid = (t > 0.0) & (t < 1.0)
    tt = np.where(mid, t, 0.5)
    u = 1.0 - tt

    def psi(y):
        e = np.exp(-1.0 / y)
        return e, e / y**2, e * (1.0 / y**4 - 2.0 / y**3)

    a0, a1, a2 = psi(tt)
    b0, b1, b2 = psi(u)
    # B(t) = psi(1 - t): chain rule flips odd derivatives
    b1 = -b1
    d0 = a0 + b0
    d1 = a1 + b1
    d2 = a2 + b2
    s0 = a0 / d0
    s1 = (a1 * d0 - a0 * d1) / d0**2
    s2 = a2 / d0 - 2 * a1 * d1 / d0**2 - a0 * d2 / d0**2 + 2 * a0 * d1**2 / d0**3
    s0 = np.where(mid, s0, (t >= 1.0).astype(float))
    return s0, np.where(mid, s1, 0.0), np.where(mid, s2, 0.0)


@dataclass(frozen=True)
class CutoffProfile(Profile):
    """Smooth cutoff: 1 for |u| <= inner, 0 for |u| >= outer."""

    inner: float = 1.0
    outer: float = 2.0

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError(f"cutoff needs 0 <= inner < outer, got {self.inner}, {self.outer}")

    @property
    def support(self):
        return self.outer**2

    def values(self, x):
        span = self.outer**2 - self.inner**2
        t = (self.outer**2 - np.asarray(x, dtype=float)) / span
        s0, s1, s2 = _smoothstep(t)
        return s0, -s1 / span, s2 / span**2


@dataclass(frozen=True)
class ProductProfile(Profile):
    first: Profile
    second: Profile

    @property
    def support(self):
        sups = [p.support for p in (self.first, self.second) if p.support is not None]
        return min(sups) if sups else None

    def values(self, x):
        f0, f1, f2 = self.first.values(x)
        g0, g1, g2 = self.second.values(x)
        return f0 * g0, f1 * g0 + f0 * g1, f2 * g0 + 2 * f1 * g1 + f0 * g2


@dataclass(frozen=True)
class ScaledProfile(Profile):
    scale: complex
    base: Profile

    @property
    def support(self):
        return self.base.support

    def values(self, x):
        return tuple(self.scale * v for v in self.base.values(x))


@lru_cache(maxsize=None)
def unit_bump_mass_4d() -> float:
    """Integral of exp(-1/(1-|x|^2)) over the unit ball of R^4."""
    val, _ = integrate.quad(
        lambda r: r**3 * math.exp(-1.0 / (1.0 - r * r)) if r < 1 else 0.0,
        0.0,
        1.0,
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    return 2.0 * math.pi**2 * val


def expand_orders(p, q):
    """Flatten multi-indices into a list of (coordinate, conjugated) pairs."""
    out = []
    for j, pj in enumerate(p):
        out.extend([(j, False)] * int(pj))
    for j, qj in enumerate(q):
        out.extend([(j, True)] * int(qj))
    return out


def radial_derivative(profile: Profile, u, p, q):
    """Wirtinger derivative of ``G(|u|^2)`` with respect to ``u^p ubar^q``.

    ``u`` has shape (..., k); ``p`` and ``q`` are length-k multi-indices
    with total order at most 2.
    """
    u = np.asarray(u, dtype=complex)
    orders = expand_orders(p, q)
    if len(orders) > MAX_ORDER:
        raise ValueError(f"derivative order {len(orders)} exceeds supported order {MAX_ORDER}")
    x = np.sum(np.abs(u) ** 2, axis=-1)
    g0, g1, g2 = profile.values(x)

    def factor(j, conj):
        # d/du_j brings down conj(u_j); d/dubar_j brings down u_j
        return u[..., j] if conj else np.conj(u[..., j])

    if not orders:
        return g0 + 0j
    if len(orders) == 1:
        return g1 * factor(*orders[0])
    (j, cj), (k, ck) = orders
    out = g2 * factor(j, cj) * factor(k, ck)
    if j == k and cj != ck:
        out = out + g1
    return out


def radial_derivative_1d(profile: Profile, sigma, a: int, b: int):
    """``d^a/ds^a d^b/dsbar^b`` of ``G(|sigma|^2)`` for a one-variable sigma."""
    sigma = np.asarray(sigma, dtype=complex)
    return radial_derivative(profile, sigma[..., None], (a,), (b,))
