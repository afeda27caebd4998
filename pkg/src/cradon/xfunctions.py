"""Functions on X = S^3 x C with analytic s-derivatives.

Every function here satisfies psi(w e^{i theta}, s e^{i theta}) = psi(w, s)
by construction, except ``Generic``, whose phase behaviour is checked on
request.
"""

from __future__ import annotations

import math

import numpy as np

from . import profiles as pf
from .numerics import SphereGrid


class XFunction:
    """psi(w, s); ``sderiv(w, s, a, b)`` gives d^a/ds^a d^b/dsbar^b psi."""

    smooth = True

    def __call__(self, w, s):
        return self.sderiv(w, s, 0, 0)

    def sderiv(self, w, s, a: int, b: int):
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


def _overlap(w, w0):
    w = np.asarray(w, dtype=complex)
    return np.abs(np.sum(w * np.conj(np.asarray(w0, dtype=complex)), axis=-1)) ** 2


class Window:
    """Phase-invariant direction window: 1 near the fibre of w0, 0 far from it.

    Depends on w only through |<w, conj(w0)>|^2, which is unchanged by
    w -> w e^{i theta}.
    """

    def __init__(self, w0, inner: float, outer: float):
        w0 = np.asarray(w0, dtype=complex)
        self.w0 = w0 / np.linalg.norm(w0)
        self.profile = pf.CutoffProfile(inner, outer)

    def __call__(self, w):
        return self.profile(1.0 - _overlap(w, self.w0))

    def describe(self):
        inner, outer = self.profile.inner, self.profile.outer
        return {"w0": [[c.real, c.imag] for c in self.w0], "inner": inner, "outer": outer}


class SRadial(XFunction):
    """amp * window(w) * G(|s - <c, w>|^2)."""

    def __init__(self, profile: pf.Profile, center=(0, 0), amp: complex = 1.0, window: Window | None = None):
        self.profile = profile
        self.center = np.asarray(center, dtype=complex)
        self.amp = complex(amp)
        self.window = window

    def sderiv(self, w, s, a, b):
        w = np.asarray(w, dtype=complex)
        sigma = np.asarray(s, dtype=complex) - np.sum(self.center * w, axis=-1)
        out = self.amp * pf.radial_derivative_1d(self.profile, sigma, a, b)
        if self.window is not None:
            out = out * self.window(w)
        return out

    @property
    def s_support(self):
        """Radius of the s-support around <c, w>, or None."""
        sup = self.profile.support
        return None if sup is None else math.sqrt(sup)

    def describe(self):
        d = {"kind": "s-radial", "profile": _profile_desc(self.profile), "center": [[c.real, c.imag] for c in self.center]}
        d["amp"] = [self.amp.real, self.amp.imag]
        if self.window is not None:
            d["window"] = self.window.describe()
        return d


def _profile_desc(p):
    if isinstance(p, pf.ProductProfile):
        return {"product": [_profile_desc(p.first), _profile_desc(p.second)]}
    if isinstance(p, pf.ScaledProfile):
        return {"scaled": [p.scale.real if isinstance(p.scale, complex) else p.scale, _profile_desc(p.base)]}
    return {type(p).__name__: vars(p)}


def gaussian_s(width: float = 1.0, center=(0, 0), amp=1.0, cutoff: tuple | None = None, window=None) -> SRadial:
    """exp(-|s - <c,w>|^2 / width^2), optionally times a smooth cutoff in s."""
    prof = pf.GaussianProfile(width)
    if cutoff is not None:
        prof = pf.ProductProfile(prof, pf.CutoffProfile(*cutoff))
    return SRadial(prof, center, amp, window)


def bump_s(radius: float, center=(0, 0), amp=1.0, window=None) -> SRadial:
    return SRadial(pf.BumpProfile(radius), center, amp, window)


class Indicator(XFunction):
    """chi(|s| <= R): bounded by 1 and not differentiable."""

    smooth = False

    def __init__(self, radius: float):
        self.radius = float(radius)

    def sderiv(self, w, s, a, b):
        if a or b:
            raise ValueError("the indicator has no s-derivatives")
        s = np.asarray(s, dtype=complex)
        shape = np.broadcast_shapes(np.shape(w)[:-1], s.shape)
        return np.broadcast_to((np.abs(s) <= self.radius).astype(complex), shape)

    def describe(self):
        return {"kind": "indicator", "radius": self.radius}


class Constant(XFunction):
    def __init__(self, value: complex = 1.0):
        self.value = complex(value)

    def sderiv(self, w, s, a, b):
        shape = np.broadcast_shapes(np.shape(w)[:-1], np.shape(s))
        return np.full(shape, self.value if a == b == 0 else 0j)

    def describe(self):
        return {"kind": "constant", "value": [self.value.real, self.value.imag]}


class Generic(XFunction):
    """User callable with optional s-derivative callables keyed by (a, b)."""

    def __init__(self, fn, derivs: dict | None = None, name: str = "generic"):
        self.fn = fn
        self.derivs = dict(derivs or {})
        self.name = name

    def sderiv(self, w, s, a, b):
        if a == b == 0:
            return np.asarray(self.fn(w, s), dtype=complex)
        if (a, b) not in self.derivs:
            raise ValueError(f"{self.name}: s-derivative ({a}, {b}) unavailable")
        return np.asarray(self.derivs[(a, b)](w, s), dtype=complex)

    def describe(self):
        return {"kind": self.name}


class Sum(XFunction):
    def __init__(self, parts):
        self.parts = [(complex(c), f) for c, f in parts]
        self.smooth = all(f.smooth for _, f in self.parts)

    def sderiv(self, w, s, a, b):
        return sum(c * f.sderiv(w, s, a, b) for c, f in self.parts)

    def describe(self):
        return {"kind": "sum", "parts": [[[c.real, c.imag], f.describe()] for c, f in self.parts]}


def phase_defect(psi: XFunction, sphere: SphereGrid, s_probe=None, thetas=None) -> float:
    """max |psi(w e^{i theta}, s e^{i theta}) - psi(w, s)| over probes.

    Matched node pairs are formed by rotating every node; the comparison
    is done on the same psi, so no interpolation enters.
    """
    if s_probe is None:
        s_probe = np.array([0.0, 0.3 + 0.4j, -1.1 + 0.2j, 1.7j])
    if thetas is None:
        thetas = 2.0 * math.pi * np.arange(1, 4) / 4.0
    w = sphere.nodes[:, None, :]
    s = np.asarray(s_probe)[None, :]
    base = psi(w, s)
    worst = 0.0
    for th in thetas:
        ph = np.exp(1j * th)
        worst = max(worst, float(np.max(np.abs(psi(w * ph, s * ph) - base))))
    return worst
