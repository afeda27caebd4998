"""Finite sums of derivatives of point masses and smooth densities.

A term (p, q, mu) stands for d^p dbar^q mu and pairs with a smooth phi as

    <d^p dbar^q mu, phi> = (-1)^(|p|+|q|) * integral of d^p dbar^q phi dmu.

Convolving with a mollifier gives T_m = T * alpha_m, which for a point
mass at z0 is weight * (d^p dbar^q alpha_m)(z - z0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import profiles as pf
from .numerics import SphereGrid, ball_rule, convolve_cn, integrate_sphere, sphere_grid, tree_sum
from .transform import Bump, Combination, DerivativeOf, TestFunction, VolumeGrid, Zero, dual
from .xfunctions import XFunction

MAX_ORDER = pf.MAX_ORDER
DEFAULT_TRUNCATION = 8.0


@dataclass(frozen=True)
class PointMass:
    at: tuple
    weight: complex = 1.0

    def __post_init__(self):
        at = tuple(complex(v) for v in np.asarray(self.at).ravel())
        if len(at) != 2:
            raise ValueError(f"point mass location must have 2 coordinates, got {len(at)}")
        if not np.isfinite(complex(self.weight)):
            raise ValueError("point mass weight must be finite")
        object.__setattr__(self, "at", at)
        object.__setattr__(self, "weight", complex(self.weight))


@dataclass(frozen=True)
class Density:
    fn: TestFunction
    truncation: float = DEFAULT_TRUNCATION


@dataclass(frozen=True)
class Term:
    p: tuple
    q: tuple
    measure: PointMass | Density

    def __post_init__(self):
        p = tuple(int(v) for v in self.p)
        q = tuple(int(v) for v in self.q)
        if len(p) != 2 or len(q) != 2 or min(p + q) < 0:
            raise ValueError(f"bad multi-indices {p}, {q}")
        if sum(p) + sum(q) > MAX_ORDER:
            raise ValueError(f"derivative order {sum(p) + sum(q)} above {MAX_ORDER} not supported")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def order(self) -> int:
        return sum(self.p) + sum(self.q)


@dataclass
class TestDistribution:
    __test__ = False

    terms: list = field(default_factory=list)

    @classmethod
    def delta(cls, at=(0, 0), weight=1.0, p=(0, 0), q=(0, 0)):
        return cls([Term(p, q, PointMass(at, weight))])

    @classmethod
    def density(cls, fn: TestFunction, truncation: float = DEFAULT_TRUNCATION):
        return cls([Term((0, 0), (0, 0), Density(fn, truncation))])

    def __add__(self, other):
        return TestDistribution(self.terms + other.terms)

    def support_points(self):
        """(center, radius) pairs covering the support."""
        out = []
        for t in self.terms:
            if isinstance(t.measure, PointMass):
                out.append((np.asarray(t.measure.at), 0.0))
            else:
                f = t.measure.fn
                out.append((np.asarray(f.center), f.support_radius))
        return out


# ---------------------------------------------------------------- mollifier


class Mollifier(Bump):
    """Normalized radial bump of radius 1/m: m^4/M * exp(-1/(1 - |m z|^2)), M the unit-ball mass."""

    def __init__(self, m: int, center=(0, 0)):
        if m < 1:
            raise ValueError(f"mollifier scale m must be >= 1, got {m}")
        self.m = int(m)
        super().__init__(center, 1.0 / m, m**4 / pf.unit_bump_mass_4d())

    def mass(self, n_r: int = 48, sphere: SphereGrid | None = None) -> float:
        sphere = sphere or sphere_grid(4, 4)
        u, wu = ball_rule(self.center, self.radius, n_r, sphere)
        return float(np.real(tree_sum(self.evaluate(u) * wu)))


# ---------------------------------------------------------------- pairing


@dataclass(frozen=True)
class DensityQuad:
    n_r: int = 40
    n_eta: int = 10
    n_theta: int = 12


def _phi_derivative(phi, z, p, q):
    if not any(p) and not any(q):
        if hasattr(phi, "evaluate"):
            return phi.evaluate(z)
        return np.asarray(phi(z), dtype=complex)
    if not hasattr(phi, "derivative"):
        raise ValueError(f"derivative {p}, {q} of the test function is unavailable")
    return phi.derivative(z, p, q)


def apply(T: TestDistribution, phi, quad: DensityQuad = DensityQuad()) -> complex:
    """<T, phi> = sum over terms of (-1)^(|p|+|q|) * integral of d^p dbar^q phi dmu."""
    total = 0j
    sphere = None
    for t in T.terms:
        sign = (-1) ** t.order
        if isinstance(t.measure, PointMass):
            z = np.asarray(t.measure.at, dtype=complex)
            total += sign * t.measure.weight * complex(_phi_derivative(phi, z, t.p, t.q))
            continue
        f = t.measure.fn
        sphere = sphere or sphere_grid(quad.n_eta, quad.n_theta)
        pts = []
        for c, atom in f.atoms():
            r = atom.support_radius if atom.support_radius is not None else t.measure.truncation * atom.scale
            u, wu = ball_rule(atom.center, r, quad.n_r, sphere)
            vals = c * atom.evaluate(u) * _phi_derivative(phi, u, t.p, t.q) * wu
            pts.append(tree_sum(vals))
        total += sign * complex(sum(pts))
    return total


def dual_of_test(psi: XFunction, z, p, q, sphere: SphereGrid):
    """d^p dbar^q of R*psi at z: sphere integral of (d_s^|p| d_sbar^|q| psi)(w, <z,w>) w^p conj(w)^q."""
    p = tuple(int(v) for v in p)
    q = tuple(int(v) for v in q)
    a, b = sum(p), sum(q)
    if a + b > MAX_ORDER:
        raise ValueError(f"derivative order {a + b} above {MAX_ORDER} not supported")
    nodes = sphere.nodes
    mono = np.ones(len(nodes), dtype=complex)
    for j in range(2):
        mono = mono * nodes[:, j] ** p[j] * np.conj(nodes[:, j]) ** q[j]
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 1
    pts = z.reshape(-1, 2)
    out = np.empty(len(pts), dtype=complex)
    for lo in range(0, len(pts), 256):
        s = pts[lo : lo + 256] @ nodes.T
        vals = psi.sderiv(nodes[None, :, :], s, a, b) * mono[None, :]
        out[lo : lo + 256] = integrate_sphere(vals, sphere)
    return out[0] if single else out.reshape(z.shape[:-1])


class DualOf:
    """z -> R*psi(z) with analytic derivatives, usable as a pairing target."""

    def __init__(self, psi: XFunction, sphere: SphereGrid):
        self.psi = psi
        self.sphere = sphere

    def evaluate(self, z):
        return dual(self.psi, z, self.sphere)

    __call__ = evaluate

    def derivative(self, z, p, q):
        return dual_of_test(self.psi, z, p, q, self.sphere)


def radon_pair(T: TestDistribution, psi: XFunction, sphere: SphereGrid, quad: DensityQuad = DensityQuad()) -> complex:
    """<RT, psi> := <T, R*psi>."""
    needs_deriv = any(t.order for t in T.terms)
    if needs_deriv and not psi.smooth:
        raise ValueError("derivative terms need a psi with s-derivatives")
    return apply(T, DualOf(psi, sphere), quad)


# ---------------------------------------------------------------- mollification


class MollifiedDensity(TestFunction):
    """(d^p dbar^q f) * alpha_m by 4D quadrature."""

    def __init__(self, f: TestFunction, p, q, m: int, n_r: int = 32, sphere: SphereGrid | None = None):
        self.f, self.p, self.q = f, tuple(p), tuple(q)
        self.alpha = Mollifier(m)
        self.center = f.center
        self.scale = f.scale
        self.sphere = sphere or sphere_grid(6, 6)
        self.n_r = n_r
        if f.support_radius is not None:
            self.support_radius = f.support_radius + self.alpha.radius

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        g = lambda u: _phi_derivative(self.f, u, self.p, self.q)  # noqa: E731
        return convolve_cn(g, self.alpha, z.reshape(-1, 2), self.n_r, self.sphere).reshape(z.shape[:-1])

    def describe(self):
        return {"kind": "mollified-density", "m": self.alpha.m, "p": list(self.p), "q": list(self.q), "fn": self.f.describe()}


def mollified(T: TestDistribution, m: int, exact_density: bool = False) -> TestFunction:
    """T * alpha_m as a TestFunction.

    Point-mass terms become shifted derivatives of the mollifier (closed-form
    transforms). Density terms are convolved by quadrature unless
    ``exact_density`` is set, which keeps d^p dbar^q f itself (used when the
    density is already smooth at the scale of interest).
    """
    singular = any(isinstance(t.measure, PointMass) for t in T.terms)
    if (singular or not exact_density) and (m is None or m < 1):
        raise ValueError(f"m must be >= 1, got {m}")
    parts = []
    for t in T.terms:
        if isinstance(t.measure, PointMass):
            alpha = Mollifier(m, t.measure.at)
            fn = DerivativeOf(alpha, t.p, t.q) if t.order else alpha
            parts.append((t.measure.weight, fn))
        elif exact_density:
            f = t.measure.fn
            parts.append((1.0, DerivativeOf(f, t.p, t.q) if t.order else f))
        else:
            parts.append((1.0, MollifiedDensity(t.measure.fn, t.p, t.q, m)))
    return Combination(parts) if parts else Zero()


def mollify(T: TestDistribution, m: int, grid: VolumeGrid) -> VolumeGrid:
    """Sample T_m = T * alpha_m on a volume grid, checking its support."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if grid.spacing > 1.0 / (4 * m):
        raise ValueError(f"grid spacing {grid.spacing:.4g} cannot resolve alpha_m (needs <= {1 / (4 * m):.4g})")
    pts = grid.points()
    vals = np.asarray(mollified(T, m).evaluate(pts))
    reach = np.full(len(pts), np.inf)
    for c, r in T.support_points():
        if r is None:
            reach = np.zeros(len(pts))
            break
        reach = np.minimum(reach, np.linalg.norm(pts - c, axis=1) - r)
    leak = np.abs(vals[reach > 1.0 / m])
    if leak.size and np.max(leak) != 0.0:
        raise AssertionError(f"mollified distribution leaks outside its support by {np.max(leak):.3g}")
    return grid.with_values(vals, m=m)
