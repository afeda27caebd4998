"""Complex Radon transform, its dual, inversion, and the real-Radon bridge.

On a unit direction w the hyperplane {<z, w> = s} is parametrized by
z = s conj(w) + t eta, eta = (-w2, w1). Writing a function centred at c as
u = z - c gives u = sigma conj(w) + tau eta with sigma = s - <c, w> and
tau = t - t_c, t_c = sum c_j conj(eta_j); |u|^2 = |sigma|^2 + |tau|^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from . import profiles as pf
from .numerics import (
    SGrid,
    Sinogram,
    SphereGrid,
    disk_rule,
    gauss_legendre,
    hyperplane_frame,
    integrate_sphere,
    s_derivative,
    sphere_grid,
    tree_sum,
)

N_DIM = 2
ANALYTIC_CN = 1.0 / (2.0 * math.pi**3)


@dataclass(frozen=True)
class QuadParams:
    cutoff: float = 6.0
    n_r: int = 64
    n_phi: int = 64

    def __post_init__(self):
        if not self.cutoff > 0 or self.n_r < 1 or self.n_phi < 1:
            raise ValueError(f"invalid quadrature parameters {self}")

    def doubled(self) -> "QuadParams":
        return QuadParams(self.cutoff, 2 * self.n_r, 2 * self.n_phi)


def _as_points(z):
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != N_DIM:
        raise ValueError(f"points must have trailing dimension {N_DIM}, got shape {z.shape}")
    return z


def _monomial(u, p, q):
    out = np.ones(u.shape[:-1], dtype=complex)
    for j in range(N_DIM):
        if p[j]:
            out = out * u[..., j] ** p[j]
        if q[j]:
            out = out * np.conj(u[..., j]) ** q[j]
    return out


def _orders(p, q):
    p = tuple(int(v) for v in (p or (0,) * N_DIM))
    q = tuple(int(v) for v in (q or (0,) * N_DIM))
    if len(p) != N_DIM or len(q) != N_DIM or min(p + q) < 0:
        raise ValueError(f"multi-indices must be {N_DIM} non-negative integers, got {p}, {q}")
    return p, q


# ---------------------------------------------------------------- test functions


class TestFunction:
    """Closed-form function on C^2.

    ``evaluate`` and ``derivative`` (Wirtinger order <= 2) are analytic.
    ``radon`` returns the closed-form transform at unit directions, or None
    when no closed form is known. Subclasses that are sums of localized
    pieces expose them through ``atoms`` so quadrature can centre on each.
    """

    __test__ = False  # not a pytest class

    center = np.zeros(N_DIM, dtype=complex)
    support_radius: float | None = None
    scale: float = 1.0

    def evaluate(self, z):
        raise NotImplementedError

    def __call__(self, z):
        return self.evaluate(z)

    def derivative(self, z, p, q):
        raise NotImplementedError(f"{type(self).__name__} has no analytic derivatives")

    def radon(self, w, s):
        return None

    def radon_sderiv(self, w, s, a: int, b: int):
        """d^a/ds^a d^b/dsbar^b of the closed-form transform, or None."""
        return None

    def atoms(self):
        return [(1.0, self)]

    def describe(self) -> dict:
        raise NotImplementedError

    @property
    def has_radon(self) -> bool:
        return self.radon(np.array([1.0 + 0j, 0j]), 0j) is not None


class RadialFunction(TestFunction):
    """amp * G(|z - c|^2) with a profile whose hyperplane integral is known."""

    def __init__(self, center, amp, profile: pf.Profile, radon_profile: pf.Profile | None):
        self.center = np.asarray(center, dtype=complex).reshape(N_DIM)
        self.amp = complex(amp)
        self.profile = profile
        self.radon_profile = radon_profile

    def evaluate(self, z):
        u = _as_points(z) - self.center
        return self.amp * self.profile(np.sum(np.abs(u) ** 2, axis=-1)) + 0j

    def derivative(self, z, p, q):
        p, q = _orders(p, q)
        return self.amp * pf.radial_derivative(self.profile, _as_points(z) - self.center, p, q)

    def _sigma(self, w, s):
        w = np.asarray(w, dtype=complex)
        return np.asarray(s, dtype=complex) - np.sum(self.center * w, axis=-1)

    def radon(self, w, s):
        if self.radon_profile is None:
            return None
        sigma = self._sigma(w, s)
        return self.amp * self.radon_profile(np.abs(sigma) ** 2) + 0j

    def radon_sderiv(self, w, s, a, b):
        if self.radon_profile is None:
            return None
        return self.amp * pf.radial_derivative_1d(self.radon_profile, self._sigma(w, s), a, b)


class Gaussian(RadialFunction):
    def __init__(self, center=(0, 0), width: float = 1.0, amp: complex = 1.0):
        if not width > 0:
            raise ValueError(f"gaussian width must be positive, got {width}")
        self.width = float(width)
        self.scale = self.width
        radon = pf.ScaledProfile(math.pi * width**2, pf.GaussianProfile(width))
        super().__init__(center, amp, pf.GaussianProfile(width), radon)

    def describe(self):
        return {"kind": "gaussian", "center": _cplx_list(self.center), "width": self.width, "amp": _cplx(self.amp)}


class Bump(RadialFunction):
    """amp * exp(-1/(1 - |z-c|^2/rho^2)) inside the ball of radius rho."""

    def __init__(self, center=(0, 0), radius: float = 1.0, amp: complex = 1.0):
        if not radius > 0:
            raise ValueError(f"bump radius must be positive, got {radius}")
        self.radius = float(radius)
        self.support_radius = self.radius
        self.scale = self.radius
        super().__init__(center, amp, pf.BumpProfile(radius), pf.BumpRadonProfile(radius))

    def describe(self):
        return {"kind": "bump", "center": _cplx_list(self.center), "radius": self.radius, "amp": _cplx(self.amp)}


class GaussianPoly(TestFunction):
    """amp * u^p conj(u)^q * exp(-|u|^2/a^2), u = z - c; width None drops the Gaussian."""

    def __init__(self, center=(0, 0), width: float | None = 1.0, p=None, q=None, amp: complex = 1.0):
        self.center = np.asarray(center, dtype=complex).reshape(N_DIM)
        self.p, self.q = _orders(p, q)
        self.amp = complex(amp)
        if width is not None and not width > 0:
            raise ValueError(f"width must be positive, got {width}")
        self.width = None if width is None else float(width)
        self.scale = self.width or 1.0

    def evaluate(self, z):
        u = _as_points(z) - self.center
        out = self.amp * _monomial(u, self.p, self.q)
        if self.width is not None:
            out = out * np.exp(-np.sum(np.abs(u) ** 2, axis=-1) / self.width**2)
        return out

    def derivative(self, z, p, q):
        p, q = _orders(p, q)
        orders = pf.expand_orders(p, q)
        if len(orders) > pf.MAX_ORDER:
            raise ValueError(f"derivative order {len(orders)} exceeds {pf.MAX_ORDER}")
        u = _as_points(z) - self.center
        prof = pf.GaussianProfile(self.width) if self.width is not None else _ONE
        total = np.zeros(u.shape[:-1], dtype=complex)
        # product rule: split the requested derivatives between monomial and Gaussian
        n = len(orders)
        for mask in range(1 << n):
            on_poly = [orders[i] for i in range(n) if mask >> i & 1]
            on_gauss = [orders[i] for i in range(n) if not mask >> i & 1]
            coef, pp, qq = 1.0, list(self.p), list(self.q)
            for j, conj in on_poly:
                k = qq if conj else pp
                coef *= k[j]
                k[j] -= 1
            if coef == 0:
                continue
            gp = [sum(1 for j, c in on_gauss if j == i and not c) for i in range(N_DIM)]
            gq = [sum(1 for j, c in on_gauss if j == i and c) for i in range(N_DIM)]
            total = total + coef * _monomial(u, pp, qq) * pf.radial_derivative(prof, u, gp, gq)
        return self.amp * total

    def radon(self, w, s):
        if self.width is None:
            return None
        w = np.asarray(w, dtype=complex)
        sigma = np.asarray(s, dtype=complex) - np.sum(self.center * w, axis=-1)
        w, sigma = np.broadcast_arrays(w, sigma[..., None])
        sigma = sigma[..., 0]
        _, eta = hyperplane_frame(w)
        foot = np.conj(w)
        # polynomial in (tau, conj tau) as {(k, l): coefficient array}
        poly = {(0, 0): np.ones(sigma.shape, dtype=complex)}
        for j in range(N_DIM):
            lin = {(0, 0): sigma * foot[..., j], (1, 0): eta[..., j]}
            lin_bar = {(0, 0): np.conj(sigma * foot[..., j]), (0, 1): np.conj(eta[..., j])}
            for _ in range(self.p[j]):
                poly = _poly_mul(poly, lin)
            for _ in range(self.q[j]):
                poly = _poly_mul(poly, lin_bar)
        a2 = self.width**2
        acc = np.zeros(sigma.shape, dtype=complex)
        for (k, kb), c in poly.items():
            if k == kb:
                acc = acc + c * math.pi * math.factorial(k) * a2 ** (k + 1)
        return self.amp * acc * np.exp(-np.abs(sigma) ** 2 / a2)

    def radon_sderiv(self, w, s, a, b):
        if a == b == 0:
            return self.radon(w, s)
        if sum(self.p) + sum(self.q) == 0 and self.width is not None:
            return Gaussian(self.center, self.width, self.amp).radon_sderiv(w, s, a, b)
        return None

    def describe(self):
        return {
            "kind": "gaussian-poly",
            "center": _cplx_list(self.center),
            "width": self.width,
            "p": list(self.p),
            "q": list(self.q),
            "amp": _cplx(self.amp),
        }


class _Constant(pf.Profile):
    def values(self, x):
        x = np.asarray(x, dtype=float)
        return np.ones_like(x), np.zeros_like(x), np.zeros_like(x)


_ONE = _Constant()


def _poly_mul(a, b):
    out = {}
    for (k1, l1), c1 in a.items():
        for (k2, l2), c2 in b.items():
            key = (k1 + k2, l1 + l2)
            out[key] = out.get(key, 0) + c1 * c2
    return out


class DerivativeOf(TestFunction):
    """d^p dbar^q of a radial base; its transform is w^p conj(w)^q d_s^|p| d_sbar^|q| of the base's."""

    def __init__(self, base: TestFunction, p, q):
        self.base = base
        self.p, self.q = _orders(p, q)
        if sum(self.p) + sum(self.q) > pf.MAX_ORDER:
            raise ValueError(f"derivative order above {pf.MAX_ORDER} not supported")
        self.center = base.center
        self.support_radius = base.support_radius
        self.scale = base.scale

    def evaluate(self, z):
        return self.base.derivative(z, self.p, self.q)

    def derivative(self, z, p, q):
        p, q = _orders(p, q)
        if any(p) or any(q):
            return DerivativeOf(self.base, np.add(self.p, p), np.add(self.q, q)).evaluate(z)
        return self.evaluate(z)

    def radon(self, w, s):
        d = self.base.radon_sderiv(w, s, sum(self.p), sum(self.q))
        if d is None:
            return None
        return _monomial(np.asarray(w, dtype=complex), self.p, self.q) * d

    def describe(self):
        return {"kind": "derivative", "p": list(self.p), "q": list(self.q), "base": self.base.describe()}


class Combination(TestFunction):
    """Finite linear combination sum c_k f_k."""

    def __init__(self, terms):
        self.terms = [(complex(c), f) for c, f in terms]
        if not self.terms:
            raise ValueError("combination needs at least one term")
        radii = [f.support_radius for _, f in self.terms]
        if all(r is not None for r in radii):
            self.support_radius = max(
                float(np.linalg.norm(f.center)) + f.support_radius for _, f in self.terms
            )

    def evaluate(self, z):
        return sum(c * f.evaluate(z) for c, f in self.terms)

    def derivative(self, z, p, q):
        return sum(c * f.derivative(z, p, q) for c, f in self.terms)

    def radon(self, w, s):
        parts = [f.radon(w, s) for _, f in self.terms]
        if any(v is None for v in parts):
            return None
        return sum(c * v for (c, _), v in zip(self.terms, parts))

    def radon_sderiv(self, w, s, a, b):
        parts = [f.radon_sderiv(w, s, a, b) for _, f in self.terms]
        if any(v is None for v in parts):
            return None
        return sum(c * v for (c, _), v in zip(self.terms, parts))

    def atoms(self):
        return [(c * c2, g) for c, f in self.terms for c2, g in f.atoms()]

    def describe(self):
        return {"kind": "combination", "terms": [{"coef": _cplx(c), "fn": f.describe()} for c, f in self.terms]}


class Zero(TestFunction):
    support_radius = 0.0

    def evaluate(self, z):
        return np.zeros(_as_points(z).shape[:-1], dtype=complex)

    def derivative(self, z, p, q):
        return self.evaluate(z)

    def radon(self, w, s):
        w = np.asarray(w, dtype=complex)
        return np.zeros(np.broadcast_shapes(w.shape[:-1], np.shape(s)), dtype=complex)

    def radon_sderiv(self, w, s, a, b):
        return self.radon(w, s)

    def atoms(self):
        return []

    def describe(self):
        return {"kind": "zero"}


def _cplx(c):
    c = complex(c)
    return [c.real, c.imag]


def _cplx_list(v):
    return [_cplx(x) for x in np.asarray(v).ravel()]


# ---------------------------------------------------------------- forward


def _plane_integral(atom: TestFunction, w, s, quad: QuadParams):
    """Quadrature of ``atom`` over {<z, w> = s} for one unit w and an array of s."""
    w = np.asarray(w, dtype=complex)
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    foot, eta = hyperplane_frame(w)
    t_c = complex(np.sum(atom.center * np.conj(eta)))
    t_unit, w_unit = disk_rule(1.0, quad.n_r, quad.n_phi)
    if atom.support_radius is not None:
        sigma = s - np.sum(atom.center * w)
        radius = np.sqrt(np.maximum(atom.support_radius**2 - np.abs(sigma) ** 2, 0.0))
    else:
        radius = np.full(s.shape, quad.cutoff * atom.scale)
    out = np.zeros(s.shape, dtype=complex)
    chunk = max(1, 2_000_000 // len(t_unit))
    for lo in range(0, len(s), chunk):
        ss, rr = s[lo : lo + chunk], radius[lo : lo + chunk]
        t = t_c + rr[:, None] * t_unit[None, :]
        z = ss[:, None, None] * foot + t[..., None] * eta
        vals = atom.evaluate(z) * (rr[:, None] ** 2 * w_unit[None, :])
        out[lo : lo + chunk] = tree_sum(vals, axis=-1)
    return out


def _normalize(H):
    xi = np.asarray(H.normal, dtype=complex)
    nrm = float(np.linalg.norm(xi))
    return xi / nrm, complex(H.offset) / nrm, nrm


def forward(phi: TestFunction, H, quad: QuadParams = QuadParams()) -> complex:
    """Hyperplane integral of phi, divided by |xi|^2.

    Non-unit normals are normalized first: the set {<z,xi> = s} equals
    {<z, xi/|xi|> = s/|xi|}, and the prefactor 1/|xi|^2 is kept.
    """
    w, s, nrm = _normalize(H)
    total = 0j
    for c, atom in phi.atoms():
        total += c * complex(_plane_integral(atom, w, s, quad)[0])
    if not np.isfinite(total):
        raise FloatingPointError(f"forward quadrature produced {total} at {H}")
    return total / nrm**2


def forward_sinogram(phi: TestFunction, sphere: SphereGrid, sgrid: SGrid, quad: QuadParams = QuadParams(), method: str = "auto") -> Sinogram:
    """Sample the transform on sphere nodes x s-grid.

    ``method`` is "analytic" (closed form), "quadrature", or "auto"
    (closed form when the function has one).
    """
    if method not in ("auto", "analytic", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    s = sgrid.points()
    nodes = sphere.nodes
    use_analytic = method == "analytic" or (method == "auto" and phi.has_radon)
    if use_analytic:
        if not phi.has_radon:
            raise ValueError(f"{type(phi).__name__} has no closed-form transform")
        vals = np.empty((len(nodes), len(s)), dtype=complex)
        for lo in range(0, len(nodes), 64):
            vals[lo : lo + 64] = phi.radon(nodes[lo : lo + 64, None, :], s[None, :])
        prov = {"method": "analytic"}
    else:
        vals = np.zeros((len(nodes), len(s)), dtype=complex)
        for i, w in enumerate(nodes):
            for c, atom in phi.atoms():
                vals[i] += c * _plane_integral(atom, w, s, quad)
        prov = {"method": "quadrature", "cutoff": quad.cutoff, "n_r": quad.n_r, "n_phi": quad.n_phi}
    if not np.isfinite(vals).all():
        raise FloatingPointError("forward_sinogram produced non-finite values")
    prov["sphere"] = sphere.params
    prov["sgrid"] = sgrid.params
    return Sinogram(sphere, sgrid, vals, 0, prov)


# ---------------------------------------------------------------- dual


def dual(f, z, sphere: SphereGrid | None = None, chunk: int = 512):
    """R*f(z) = integral over the sphere of f(w, <z, w>).

    ``f`` is a Sinogram (bilinear interpolation in s, using the sinogram's
    own sphere) or a callable f(w, s) broadcasting over node arrays.
    Returns a scalar for a single point, else an array over points.
    """
    z = _as_points(z)
    single = z.ndim == 1
    pts = z.reshape(-1, N_DIM)
    if isinstance(f, Sinogram):
        sphere = f.sphere
    elif sphere is None:
        raise ValueError("dual of a callable needs a sphere grid")
    nodes = sphere.nodes
    idx = np.arange(len(nodes))
    out = np.empty(len(pts), dtype=complex)
    for lo in range(0, len(pts), chunk):
        s = pts[lo : lo + chunk] @ nodes.T
        if isinstance(f, Sinogram):
            vals = f.interpolate(idx[None, :], s)
        else:
            vals = np.broadcast_to(np.asarray(f(nodes[None, :, :], s), dtype=complex), s.shape)
        out[lo : lo + chunk] = integrate_sphere(vals, sphere)
    return out[0] if single else out.reshape(z.shape[:-1])


# ---------------------------------------------------------------- inversion


@dataclass(frozen=True)
class CalibrationResult:
    c_hat: float
    analytic: float
    rel_dev: float
    radius: float
    params: dict


CALIBRATION_SGRID = SGrid(0j, 1.5, 129)
CALIBRATION_SPHERE = (16, 16)


def calibrate_cn(sgrid: SGrid = CALIBRATION_SGRID, sphere: SphereGrid | None = None, radius: float = 0.0) -> CalibrationResult:
    """Fit c_n so the inversion formula reproduces the unit Gaussian at |z| = radius."""
    sphere = sphere or sphere_grid(*CALIBRATION_SPHERE, section=True)
    phi = Gaussian()
    S = forward_sinogram(phi, sphere, sgrid)
    psi = s_derivative(S, 1, 1)
    z = np.array([radius + 0j, 0j])
    denom = (-1) ** (N_DIM - 1) * dual(psi, z)
    if abs(denom) < 1e-6:
        raise FloatingPointError(f"calibration denominator {abs(denom):.3g} below 1e-6")
    c_hat = float(np.real(phi.evaluate(z) / denom))
    params = {"sgrid": sgrid.params, "sphere": sphere.params, "radius": radius}
    return CalibrationResult(c_hat, ANALYTIC_CN, abs(c_hat - ANALYTIC_CN) / ANALYTIC_CN, radius, params)


@lru_cache(maxsize=4)
def _cached_cn(count: int, extent: float, n_eta: int, n_theta: int) -> float:
    return calibrate_cn(SGrid(0j, extent, count), sphere_grid(n_eta, n_theta, section=True)).c_hat


def calibrated_cn() -> float:
    """c_n from the default calibration run (computed once per process)."""
    g = CALIBRATION_SGRID
    return _cached_cn(g.count, g.extent, *CALIBRATION_SPHERE)


@dataclass
class VolumeGrid:
    """Samples on a cube in C^2 = R^4, axes (Re z1, Im z1, Re z2, Im z2)."""

    center: tuple = (0j, 0j)
    extent: float = 2.0
    count: int = 9
    values: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.center = tuple(complex(c) for c in self.center)
        if not self.extent > 0 or self.count < 2:
            raise ValueError(f"invalid volume grid: extent {self.extent}, count {self.count}")
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=complex).reshape((self.count,) * 4)
            if not np.isfinite(self.values).all():
                raise FloatingPointError("volume contains non-finite values")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.count - 1)

    @property
    def params(self) -> dict:
        return {"center": _cplx_list(self.center), "extent": self.extent, "count": self.count}

    def points(self) -> np.ndarray:
        ax = np.linspace(-self.extent, self.extent, self.count)
        a, b, c, d = np.meshgrid(ax, ax, ax, ax, indexing="ij")
        c1, c2 = self.center
        return np.stack([c1 + a + 1j * b, c2 + c + 1j * d], axis=-1).reshape(-1, 2)

    def with_values(self, values, **prov) -> "VolumeGrid":
        return VolumeGrid(self.center, self.extent, self.count, values, dict(self.provenance, **prov))


def invert(S: Sinogram, targets, c_n: float | None = None):
    """Inversion formula: (-1)^(n-1) c_n R*(d_s d_sbar S) at the targets.

    ``targets`` is a VolumeGrid (returned filled in) or an array of points.
    """
    c_n = calibrated_cn() if c_n is None else c_n
    psi = s_derivative(S, 1, 1)
    pts = targets.points() if isinstance(targets, VolumeGrid) else _as_points(targets)
    vals = (-1) ** (N_DIM - 1) * c_n * dual(psi, pts)
    if isinstance(targets, VolumeGrid):
        return targets.with_values(vals, c_n=c_n, sinogram=S.provenance)
    return vals


# ---------------------------------------------------------------- real Radon bridge


def real_radon_from_complex(S: Sinogram, node: int, t: float, truncation: float | None = None):
    """Real Radon transform at (w, t) from the complex sinogram at conj(w).

    Integrates S(conj(w), t + ix) over x. Four-point cubic Lagrange
    interpolation along the real axis places t (local, so compact support
    in s carries over exactly); Simpson's rule runs along the imaginary axis.
    """
    g = S.sgrid
    half = S.valid_halfwidth()
    truncation = half if truncation is None else truncation
    if truncation > half + 1e-12:
        raise ValueError(f"truncation {truncation} exceeds the valid s-region half-width {half}")
    c = complex(g.center)
    h = g.spacing
    m = S.margin
    x = (t - c.real + g.extent) / h
    lo = int(math.floor(x)) - 1
    if lo < m or lo + 3 > g.count - 1 - m:
        raise ValueError(f"t = {t} outside the valid s-region")
    j = int(S.sphere.conjugate_index()[node])
    frac = x - (lo + 1)
    nodes = np.array([-1.0, 0.0, 1.0, 2.0])
    weights = np.array([np.prod([(frac - nodes[k]) / (nodes[i] - nodes[k]) for k in range(4) if k != i]) for i in range(4)])
    rows = slice(m, g.count - m)
    line = S.grid[j][rows, lo : lo + 4] @ weights
    row_ax = c.imag + g.axis[rows]
    keep = np.abs(row_ax - c.imag) <= truncation + 1e-12
    return complex(simpson(line[keep], x=row_ax[keep]))


def _sphere2_rule(n_theta: int, n_phi: int):
    u, wu = gauss_legendre(n_theta, -1.0, 1.0)
    ph = 2.0 * math.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - u**2)
    dirs = np.stack(
        [np.repeat(st, n_phi) * np.tile(np.cos(ph), n_theta), np.repeat(st, n_phi) * np.tile(np.sin(ph), n_theta), np.repeat(u, n_phi)],
        axis=1,
    )
    return dirs, np.repeat(wu, n_phi) * (2.0 * math.pi / n_phi)


def real_radon_direct(phi: TestFunction, w, t: float, n_r: int = 48, n_ang: int = 24, cutoff: float = 6.0) -> complex:
    """Integral of phi over the real hyperplane {x in R^4 : x . nu = t}.

    nu = (Re w1, Im w1, Re w2, Im w2); the 3D slice is integrated with a
    polar rule centred at the foot of each atom's centre.
    """
    w = np.asarray(w, dtype=complex)
    nu = np.array([w[0].real, w[0].imag, w[1].real, w[1].imag])
    nu = nu / np.linalg.norm(nu)
    basis = np.linalg.svd(nu[None, :])[2][1:]  # orthonormal complement, (3, 4)
    dirs, wd = _sphere2_rule(n_ang, 2 * n_ang)
    total = 0j
    for c, atom in phi.atoms():
        cr = np.array([atom.center[0].real, atom.center[0].imag, atom.center[1].real, atom.center[1].imag])
        if atom.support_radius is not None:
            d = t - cr @ nu
            radius = math.sqrt(max(atom.support_radius**2 - d * d, 0.0))
            if radius == 0.0:
                continue
        else:
            radius = cutoff * atom.scale
        r, wr = gauss_legendre(n_r, 0.0, radius)
        y = cr - (cr @ nu) * nu + t * nu
        x = y[None, None, :] + r[:, None, None] * (dirs @ basis)[None, :, :]
        z = x[..., 0] + 1j * x[..., 1], x[..., 2] + 1j * x[..., 3]
        vals = atom.evaluate(np.stack(z, axis=-1)) * (wr * r**2)[:, None] * wd[None, :]
        total += c * complex(tree_sum(vals.ravel()))
    return total
