"""Quadrature on S^3, hyperplanes and balls; s-derivatives; convolutions.

Sphere rules use Hopf coordinates w = (e^{i t1} cos(eta), e^{i t2} sin(eta))
with area element cos(eta) sin(eta) d(eta) dt1 dt2, so the total area of S^3
is 2 pi^2. A *section* grid keeps only the t1 = 0 slice and multiplies the
weights by the number of t1 nodes; for integrands invariant under
w -> w e^{i theta} (every f(w, <z,w>) with f phase-compatible) the section
rule returns exactly the same sum as the full product rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

TWO_PI_SQ = 2.0 * math.pi**2
STENCIL_RING = 2


def tree_sum(values, axis: int = -1):
    """Pairwise sum with a fixed tree shape, independent of memory layout."""
    x = np.moveaxis(np.asarray(values), axis, -1)
    if x.shape[-1] == 0:
        return np.zeros(x.shape[:-1], dtype=x.dtype)
    while x.shape[-1] > 1:
        if x.shape[-1] % 2:
            pad = np.zeros(x.shape[:-1] + (1,), dtype=x.dtype)
            x = np.concatenate([x, pad], axis=-1)
        x = x[..., 0::2] + x[..., 1::2]
    return x[..., 0]


def gauss_legendre(n: int, lo: float, hi: float):
    t, w = special.roots_legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (t + 1.0), half * w


# ---------------------------------------------------------------- sphere


@dataclass(frozen=True)
class SphereGrid:
    nodes: np.ndarray  # (N, 2) complex, unit vectors
    weights: np.ndarray  # (N,) positive
    n_eta: int
    n_theta: int
    section: bool = False

    def __post_init__(self):
        if not np.allclose(np.linalg.norm(self.nodes, axis=1), 1.0, atol=1e-12, rtol=0):
            raise ValueError("sphere nodes must be unit vectors")
        if abs(tree_sum(self.weights) - TWO_PI_SQ) > 1e-10:
            raise ValueError("sphere weights must sum to 2 pi^2")

    def __len__(self):
        return len(self.weights)

    @property
    def params(self) -> dict:
        return {"n_eta": self.n_eta, "n_theta": self.n_theta, "section": self.section}

    def conjugate_index(self) -> np.ndarray:
        """Index of the node conj(w) for every node w (Hopf grids are closed under it)."""
        n = self.n_theta
        idx = np.arange(len(self))
        if self.section:
            ie, idl = np.divmod(idx, n)
            return ie * n + (-idl) % n
        ie, rest = np.divmod(idx, n * n)
        i1, i2 = np.divmod(rest, n)
        return ie * n * n + ((-i1) % n) * n + (-i2) % n


def sphere_grid(n_eta: int, n_theta: int, section: bool = False) -> SphereGrid:
    """Hopf product rule on S^3.

    Gauss-Legendre in sin^2(eta) (the density cos(eta) sin(eta) absorbed),
    uniform trapezoid in both phases.

    Parameters
    ----------
    n_eta, n_theta : int
        Nodes in eta and in each phase angle; both at least 4.
    section : bool
        Keep only the t1 = 0 slice (exact for phase-invariant integrands).
    """
    if n_eta < 4 or n_theta < 4:
        raise ValueError(f"sphere_grid needs n_eta, n_theta >= 4, got {n_eta}, {n_theta}")
    # u = sin^2(eta) turns cos(eta) sin(eta) d(eta) into du / 2, so the
    # eta-rule is exact for the weight sum at every size
    u, w_u = gauss_legendre(n_eta, 0.0, 1.0)
    eta = np.arcsin(np.sqrt(u))
    w_eta = 0.5 * w_u
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    dth = 2.0 * math.pi / n_theta
    if section:
        e, t2 = np.meshgrid(eta, theta, indexing="ij")
        we = np.repeat(w_eta, n_theta)
        nodes = np.stack([np.cos(e).ravel() + 0j, (np.exp(1j * t2) * np.sin(e)).ravel()], axis=1)
        weights = we * dth * dth * n_theta
    else:
        e, t1, t2 = np.meshgrid(eta, theta, theta, indexing="ij")
        we = np.repeat(w_eta, n_theta * n_theta)
        nodes = np.stack(
            [(np.exp(1j * t1) * np.cos(e)).ravel(), (np.exp(1j * t2) * np.sin(e)).ravel()], axis=1
        )
        weights = we * dth * dth
    return SphereGrid(nodes=nodes, weights=weights, n_eta=n_eta, n_theta=n_theta, section=section)


def integrate_sphere(f, grid: SphereGrid):
    """Sum of weight * f(node) with a fixed pairwise reduction order.

    ``f`` is either a callable taking the (N, 2) node array or an array of
    node values; a trailing batch is allowed (values of shape (..., N)).
    """
    vals = np.asarray(f(grid.nodes) if callable(f) else f)
    if vals.shape[-1] != len(grid):
        raise ValueError(f"expected {len(grid)} node values, got shape {vals.shape}")
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argwhere(bad)[0][-1])
        raise FloatingPointError(f"non-finite integrand at sphere node {i}: w = {grid.nodes[i]}")
    return tree_sum(vals * grid.weights)


# ---------------------------------------------------------------- planes and balls


def disk_rule(radius: float, n_r: int, n_phi: int, center: complex = 0j):
    """Polar rule on the disk |t - center| <= radius: (points, weights)."""
    r, wr = gauss_legendre(n_r, 0.0, radius)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    t = center + (r[:, None] * np.exp(1j * phi[None, :])).ravel()
    w = np.repeat(wr * r, n_phi) * (2.0 * math.pi / n_phi)
    return t, w


def hyperplane_frame(normal):
    """(foot direction conj(xi), in-plane unit eta) for unit normals of shape (..., 2)."""
    normal = np.asarray(normal, dtype=complex)
    eta = np.stack([-normal[..., 1], normal[..., 0]], axis=-1)
    return np.conj(normal), eta


def hyperplane_quadrature(H, radial_cutoff: float = 6.0, n_r: int = 64, n_phi: int = 64, center_t: complex = 0j):
    """Points and weights on the complex line {z : <z, xi> = s}.

    The plane is parametrized isometrically by z(t) = s conj(xi) + t eta with
    eta = (-xi_2, xi_1); t runs over a polar rule of radius ``radial_cutoff``
    around ``center_t``. Weights are Lebesgue d omega_2(t) weights.
    """
    normal = np.asarray(H.normal, dtype=complex)
    if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
        raise ValueError("hyperplane_quadrature needs a canonical (unit-normal) hyperplane")
    if radial_cutoff <= 0:
        raise ValueError("radial_cutoff must be positive")
    foot, eta = hyperplane_frame(normal)
    t, w = disk_rule(radial_cutoff, n_r, n_phi, center_t)
    z = H.offset * foot[None, :] + t[:, None] * eta[None, :]
    return z, w


def ball_rule(center, radius: float, n_r: int, sphere: SphereGrid):
    """Rule on the ball |u - center| <= radius in C^2 (= R^4): r^3 dr d sigma."""
    if sphere.section:
        raise ValueError("ball_rule needs a full sphere grid; section grids drop the phase fibre")
    r, wr = gauss_legendre(n_r, 0.0, radius)
    pts = np.asarray(center, dtype=complex)[None, None, :] + r[:, None, None] * sphere.nodes[None, :, :]
    w = (wr * r**3)[:, None] * sphere.weights[None, :]
    return pts.reshape(-1, 2), w.ravel()


# ---------------------------------------------------------------- s-grids and sinograms


@dataclass(frozen=True)
class SGrid:
    center: complex = 0j
    extent: float = 6.0
    count: int = 129

    def __post_init__(self):
        if self.count < 9 or self.count % 2 == 0:
            raise ValueError(f"SGrid count must be odd and >= 9, got {self.count}")
        if not self.extent > 0:
            raise ValueError(f"SGrid extent must be positive, got {self.extent}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.count - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.count)

    @property
    def params(self) -> dict:
        c = complex(self.center)
        return {"center": [c.real, c.imag], "extent": self.extent, "count": self.count}

    def points(self) -> np.ndarray:
        """Complex s-values in row-major (row = imaginary axis, col = real axis) order."""
        ax = self.axis
        c = complex(self.center)
        return ((c.real + ax)[None, :] + 1j * (c.imag + ax)[:, None]).ravel()

    def refined(self) -> "SGrid":
        return SGrid(self.center, self.extent, 2 * self.count - 1)


@dataclass
class Sinogram:
    sphere: SphereGrid
    sgrid: SGrid
    values: np.ndarray  # (N, count**2) complex
    margin: int = 0  # invalid boundary ring width, in cells
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        expected = (len(self.sphere), self.sgrid.count**2)
        if self.values.shape != expected:
            raise ValueError(f"sinogram shape {self.values.shape} != {expected}")
        if not np.isfinite(self.values).all():
            raise FloatingPointError("sinogram contains non-finite values")

    @property
    def grid(self) -> np.ndarray:
        c = self.sgrid.count
        return self.values.reshape(len(self.sphere), c, c)

    def valid_mask(self) -> np.ndarray:
        c, m = self.sgrid.count, self.margin
        mask = np.zeros((c, c), dtype=bool)
        mask[m : c - m, m : c - m] = True
        return mask.ravel()

    def valid_halfwidth(self) -> float:
        return self.sgrid.extent - self.margin * self.sgrid.spacing

    def interpolate(self, node_index, s):
        """Bilinear interpolation of node rows at complex offsets ``s`` (broadcast together)."""
        g = self.grid
        c, m, h = self.sgrid.count, self.margin, self.sgrid.spacing
        s = np.asarray(s, dtype=complex) - complex(self.sgrid.center)
        x = (s.real + self.sgrid.extent) / h
        y = (s.imag + self.sgrid.extent) / h
        lo, hi = m, c - 1 - m
        tol = 1e-9
        outside = (x < lo - tol) | (x > hi + tol) | (y < lo - tol) | (y > hi + tol)
        if np.any(outside):
            worst = s[outside].ravel()[0] + complex(self.sgrid.center)
            raise ValueError(
                f"offset {worst:.4g} falls outside the valid sinogram region "
                f"(half-width {self.valid_halfwidth():.4g})"
            )
        x = np.clip(x, lo, hi)
        y = np.clip(y, lo, hi)
        i0 = np.minimum(np.floor(x).astype(int), hi - 1)
        j0 = np.minimum(np.floor(y).astype(int), hi - 1)
        fx = x - i0
        fy = y - j0
        node_index = np.broadcast_to(node_index, i0.shape)
        v00 = g[node_index, j0, i0]
        v01 = g[node_index, j0, i0 + 1]
        v10 = g[node_index, j0 + 1, i0]
        v11 = g[node_index, j0 + 1, i0 + 1]
        return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11)


# ---------------------------------------------------------------- s-derivatives

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _stencil(g, coeffs, axis: int, h: float, power: int):
    """Apply a 5-point central stencil along ``axis``; 2-cell ends are left at zero."""
    g = np.moveaxis(g, axis, -1)
    n = g.shape[-1]
    out = np.zeros_like(g)
    acc = out[..., 2 : n - 2]
    for k, ck in enumerate(coeffs):
        if ck:
            acc += ck * g[..., k : n - 4 + k]
    out /= h**power
    return np.moveaxis(out, -1, axis)


def sderiv_array(g, h: float, p: int, q: int):
    """Wirtinger s-derivative of an array (..., rows=imag, cols=real)."""
    if p < 0 or q < 0:
        raise ValueError("derivative orders must be non-negative")
    if p + q > 2:
        raise ValueError(f"s-derivatives of total order {p + q} > 2 are not supported")
    g = np.asarray(g, dtype=complex)
    if p + q == 0:
        return g.copy()
    da = lambda x: _stencil(x, _D1, -1, h, 1)  # noqa: E731
    db = lambda x: _stencil(x, _D1, -2, h, 1)  # noqa: E731
    if (p, q) == (1, 0):
        return 0.5 * (da(g) - 1j * db(g))
    if (p, q) == (0, 1):
        return 0.5 * (da(g) + 1j * db(g))
    daa = _stencil(g, _D2, -1, h, 2)
    dbb = _stencil(g, _D2, -2, h, 2)
    if (p, q) == (1, 1):
        return 0.25 * (daa + dbb)
    dab = da(db(g))
    sign = -1.0 if p == 2 else 1.0
    return 0.25 * (daa + sign * 2j * dab - dbb)


def _zero_ring(g, m: int):
    c = g.shape[-1]
    if m > 0:
        g[..., :m, :] = 0
        g[..., c - m :, :] = 0
        g[..., :, :m] = 0
        g[..., :, c - m :] = 0
    return g


def s_derivative(S: Sinogram, p: int, q: int, chunk: int = 64) -> Sinogram:
    """d^p/ds^p d^q/dsbar^q of a sinogram with 4th-order central differences.

    The valid region shrinks by two cells per side; the invalid ring is zeroed.
    """
    c = S.sgrid.count
    if c - 2 * (S.margin + STENCIL_RING) < 1:
        raise ValueError("s-grid too small for the derivative stencil")
    h = S.sgrid.spacing
    grid = S.grid
    out = np.empty_like(grid)
    for lo in range(0, len(grid), chunk):
        out[lo : lo + chunk] = sderiv_array(grid[lo : lo + chunk], h, p, q)
    margin = S.margin + (STENCIL_RING if p + q else 0)
    _zero_ring(out, margin)
    prov = dict(S.provenance, s_derivative=[p, q])
    return Sinogram(S.sphere, S.sgrid, out.reshape(len(grid), -1), margin, prov)


def convolve_s(S: Sinogram, kernel, support_radius: float, normalize: bool = False) -> Sinogram:
    """Per-direction 2D convolution in s by direct summation.

    ``kernel`` maps complex offsets to values and vanishes for
    |offset| >= ``support_radius``. The valid region shrinks by
    ceil(support_radius / spacing) cells per side.
    """
    h, c, ext = S.sgrid.spacing, S.sgrid.count, S.sgrid.extent
    if support_radius <= 0 or support_radius >= ext / 2:
        raise ValueError(f"kernel support {support_radius} must lie in (0, extent/2 = {ext / 2})")
    k = int(math.ceil(support_radius / h - 1e-12))
    offs = np.arange(-k, k + 1) * h
    offsets = offs[None, :] + 1j * offs[:, None]  # [row, col]
    kv = np.asarray(kernel(offsets), dtype=complex) * h * h
    if normalize:
        total = kv.sum()
        if abs(total) == 0:
            raise ValueError("kernel has no mass on this grid")
        kv = kv / total
    margin = S.margin + k
    if c - 2 * margin < 1:
        raise ValueError("kernel support too large for the s-grid")
    grid = S.grid
    out = np.zeros_like(grid)
    inner = out[:, margin : c - margin, margin : c - margin]
    for di in range(-k, k + 1):
        for dj in range(-k, k + 1):
            kval = kv[di + k, dj + k]
            if kval == 0:
                continue
            inner += kval * grid[:, margin - di : c - margin - di, margin - dj : c - margin - dj]
    prov = dict(S.provenance, convolve_s={"support_radius": support_radius, "normalize": normalize})
    return Sinogram(S.sphere, S.sgrid, out.reshape(len(grid), -1), margin, prov)


# ---------------------------------------------------------------- convolution on C^2


def convolve_cn(f, alpha, points, n_r: int = 32, sphere: SphereGrid | None = None, chunk: int = 256):
    """(f * alpha)(z) at ``points`` by 4D quadrature over the ball |u| <= alpha.radius.

    ``alpha`` needs ``radius`` and ``evaluate``; it must integrate to one
    within 1e-6 under the same rule.
    """
    if sphere is None:
        sphere = sphere_grid(6, 6)
    u, wu = ball_rule(np.zeros(2), alpha.radius, n_r, sphere)
    au = alpha.evaluate(u) * wu
    mass = float(np.real(tree_sum(au)))
    if abs(mass - 1.0) > 1e-6:
        raise ValueError(f"mollifier integrates to {mass:.9f}, not 1")
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    out = np.empty(len(pts), dtype=complex)
    for lo in range(0, len(pts), chunk):
        z = pts[lo : lo + chunk]
        vals = np.asarray(f(z[:, None, :] - u[None, :, :]))
        out[lo : lo + chunk] = tree_sum(vals * au[None, :])
    return out
