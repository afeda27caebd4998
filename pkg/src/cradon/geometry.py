"""Complex hyperplanes, compact sets and their projections onto directions.

The pairing is bilinear, <z, w> = sum z_j w_j. A hyperplane (xi, s) is the
complex line {z : <z, xi> = s}; (c xi, c s) describes the same line for
every c != 0. The projection of K on w is K_w = {<z, w> : z in K}, and a
hyperplane (w, s) meets K iff s lies in K_w.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .numerics import SphereGrid

SNAP = 2.0**-32
MIN_RESOLUTION = 16
DEFAULT_SAMPLES = 200_000


def pairing(z, w):
    """Bilinear pairing <z, w> over the last axis."""
    return np.sum(np.asarray(z, dtype=complex) * np.asarray(w, dtype=complex), axis=-1)


def _snap(x):
    x = np.asarray(x, dtype=complex)
    return np.round(x.real / SNAP) * SNAP + 1j * (np.round(x.imag / SNAP) * SNAP)


@dataclass(frozen=True)
class Hyperplane:
    normal: tuple
    offset: complex

    def __post_init__(self):
        normal = tuple(complex(v) for v in self.normal)
        if len(normal) < 2:
            raise ValueError("complex hyperplanes need n >= 2 (for n = 1 they degenerate to points)")
        if not any(normal):
            raise ValueError("hyperplane normal must be nonzero")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", complex(self.offset))

    @property
    def n(self) -> int:
        return len(self.normal)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.normal))

    @property
    def is_canonical(self) -> bool:
        return self.canonical() == self

    def canonical(self) -> "Hyperplane":
        return canonicalize(self.normal, self.offset)

    def contains(self, z, tol: float = 1e-12) -> bool:
        return bool(abs(pairing(z, self.normal) - self.offset) <= tol * max(1.0, self.norm))


def canonicalize(normal, offset) -> Hyperplane:
    """Canonical representative of the line {<z, normal> = offset}.

    Unit normal; offset real and >= 0, or, when the offset vanishes, the
    first nonzero normal coordinate real and positive. Coordinates are
    snapped to multiples of 2^-32 so that phase-equivalent inputs map to
    bitwise-identical output.
    """
    xi = np.asarray(normal, dtype=complex)
    if xi.size < 2:
        raise ValueError("complex hyperplanes need n >= 2")
    nrm = np.linalg.norm(xi)
    if nrm == 0:
        raise ValueError("hyperplane normal must be nonzero")
    xi = xi / nrm
    s = complex(offset) / nrm
    if abs(s) > SNAP:
        phase = s / abs(s)
        s = abs(s)
    else:
        s = 0.0
        lead = xi[np.argmax(np.abs(xi) > 1e-9)]
        phase = lead / abs(lead)
    xi = _snap(xi * np.conj(phase))
    s = complex(_snap(s))
    scale = np.linalg.norm(xi)
    return Hyperplane(tuple(xi / scale), s / scale)


# ---------------------------------------------------------------- compact sets


def _unit_s3(n, rng):
    g = rng.standard_normal((n, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, 0::2] + 1j * g[:, 1::2]


class CompactSet:
    """Compact K in C^2 with a membership oracle and a bounding radius.

    Subclasses with exact distance formulas override ``distance`` and
    ``projection_distance``; the generic fallbacks work from a point cloud.
    """

    kind = "oracle"
    exact = False

    @property
    def bound(self) -> float:
        raise NotImplementedError

    def distance(self, z):
        raise NotImplementedError

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.asarray(self.distance(z)) <= 1e-12
        return bool(out) if out.ndim == 0 else out

    def sample(self, n: int, rng=None) -> np.ndarray:
        raise NotImplementedError

    def projection_distance(self, w, s):
        """dist(s, K_w) for directions w (..., 2) and offsets s (...)."""
        cloud = self._cloud()
        w = np.asarray(w, dtype=complex)
        s = np.asarray(s, dtype=complex)
        w, s = np.broadcast_arrays(w, s[..., None])
        s = s[..., 0]
        flat_w = w.reshape(-1, 2)
        flat_s = s.ravel()
        out = np.empty(len(flat_s))
        for lo in range(0, len(flat_s), 64):
            proj = cloud @ flat_w[lo : lo + 64].T
            out[lo : lo + 64] = np.min(np.abs(proj - flat_s[None, lo : lo + 64]), axis=0)
        return out.reshape(s.shape)

    def projection_bound(self, w) -> float:
        return self.bound * float(np.linalg.norm(w))

    def _cloud(self):
        if getattr(self, "_cached_cloud", None) is None:
            self._cached_cloud = self.sample(20_000, np.random.default_rng(0))
        return self._cached_cloud

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass
class Ball(CompactSet):
    center: np.ndarray
    radius: float
    kind = "ball"
    exact = True

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=complex)
        if self.radius < 0:
            raise ValueError("ball radius must be non-negative")

    @property
    def bound(self):
        return float(np.linalg.norm(self.center)) + self.radius

    def distance(self, z):
        d = np.linalg.norm(np.asarray(z, dtype=complex) - self.center, axis=-1)
        return np.maximum(d - self.radius, 0.0)

    def projection_distance(self, w, s):
        w = np.asarray(w, dtype=complex)
        c = pairing(self.center, w)
        return np.maximum(np.abs(np.asarray(s) - c) - self.radius * np.linalg.norm(w, axis=-1), 0.0)

    def projection_bound(self, w):
        return abs(complex(pairing(self.center, w))) + self.radius * float(np.linalg.norm(w))

    def sample(self, n, rng=None):
        rng = rng or np.random.default_rng(0)
        dirs = _unit_s3(n, rng)
        r = np.full(n, self.radius)
        half = n // 2
        r[half:] *= rng.random(n - half) ** 0.25
        return self.center + r[:, None] * dirs

    def describe(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


@dataclass
class Polydisc(CompactSet):
    center: np.ndarray
    radii: tuple
    kind = "polydisc"
    exact = True

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=complex)
        self.radii = tuple(float(r) for r in self.radii)

    @property
    def bound(self):
        return float(np.linalg.norm(self.center)) + math.hypot(*self.radii)

    def distance(self, z):
        d = np.abs(np.asarray(z, dtype=complex) - self.center) - np.asarray(self.radii)
        return np.linalg.norm(np.maximum(d, 0.0), axis=-1)

    def projection_distance(self, w, s):
        w = np.asarray(w, dtype=complex)
        rad = np.sum(np.abs(w) * np.asarray(self.radii), axis=-1)
        return np.maximum(np.abs(np.asarray(s) - pairing(self.center, w)) - rad, 0.0)

    def projection_bound(self, w):
        w = np.asarray(w, dtype=complex)
        return abs(complex(pairing(self.center, w))) + float(np.sum(np.abs(w) * self.radii))

    def sample(self, n, rng=None):
        rng = rng or np.random.default_rng(0)
        out = np.empty((n, 2), dtype=complex)
        for j, r in enumerate(self.radii):
            rad = r * np.where(rng.random(n) < 0.5, 1.0, np.sqrt(rng.random(n)))
            out[:, j] = self.center[j] + rad * np.exp(2j * math.pi * rng.random(n))
        return out

    def describe(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radii": list(self.radii)}


@dataclass
class EmbeddedAnnulus(CompactSet):
    """{(c1 + u, c2) : inner <= |u| <= outer}, an annulus in a coordinate line."""

    inner: float
    outer: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2, dtype=complex))
    kind = "embedded-annulus"
    exact = True

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=complex)
        if not 0 <= self.inner <= self.outer:
            raise ValueError("annulus needs 0 <= inner <= outer")

    @property
    def bound(self):
        return float(np.linalg.norm(self.center)) + self.outer

    def _radial_gap(self, r):
        return np.maximum(np.maximum(self.inner - r, r - self.outer), 0.0)

    def distance(self, z):
        z = np.asarray(z, dtype=complex)
        d1 = self._radial_gap(np.abs(z[..., 0] - self.center[0]))
        return np.hypot(d1, np.abs(z[..., 1] - self.center[1]))

    def projection_distance(self, w, s):
        w = np.asarray(w, dtype=complex)
        scale = np.abs(w[..., 0])
        r = np.abs(np.asarray(s) - pairing(self.center, w))
        return np.maximum(np.maximum(self.inner * scale - r, r - self.outer * scale), 0.0)

    def projection_bound(self, w):
        return abs(complex(pairing(self.center, w))) + self.outer * abs(complex(np.asarray(w)[0]))

    def sample(self, n, rng=None):
        rng = rng or np.random.default_rng(0)
        pick = rng.random(n)
        area = np.sqrt(self.inner**2 + (self.outer**2 - self.inner**2) * rng.random(n))
        r = np.where(pick < 0.25, self.inner, np.where(pick < 0.5, self.outer, area))
        out = np.empty((n, 2), dtype=complex)
        out[:, 0] = self.center[0] + r * np.exp(2j * math.pi * rng.random(n))
        out[:, 1] = self.center[1]
        return out

    def describe(self):
        return {"kind": self.kind, "inner": self.inner, "outer": self.outer, "center": self.center.tolist()}


@dataclass
class FinitePointSet(CompactSet):
    points: np.ndarray
    kind = "finite-point-set"
    exact = True

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=complex))

    @property
    def bound(self):
        return float(np.max(np.linalg.norm(self.points, axis=1)))

    def distance(self, z):
        z = np.asarray(z, dtype=complex)
        d = np.linalg.norm(z[..., None, :] - self.points, axis=-1)
        return np.min(d, axis=-1)

    def projection_distance(self, w, s):
        w = np.asarray(w, dtype=complex)
        proj = np.einsum("...j,kj->...k", w, self.points)
        return np.min(np.abs(np.asarray(s)[..., None] - proj), axis=-1)

    def projection_bound(self, w):
        return float(np.max(np.abs(self.points @ np.asarray(w, dtype=complex))))

    def sample(self, n, rng=None):
        return self.points[np.arange(n) % len(self.points)]

    def describe(self):
        return {"kind": self.kind, "points": self.points.tolist()}


@dataclass
class Union(CompactSet):
    parts: list

    @property
    def kind(self):
        return "union-of-balls" if all(isinstance(p, Ball) for p in self.parts) else "union"

    @property
    def exact(self):
        return all(p.exact for p in self.parts)

    @property
    def bound(self):
        return max(p.bound for p in self.parts)

    def distance(self, z):
        return np.min(np.stack([np.asarray(p.distance(z)) for p in self.parts]), axis=0)

    def projection_distance(self, w, s):
        return np.min(np.stack([np.asarray(p.projection_distance(w, s)) for p in self.parts]), axis=0)

    def projection_bound(self, w):
        return max(p.projection_bound(w) for p in self.parts)

    def sample(self, n, rng=None):
        rng = rng or np.random.default_rng(0)
        sizes = [n // len(self.parts) + (i < n % len(self.parts)) for i in range(len(self.parts))]
        return np.concatenate([p.sample(k, rng) for p, k in zip(self.parts, sizes)])

    def describe(self):
        return {"kind": self.kind, "parts": [p.describe() for p in self.parts]}


@dataclass
class Dilation(CompactSet):
    """K_eps: points within distance eps of the base set."""

    base: CompactSet
    eps: float
    kind = "dilation"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"dilation radius must be positive, got {self.eps}")

    @property
    def exact(self):
        return self.base.exact

    @property
    def bound(self):
        return self.base.bound + self.eps

    def distance(self, z):
        return np.maximum(np.asarray(self.base.distance(z)) - self.eps, 0.0)

    def projection_distance(self, w, s):
        w = np.asarray(w, dtype=complex)
        d = np.asarray(self.base.projection_distance(w, s))
        return np.maximum(d - self.eps * np.linalg.norm(w, axis=-1), 0.0)

    def projection_bound(self, w):
        return self.base.projection_bound(w) + self.eps * float(np.linalg.norm(w))

    def sample(self, n, rng=None):
        rng = rng or np.random.default_rng(0)
        pts = self.base.sample(n, rng)
        r = np.full(n, self.eps)
        r[n // 2 :] *= rng.random(n - n // 2) ** 0.25
        return pts + r[:, None] * _unit_s3(n, rng)

    def describe(self):
        return {"kind": self.kind, "eps": self.eps, "base": self.base.describe()}


class OracleSet(CompactSet):
    """A set known only through membership, a bound and a sampler.

    Distances are estimated from a sample cloud, so they carry the sampling
    gap as error.
    """

    kind = "oracle"
    exact = False

    def __init__(self, contains, bound: float, sampler):
        self._contains = contains
        self._bound = float(bound)
        self._sampler = sampler
        self._cached_cloud = None
        self._tree = None

    @property
    def bound(self):
        return self._bound

    def contains(self, z):
        return self._contains(z)

    def sample(self, n, rng=None):
        return self._sampler(n, rng or np.random.default_rng(0))

    def distance(self, z):
        cloud = self._cloud()
        if self._tree is None:
            self._tree = cKDTree(np.column_stack([cloud.real, cloud.imag])[:, [0, 2, 1, 3]])
        z = np.asarray(z, dtype=complex)
        flat = z.reshape(-1, 2)
        d, _ = self._tree.query(np.column_stack([flat.real, flat.imag])[:, [0, 2, 1, 3]])
        inside = np.asarray(self._contains(flat), dtype=bool)
        return np.where(inside, 0.0, d).reshape(z.shape[:-1])


def dilate(K: CompactSet, eps: float) -> Dilation:
    if not eps > 0:
        raise ValueError(f"dilate needs eps > 0, got {eps}")
    return Dilation(K, float(eps))


# ---------------------------------------------------------------- projections


@dataclass
class ProjectionRegion:
    bitmap: np.ndarray  # [row = imag, col = real]
    center: complex
    half_width: float
    resolution: int

    @property
    def cell(self) -> float:
        return 2.0 * self.half_width / self.resolution

    def cell_centers(self) -> np.ndarray:
        ax = -self.half_width + self.cell * (np.arange(self.resolution) + 0.5)
        c = complex(self.center)
        return (c.real + ax)[None, :] + 1j * (c.imag + ax)[:, None]

    def cell_of(self, s: complex):
        c = complex(s) - complex(self.center)
        col = int(math.floor((c.real + self.half_width) / self.cell))
        row = int(math.floor((c.imag + self.half_width) / self.cell))
        return row, col

    def true_centers(self) -> np.ndarray:
        return self.cell_centers()[self.bitmap]


def project(K: CompactSet, w, resolution: int = 128, method: str = "auto", n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> ProjectionRegion:
    """Raster of K_w on a square window centred at 0.

    Exact kinds mark a cell when its centre lies within half a cell diagonal
    of K_w; other sets are rasterized from a boundary-biased point cloud.
    """
    w = np.asarray(w, dtype=complex)
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise ValueError("project needs a unit direction")
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    if method not in ("auto", "exact", "sample"):
        raise ValueError(f"unknown projection method {method!r}")
    bound = max(K.projection_bound(w), 1e-9 * (1.0 + K.bound))
    # room for a two-cell false border around every true cell
    half_width = bound / (1.0 - 6.0 / resolution)
    region = ProjectionRegion(np.zeros((resolution, resolution), bool), 0j, half_width, resolution)
    use_exact = method == "exact" or (method == "auto" and K.exact)
    if use_exact:
        centers = region.cell_centers()
        d = K.projection_distance(w, centers)
        region.bitmap = np.asarray(d) <= region.cell * math.sqrt(0.5) * (1 + 1e-9)
    else:
        pts = K.sample(n_samples, np.random.default_rng(seed)) @ w
        col = np.floor((pts.real + half_width) / region.cell).astype(int)
        row = np.floor((pts.imag + half_width) / region.cell).astype(int)
        ok = (col >= 0) & (col < resolution) & (row >= 0) & (row < resolution)
        region.bitmap[row[ok], col[ok]] = True
    return region


def hat_contains(K: CompactSet, H: Hyperplane, tol: float = 0.0, resolution: int = 256) -> bool:
    """Does the hyperplane H meet K (up to ``tol``)?"""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    w = np.asarray(H.normal)
    if K.exact:
        return bool(K.projection_distance(w, H.offset) <= tol)
    region = project(K, w, resolution)
    centers = region.true_centers()
    if len(centers) == 0:
        return False
    d = np.min(np.abs(centers - H.offset)) - region.cell * math.sqrt(0.5)
    return bool(d <= tol)


def hat_dilate_contains(K: CompactSet, m: int, H: Hyperplane) -> bool:
    """Membership of H in the hat-set of the 1/m-dilation: dist(s, K_w) <= 1/m."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    w = np.asarray(H.normal)
    return bool(K.projection_distance(w, H.offset) <= 1.0 / m * np.linalg.norm(w))


_FOUR = ndimage.generate_binary_structure(2, 1)
_EIGHT = ndimage.generate_binary_structure(2, 2)


def _check_border(P: ProjectionRegion):
    b = P.bitmap
    if b[0].any() or b[-1].any() or b[:, 0].any() or b[:, -1].any():
        raise ValueError("projection window too small: true cells touch the border; enlarge the window")


def complement_connected(P: ProjectionRegion) -> bool:
    """Is C minus the rasterized set connected (4-connectivity, unbounded frame)?"""
    _check_border(P)
    free = np.pad(~P.bitmap, 1, constant_values=True)
    seed = np.zeros_like(free)
    seed[0, :] = seed[-1, :] = seed[:, 0] = seed[:, -1] = True
    reached = ndimage.binary_propagation(seed, structure=_FOUR, mask=free)
    return bool(np.array_equal(reached, free))


def count_components(P: ProjectionRegion, which: str = "complement") -> int:
    """Connected components of the complement (4-conn, framed) or the set (8-conn)."""
    if which == "complement":
        _, n = ndimage.label(np.pad(~P.bitmap, 1, constant_values=True), structure=_FOUR)
    elif which == "set":
        _, n = ndimage.label(P.bitmap, structure=_EIGHT)
    else:
        raise ValueError(f"which must be 'complement' or 'set', got {which!r}")
    return int(n)


# ---------------------------------------------------------------- linear convexity


@dataclass
class ConvexityReport:
    witnessed: int
    failed: list
    rejected: list
    witnesses: dict = field(default_factory=dict)


def _directions(grid: SphereGrid) -> np.ndarray:
    # hat membership is phase invariant; one node per Hopf fibre suffices
    if grid.section:
        return grid.nodes
    n = grid.n_theta
    return grid.nodes.reshape(grid.n_eta, n, n, 2)[:, 0].reshape(-1, 2)


def is_linearly_convex(K: CompactSet, probes, directions: SphereGrid) -> ConvexityReport:
    """Grid search for hyperplanes through each probe that miss K.

    Evidence only: a probe lands in ``failed`` when no grid direction
    separates it, which refutes linear convexity only up to grid resolution.
    """
    dirs = _directions(directions)
    report = ConvexityReport(0, [], [])
    for i, z in enumerate(np.atleast_2d(np.asarray(probes, dtype=complex))):
        if K.contains(z):
            report.rejected.append((i, f"probe {i} lies in K"))
            continue
        d = np.asarray(K.projection_distance(dirs, dirs @ z))
        if np.any(d > 0):
            report.witnessed += 1
            report.witnesses[i] = dirs[int(np.argmax(d))]
        else:
            report.failed.append(i)
    return report


@dataclass
class Separation:
    hyperplane: Hyperplane
    connected: bool
    margin: float
    region: ProjectionRegion


class NoSeparatingHyperplane(RuntimeError):
    pass


def find_separating_hyperplane(K: CompactSet, z0, directions: SphereGrid, resolution: int = 128) -> Separation:
    """A hyperplane through z0 missing K, preferring one with C \\ K_w connected.

    Candidates are tried in order of decreasing separation margin; the first
    whose projection has a connected complement is returned. If none does,
    the widest separating hyperplane is returned with ``connected=False``.
    """
    z0 = np.asarray(z0, dtype=complex)
    if K.contains(z0):
        raise ValueError("z0 lies in K")
    dirs = _directions(directions)
    offsets = dirs @ z0
    d = np.asarray(K.projection_distance(dirs, offsets))
    order = np.argsort(-d, kind="stable")
    order = order[d[order] > 0]
    if len(order) == 0:
        raise NoSeparatingHyperplane("no grid direction separates z0 from K")
    fallback = None
    for i in order:
        region = project(K, dirs[i], resolution)
        sep = Separation(Hyperplane(tuple(dirs[i]), offsets[i]), complement_connected(region), float(d[i]), region)
        if sep.connected:
            return sep
        if fallback is None:
            fallback = sep
    return fallback


# ---------------------------------------------------------------- escape paths


@dataclass
class BrokenLine:
    vertices: list
    delta: float
    clearance: float

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValueError("a broken line needs at least two vertices")
        for a, b in zip(self.vertices, self.vertices[1:]):
            if a == b:
                raise ValueError("consecutive vertices must differ")

    def sample(self, step: float) -> np.ndarray:
        pts = [np.asarray([self.vertices[0]])]
        for a, b in zip(self.vertices, self.vertices[1:]):
            k = max(2, int(math.ceil(abs(b - a) / step)) + 1)
            pts.append(a + (b - a) * np.linspace(0.0, 1.0, k)[1:])
        return np.concatenate(pts)


class NoEscapePath(RuntimeError):
    def __init__(self, message: str, max_clearance: float):
        super().__init__(message)
        self.max_clearance = max_clearance


class _Clearance:
    """Conservative distance to the union of true cell squares."""

    def __init__(self, P: ProjectionRegion):
        self.half_diag = P.cell * math.sqrt(0.5)
        c = P.true_centers()
        self.tree = cKDTree(np.column_stack([c.real, c.imag])) if len(c) else None

    def __call__(self, pts):
        pts = np.atleast_1d(np.asarray(pts, dtype=complex))
        if self.tree is None:
            return np.full(len(pts), np.inf)
        d, _ = self.tree.query(np.column_stack([pts.real, pts.imag]))
        return d - self.half_diag


def escape_path(A: ProjectionRegion, s0: complex, R: float, delta: float) -> BrokenLine:
    """Broken line from s0 to |s| > R keeping clearance > delta from A.

    Breadth-first search over raster cells whose clearance exceeds delta,
    followed by greedy line-of-sight simplification. Raises NoEscapePath
    (with the best achievable clearance) when s0 is trapped.
    """
    s0 = complex(s0)
    h = A.cell
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if R <= abs(complex(A.center)) + A.half_width * math.sqrt(2.0):
        raise ValueError(f"R = {R} must exceed the window radius of the region")
    clear = _Clearance(A)
    if not clear(s0)[0] > delta:
        raise ValueError(f"s0 = {s0} is within delta = {delta} of the set")
    step = h / 4.0

    def seg_ok(a, b):
        k = max(2, int(math.ceil(abs(b - a) / step)) + 1)
        pts = a + (b - a) * np.linspace(0.0, 1.0, k)
        return bool(np.all(clear(pts) > delta + step))

    pad = int(math.ceil((delta + 3 * h) / h)) + 1
    free_cells = np.pad(~A.bitmap, pad, constant_values=True)
    n = free_cells.shape[0]
    hw = A.half_width + pad * h
    ax = -hw + h * (np.arange(n) + 0.5)
    c = complex(A.center)
    centers = (c.real + ax)[None, :] + 1j * (c.imag + ax)[:, None]
    if np.any(A.bitmap):
        dist = ndimage.distance_transform_edt(free_cells) * h
    else:
        dist = np.full(free_cells.shape, np.inf)
    cell_clear = dist - clear.half_diag - h / 2.0
    rel = s0 - c
    col = int(math.floor((rel.real + hw) / h))
    row = int(math.floor((rel.imag + hw) / h))

    if not (0 <= row < n and 0 <= col < n):
        # already outside the padded window: move straight away along the dominant axis
        normal = (1.0 if rel.real > 0 else -1.0) if abs(rel.real) >= abs(rel.imag) else (1j if rel.imag > 0 else -1j)
        end = s0 + normal * (R + abs(s0) + h)
        return BrokenLine([s0, end], delta, float(np.min(clear(np.array([s0, end])))))

    def bfs(passable):
        if not passable[row, col]:
            return None
        parent = {(row, col): None}
        queue = deque([(row, col)])
        while queue:
            cur = queue.popleft()
            r, k = cur
            if r in (0, n - 1) or k in (0, n - 1):
                path = []
                while cur is not None:
                    path.append(cur)
                    cur = parent[cur]
                return path[::-1]
            for nb in ((r + 1, k), (r - 1, k), (r, k + 1), (r, k - 1)):
                if nb not in parent and passable[nb]:
                    parent[nb] = cur
                    queue.append(nb)
        return None

    cells = bfs(cell_clear > delta)
    if cells is None or not seg_ok(s0, centers[cells[0]]):
        raise NoEscapePath(
            f"no escape from s0 = {s0} at clearance {delta}", _max_clearance(cell_clear, row, col)
        )
    last_r, last_c = cells[-1]
    if last_c == 0:
        normal = -1.0
    elif last_c == n - 1:
        normal = 1.0
    elif last_r == 0:
        normal = -1j
    else:
        normal = 1j
    border = centers[last_r, last_c]
    end = border + normal * (R + abs(border) + h)
    verts = [s0] + [complex(centers[rc]) for rc in cells] + [complex(end)]
    simplified = [verts[0]]
    i = 0
    while i < len(verts) - 1:
        j = len(verts) - 1
        while j > i + 1 and not seg_ok(verts[i], verts[j]):
            j -= 1
        simplified.append(verts[j])
        i = j
    line = BrokenLine(simplified, delta, 0.0)
    line.clearance = float(np.min(clear(line.sample(step))))
    return line


def _max_clearance(cell_clear, row, col) -> float:
    """Largest threshold at which the start cell still reaches the border."""
    levels = np.unique(cell_clear[np.isfinite(cell_clear)])
    best = 0.0
    lo, hi = 0, len(levels) - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        lab, _ = ndimage.label(cell_clear >= levels[mid], structure=_FOUR)
        mine = lab[row, col]
        edge = np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])
        if mine and np.any(edge == mine):
            best = max(best, float(levels[mid]))
            lo = mid + 1
        else:
            hi = mid - 1
    return best
