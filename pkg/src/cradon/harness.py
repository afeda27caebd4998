"""Executable checks of the transform identities and the support experiments.

Every check compares two independently computed quantities and records
(name, measured, reference, tol, pass). A report passes iff all records
pass; support-converse runs whose witness breaks the connectivity
hypothesis are reported as "hypothesis violated" instead.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .distributions import DensityQuad, Mollifier, PointMass, TestDistribution, mollified, radon_pair
from .numerics import (
    TWO_PI_SQ,
    SGrid,
    Sinogram,
    SphereGrid,
    ball_rule,
    convolve_s,
    disk_rule,
    integrate_sphere,
    sphere_grid,
    tree_sum,
)
from .transform import (
    ANALYTIC_CN,
    Gaussian,
    QuadParams,
    TestFunction,
    VolumeGrid,
    _plane_integral,
    calibrate_cn,
    dual,
    forward,
    forward_sinogram,
    invert,
    real_radon_direct,
    real_radon_from_complex,
)
from .xfunctions import Window, XFunction, bump_s, phase_defect

PASS, FAIL, VIOLATED = "pass", "fail", "hypothesis violated"


# ---------------------------------------------------------------- reports


@dataclass
class Check:
    name: str
    measured: float
    reference: float
    tol: float
    passed: bool
    kind: str = "abs"  # abs | rel | max | min | flag

    def as_dict(self):
        return {
            "name": self.name,
            "measured": _num(self.measured),
            "reference": _num(self.reference),
            "tol": _num(self.tol),
            "pass": bool(self.passed),
        }


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    x = float(x)
    return x if math.isfinite(x) else str(x)


def close(name, measured, reference, tol, relative=False) -> Check:
    """|measured - reference| <= tol (times |reference| when relative)."""
    measured, reference = complex(measured), complex(reference)
    err = abs(measured - reference)
    if relative:
        err = err / max(abs(reference), 1e-300)
    return Check(name, abs(measured) if measured.imag else measured.real, abs(reference) if reference.imag else reference.real, tol, bool(err <= tol), "rel" if relative else "abs")


def at_most(name, measured, bound, tol=0.0) -> Check:
    return Check(name, float(measured), float(bound), tol, bool(measured <= bound + tol), "max")


def at_least(name, measured, bound, tol=0.0) -> Check:
    return Check(name, float(measured), float(bound), tol, bool(measured >= bound - tol), "min")


def flag(name, value: bool, expected: bool = True) -> Check:
    return Check(name, float(value), float(expected), 0.0, bool(value) == bool(expected), "flag")


@dataclass
class ExperimentReport:
    experiment: str
    config: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    status: str | None = None
    notes: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    wall_ms: float = 0.0

    @property
    def config_digest(self) -> str:
        return config_digest(self.config)

    def add(self, *checks):
        self.checks.extend(checks)
        return self

    def finalize(self, violated: bool = False):
        if violated:
            self.status = VIOLATED
        else:
            self.status = PASS if self.checks and all(c.passed for c in self.checks) else FAIL
        return self

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def as_dict(self, timing: bool = True) -> dict:
        d = {
            "experiment": self.experiment,
            "config_digest": self.config_digest,
            "status": self.status,
            "checks": [c.as_dict() for c in self.checks],
            "notes": list(self.notes),
            "provenance": self.provenance,
            "config": self.config,
        }
        if timing:
            d["wall_ms"] = round(self.wall_ms, 3)
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.as_dict(timing), indent=2, sort_keys=True, default=_json_default) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "name", "measured", "reference", "tol", "pass"])
        for c in self.checks:
            d = c.as_dict()
            w.writerow([self.experiment, d["name"], repr(d["measured"]), repr(d["reference"]), repr(d["tol"]), d["pass"]])
        return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def config_digest(config: dict) -> str:
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def timed(fn):
    """Run ``fn`` and store its wall time on the returned report."""

    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        report = fn(*args, **kwargs)
        report.wall_ms = 1000.0 * (time.perf_counter() - t0)
        return report

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def thread_count() -> int:
    """Worker count from CRADON_THREADS (0 or unset: CPU count)."""
    raw = os.environ.get("CRADON_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"CRADON_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def pmap(fn, items):
    """Order-preserving map, threaded when CRADON_THREADS allows it."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def probe_points(count: int, radius: float, seed: int, include_origin: bool = True) -> np.ndarray:
    """Deterministic probes in the ball |z| <= radius of C^2."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** 0.25
    pts = (g[:, 0::2] + 1j * g[:, 1::2]) * r[:, None]
    if include_origin and count:
        pts[0] = 0
    return pts


def _ref_scale(values) -> float:
    return max(float(np.max(np.abs(values))), 1e-300)


# ---------------------------------------------------------------- forward / inversion


@timed
def check_forward(quad: QuadParams = QuadParams(), s_radius: float = 3.0, tol: float = 1e-8, n_s: int = 13, seed: int = 0) -> ExperimentReport:
    """Quadrature transform of the unit Gaussian against pi exp(-|s|^2)."""
    rep = ExperimentReport("forward")
    phi = Gaussian()
    rng = np.random.default_rng(seed)
    ax = np.linspace(-s_radius, s_radius, n_s)
    s = (ax[None, :] + 1j * ax[:, None]).ravel()
    s = s[np.abs(s) <= s_radius + 1e-12]
    g = rng.standard_normal((4, 4))
    dirs = g[:, 0::2] + 1j * g[:, 1::2]
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    worst = 0.0
    for w in dirs:
        vals = _plane_integral(phi, w, s, quad)
        worst = max(worst, float(np.max(np.abs(vals - math.pi * np.exp(-np.abs(s) ** 2)))))
    rep.add(at_most("gaussian closed form, max abs error over |s|<=3", worst, tol))
    # doubling the rule: error drops 4x or is already at the floor
    coarse = QuadParams(quad.cutoff, max(quad.n_r // 4, 2), max(quad.n_phi // 4, 2))
    e1 = abs(forward(phi, geo.Hyperplane(tuple(dirs[0]), 1.5), coarse) - math.pi * math.exp(-2.25))
    e2 = abs(forward(phi, geo.Hyperplane(tuple(dirs[0]), 1.5), coarse.doubled()) - math.pi * math.exp(-2.25))
    rep.add(flag("refinement reduces error 4x or reaches 1e-10", e2 <= max(e1 / 4.0, 1e-10)))
    w0 = dirs[1]
    base = forward(phi, geo.Hyperplane(tuple(w0), 0.7 + 0.2j), quad)
    scaled = forward(phi, geo.Hyperplane(tuple(2 * w0), 2 * (0.7 + 0.2j)), quad)
    rep.add(close("homogeneity: forward(2w, 2s) = forward(w, s) / 4", scaled, base / 4.0, 1e-12, relative=True))
    rep.provenance = {"quad": vars(quad), "directions": len(dirs), "s_probes": len(s)}
    return rep.finalize()


@timed
def check_calibration(radii=(0.0, 0.5, 1.0), sgrid: SGrid | None = None, sphere: SphereGrid | None = None, tol: float = 1e-3, refine_tol: float = 1e-4) -> ExperimentReport:
    """c_hat from the Gaussian pipeline vs 1/(2 pi^3); radius and resolution stability."""
    rep = ExperimentReport("calibrate")
    kw = {}
    if sgrid is not None:
        kw["sgrid"] = sgrid
    if sphere is not None:
        kw["sphere"] = sphere
    results = [calibrate_cn(radius=r, **kw) for r in radii]
    c0 = results[0]
    rep.add(close("c_hat vs 1/(2 pi^3)", c0.c_hat, ANALYTIC_CN, tol, relative=True))
    for r in results[1:]:
        rep.add(close(f"c_hat at r={r.radius:g} vs r={c0.radius:g}", r.c_hat, c0.c_hat, tol, relative=True))
    g = kw.get("sgrid") or SGrid(0j, 1.5, 129)
    sph = kw.get("sphere") or sphere_grid(16, 16, section=True)
    fine = calibrate_cn(g.refined(), sphere_grid(2 * sph.n_eta, sph.n_theta, section=True), radius=c0.radius)
    rep.add(close("doubling resolutions changes c_hat", fine.c_hat, c0.c_hat, refine_tol, relative=True))
    rep.provenance = {"c_hat": c0.c_hat, "analytic": ANALYTIC_CN, "params": c0.params}
    return rep.finalize()


def _roundtrip_error(phi: TestFunction, sphere, sgrid, volume: VolumeGrid, radius: float):
    S = forward_sinogram(phi, sphere, sgrid)
    pts = volume.points()
    inside = np.linalg.norm(pts, axis=1) <= radius + 1e-12
    rec = invert(S, pts[inside])
    exact = phi.evaluate(pts[inside])
    if not np.any(np.abs(exact) > 0):
        raise ValueError(f"phi vanishes on every volume point with |z| <= {radius:g}; relative error undefined")
    err = float(np.max(np.abs(rec - exact)) / _ref_scale(exact))
    return err, rec, pts[inside], S


@timed
def check_roundtrip(functions, sphere: SphereGrid | None = None, sgrid: SGrid | None = None, volume: VolumeGrid | None = None, radius: float = 2.0, tol: float = 0.02, refine: bool = True) -> ExperimentReport:
    """Inversion of closed-form sinograms; relative sup error on |z| <= radius.

    The error is normalized by sup |phi| on the same points. Refinement
    halves the s-spacing and doubles the eta-nodes.
    """
    rep = ExperimentReport("invert")
    sphere = sphere or sphere_grid(16, 16, section=True)
    sgrid = sgrid or SGrid()
    volume = volume or VolumeGrid((0j, 0j), radius, 9)
    prov = {}
    for name, phi in functions:
        err, rec, pts, _ = _roundtrip_error(phi, sphere, sgrid, volume, radius)
        rep.add(at_most(f"{name}: relative max error on |z|<={radius:g}", err, tol))
        prov[name] = {"error": err}
        if refine:
            fine_sphere = sphere_grid(2 * sphere.n_eta, sphere.n_theta, section=sphere.section)
            err2, *_ = _roundtrip_error(phi, fine_sphere, sgrid.refined(), volume, radius)
            rep.add(at_most(f"{name}: refined error below coarse error", err2, err))
            prov[name]["refined_error"] = err2
        if np.linalg.norm(phi.center) > 0:
            peak = pts[int(np.argmax(np.abs(rec)))]
            dist = float(np.max(np.abs(np.concatenate([(peak - phi.center).real, (peak - phi.center).imag]))))
            rep.add(at_most(f"{name}: reconstruction peak within one cell of the centre", dist, volume.spacing))
    rep.provenance = {"sphere": sphere.params, "sgrid": sgrid.params, "volume": volume.params, "errors": prov}
    return rep.finalize()


# ---------------------------------------------------------------- identities


@dataclass(frozen=True)
class IdentityGrids:
    """Resolutions for the two independent sides of the identity checks."""

    sphere_section: tuple = (16, 16)  # directions for sinogram-side and dual integrals
    ball_sphere: tuple = (10, 12)  # full Hopf grid for 4D ball rules
    ball_n_r: int = 32
    disk_n_r: int = 32
    disk_n_phi: int = 48
    quad: QuadParams = QuadParams(6.0, 48, 48)


def _phi_hat(phi: TestFunction, w, s, method: str, quad: QuadParams):
    if method == "analytic":
        v = phi.radon(w, s)
        if v is None:
            raise ValueError(f"{type(phi).__name__} has no closed-form transform")
        return v
    total = np.zeros(np.shape(s), dtype=complex)
    for c, atom in phi.atoms():
        total = total + c * _plane_integral(atom, w, np.ravel(s), quad).reshape(np.shape(s))
    return total


def _support_ball(phi: TestFunction):
    if phi.support_radius is None:
        raise ValueError("this check needs a compactly supported phi")
    atoms = phi.atoms()
    c = np.mean([a.center for _, a in atoms], axis=0) if atoms else np.zeros(2, complex)
    r = max((np.linalg.norm(a.center - c) + a.support_radius for _, a in atoms), default=0.0)
    return c, r


@timed
def check_duality(phi: TestFunction, f: XFunction, grids: IdentityGrids = IdentityGrids(), tol: float = 1e-3, method: str = "analytic") -> ExperimentReport:
    """integral of R*f * phi over C^2 vs integral over X of f * phi_hat.

    Left side: 4D ball rule around supp(phi), R*f by sphere quadrature.
    Right side: per direction, a polar disk in s around the projected
    support, with phi_hat in closed form (or hyperplane quadrature).
    """
    rep = ExperimentReport("duality")
    section = sphere_grid(*grids.sphere_section, section=True)
    c, r = _support_ball(phi)
    if r == 0:
        lhs = rhs = 0j
    else:
        u, wu = ball_rule(c, r, grids.ball_n_r, sphere_grid(*grids.ball_sphere))
        lhs = complex(tree_sum(dual(f, u, section) * phi.evaluate(u) * wu))
        nodes = section.nodes
        t, wt = disk_rule(r, grids.disk_n_r, grids.disk_n_phi)
        rows = []
        for w in nodes:
            s = (c @ w) + t
            rows.append(tree_sum(f(w[None, :], s) * _phi_hat(phi, w, s, method, grids.quad) * wt))
        rhs = complex(integrate_sphere(np.array(rows), section))
    if abs(rhs) == 0 and abs(lhs) == 0:
        rep.add(close("both sides vanish", lhs, 0.0, 1e-300))
    else:
        rep.add(close("LHS integral of R*f phi vs RHS integral of f phi_hat", lhs, rhs, tol, relative=True))
    rep.provenance = {"lhs": [lhs.real, lhs.imag], "rhs": [rhs.real, rhs.imag], "method": method}
    return rep.finalize()


@timed
def check_lemma1(phi: TestFunction, psi: XFunction, probes=None, grids: IdentityGrids = IdentityGrids(), tol: float = 1e-3, seed: int = 0, method: str = "analytic") -> ExperimentReport:
    """(phi * R*psi)(z) vs R*[phi_hat *_s psi](z) at probe points.

    Left: 4D convolution with R*psi evaluated by sphere quadrature.
    Right: per direction, the s-convolution of phi_hat with psi on a polar
    disk, then the dual integral.
    """
    rep = ExperimentReport("lemma1")
    section = sphere_grid(*grids.sphere_section, section=True)
    defect = phase_defect(psi, section)
    if defect > 1e-12:
        raise ValueError(f"psi violates phase compatibility (defect {defect:.3g})")
    probes = probe_points(27, 2.0, seed) if probes is None else np.atleast_2d(np.asarray(probes, dtype=complex))
    c, r = _support_ball(phi)
    u, wu = ball_rule(c, r, grids.ball_n_r, sphere_grid(*grids.ball_sphere))
    phi_u = phi.evaluate(u) * wu
    nodes = section.nodes
    t, wt = disk_rule(r, grids.disk_n_r, grids.disk_n_phi)
    s_prime = (nodes @ c)[:, None] + t[None, :]
    hat = np.stack([_phi_hat(phi, w, sp, method, grids.quad) for w, sp in zip(nodes, s_prime)]) * wt[None, :]

    def one(z):
        lhs = complex(tree_sum(dual(psi, z[None, :] - u, section) * phi_u))
        s = nodes @ z
        conv = tree_sum(hat * psi(nodes[:, None, :], s[:, None] - s_prime), axis=-1)
        rhs = complex(integrate_sphere(conv, section))
        return lhs, rhs

    results = pmap(one, probes)
    worst = 0.0
    for i, (lhs, rhs) in enumerate(results):
        scale = max(abs(lhs), abs(rhs))
        err = abs(lhs - rhs) / scale if scale > 0 else 0.0
        worst = max(worst, err)
        if scale == 0:
            rep.add(close(f"probe {i}: both sides vanish", lhs, 0.0, 1e-300))
        else:
            rep.add(close(f"probe {i}: phi * R*psi vs R*(phi_hat *_s psi)", lhs, rhs, tol, relative=True))
    rep.provenance = {"probes": len(probes), "worst_rel": worst, "phase_defect": defect}
    return rep.finalize()


@timed
def check_dual_bound(h: XFunction, R: float, probes, sphere: SphereGrid, tol: float = 1e-6, attain: dict | None = None, attain_tol: float = 1e-3) -> ExperimentReport:
    """|R*h(z)| <= 2 pi^2 max(1, R^2/|z|^2) at probes; optional attainment checks.

    ``attain`` maps probe indices to expected values (the indicator's exact
    measure 2 pi^2 min(1, R^2/|z|^2)).
    """
    rep = ExperimentReport("dual-bound")
    probes = np.atleast_2d(np.asarray(probes, dtype=complex))
    s_check = np.linspace(-R, R, 41)
    grid_s = (s_check[None, :] + 1j * s_check[:, None]).ravel()
    sup_h = float(np.max(np.abs(h(sphere.nodes[:, None, :], grid_s[None, :]))))
    rep.add(at_most("sup |h| on the grid", sup_h, 1.0, 1e-12))
    outside = np.array([R * 1.0001, R * 1.5 + 0.5j, -2 * R * 1j])
    leak = float(np.max(np.abs(h(sphere.nodes[:, None, :], outside[None, :]))))
    rep.add(at_most("h vanishes for |s| > R", leak, 0.0))
    vals = dual(h, probes, sphere)
    worst = -np.inf
    for i, (z, v) in enumerate(zip(probes, vals)):
        nz = float(np.linalg.norm(z))
        bound = TWO_PI_SQ * (max(1.0, R * R / (nz * nz)) if nz > 0 else 1.0)
        worst = max(worst, abs(v) - bound)
        rep.add(at_most(f"probe {i} (|z|={nz:.3g}): |R*h| <= bound", abs(v), bound, tol))
    for i, expected in (attain or {}).items():
        rep.add(close(f"probe {i}: indicator attains 2 pi^2 min(1, R^2/|z|^2)", abs(vals[int(i)]), expected, attain_tol, relative=True))
    rep.provenance = {"R": R, "worst_excess": float(worst), "sphere": sphere.params}
    return rep.finalize()


def indicator_measure(z, R: float) -> float:
    """sigma{w : |<z, w>| <= R} = 2 pi^2 min(1, R^2/|z|^2)."""
    nz = float(np.linalg.norm(z))
    return TWO_PI_SQ * (1.0 if nz <= R else R * R / (nz * nz))


# ---------------------------------------------------------------- support experiments


def distribution_sinogram(T: TestDistribution, m: int | None, sphere: SphereGrid, sgrid: SGrid, quad: QuadParams = QuadParams()) -> Sinogram:
    """Sinogram of T with point masses regularized by alpha_m; densities enter exactly."""
    return forward_sinogram(mollified(T, m, exact_density=True), sphere, sgrid, quad)


def _margin_mask(K: geo.CompactSet, S: Sinogram, margin: float) -> np.ndarray:
    s = S.sgrid.points()
    d = np.asarray(K.projection_distance(S.sphere.nodes[:, None, :], s[None, :]))
    return d >= margin


def _outside_test_functions(K: geo.CompactSet, count: int, margin: float, seed: int, rho: float = 0.3, sphere: SphereGrid | None = None):
    """Phase-compatible bumps on X supported away from the hat-set of K.

    psi(w, s) = window(w) * bump(|s - <z_c, w>|), z_c = s0 conj(w0), with
    the window narrow enough that dist(<z_c, w>, K_w) > rho + margin
    wherever it is nonzero (verified on a fine direction grid).
    """
    rng = np.random.default_rng(seed)
    check = sphere or sphere_grid(24, 24)
    out = []
    while len(out) < count:
        g = rng.standard_normal(4)
        w0 = (g[0::2] + 1j * g[1::2]) / np.linalg.norm(g)
        angle = 2 * math.pi * rng.random()
        reach = K.projection_bound(w0)
        s0 = (reach + margin + rho + 0.5 + rng.random()) * np.exp(1j * angle)
        zc = s0 * np.conj(w0)
        win = Window(w0, 0.05, 0.25)
        active = win(check.nodes) > 0
        d = np.asarray(K.projection_distance(check.nodes[active], check.nodes[active] @ zc))
        if d.size and np.min(d) > rho + margin:
            out.append((bump_s(rho, zc, window=win), zc))
    return out


@timed
def support_forward(T: TestDistribution, K: geo.CompactSet, margin: float, m: int | None = 10, sphere: SphereGrid | None = None, sgrid: SGrid | None = None, n_test: int = 20, seed: int = 0, tol: float = 1e-8, pair_sphere: SphereGrid | None = None) -> ExperimentReport:
    """supp(T) in K implies the transform of T vanishes off the hat-set.

    Sinogram form: sup of |T_m hat| where dist(s, K_w) >= margin, relative
    to sup |T_m hat|. Pairing form: <RT, psi> for psi supported off K-hat.
    """
    rep = ExperimentReport("support-forward")
    sphere = sphere or sphere_grid(16, 16, section=True)
    sgrid = sgrid or SGrid(0j, 3.0, 121)
    singular = any(isinstance(t.measure, PointMass) for t in T.terms)
    if singular:
        if m is None:
            raise ValueError("point-mass terms need a mollifier scale m")
        need = 1.0 / m + sgrid.spacing
        if margin <= need:
            raise ValueError(f"margin {margin} must exceed mollifier radius plus one cell ({need:.4g})")
    if not T.terms:
        rep.add(at_most("zero distribution: sinogram sup", 0.0, 0.0))
        return rep.finalize()
    S = distribution_sinogram(T, m if singular else None, sphere, sgrid)
    mag = np.abs(S.values)
    top = _ref_scale(mag)
    outside = _margin_mask(K, S, margin)
    ratio = float(np.max(mag[outside]) / top) if outside.any() else 0.0
    rep.add(at_most("relative sinogram sup outside the margin band", ratio, tol))
    rep.add(flag("margin band leaves hyperplanes to test", bool(outside.any())))
    pair_sphere = pair_sphere or sphere_grid(16, 16, section=True)
    tests = _outside_test_functions(K, n_test, margin, seed)
    worst, nonvac = 0.0, np.inf
    # psi vanishes identically on every hyperplane through supp(T), so a light density rule suffices
    quad = DensityQuad(16, 6, 8)
    for psi, zc in tests:
        val = radon_pair(T, psi, pair_sphere, quad)
        scale = TWO_PI_SQ * sum(abs(t.measure.weight) if isinstance(t.measure, PointMass) else 1.0 for t in T.terms)
        worst = max(worst, abs(val) / scale)
        nonvac = min(nonvac, abs(radon_pair(TestDistribution.delta(zc), psi, pair_sphere)))
    rep.add(at_most(f"max |<RT, psi>| over {len(tests)} psi supported off K-hat (relative)", worst, tol))
    rep.add(at_least("each psi is nonzero on the direction grid", nonvac, 1e-6))
    rep.provenance = {"sphere": sphere.params, "sgrid": sgrid.params, "m": m, "margin": margin, "sinogram": S.provenance}
    return rep.finalize()


def proof_chain_violations(T: TestDistribution, K: geo.CompactSet, m: int, sphere: SphereGrid, sgrid: SGrid, tol: float = 1e-8):
    """Count sinogram samples of T_m above tol * sup outside K-hat_m.

    Point masses use the closed-form transform of the shifted mollifier.
    Density terms go through the s-convolution of their transform with the
    mollifier's transform, so the inclusion is checked on the
    convolution route itself.
    """
    point_terms = [t for t in T.terms if isinstance(t.measure, PointMass)]
    density_terms = [t for t in T.terms if not isinstance(t.measure, PointMass)]
    total = np.zeros((len(sphere), sgrid.count**2), dtype=complex)
    margin = 0
    if point_terms:
        S = forward_sinogram(mollified(TestDistribution(point_terms), m), sphere, sgrid)
        total += S.values
    if density_terms:
        base = forward_sinogram(mollified(TestDistribution(density_terms), m, exact_density=True), sphere, sgrid)
        alpha = Mollifier(m)
        conv = convolve_s(base, lambda off: alpha.radon(np.array([1.0 + 0j, 0j]), off), alpha.radius)
        total += conv.values
        margin = conv.margin
    S = Sinogram(sphere, sgrid, total, margin, {"m": m})
    mag = np.abs(S.values) * S.valid_mask()[None, :]
    top = _ref_scale(mag)
    s = sgrid.points()
    dist = np.asarray(K.projection_distance(sphere.nodes[:, None, :], s[None, :]))
    inside = dist <= 1.0 / m
    significant = mag > tol * top
    return int(np.count_nonzero(significant & ~inside)), int(np.count_nonzero(significant)), S


@timed
def support_converse(T: TestDistribution, K: geo.CompactSet, witness, inside: TestDistribution | None = None, ms=(5, 10), directions: SphereGrid | None = None, sphere: SphereGrid | None = None, sgrid: SGrid | None = None, resolution: int = 128, ratio_tol: float = 1e-2, tol: float = 1e-8, m_outside: int = 10) -> ExperimentReport:
    """Contrapositive check at an exterior witness, plus the proof-chain inclusions.

    The witness must admit a hyperplane through it that misses K with
    C minus K_w connected; otherwise the run reports "hypothesis violated".
    """
    rep = ExperimentReport("support-converse")
    directions = directions or sphere_grid(16, 16, section=True)
    sphere = sphere or sphere_grid(12, 12, section=True)
    sgrid = sgrid or SGrid(0j, 3.0, 121)
    witness = np.asarray(witness, dtype=complex)
    sep = geo.find_separating_hyperplane(K, witness, directions, resolution)
    rep.add(flag("separating hyperplane through the witness misses K", sep.margin > 0))
    rep.provenance["separating"] = {
        "normal": [[c.real, c.imag] for c in sep.hyperplane.normal],
        "offset": [sep.hyperplane.offset.real, sep.hyperplane.offset.imag],
        "margin": sep.margin,
        "connected": sep.connected,
        "components": geo.count_components(sep.region),
    }
    if not sep.connected:
        rep.notes.append("complement of the projection is disconnected at every separating direction")
        return rep.finalize(violated=True)
    if T.terms:
        fn = mollified(T, m_outside, exact_density=True)
        nodes = directions.nodes
        offsets = nodes @ witness
        misses = np.asarray(K.projection_distance(nodes, offsets)) > 0
        on_family = np.abs(forward_sinogram_at(fn, nodes[misses], offsets[misses]))
        ref = np.abs(forward_sinogram(fn, sphere, sgrid).values)
        rep.add(at_least("max |T_hat| on hyperplanes through the witness / sup |T_hat|", float(np.max(on_family)) / _ref_scale(ref), ratio_tol))
    if inside is not None:
        for m in ms:
            bad, sig, _ = proof_chain_violations(inside, K, m, sphere, sgrid, tol)
            rep.add(at_most(f"m={m}: samples of T_m hat outside K-hat_m", bad, 0))
            rep.add(flag(f"m={m}: the mollified sinogram is not identically zero", sig > 0))
    rep.provenance.update({"sphere": sphere.params, "sgrid": sgrid.params, "ms": list(ms)})
    return rep.finalize()


def forward_sinogram_at(fn: TestFunction, nodes, offsets):
    """Transform values at individual (w, s) pairs (closed form when available)."""
    v = fn.radon(nodes, offsets)
    if v is not None:
        return np.asarray(v)
    return np.array([sum(c * _plane_integral(a, w, s, QuadParams())[0] for c, a in fn.atoms()) for w, s in zip(nodes, offsets)])


# ---------------------------------------------------------------- real Radon bridge


@timed
def check_real_radon_bridge(phi: TestFunction, probes=None, sphere: SphereGrid | None = None, sgrid: SGrid | None = None, tol: float = 1e-4, closed_form=None, vanish_tol: float = 1e-8, seed: int = 0) -> ExperimentReport:
    """Line integrals of the complex sinogram vs direct 3D slice integrals in R^4."""
    rep = ExperimentReport("real-bridge")
    sphere = sphere or sphere_grid(8, 8, section=True)
    sgrid = sgrid or SGrid(0j, 6.0, 241)
    S = forward_sinogram(phi, sphere, sgrid)
    rng = np.random.default_rng(seed)
    if probes is None:
        nodes = rng.choice(len(sphere), 10, replace=False)
        ts = np.round(rng.uniform(-1.5, 1.5, 10), 6)
        probes = list(zip(nodes.tolist(), ts.tolist()))
    for i, t in probes:
        via_complex = real_radon_from_complex(S, i, t)
        direct = real_radon_direct(phi, sphere.nodes[i], t)
        if abs(direct) == 0 and abs(via_complex) < vanish_tol:
            rep.add(close(f"node {i}, t={t:g}: both pipelines vanish", via_complex, 0.0, vanish_tol))
            continue
        rep.add(close(f"node {i}, t={t:g}: complex-sinogram line integral vs direct slice", via_complex, direct, tol, relative=True))
        if closed_form is not None:
            rep.add(close(f"node {i}, t={t:g}: direct slice vs closed form", direct, closed_form(t), tol, relative=True))
    if phi.support_radius is not None:
        rho = float(np.linalg.norm(phi.center)) + phi.support_radius
        mag = np.abs(S.values)
        s = np.abs(sgrid.points())
        rep.add(at_most(f"complex sinogram vanishes for |s| >= {rho:g}", float(np.max(mag[:, s >= rho])) if np.any(s >= rho) else 0.0, 0.0, vanish_tol))
        worst = 0.0
        h = sgrid.spacing
        for t in (rho + 2.5 * h, -(rho + 0.3), rho + 1.0):
            for i in range(0, len(sphere), max(1, len(sphere) // 8)):
                worst = max(worst, abs(real_radon_from_complex(S, i, t)))
        rep.add(at_most(f"real transform vanishes for |t| > {rho:g}", worst, 0.0, vanish_tol))
    rep.provenance = {"sphere": sphere.params, "sgrid": sgrid.params, "probes": [list(p) for p in probes]}
    return rep.finalize()


# ---------------------------------------------------------------- geometry


@timed
def check_geometry(resolution: int = 128, delta: float = 0.1, directions: SphereGrid | None = None) -> ExperimentReport:
    """Complement connectivity and escape paths on the disk and annulus projections."""
    rep = ExperimentReport("geometry")
    disk = geo.project(geo.Ball([0, 0], 1.0), np.array([1.0 + 0j, 0j]), resolution)
    ann = geo.project(geo.EmbeddedAnnulus(0.5, 1.0), np.array([1.0 + 0j, 0j]), resolution)
    rep.add(flag("disk projection: complement connected", geo.complement_connected(disk), True))
    rep.add(flag("annulus projection: complement connected", geo.complement_connected(ann), False))
    rep.add(close("disk: complement components", geo.count_components(disk), 1, 0))
    rep.add(close("annulus: complement components", geo.count_components(ann), 2, 0))
    line = geo.escape_path(disk, 1.5 + 0j, 3.0, delta)
    pts = line.sample(disk.cell / 8)
    rep.add(at_least("disk: escape path clearance from the set", float(np.min(np.abs(pts)) - 1.0), delta))
    rep.add(at_least("disk: escape path reaches |s| > R", abs(line.vertices[-1]), 3.0))
    try:
        geo.escape_path(ann, 0j, 3.0, delta)
        trapped = False
    except geo.NoEscapePath:
        trapped = True
    rep.add(flag("annulus hole: no escape path", trapped))
    directions = directions or sphere_grid(32, 32, section=True)
    rng = np.random.default_rng(0)
    g = rng.standard_normal((16, 4))
    probes = 1.5 * (g[:, 0::2] + 1j * g[:, 1::2]) / np.linalg.norm(g, axis=1, keepdims=True)
    report = geo.is_linearly_convex(geo.Ball([0, 0], 1.0), probes, directions)
    rep.add(close("ball: probes with a separating hyperplane", report.witnessed, len(probes), 0))
    return rep.finalize()

