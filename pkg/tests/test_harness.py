import csv
import io
import json
import math

import numpy as np
import pytest

from cradon import geometry as geo
from cradon import harness as hs
from cradon import transform as tr
from cradon import xfunctions as xf
from cradon.distributions import Mollifier, TestDistribution
from cradon.numerics import SGrid, sphere_grid

SMALL = hs.IdentityGrids((8, 8), (6, 8), 16, 16, 24)


# ---------------------------------------------------------------- reports


def test_report_schema_and_csv():
    rep = hs.ExperimentReport("demo", config={"a": 1})
    rep.add(hs.close("x", 1.0, 1.0 + 1e-9, 1e-6), hs.at_most("y", 0.5, 1.0), hs.flag("z", True))
    rep.finalize()
    d = json.loads(rep.to_json())
    assert set(d) == {"experiment", "config_digest", "status", "checks", "notes", "provenance", "config", "wall_ms"}
    assert d["status"] == "pass"
    assert set(d["checks"][0]) == {"name", "measured", "reference", "tol", "pass"}
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["experiment", "name", "measured", "reference", "tol", "pass"]
    assert len(rows) == 4


def test_report_status_rules():
    assert hs.ExperimentReport("e").finalize().status == "fail"  # no checks is not a pass
    rep = hs.ExperimentReport("e").add(hs.at_least("a", 0.1, 1.0))
    assert rep.finalize().status == "fail"
    assert hs.ExperimentReport("e").finalize(violated=True).status == "hypothesis violated"


def test_config_digest_ignores_key_order():
    assert hs.config_digest({"a": 1, "b": [1, 2]}) == hs.config_digest({"b": [1, 2], "a": 1})
    assert hs.config_digest({"a": 1}) != hs.config_digest({"a": 2})


def test_non_finite_measurements_serialize():
    rep = hs.ExperimentReport("e").add(hs.Check("inf", float("inf"), 0.0, 0.0, False)).finalize()
    assert json.loads(rep.to_json())["checks"][0]["measured"] == "inf"


def test_timing_excluded_from_deterministic_view():
    a = hs.check_forward()
    b = hs.check_forward()
    assert a.to_json(timing=False) == b.to_json(timing=False)
    assert "wall_ms" not in a.as_dict(timing=False)


def test_thread_count_and_pmap(monkeypatch):
    monkeypatch.setenv("CRADON_THREADS", "3")
    assert hs.thread_count() == 3
    assert hs.pmap(lambda x: x * x, range(10)) == [x * x for x in range(10)]
    monkeypatch.setenv("CRADON_THREADS", "-1")
    with pytest.raises(ValueError):
        hs.thread_count()


def test_lemma1_independent_of_thread_count(monkeypatch):
    phi, psi = tr.Bump(radius=0.8), xf.gaussian_s(1.0)
    probes = hs.probe_points(4, 1.5, 0)
    out = []
    for n in ("1", "4"):
        monkeypatch.setenv("CRADON_THREADS", n)
        out.append(hs.check_lemma1(phi, psi, probes, SMALL).to_json(timing=False))
    assert out[0] == out[1]


def test_probe_points_deterministic_and_inside():
    p = hs.probe_points(27, 2.0, 5)
    assert np.array_equal(p, hs.probe_points(27, 2.0, 5))
    assert np.all(np.linalg.norm(p, axis=1) <= 2.0)
    assert np.all(p[0] == 0)


# ---------------------------------------------------------------- forward / calibration


def test_check_forward_passes():
    assert hs.check_forward().passed


# ---------------------------------------------------------------- identities


def test_duality_bump_gaussian_s():
    rep = hs.check_duality(tr.Bump(radius=1.0), xf.gaussian_s(1.0, cutoff=(2.5, 3.5)))
    assert rep.passed, rep.to_json()


def test_duality_zero_f():
    rep = hs.check_duality(tr.Bump(radius=1.0), xf.Constant(0.0), SMALL)
    assert rep.passed
    assert rep.provenance["lhs"] == [0.0, 0.0] and rep.provenance["rhs"] == [0.0, 0.0]


def test_duality_w_independent_f_factorizes():
    # f(w, s) = g(s): RHS = 2 pi^2 * integral of g times the sphere-averaged transform
    phi = tr.Bump((0.1, 0), 0.9)
    g = xf.gaussian_s(0.8)
    rep = hs.check_duality(phi, g)
    sphere = sphere_grid(16, 16, section=True)
    from cradon.numerics import disk_rule, integrate_sphere, tree_sum

    t, wt = disk_rule(0.9, 32, 48)
    avg = []
    for w in sphere.nodes:
        s = phi.center @ w + t
        avg.append(tree_sum(g(w[None, :], s) * phi.radon(w, s) * wt))
    avg = integrate_sphere(np.array(avg), sphere) / (2 * math.pi**2)
    rhs = complex(*rep.provenance["rhs"])
    assert rhs == pytest.approx(2 * math.pi**2 * avg, rel=1e-12)


def test_duality_needs_compact_support():
    with pytest.raises(ValueError):
        hs.check_duality(tr.Gaussian(), xf.gaussian_s(1.0))


def test_lemma1_small_bump():
    rep = hs.check_lemma1(tr.Bump(radius=0.5), xf.gaussian_s(1.0), hs.probe_points(5, 2.0, 1), SMALL)
    assert rep.passed


def test_lemma1_zero_psi():
    rep = hs.check_lemma1(tr.Bump(radius=0.5), xf.Constant(0.0), hs.probe_points(3, 1.0, 0), SMALL)
    assert rep.passed
    assert all("vanish" in c.name for c in rep.checks)


def test_lemma1_rejects_phase_incompatible_psi():
    bad = xf.Generic(lambda w, s: np.real(s) + 0 * w[..., 0])
    with pytest.raises(ValueError, match="phase"):
        hs.check_lemma1(tr.Bump(), bad, np.zeros((1, 2)), SMALL)


def test_lemma1_mollifier_limit():
    psi = xf.gaussian_s(1.0)
    z = np.array([[0.3, 0.2j]])
    target = tr.dual(psi, z[0], sphere_grid(16, 16, section=True))
    errs = []
    for m in (2, 4):
        rep = hs.check_lemma1(Mollifier(m), psi, z, hs.IdentityGrids(ball_n_r=24))
        assert rep.passed
        errs.append(abs(rep.checks[0].measured - abs(target)))
    assert errs[1] < errs[0]


# ---------------------------------------------------------------- dual bound


def test_dual_bound_indicator_examples():
    sphere = sphere_grid(6144, 4, section=True)
    probes = [[0, 0], [4, 0]]
    attain = {0: 2 * math.pi**2, 1: 2 * math.pi**2 / 16}
    rep = hs.check_dual_bound(xf.Indicator(1.0), 1.0, probes, sphere, attain=attain)
    assert rep.passed, rep.to_json()
    assert hs.indicator_measure(np.array([4, 0]), 1.0) == pytest.approx(2 * math.pi**2 / 16, rel=1e-15)


def test_indicator_measure_oracle(frozen):
    assert hs.indicator_measure(np.array([0, 4j]), 1.0) == pytest.approx(frozen["indicator_measure_z4_R1"], rel=1e-12)


def test_dual_bound_zero_kernel():
    rep = hs.check_dual_bound(xf.Constant(0.0), 1.0, [[0, 0], [2, 1]], sphere_grid(8, 8))
    assert rep.passed


def test_dual_bound_detects_unbounded_kernel():
    rep = hs.check_dual_bound(xf.Constant(2.0), 1.0, [[0, 0]], sphere_grid(8, 8))
    assert not rep.passed


# ---------------------------------------------------------------- support experiments


def test_support_forward_ball_density():
    T = TestDistribution.density(tr.Bump(radius=0.5))
    rep = hs.support_forward(T, geo.Ball([0, 0], 1.0), 0.2, n_test=6)
    assert rep.passed, rep.to_json()


def test_support_forward_mollified_delta():
    rep = hs.support_forward(TestDistribution.delta(), geo.Ball([0, 0], 0.2), 0.2, m=10, n_test=6)
    assert rep.passed, rep.to_json()


def test_support_forward_zero_distribution():
    assert hs.support_forward(TestDistribution(), geo.Ball([0, 0], 1.0), 0.2).passed


def test_support_forward_margin_must_exceed_mollifier_radius():
    with pytest.raises(ValueError, match="margin"):
        hs.support_forward(TestDistribution.delta(), geo.Ball([0, 0], 0.2), 0.1, m=10)


def test_support_forward_detects_mass_outside_k():
    T = TestDistribution.delta((1.5, 0))
    rep = hs.support_forward(T, geo.Ball([0, 0], 1.0), 0.2, m=10, n_test=4)
    assert not rep.passed


def test_support_converse_ball():
    T = TestDistribution.density(tr.Bump((1.5, 0), 0.3))
    inside = TestDistribution.density(tr.Bump(radius=0.6))
    rep = hs.support_converse(T, geo.Ball([0, 0], 1.0), (1.5, 0), inside, ms=(5,))
    assert rep.passed, rep.to_json()


def test_support_converse_annulus_reports_violation():
    rep = hs.support_converse(TestDistribution(), geo.EmbeddedAnnulus(0.5, 1.0), (0, 0))
    assert rep.status == "hypothesis violated"
    assert not rep.passed


# ---------------------------------------------------------------- real bridge and geometry


def test_real_bridge_zero_function():
    rep = hs.check_real_radon_bridge(tr.Zero(), [(0, 0.0), (3, 0.5)], sphere_grid(4, 4, section=True), SGrid(0, 2.0, 33))
    assert rep.passed
    assert all(c.measured == 0 for c in rep.checks)


def test_real_bridge_gaussian():
    closed = lambda t: math.pi**1.5 * math.exp(-t * t)  # noqa: E731
    assert hs.check_real_radon_bridge(tr.Gaussian(), closed_form=closed).passed


def test_geometry_check_passes():
    assert hs.check_geometry(64).passed
