import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cradon import numerics as nm
from cradon.distributions import Mollifier
from cradon.geometry import Hyperplane
from cradon.transform import Gaussian

TWO_PI_SQ = 2 * math.pi**2


def gaussian_sinogram(sgrid, sphere=None):
    sphere = sphere or nm.sphere_grid(4, 4, section=True)
    s = sgrid.points()
    vals = np.tile(math.pi * np.exp(-np.abs(s) ** 2), (len(sphere), 1))
    return nm.Sinogram(sphere, sgrid, vals)


# ---------------------------------------------------------------- reductions


def test_tree_sum_is_order_fixed_and_exact_for_integers():
    x = np.arange(1, 1001, dtype=float)
    assert nm.tree_sum(x) == 500500.0
    assert nm.tree_sum(x) == nm.tree_sum(x.copy())


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=300))
def test_tree_sum_repeatable_and_close_to_fsum(xs):
    a = np.array(xs)
    assert nm.tree_sum(a) == nm.tree_sum(a)
    assert nm.tree_sum(a) == pytest.approx(math.fsum(xs), abs=1e-6 * (1 + sum(map(abs, xs))))


# ---------------------------------------------------------------- sphere


def test_sphere_weight_sum_8x8(frozen):
    g = nm.sphere_grid(8, 8)
    assert abs(nm.tree_sum(g.weights) - frozen["s3_area"]) <= 1e-10


@given(st.integers(4, 40), st.integers(4, 40), st.booleans())
def test_sphere_weight_sum_invariant(n_eta, n_theta, section):
    g = nm.sphere_grid(n_eta, n_theta, section)
    assert abs(nm.tree_sum(g.weights) - TWO_PI_SQ) <= 1e-10
    assert np.all(g.weights > 0)
    assert np.max(np.abs(np.linalg.norm(g.nodes, axis=1) - 1)) <= 1e-12


def test_sphere_grid_rejects_tiny_sizes():
    with pytest.raises(ValueError):
        nm.sphere_grid(3, 8)


def test_integrate_constant_and_abs_w1_squared(frozen):
    g = nm.sphere_grid(8, 8)
    assert nm.integrate_sphere(lambda w: np.ones(len(w)), g) == pytest.approx(frozen["s3_area"], abs=1e-10)
    assert nm.integrate_sphere(lambda w: np.abs(w[:, 0]) ** 2, g) == pytest.approx(frozen["s3_abs_w1_sq"], abs=1e-10)


@pytest.mark.parametrize("section", [False, True])
def test_integrate_gaussian_pairing(frozen, section):
    g = nm.sphere_grid(16, 16, section)
    z = np.array([0.6, 0.8j])
    val = nm.integrate_sphere(lambda w: np.exp(-np.abs(w @ z) ** 2), g)
    assert val == pytest.approx(frozen["s3_gauss_pairing_r1"], rel=1e-10)
    zero = nm.integrate_sphere(lambda w: np.exp(-np.abs(w @ np.zeros(2)) ** 2), g)
    assert zero == pytest.approx(frozen["s3_gauss_pairing_r0"], rel=1e-12)


def test_integrate_sphere_names_non_finite_node():
    g = nm.sphere_grid(4, 4)
    vals = np.ones(len(g))
    vals[7] = np.nan
    with pytest.raises(FloatingPointError, match="node 7"):
        nm.integrate_sphere(vals, g)


def test_conjugate_index_maps_to_conjugate_nodes():
    for section in (False, True):
        g = nm.sphere_grid(6, 8, section)
        j = g.conjugate_index()
        assert np.allclose(g.nodes[j], np.conj(g.nodes), atol=1e-13)


# ---------------------------------------------------------------- hyperplanes


def test_hyperplane_quadrature_disk_area():
    H = Hyperplane((1.0, 0.0), 0.3)
    _, w = nm.hyperplane_quadrature(H, 2.5, 16, 16)
    assert nm.tree_sum(w) == pytest.approx(math.pi * 2.5**2, abs=1e-10)


@pytest.mark.parametrize("s", [0.0, 0.7 + 0.3j, 1.5 - 1.0j])
def test_hyperplane_quadrature_gaussian(frozen, s):
    w = np.array([0.6, 0.8j])
    z, wt = nm.hyperplane_quadrature(Hyperplane(tuple(w), s), 6.0, 64, 64)
    assert np.allclose(z @ w, s, atol=1e-13)
    val = nm.tree_sum(np.exp(-np.sum(np.abs(z) ** 2, axis=1)) * wt)
    assert abs(val - frozen[f"gauss_plane_{s.real:g}_{s.imag:g}"]) <= 1e-8


def test_hyperplane_quadrature_convergence_under_doubling():
    H = Hyperplane((0.6, 0.8j), 0.4 + 0.2j)
    exact = math.pi * math.exp(-0.2)
    errs = []
    for n in (4, 8, 16):
        z, wt = nm.hyperplane_quadrature(H, 6.0, n, n)
        errs.append(abs(nm.tree_sum(np.exp(-np.sum(np.abs(z) ** 2, axis=1)) * wt) - exact))
    for a, b in zip(errs, errs[1:]):
        assert b <= a / 4 or b < 1e-10


def test_hyperplane_quadrature_requires_unit_normal():
    with pytest.raises(ValueError):
        nm.hyperplane_quadrature(Hyperplane((2.0, 0.0), 0), 6.0, 8, 8)


def test_ball_rule_volume():
    _, w = nm.ball_rule(np.zeros(2), 1.3, 8, nm.sphere_grid(4, 4))
    assert nm.tree_sum(w) == pytest.approx(math.pi**2 / 2 * 1.3**4, rel=1e-12)


# ---------------------------------------------------------------- s-grids and derivatives


def test_sgrid_contains_center_and_validates():
    g = nm.SGrid(0.5 + 0.25j, 2.0, 9)
    assert np.any(g.points() == 0.5 + 0.25j)
    assert g.spacing == 0.5
    for bad in ((0, 2.0, 8), (0, 2.0, 7), (0, -1.0, 9)):
        with pytest.raises(ValueError):
            nm.SGrid(*bad)


def test_sinogram_shape_and_finiteness_enforced():
    g = nm.SGrid(0, 1.0, 9)
    sph = nm.sphere_grid(4, 4, section=True)
    with pytest.raises(ValueError):
        nm.Sinogram(sph, g, np.zeros((3, 81)))
    bad = np.zeros((len(sph), 81))
    bad[0, 0] = np.inf
    with pytest.raises(FloatingPointError):
        nm.Sinogram(sph, g, bad)


def test_s_derivative_of_constant_is_zero():
    g = nm.SGrid(0, 2.0, 17)
    S = nm.Sinogram(nm.sphere_grid(4, 4, section=True), g, np.full((16, 289), 3.0 + 1j))
    for p, q in ((1, 0), (0, 1), (1, 1), (2, 0), (0, 2)):
        D = nm.s_derivative(S, p, q)
        assert np.max(np.abs(D.values)) < 1e-12
        assert D.margin == 2


def test_s_derivative_reproduces_quadratics_exactly():
    g = nm.SGrid(0.3, 2.0, 17)
    s = g.points()
    sph = nm.sphere_grid(4, 4, section=True)
    S = nm.Sinogram(sph, g, np.tile(s * np.conj(s), (len(sph), 1)))
    D = nm.s_derivative(S, 1, 1)
    assert np.max(np.abs(D.values[:, D.valid_mask()] - 1)) < 1e-11
    S2 = nm.Sinogram(sph, g, np.tile(s**2, (len(sph), 1)))
    D2 = nm.s_derivative(S2, 2, 0)
    assert np.max(np.abs(D2.values[:, D2.valid_mask()] - 2)) < 1e-10
    D1 = nm.s_derivative(S2, 0, 1)
    assert np.max(np.abs(D1.values[:, D1.valid_mask()])) < 1e-11


def test_s_derivative_gaussian_fourth_order():
    errs, hs = [], []
    for count in (33, 65, 129):
        g = nm.SGrid(0, 4.0, count)
        S = gaussian_sinogram(g)
        D = nm.s_derivative(S, 1, 1)
        s = g.points()
        exact = math.pi * (np.abs(s) ** 2 - 1) * np.exp(-np.abs(s) ** 2)
        errs.append(np.max(np.abs(D.values[0, D.valid_mask()] - exact[D.valid_mask()])))
        hs.append(g.spacing)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 3.5 <= slope <= 4.5


def test_bilinear_interpolation_exact_on_bilinear_data():
    g = nm.SGrid(0, 2.0, 9)
    sph = nm.sphere_grid(4, 4, section=True)
    s = g.points()
    S = nm.Sinogram(sph, g, np.tile(1 + 2 * s.real - s.imag + s.real * s.imag, (len(sph), 1)))
    probe = np.array([0.13 - 0.7j, -1.9 + 1.2j])
    expect = 1 + 2 * probe.real - probe.imag + probe.real * probe.imag
    assert np.allclose(S.interpolate(3, probe), expect, atol=1e-13)
    with pytest.raises(ValueError, match="valid"):
        S.interpolate(0, np.array([2.5]))


# ---------------------------------------------------------------- convolutions


def test_convolve_s_of_zero_is_zero():
    g = nm.SGrid(0, 2.0, 33)
    S = nm.Sinogram(nm.sphere_grid(4, 4, section=True), g, np.zeros((16, 33 * 33)))
    C = nm.convolve_s(S, lambda o: np.exp(-np.abs(o) ** 2), 0.3)
    assert np.all(C.values == 0)


def test_convolve_s_narrow_kernel_approximates_identity():
    errs = []
    g = nm.SGrid(0, 3.0, 121)
    S = gaussian_sinogram(g)
    for r0 in (0.3, 0.15):
        kern = lambda o, r0=r0: np.where(np.abs(o) < r0, np.exp(-1 / np.maximum(1 - np.abs(o / r0) ** 2, 1e-300)), 0.0)  # noqa: E731
        C = nm.convolve_s(S, kern, r0, normalize=True)
        mask = C.valid_mask()
        errs.append(np.max(np.abs(C.values[0, mask] - S.values[0, mask])))
    # O(r0^2): halving the support cuts the error by about four
    assert errs[1] < errs[0] / 3
    assert errs[0] < 0.3**2 * math.pi


def test_convolve_cn_constant_and_linear():
    alpha = Mollifier(2)
    pts = np.array([[0.1, 0.2j], [1.0, -0.5]])
    c = nm.convolve_cn(lambda z: np.full(z.shape[:-1], 2.5 + 0j), alpha, pts)
    assert np.allclose(c, 2.5, atol=1e-6)
    lin = nm.convolve_cn(lambda z: z[..., 0].real, alpha, pts)
    assert np.allclose(lin, pts[:, 0].real, atol=1e-12)


def test_convolve_cn_gaussian_taylor_bound():
    m = 10
    alpha = Mollifier(m)
    f = Gaussian()
    pts = np.array([[0, 0], [0.5, 0.3j], [1.0, 0.2]])
    got = nm.convolve_cn(f.evaluate, alpha, pts)
    # the Hessian of exp(-|x|^2) in R^4 has operator norm <= 2
    assert np.max(np.abs(got - f.evaluate(pts))) <= 2.0 * (1 / m) ** 2 / 2


def test_convolve_cn_rejects_unnormalized_kernel():
    class Bad:
        radius = 0.5

        def evaluate(self, z):
            return np.ones(z.shape[:-1])

    with pytest.raises(ValueError, match="integrates"):
        nm.convolve_cn(lambda z: z[..., 0], Bad(), np.zeros((1, 2)))
