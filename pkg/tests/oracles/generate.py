"""Independent reference values, frozen into frozen.json.

Uses scipy adaptive quadrature on the defining integrals only; nothing
here imports the package. Rerun with ``python3 tests/oracles/generate.py``.
"""

import json
import math
from pathlib import Path

import numpy as np
from scipy import integrate

OUT = Path(__file__).with_name("frozen.json")
TAU = 2 * math.pi


def s3_radial(g):
    """Integral over S^3 of g(cos(eta)^2) for integrands depending on |w1| only."""
    val, _ = integrate.quad(lambda e: g(math.cos(e) ** 2) * math.cos(e) * math.sin(e), 0, math.pi / 2, epsabs=1e-14, epsrel=1e-13)
    return TAU * TAU * val


def plane_integral(f, w, s, cutoff=9.0):
    """Integral of f over {<z, w> = s} with the isometric frame z = s conj(w) + t eta."""
    w = np.asarray(w, complex)
    foot, eta = np.conj(w), np.array([-w[1], w[0]])

    def g(r, th):
        t = r * complex(math.cos(th), math.sin(th))
        return f(s * foot + t * eta) * r

    val, _ = integrate.dblquad(lambda r, th: g(r, th).real, 0, TAU, 0, cutoff, epsabs=1e-13, epsrel=1e-12)
    return val


def gauss(z):
    return math.exp(-float(np.sum(np.abs(z) ** 2)))


def bump(z, c=(0, 0), rho=1.0):
    r2 = float(np.sum(np.abs(np.asarray(z) - np.asarray(c)) ** 2)) / rho**2
    return math.exp(-1.0 / (1.0 - r2)) if r2 < 1 else 0.0


def main():
    out = {}
    out["s3_area"] = s3_radial(lambda c2: 1.0)
    out["s3_abs_w1_sq"] = s3_radial(lambda c2: c2)
    out["s3_gauss_pairing_r1"] = s3_radial(lambda c2: math.exp(-c2))
    out["s3_gauss_pairing_r0"] = s3_radial(lambda c2: 1.0)
    # indicator measure sigma{|<z,w>| <= R} at |z| = 4, R = 1
    lim = math.acos(1.0 / 4.0)
    val, _ = integrate.quad(lambda e: math.cos(e) * math.sin(e), lim, math.pi / 2, epsabs=1e-15)
    out["indicator_measure_z4_R1"] = TAU * TAU * val
    # Gaussian hyperplane integrals at two offsets and a tilted normal
    w = np.array([0.6, 0.8j])
    for s in (0.0, 0.7 + 0.3j, 1.5 - 1.0j):
        out[f"gauss_plane_{s.real:g}_{s.imag:g}"] = plane_integral(gauss, w, s)
    # bump hyperplane integrals
    c = np.array([0.2, 0.1j])
    w = np.array([1 / math.sqrt(2), 1j / math.sqrt(2)])
    for s in (0.0, 0.3 + 0.2j, 0.8):
        out[f"bump_plane_{s.real:g}_{s.imag:g}"] = plane_integral(lambda z: bump(z, c, 1.0), w, s, cutoff=1.2)
    # 4D bump mass over the unit ball
    val, _ = integrate.quad(lambda r: r**3 * math.exp(-1 / (1 - r * r)), 0, 1, epsabs=1e-15, epsrel=1e-13)
    out["bump_mass_4d"] = TAU * math.pi * val
    # real Radon of the unit Gaussian: a 3D Gaussian integral
    val, _ = integrate.quad(lambda x: math.exp(-x * x), -np.inf, np.inf)
    out["gauss_real_radon_t0"] = val**3
    # density mass of e^{-|z|^2} on C^2
    out["gauss_mass_4d"] = val**4
    # real Radon of a centred unit bump at t (3D ball integral of the slice)
    for t in (0.0, 0.4):
        g = lambda r: 4 * math.pi * r * r * math.exp(-1 / (1 - (r * r + t * t))) if r * r + t * t < 1 else 0.0  # noqa: E731
        v, _ = integrate.quad(g, 0, math.sqrt(1 - t * t), epsabs=1e-15, epsrel=1e-12)
        out[f"bump_real_radon_t{t:g}"] = v
    OUT.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
