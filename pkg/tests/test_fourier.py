import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from ergolab.closed_forms import (ball_profile, box_transform, dog_multiplier, gaussian_transform,
                                  sphere_profile)
from ergolab.errors import DimensionError, UnresolvedDecayError, UnsupportedError
from ergolab.fourier import (DecayProfile, critical_exponent, decay_profile,
                            dilated_multiplier_sup, estimate_fourier_dimension,
                            fourier_of_dilated, fourier_transform, rajchman_defect,
                            shell_directions, sobolev_energy, transform_many)
from ergolab.measures import (Atomic, BrownianImage, CurvePushforward, Density, Dilated, Dilation,
                              Dirac, LebesgueBox, SphereSurface, dilate_pushforward)


def rand_xis(d, n, rmax, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.uniform(0, rmax, (n, 1))


# -- closed-form oracles (independent formulas) ---------------------------------

def test_box_transform_oracle():
    xi = np.array([[3.7, -1.2]])
    direct = np.prod([(np.exp(-1j * x * b) - np.exp(-1j * x * a)) / (-1j * x * (b - a))
                      for x, a, b in zip(xi[0], [0.0, -1.0], [1.0, 2.0])])
    assert abs(box_transform(xi, [0.0, -1.0], [1.0, 2.0])[0] - direct) < 1e-14
    assert box_transform(np.zeros((1, 2)), [0, 0], [1, 1])[0] == 1


def test_sphere_and_ball_profiles():
    r = np.array([1e-9, 0.5, 1.0, 7.3, 250.0])
    assert np.allclose(sphere_profile(r, 2), special.j0(r), atol=1e-14)
    assert np.allclose(sphere_profile(r, 3), np.sin(r) / r, atol=1e-14)
    q = r[1:]
    assert np.allclose(ball_profile(q, 3), 3 * (np.sin(q) - q * np.cos(q)) / q ** 3, atol=1e-12)
    assert np.allclose(ball_profile(r, 2), 2 * special.j1(r) / r, atol=1e-12)
    assert abs(ball_profile(r[:1], 3)[0] - 1) < 1e-12
    assert abs(sphere_profile(np.array([1.0]), 2)[0] - 0.7651976865579666) < 1e-15


def test_gaussian_and_dog():
    xi = np.array([[1.0, -2.0]])
    val = gaussian_transform(xi, [0.5, 0.0], 0.3)[0]
    assert abs(val - np.exp(-0.5j) * np.exp(-0.5 * 0.09 * 5)) < 1e-15
    assert dog_multiplier(np.zeros((1, 3)))[0] == 0


# -- transform routes ------------------------------------------------------------

def test_dirac_and_atomic_exact():
    xi = np.array([2.0, -1.0])
    assert fourier_transform(Dirac([0.0, 0.0]), xi).value == 1
    est = fourier_transform(Dirac([1.0, 2.0]), xi)
    assert abs(est.value - 1.0) < 1e-15 and est.error == 0
    at = Atomic([[0.0], [1.0]], [0.5, 0.5])
    assert abs(fourier_transform(at, [math.pi]).value) < 1e-15


def test_interval_example():
    est = fourier_transform(LebesgueBox([0.0], [1.0]), [2 * math.pi], method="quadrature")
    assert abs(est.value) < 1e-12


@pytest.mark.parametrize("nu,oracle", [
    (SphereSurface(3, 1.0), lambda x: np.sin(np.linalg.norm(x, axis=1)) / np.linalg.norm(x, axis=1)),
    (SphereSurface(2, 1.0), lambda x: special.j0(np.linalg.norm(x, axis=1))),
    (SphereSurface(3, 2.5), lambda x: np.sinc(2.5 * np.linalg.norm(x, axis=1) / math.pi)),
    (LebesgueBox([0.0, -1.0], [1.0, 2.0]), lambda x: box_transform(x, [0.0, -1.0], [1.0, 2.0])),
    (Density("ball", {"center": [0, 0, 0], "radius": 1.0}),
     lambda x: ball_profile(np.linalg.norm(x, axis=1), 3)),
    (Density("gaussian", {"center": [0.2, 0.0], "sigma": 0.5}),
     lambda x: gaussian_transform(x, [0.2, 0.0], 0.5)),
])
def test_quadrature_matches_oracle(nu, oracle):
    xis = rand_xis(nu.d, 40, 60.0, 1)
    vals, errs = transform_many(nu, xis, method="quadrature")
    assert np.max(np.abs(vals - oracle(xis))) < 1e-9
    assert np.all(errs < 1e-6)


def test_curve_transform_against_bruteforce():
    nu = CurvePushforward([1.0, 1.0])
    xis = rand_xis(2, 10, 40.0, 2)
    w = np.linspace(0, 1, 400_001)
    for xi in xis:
        f = np.exp(-1j * (xi[0] * w + xi[1] * w ** 2))
        brute = np.sum((f[1:] + f[:-1]) / 2) * (w[1] - w[0])
        assert abs(fourier_transform(nu, xi).value - brute) < 1e-8


def test_cutoff_sphere_quadrature_vs_monte_carlo():
    nu = SphereSurface(3, 1.0, {"axis": [0, 0, 1], "width": 0.6})
    xi = np.array([3.0, -2.0, 5.0])
    q = fourier_transform(nu, xi, method="quadrature")
    mc = fourier_transform(nu, xi, budget=200_000, method="monte_carlo", seed=4)
    assert abs(q.value - mc.value) <= mc.error + q.error


def test_brownian_closed_form_vs_monte_carlo():
    nu = BrownianImage(1 / 3, 6, 2, path_seed=2)
    xi = np.array([4.0, -7.0])
    cf = fourier_transform(nu, xi, method="closed_form")
    mc = fourier_transform(nu, xi, budget=200_000, method="monte_carlo", seed=9)
    assert abs(cf.value - mc.value) <= mc.error


def test_monte_carlo_determinism():
    nu = SphereSurface(3)
    a = fourier_transform(nu, [5.0, 1.0, 0.0], budget=5000, seed=3, method="monte_carlo")
    b = fourier_transform(nu, [5.0, 1.0, 0.0], budget=5000, seed=3, method="monte_carlo")
    assert a == b


def test_transform_errors():
    with pytest.raises(DimensionError):
        fourier_transform(SphereSurface(3), [1.0, 2.0])
    with pytest.raises(ValueError):
        fourier_transform(SphereSurface(3), [1.0, 2.0, 3.0], method="magic")
    with pytest.raises(UnsupportedError):
        fourier_transform(CurvePushforward([1.0, 1.0]), [1.0, 2.0], method="closed_form")
    with pytest.raises(ValueError):
        fourier_transform(SphereSurface(3), [1.0, 2.0, 3.0], budget=0, method="monte_carlo")


@given(st.integers(0, 10 ** 6))
def test_conjugate_symmetry_and_bound(s):
    rng = np.random.default_rng(s)
    xi = rng.normal(size=2) * 20
    for nu in (LebesgueBox([0.0, 0.0], [1.0, 2.0]), CurvePushforward([1.0, -1.0])):
        a = fourier_transform(nu, xi).value
        b = fourier_transform(nu, -xi).value
        assert abs(a - b.conjugate()) < 1e-10
        assert abs(a) <= 1 + 1e-10


def test_dilation_identity():
    rng = np.random.default_rng(5)
    dil = Dilation([1.0, 2.0])
    for nu in (CurvePushforward([1.0, 1.0]), LebesgueBox([0.0, 0.0], [1.0, 1.0]),
               SphereSurface(2, 1.0)):
        for _ in range(10):
            xi, lam = rng.normal(size=2) * 3, math.exp(rng.uniform(-1, 1.5))
            left = fourier_transform(dilate_pushforward(nu, dil, lam), xi, method="quadrature")
            right = fourier_of_dilated(nu, dil, lam, xi, method="quadrature")
            assert abs(left.value - right.value) < 1e-9


# -- decay profiles and estimators ------------------------------------------------

def test_shell_directions_unit():
    for d in (1, 2, 3, 5):
        dirs = shell_directions(d, 40, 1)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1)
    assert np.array_equal(shell_directions(4, 20, 1), shell_directions(4, 20, 1))


def test_sphere_decay_profile_and_dimension():
    prof = decay_profile(SphereSurface(3), np.geomspace(10, 1e4, 120), method="quadrature")
    a, se = estimate_fourier_dimension(prof)
    assert abs(a - 2.0) < 0.15 and se < 0.2
    assert np.all(prof.mean_modulus <= prof.sup_modulus + 1e-15)
    assert rajchman_defect(prof) < 1e-2


def test_dirac_estimates_zero():
    prof = decay_profile(Dirac([0.3, 0.1]), np.geomspace(1, 100, 10))
    assert estimate_fourier_dimension(prof)[0] == 0
    assert rajchman_defect(prof) == pytest.approx(1.0)


def test_synthetic_power_law_recovered():
    radii = np.geomspace(1, 1e3, 30)
    prof = DecayProfile(radii, radii ** -0.7, radii ** -0.7, 1, None, 0, dim=3)
    a, se = estimate_fourier_dimension(prof)
    assert abs(a - 1.4) < 1e-12 and se < 1e-10
    assert estimate_fourier_dimension(prof, (10, 20))[0] == pytest.approx(1.4)


def test_estimator_errors():
    radii = np.geomspace(1, 10, 5)
    with pytest.raises(ValueError):
        estimate_fourier_dimension(DecayProfile(radii, radii ** -1, radii ** -1, 1, None, 0), (0, 2))
    fast = DecayProfile(radii, np.exp(-radii * 20), np.exp(-radii * 20), 1, None, 0)
    with pytest.raises(UnresolvedDecayError):
        estimate_fourier_dimension(fast)
    with pytest.raises(ValueError):
        decay_profile(SphereSurface(3), [10.0, 5.0])


def test_profile_json_round_trip():
    prof = decay_profile(SphereSurface(2), np.geomspace(1, 50, 6), n_directions=8)
    back = DecayProfile.from_json(prof.to_json())
    assert np.array_equal(back.sup_modulus, prof.sup_modulus) and back.to_csv() == prof.to_csv()


# -- energy and exponents ---------------------------------------------------------

def test_sobolev_energy_sphere_and_dirac():
    nu = SphereSurface(3)
    _, inc_lo = sobolev_energy(nu, 1.5, 1, 1e3, n_directions=8)
    _, inc_hi = sobolev_energy(nu, 2.5, 1, 1e3, n_directions=8)
    assert inc_lo[-1].value < inc_lo[0].value
    assert inc_hi[-1].value > inc_hi[0].value
    _, inc = sobolev_energy(Dirac([0.0, 0.0, 0.0]), 1.0, 1, 1e3, n_directions=4)
    # |xi|^(a-d) |nu_hat|^2 = |xi|^-2 in R^3, so each shell is 4 pi (r1 - r0)
    for e in inc:
        assert e.value == pytest.approx(4 * math.pi * (e.r_hi - e.r_lo), rel=1e-10)
    with pytest.raises(ValueError):
        sobolev_energy(nu, 3.0)


def test_critical_exponent():
    assert critical_exponent(2.0) == 1.5
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        critical_exponent(1.5)
    with pytest.warns(UserWarning):
        assert critical_exponent(1.0) == 2.0
    with pytest.raises(ValueError):
        critical_exponent(0.0)


def test_dilated_multiplier_sup_decays():
    nu, dil = SphereSurface(3), Dilation([1, 1, 1])
    sups = [dilated_multiplier_sup(nu, dil, lam, n_per_axis=17) for lam in (1, 10, 100)]
    assert sups[0] > sups[1] > sups[2]
    assert dilated_multiplier_sup(Dirac([0.0] * 3), dil, 50.0, n_per_axis=9) > 0.2


def test_dilated_measure_uses_base_closed_form():
    nu = Dilated(SphereSurface(3), Dilation([1, 2, 3]), 2.0)
    xi = np.array([0.4, -0.2, 0.1])
    expect = sphere_profile(np.array([np.linalg.norm(xi * [2, 4, 8])]), 3)[0]
    assert abs(fourier_transform(nu, xi).value - expect) < 1e-14
