import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergolab.errors import DimensionError, ResolutionError, UnsupportedError
from ergolab.measures import (Atomic, BrownianImage, CurvePushforward, Density, Dilated, Dilation,
                              Dirac, LebesgueBox, SphereSurface, apply_dilation, cantor_intervals,
                              dilate_pushforward, integrate, make_brownian_image,
                              make_curve_measure, measure_from_dict, sample)


def all_measures():
    return [
        Dirac([0.5, -1.0]),
        Atomic([[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]], [0.2, 0.5, 0.3]),
        LebesgueBox([0.0, -1.0], [1.0, 2.0]),
        SphereSurface(2, 1.5),
        SphereSurface(3, 2.0),
        SphereSurface(3, 1.0, {"axis": [0, 1, 1], "width": 0.4}),
        SphereSurface(4, 1.0),
        Density("gaussian", {"center": [0.0, 1.0], "sigma": 0.4}),
        Density("ball", {"center": [0.0, 0.0, 0.0], "radius": 0.7}),
        CurvePushforward([1.0, -2.0]),
        BrownianImage(1 / 3, 5, 2, path_seed=3),
        Dilated(CurvePushforward([1.0, 1.0]), Dilation([1.0, 2.0]), 1.7),
    ]


IDS = [m.kind + str(i) for i, m in enumerate(all_measures())]
one = lambda x: np.ones(len(x))


# -- dilations -----------------------------------------------------------------

def test_apply_dilation_examples():
    assert np.allclose(apply_dilation(Dilation([1, 1]), 3, [1, 2]), [3, 6])
    assert np.allclose(apply_dilation(Dilation([1, 2]), 2, [1, 1]), [2, 4])
    t = np.array([0.3, -4.0, 2.5])
    assert np.array_equal(apply_dilation(Dilation([0.5, 1.0, 3.0]), 1.0, t), t)


def test_apply_dilation_errors():
    with pytest.raises(DimensionError):
        apply_dilation(Dilation([1, 1]), 2.0, [1.0, 2.0, 3.0])
    for bad in (0.0, -1.0, math.nan):
        with pytest.raises(ValueError):
            apply_dilation(Dilation([1, 1]), bad, [1.0, 2.0])
    with pytest.raises(ValueError):
        Dilation([1.0, 0.0])


def test_dilation_identities_batch():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        d = rng.integers(1, 5)
        dil = Dilation(rng.uniform(0.2, 3.0, d))
        lam, mu = np.exp(rng.uniform(-2, 2, 2))
        xi, t = rng.normal(size=(2, d)) * 3
        a = apply_dilation(dil, lam, xi + t)
        assert np.allclose(a, apply_dilation(dil, lam, xi) + apply_dilation(dil, lam, t),
                           rtol=1e-12, atol=1e-12)
        assert abs(xi @ apply_dilation(dil, lam, t) - apply_dilation(dil, lam, xi) @ t) \
            <= 1e-12 * max(1.0, abs(xi @ apply_dilation(dil, lam, t)))
        g = apply_dilation(dil, lam, apply_dilation(dil, mu, t))
        assert np.allclose(g, apply_dilation(dil, lam * mu, t), rtol=1e-12, atol=1e-12)


@given(st.lists(st.floats(0.1, 4.0), min_size=1, max_size=4),
       st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 32))
def test_dilation_group_law_property(exps, loglam, logmu, s):
    t = np.random.default_rng(s).normal(size=len(exps))
    dil = Dilation(exps)
    lam, mu = math.exp(loglam), math.exp(logmu)
    assert np.allclose(apply_dilation(dil, lam, apply_dilation(dil, mu, t)),
                       apply_dilation(dil, lam * mu, t), rtol=1e-12, atol=1e-300)


# -- sampling ------------------------------------------------------------------

def test_sample_examples():
    pts = sample(Dirac([1.0, 2.0]), 5, seed=1)
    assert pts.shape == (5, 2) and np.all(pts == [1.0, 2.0])
    pts = sample(LebesgueBox([0.0], [1.0]), 100_000, seed=2)
    assert abs(pts.mean() - 0.5) <= 3 / math.sqrt(12) / math.sqrt(1e5)
    pts = sample(SphereSurface(3, 1.0), 10_000, seed=3)
    assert np.all(np.abs(np.linalg.norm(pts, axis=1) - 1) <= 1e-12)


@pytest.mark.parametrize("nu", all_measures(), ids=IDS)
def test_samples_inside_bbox_and_deterministic(nu):
    pts = sample(nu, 2000, seed=11)
    lo, hi = nu.bbox()
    assert pts.shape == (2000, nu.d)
    assert np.all(pts >= lo - 1e-12) and np.all(pts <= hi + 1e-12)
    assert np.array_equal(pts, sample(nu, 2000, seed=11))
    assert not np.array_equal(pts, sample(nu, 2000, seed=12)) or nu.is_atomic and len(nu.atoms()[1]) == 1


def test_sample_partition_independent():
    nu = SphereSurface(3)
    whole = sample(nu, 150_000, seed=5)
    parts = np.vstack([sample(nu, 40_000, 5, start=0), sample(nu, 70_000, 5, start=40_000),
                       sample(nu, 40_000, 5, start=110_000)])
    assert np.array_equal(whole, parts)


def test_sample_rejects_zero():
    with pytest.raises(ValueError):
        sample(Dirac([0.0]), 0, seed=0)


# -- integration ---------------------------------------------------------------

@pytest.mark.parametrize("nu", all_measures(), ids=IDS)
def test_integrate_one(nu):
    est = integrate(nu, one, budget=4096, seed=1)
    assert abs(est.value - 1) <= max(est.error, 1e-12)
    mc = integrate(nu, one, budget=1000, seed=1, method="monte_carlo")
    assert abs(mc.value - 1) <= 1e-12


def test_integrate_examples():
    assert integrate(Dirac([3.0]), one).value == 1 and integrate(Dirac([3.0]), one).error == 0
    est = integrate(LebesgueBox([0.0], [1.0]), lambda x: x[:, 0])
    assert abs(est.value - 0.5) <= max(est.error, 1e-13)
    est = integrate(SphereSurface(3, 2.0), lambda x: np.sum(x ** 2, axis=1))
    assert abs(est.value - 4) <= max(est.error, 1e-12)
    est = integrate(SphereSurface(3, 2.0), lambda x: np.sum(x ** 2, axis=1), 10_000,
                    method="monte_carlo")
    assert abs(est.value - 4) <= 1e-12


def test_integrate_closed_form_moments():
    # second moments with independent closed forms
    gauss = Density("gaussian", {"center": [0.0, 1.0], "sigma": 0.3})
    assert abs(integrate(gauss, lambda x: np.sum(x ** 2, 1)).value - (2 * 0.09 + 1)) < 1e-10
    ball = Density("ball", {"center": [0, 0, 0], "radius": 1.0})
    assert abs(integrate(ball, lambda x: np.sum(x ** 2, 1)).value - 0.6) < 1e-10
    curve = CurvePushforward([1.0, 1.0])
    assert abs(integrate(curve, lambda x: np.sum(x ** 2, 1)).value - (1 / 3 + 1 / 5)) < 1e-12


def test_monte_carlo_error_covers_truth():
    nu = LebesgueBox([0.0, 0.0], [1.0, 1.0])
    phi = lambda x: np.cos(3 * x[:, 0]) * x[:, 1]
    truth = math.sin(3) / 3 * 0.5
    misses = sum(abs(integrate(nu, phi, 2000, seed=s, method="monte_carlo").value - truth)
                 > integrate(nu, phi, 2000, seed=s, method="monte_carlo").error for s in range(200))
    assert misses <= 4


def test_integrate_errors():
    with pytest.raises(ValueError):
        integrate(LebesgueBox([0.0], [1.0]), one, budget=0)
    with pytest.raises(UnsupportedError):
        integrate(SphereSurface(5), one, method="quadrature")
    est = integrate(SphereSurface(5), lambda x: np.sum(x ** 2, 1), budget=500)
    assert abs(est.value - 1) < 1e-12


def test_atomic_validation():
    with pytest.raises(ValueError):
        Atomic([[0.0], [1.0]], [0.5, 0.6])
    with pytest.raises(ValueError):
        Atomic([[0.0], [1.0]], [1.5, -0.5])
    Atomic([[0.0], [1.0]], [0.5, 0.5 + 5e-13])


# -- pushforwards ----------------------------------------------------------------

def test_dilate_pushforward_atoms():
    out = dilate_pushforward(Dirac([1.0, 1.0]), Dilation([1, 2]), 2.0)
    assert isinstance(out, Dirac) and np.array_equal(out.point, [2.0, 4.0])
    out = dilate_pushforward(Atomic([[1.0], [2.0]], [0.5, 0.5]), Dilation([1]), 3.0)
    assert np.array_equal(out.points.ravel(), [3.0, 6.0])
    with pytest.raises(DimensionError):
        dilate_pushforward(Dirac([1.0]), Dilation([1, 1]), 2.0)


def _random_polys(rng, d, count=20):
    polys = []
    for _ in range(count):
        c = rng.normal(size=4)
        e = rng.integers(0, 3, size=(4, d))
        polys.append(lambda x, c=c, e=e: sum(ci * np.prod(x ** ei, axis=1) for ci, ei in zip(c, e)))
    return polys


@pytest.mark.parametrize("nu", [LebesgueBox([0.0, -1.0], [1.0, 2.0]), SphereSurface(3, 1.0),
                                CurvePushforward([1.0, 2.0]), SphereSurface(2, 0.5)])
def test_dilate_identity_and_group_law(nu):
    rng = np.random.default_rng(3)
    dil = Dilation(rng.uniform(0.5, 2.0, nu.d))
    for phi in _random_polys(rng, nu.d):
        base = integrate(nu, phi).value
        assert abs(integrate(dilate_pushforward(nu, dil, 1.0), phi).value - base) <= 1e-12 * (1 + abs(base))
        lam, mu = 1.7, 0.6
        two = integrate(dilate_pushforward(dilate_pushforward(nu, dil, mu), dil, lam), phi).value
        direct = integrate(dilate_pushforward(nu, dil, lam * mu), phi).value
        assert abs(two - direct) <= 1e-10 * (1 + abs(direct))


def test_dilate_pushforward_matches_direct_integral():
    rng = np.random.default_rng(9)
    nu = SphereSurface(3)
    dil = Dilation([1.0, 1.5, 2.0])
    lam = 1.3
    for _ in range(20):
        a, b = rng.normal(size=(2, 3))
        phi = lambda x: np.exp(-np.sum((x - a) ** 2, 1) / 4) * np.cos(x @ b)
        wrapped = integrate(dilate_pushforward(nu, dil, lam), phi, budget=20_000)
        direct = integrate(nu, lambda t: phi(apply_dilation(dil, lam, t)), budget=20_000)
        assert abs(wrapped.value - direct.value) <= wrapped.error + direct.error + 1e-12


def test_curve_measure_examples():
    m1 = make_curve_measure([1.0])
    assert abs(integrate(m1, lambda x: x[:, 0]).value - 0.5) < 1e-13
    m2 = make_curve_measure([1.0, 1.0])
    assert abs(integrate(m2, lambda x: x[:, 1]).value - 1 / 3) < 1e-13
    lo, hi = make_curve_measure([2.0, 1.0, 1.0]).bbox()
    assert np.allclose(lo, 0) and np.allclose(hi, [2, 1, 1])
    pts = sample(make_curve_measure([2.0, 1.0, 1.0]), 1000, 0)
    assert np.all(pts >= 0) and np.all(pts <= [2, 1, 1])
    with pytest.raises(ValueError):
        make_curve_measure([1.0, 0.0])


# -- Brownian images ---------------------------------------------------------------

def test_cantor_intervals():
    left, length = cantor_intervals(1 / 3, 2)
    assert np.allclose(left, [0, 2 / 9, 6 / 9, 8 / 9]) and abs(length - 1 / 9) < 1e-15


def test_brownian_depth_one_parameters():
    nu = make_brownian_image(1 / 3, 1, 2, seed=4, resolution=30)
    w = nu.sample_parameters(5000, np.random.default_rng(0))
    assert np.all(((w >= 0) & (w <= 1 / 3)) | ((w >= 2 / 3) & (w <= 1)))
    assert abs(nu.hausdorff_dimension - math.log(2) / math.log(3)) < 1e-15


def test_brownian_determinism_and_refusal():
    a = make_brownian_image(1 / 3, 6, 2, seed=1)
    b = make_brownian_image(1 / 3, 6, 2, seed=1)
    assert np.array_equal(sample(a, 500, 2), sample(b, 500, 2))
    c = make_brownian_image(1 / 3, 6, 2, seed=2)
    assert not np.array_equal(sample(a, 500, 2), sample(c, 500, 2))
    with pytest.raises(ResolutionError, match="too coarse"):
        make_brownian_image(1 / 3, 8, 2, seed=0, resolution=100)
    with pytest.raises(ValueError):
        make_brownian_image(1 / 3, 4, 1, seed=0)


def test_brownian_path_law():
    # path variance at t=1 is 1 per coordinate
    ends = np.array([make_brownian_image(0.5, 3, 2, seed=s).path(np.array([1.0]))[0]
                     for s in range(400)])
    assert abs(ends.var() - 1.0) < 0.2


def test_brownian_path_continuity():
    nu = make_brownian_image(1 / 3, 4, 3, seed=0, resolution=200)
    s = np.linspace(0, 1 / 81, 50)
    p = nu.path(s)
    assert np.all(np.linalg.norm(np.diff(p, axis=0), axis=1) < 1.0)


# -- descriptors ---------------------------------------------------------------------

@pytest.mark.parametrize("nu", all_measures(), ids=IDS)
def test_descriptor_round_trip(nu):
    back = measure_from_dict(nu.to_dict())
    assert back.to_dict() == nu.to_dict()
    assert np.array_equal(sample(back, 50, 1), sample(nu, 50, 1))


def test_descriptor_errors():
    with pytest.raises(ValueError):
        measure_from_dict({"type": "nope"})
    with pytest.raises(UnsupportedError):
        SphereSurface(4, 1.0, {"width": 1.0})
    with pytest.raises(UnsupportedError):
        Density("cauchy", {"center": [0.0]})
