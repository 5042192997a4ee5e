import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ergolab.errors import DimensionError
from ergolab.measures import Dilation, Dirac, LebesgueBox, SphereSurface
from ergolab.spectral import (LatticeWeights, SpectralMeasure, TorusSpectralMeasure,
                              autocorrelation, mean_average_norm, mean_convergence_curve,
                              projection_mass, resonance_sets, zd_average_norm, zd_cesaro)


def sinc_sq(x):
    # |hat of Lebesgue on [0, 1]|^2 at frequency x
    return np.where(x == 0, 1.0, (2 * np.sin(x / 2) / np.where(x == 0, 1, x)) ** 2)


def test_spectral_measure_validation():
    with pytest.raises(ValueError):
        SpectralMeasure([[1.0]], [-0.1])
    with pytest.raises(DimensionError):
        SpectralMeasure([[1.0], [2.0]], [0.5])
    sm = SpectralMeasure([[0.0], [1.0]], [0.25, 0.75])
    assert sm.total_mass == 1.0 and projection_mass(sm) == 0.25
    assert SpectralMeasure.from_dict(sm.to_dict()).to_dict() == sm.to_dict()


def test_mean_average_norm_examples():
    sm = SpectralMeasure([[0.0]], [2.0])
    for lam in (0.5, 7.0):
        assert mean_average_norm(Dirac([3.0]), Dilation([1]), lam, sm) == pytest.approx(2.0)
    sm = SpectralMeasure([[math.pi]], [1.0])
    val = mean_average_norm(LebesgueBox([0.0], [1.0]), Dilation([1]), 1.0, sm)
    assert val == pytest.approx(4 / math.pi ** 2, abs=1e-14)
    val = mean_average_norm(LebesgueBox([0.0], [1.0]), Dilation([1]), 0.5,
                            SpectralMeasure([[2 * math.pi]], [1.0]))
    assert val == pytest.approx(0.405284734569351, abs=1e-12)


def test_spectral_identity_matches_direct_sinc_products():
    rng = np.random.default_rng(0)
    for d in (1, 2):
        rho, dil = LebesgueBox([0.0] * d, [1.0] * d), Dilation(rng.uniform(0.5, 2, d))
        for _ in range(5):
            k = rng.integers(1, 6)
            freqs = rng.normal(size=(k, d)) * 3
            w = rng.uniform(0.1, 1, k)
            sm = SpectralMeasure(freqs, w)
            for lam in (0.3, 4.0, 50.0):
                direct = sum(wj * np.prod(sinc_sq(lam ** np.array(dil.exponents) * f))
                             for f, wj in zip(freqs, w))
                assert abs(mean_average_norm(rho, dil, lam, sm) - direct) < 1e-12


def test_mean_convergence_curve_decreases_to_zero():
    sm = SpectralMeasure([[0.0, 0.0], [1.0, -2.0], [0.3, 0.0]], [0.4, 0.3, 0.3])
    rows = mean_convergence_curve(LebesgueBox([0.0, 0.0], [1.0, 1.0]), Dilation([1, 1]),
                                  np.geomspace(1, 1e3, 13), sm)
    assert rows[-1][1] < 1e-4 and rows[0][1] > rows[-1][1]
    only_zero = SpectralMeasure([[0.0, 0.0]], [1.0])
    assert all(v == 0 for _, v in mean_convergence_curve(
        LebesgueBox([0.0, 0.0], [1.0, 1.0]), Dilation([1, 1]), [1.0, 2.0], only_zero))
    with pytest.raises(ValueError):
        mean_convergence_curve(LebesgueBox([0.0], [1.0]), Dilation([1]), [2.0, 1.0],
                               SpectralMeasure([[1.0]], [1.0]))
    with pytest.raises(DimensionError):
        mean_average_norm(SphereSurface(3), Dilation([1, 1]), 1.0, sm)


@given(st.integers(0, 10 ** 6), st.floats(0.1, 100))
def test_average_norm_bounded_by_mass(s, lam):
    rng = np.random.default_rng(s)
    sm = SpectralMeasure(rng.normal(size=(4, 3)) * 5, rng.uniform(0, 1, 4))
    val = mean_average_norm(SphereSurface(3), Dilation([1, 1, 1]), lam, sm)
    assert -1e-12 <= val <= sm.total_mass + 1e-12


# -- lattice ----------------------------------------------------------------------

def test_lattice_weights_validation():
    with pytest.raises(ValueError):
        LatticeWeights([[0], [1]], [0.5, 0.6])
    with pytest.raises(ValueError):
        LatticeWeights([[0.5]], [1.0])
    lw = LatticeWeights([[0], [2]], [0.5, 0.5])
    assert lw.l2_norm_sq() == 0.5 and lw.as_dict() == {(0,): 0.5, (2,): 0.5}
    assert abs(lw.transform([[0.25]])[0]) < 1e-15


def test_autocorrelation_example():
    ac = autocorrelation(LatticeWeights([[0], [1]], [0.5, 0.5]))
    assert ac.as_dict() == {(-1,): 0.25, (0,): 0.5, (1,): 0.25}


@given(st.integers(0, 10 ** 6))
def test_autocorrelation_properties(s):
    rng = np.random.default_rng(s)
    k = rng.integers(1, 5)
    supp = rng.integers(-3, 4, size=(k, 2))
    supp = np.unique(supp, axis=0)
    w = rng.uniform(0.1, 1, len(supp))
    rho = LatticeWeights(supp, w / w.sum())
    ac = autocorrelation(rho)
    assert abs(ac.weights.sum() - 1) < 1e-12
    assert ac.as_dict()[(0, 0)] == pytest.approx(rho.l2_norm_sq())
    d = ac.as_dict()
    assert all(d[tuple(-v for v in key)] == pytest.approx(val) for key, val in d.items())
    theta = rng.uniform(size=(3, 2))
    assert np.allclose(ac.transform(theta), np.abs(rho.transform(theta)) ** 2, atol=1e-12)


def test_zd_average_norm_direct():
    rho = LatticeWeights([[0], [1]], [0.5, 0.5])
    tsm = TorusSpectralMeasure([[0.1]], [1.0])
    for n in (0, 3, 17):
        direct = abs(0.5 + 0.5 * np.exp(-2j * math.pi * n * 0.1)) ** 2
        assert zd_average_norm(rho, n, tsm) == pytest.approx(direct, abs=1e-14)


def test_zd_cesaro_worked_examples():
    rho = LatticeWeights([[0], [2]], [0.5, 0.5])
    cm, pred, bound = zd_cesaro(rho, TorusSpectralMeasure([[0.5]], [1.0]), 1000)
    assert (cm, pred, bound) == (pytest.approx(1.0), 1.0, 0.5)
    rho = LatticeWeights([[0], [1]], [0.5, 0.5])
    cm, pred, bound = zd_cesaro(rho, TorusSpectralMeasure([[math.sqrt(2) - 1]], [1.0]), 100_000)
    assert abs(cm - 0.5) < 1e-3 and pred == pytest.approx(0.5) and bound == 0.5


def test_zd_cesaro_chunking_invariant():
    rho = LatticeWeights([[0, 0], [1, 2], [3, -1]], [0.2, 0.3, 0.5])
    tsm = TorusSpectralMeasure([[0.1, 0.7], [math.sqrt(2) % 1, 0.5]], [0.6, 0.4])
    a = zd_cesaro(rho, tsm, 9000, chunk=1000)
    b = zd_cesaro(rho, tsm, 9000, chunk=4096)
    assert a[0] == pytest.approx(b[0], rel=1e-12) and a[1:] == b[1:]


def test_resonance_near_miss_warns():
    ac = autocorrelation(LatticeWeights([[0], [1]], [0.5, 0.5]))
    with pytest.warns(UserWarning):
        member = resonance_sets(ac, TorusSpectralMeasure([[1e-7]], [1.0]))
    assert member.shape == (3, 1)


def test_zd_errors():
    rho = LatticeWeights([[0]], [1.0])
    with pytest.raises(DimensionError):
        zd_cesaro(rho, TorusSpectralMeasure([[0.1, 0.2]], [1.0]), 10)
    with pytest.raises(ValueError):
        zd_cesaro(rho, TorusSpectralMeasure([[0.1]], [1.0]), 0)
    with pytest.raises(ValueError):
        TorusSpectralMeasure([[0.1]], [-1.0])
