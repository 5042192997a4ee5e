"""Spectral-calculus checks of the mean ergodic theorems with atomic spectral measures.

For a unitary representation and a vector ``x`` with spectral measure
``nu_x = sum_j w_j delta_{xi_j}``, the average ``A_lam x = int U_{lam.t} x d rho(t)``
has ``||A_lam x||^2 = sum_j w_j |rho_hat(lam.xi_j)|^2``.  The lattice analogue
uses ``rho_hat(theta) = sum_k rho_k exp(-2 pi i <k, theta>)`` on the torus.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .fourier import transform_many
from .measures import Dilation, Measure, apply_dilation

RESONANCE_TOL = 1e-9
NEAR_RESONANCE_TOL = 1e-6


@dataclass(eq=False)
class SpectralMeasure:
    """Finite atomic spectral measure ``sum_j w_j delta_{xi_j}`` on R^d."""

    frequencies: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim == 1:
            f = f[:, None]
        w = np.asarray(self.weights, dtype=float)
        if f.ndim != 2 or len(f) != len(w) or not len(w):
            raise DimensionError("spectral measure needs matching, nonempty atoms and weights")
        if np.any(w < 0):
            raise ValueError("spectral weights must be nonnegative")
        if np.sum(np.all(f == 0, axis=1)) > 1:
            raise ValueError("at most one atom may sit at the zero frequency")
        self.frequencies, self.weights = f, w

    @property
    def d(self):
        return self.frequencies.shape[1]

    @property
    def total_mass(self):
        """``||x||^2``."""
        return float(self.weights.sum())

    def scaled(self, c):
        return SpectralMeasure(self.frequencies.copy(), c * self.weights)

    def to_dict(self):
        return {"frequencies": self.frequencies.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, desc):
        return cls(desc["frequencies"], desc["weights"])


def _zero_mask(sm):
    return np.all(sm.frequencies == 0, axis=1)


def projection_mass(sm: SpectralMeasure) -> float:
    """Weight of the zero frequency, ``||P x||^2``."""
    return float(sm.weights[_zero_mask(sm)].sum())


def _rho_hat_sq(rho, dil, lam, freqs, budget, seed):
    if dil.d != rho.d or freqs.shape[1] != rho.d:
        raise DimensionError(
            f"measure dimension {rho.d}, dilation {dil.d}, spectral atoms {freqs.shape[1]}")
    vals, errs = transform_many(rho, apply_dilation(dil, lam, freqs), budget, seed)
    return np.abs(vals) ** 2, errs


def mean_average_norm(rho: Measure, dil: Dilation, lam, sm: SpectralMeasure, budget=None,
                      seed=0) -> float:
    """``||A_lam x||^2 = sum_j w_j |rho_hat(lam.xi_j)|^2``."""
    sq, _ = _rho_hat_sq(rho, dil, lam, sm.frequencies, budget, seed)
    return float(sm.weights @ sq)


def mean_convergence_curve(rho: Measure, dil: Dilation, lambdas, sm: SpectralMeasure, budget=None,
                           seed=0):
    """Rows ``(lam, ||A_lam x - P x||^2)``; the sum runs over nonzero atoms only."""
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or not len(lambdas):
        raise ValueError("lambdas must be a nonempty list")
    if np.any(np.diff(lambdas) <= 0):
        raise ValueError("lambdas must be increasing")
    nz = ~_zero_mask(sm)
    freqs, w = sm.frequencies[nz], sm.weights[nz]
    rows = []
    for lam in lambdas:
        if not len(w):
            rows.append((float(lam), 0.0))
            continue
        sq, _ = _rho_hat_sq(rho, dil, lam, freqs, budget, seed)
        rows.append((float(lam), float(w @ sq)))
    return rows


# ---------------------------------------------------------------------------
# Lattice averages
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LatticeWeights:
    """Finitely supported weights ``rho_k`` on Z^d.

    Probability weights by default; ``normalized=False`` admits any finite
    nonnegative map (used for autocorrelations of non-normalized input).
    """

    support: np.ndarray
    weights: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        s = np.asarray(self.support)
        if s.ndim == 1:
            s = s[:, None]
        if not np.issubdtype(s.dtype, np.integer):
            if not np.all(s == np.round(s)):
                raise ValueError("lattice support must be integer vectors")
            s = np.round(s).astype(np.int64)
        w = np.asarray(self.weights, dtype=float)
        if s.ndim != 2 or len(s) != len(w) or not len(w):
            raise DimensionError("lattice weights need matching, nonempty support and weights")
        if np.any(w < 0):
            raise ValueError("lattice weights must be nonnegative")
        if self.normalized and abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"lattice weights sum to {w.sum()!r}, not 1")
        self.support, self.weights = s.astype(np.int64), w

    @property
    def d(self):
        return self.support.shape[1]

    def as_dict(self):
        return {tuple(int(v) for v in k): float(w) for k, w in zip(self.support, self.weights)}

    def l2_norm_sq(self):
        return float(self.weights @ self.weights)

    def transform(self, thetas):
        """``rho_hat(theta) = sum_k rho_k exp(-2 pi i <k, theta>)`` at rows of ``thetas``."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        ph = np.mod(thetas @ self.support.T.astype(float), 1.0)
        return np.exp(-2j * math.pi * ph) @ self.weights

    def to_dict(self):
        return {"support": self.support.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, desc):
        return cls(desc["support"], desc["weights"])


@dataclass(eq=False)
class TorusSpectralMeasure:
    """Finite atomic measure ``sum_j w_j delta_{theta_j}`` on the torus [0, 1)^d."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        w = np.asarray(self.weights, dtype=float)
        if a.ndim != 2 or len(a) != len(w) or not len(w):
            raise DimensionError("torus spectral measure needs matching, nonempty atoms")
        if np.any(w < 0):
            raise ValueError("spectral weights must be nonnegative")
        self.atoms, self.weights = np.mod(a, 1.0), w

    @property
    def d(self):
        return self.atoms.shape[1]

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def to_dict(self):
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, desc):
        return cls(desc["atoms"], desc["weights"])


def autocorrelation(rho: LatticeWeights) -> LatticeWeights:
    """``(rho * rho_check)_k = sum_j rho_j rho_{j-k}`` as exact lattice weights."""
    acc = {}
    pts = [tuple(int(v) for v in k) for k in rho.support]
    for a, wa in zip(pts, rho.weights):
        for b, wb in zip(pts, rho.weights):
            k = tuple(x - y for x, y in zip(a, b))
            acc[k] = acc.get(k, 0.0) + wa * wb
    keys = sorted(acc)
    total = sum(rho.weights)
    return LatticeWeights(np.array(keys, dtype=np.int64).reshape(len(keys), rho.d),
                          np.array([acc[k] for k in keys]), normalized=abs(total - 1) <= 1e-12)


def zd_average_norm(rho: LatticeWeights, n, tsm: TorusSpectralMeasure) -> float:
    """``||A_n x||^2 = sum_j w_j |rho_hat(n theta_j)|^2``."""
    n = int(n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    _check_dims(rho, tsm)
    return float(tsm.weights @ np.abs(_rho_hat_multiple(rho, tsm, np.array([n])))[0] ** 2)


def _check_dims(rho, tsm):
    if rho.d != tsm.d:
        raise DimensionError(f"lattice dimension {rho.d} differs from torus dimension {tsm.d}")


def _rho_hat_multiple(rho, tsm, ns):
    """``rho_hat(n theta_j)`` for every n in ``ns`` (rows) and atom j (columns)."""
    base = tsm.atoms @ rho.support.T.astype(float)            # (atoms, support)
    # n <k, theta> mod 1 computed from the reduced phase keeps the argument small
    base = np.mod(base, 1.0)
    ph = np.mod(ns[:, None, None] * base[None], 1.0)
    return np.exp(-2j * math.pi * ph) @ rho.weights


def resonance_sets(rho_ac: LatticeWeights, tsm: TorusSpectralMeasure, tol=RESONANCE_TOL):
    """Boolean matrix ``[k, j]``: atom j lies in ``E_k = {theta : <k, theta> in Z}``."""
    ph = tsm.atoms @ rho_ac.support.T.astype(float)
    dist = np.abs(ph - np.round(ph)).T
    near = (dist > tol) & (dist < NEAR_RESONANCE_TOL)
    if np.any(near):
        k, j = np.argwhere(near)[0]
        warnings.warn(
            f"atom {tsm.atoms[j].tolist()} lies within {dist[k, j]:.2e} of the resonance set "
            f"for k={rho_ac.support[k].tolist()}; membership uses tolerance {tol:g}",
            stacklevel=2)
    return dist <= tol


def zd_cesaro(rho: LatticeWeights, tsm: TorusSpectralMeasure, N, chunk=4096):
    """Cesaro mean of ``||A_n x||^2`` over ``n < N`` with its predicted limit and bound.

    Returns ``(cesaro_mean, predicted_limit, lower_bound)`` where
    ``predicted_limit = sum_k (rho * rho_check)_k nu_x(E_k)`` and
    ``lower_bound = ||rho||_2^2 * total mass``.
    """
    N = int(N)
    if N < 1:
        raise ValueError("horizon N must be at least 1")
    _check_dims(rho, tsm)
    total = 0.0
    for start in range(0, N, chunk):
        ns = np.arange(start, min(N, start + chunk), dtype=float)
        total += float(np.sum(np.abs(_rho_hat_multiple(rho, tsm, ns)) ** 2 @ tsm.weights))
    ac = autocorrelation(rho)
    member = resonance_sets(ac, tsm)
    bound = rho.l2_norm_sq() * tsm.total_mass
    # E_0 is the whole torus, so the k = 0 term is the bound itself; adding the
    # nonnegative k != 0 terms to it keeps predicted >= bound in floating point
    nz = np.any(ac.support != 0, axis=1)
    predicted = bound + float(ac.weights[nz] @ (member[nz] @ tsm.weights))
    return total / N, predicted, bound
