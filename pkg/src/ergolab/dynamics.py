"""Torus translation flows, trig-polynomial observables and dilated Wiener averages.

The flow ``T_t x = x + M t mod 1`` on the n-torus is driven by an ``n x d``
matrix ``M``.  For an observable ``f = sum_k c_k e(<k, x>)`` with
``e(s) = exp(2 pi i s)``, the Wiener average over the dilated measure is

    A_lam f(x) = sum_k c_k e(<k, x>) nu_hat(-lam.(2 pi M^T k)),

which the closed-form route evaluates exactly up to the transform of ``nu``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import closed_forms
from .errors import DimensionError, ErgodicityError, UnsupportedError
from .fourier import transform_many
from .measures import Dilation, Estimate, Measure, apply_dilation, sample
from .rng import derive_seed, substream

EXACT_TOL = 1e-9
NEAR_TOL = 1e-6


@dataclass(eq=False)
class TorusAction:
    """Translation action of R^d on the n-torus generated by ``M`` (n x d)."""

    M: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.ndim == 1:
            M = M[:, None]
        if M.ndim != 2 or M.size == 0:
            raise DimensionError("M must be a nonempty n x d matrix")
        if not np.all(np.isfinite(M)):
            raise ValueError("M must have finite entries")
        self.M = M

    @property
    def n(self):
        return self.M.shape[0]

    @property
    def d(self):
        return self.M.shape[1]

    def dual_frequencies(self, modes):
        """``2 pi M^T k`` for each row ``k`` of ``modes``."""
        return 2.0 * math.pi * np.asarray(modes, dtype=float) @ self.M

    def to_dict(self):
        return {"M": self.M.tolist()}

    @classmethod
    def from_dict(cls, desc):
        return cls(desc["M"])


@dataclass(eq=False)
class TrigObservable:
    """Trig polynomial ``f(x) = sum_k c_k exp(2 pi i <k, x>)``; duplicate modes are merged."""

    modes: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.modes)
        if k.ndim == 1:
            k = k[:, None]
        if not np.all(k == np.round(k)):
            raise ValueError("modes must be integer vectors")
        k = np.round(k).astype(np.int64)
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if k.ndim != 2 or len(k) != len(c) or not len(c):
            raise DimensionError("observable needs matching, nonempty modes and coefficients")
        uniq, inv = np.unique(k, axis=0, return_inverse=True)
        merged = np.zeros(len(uniq), dtype=complex)
        np.add.at(merged, inv.ravel(), c)
        self.modes, self.coeffs = uniq, merged

    @property
    def n(self):
        return self.modes.shape[1]

    @property
    def mean(self):
        """``int f d mu = c_0``."""
        zero = np.all(self.modes == 0, axis=1)
        return complex(self.coeffs[zero].sum())

    @property
    def is_real(self):
        lookup = {tuple(k): c for k, c in zip(self.modes.tolist(), self.coeffs)}
        return all(abs(lookup.get(tuple(-v for v in k), 0.0) - np.conj(c)) <= 1e-12 * (1 + abs(c))
                   for k, c in lookup.items())

    def nonzero_modes(self):
        mask = ~np.all(self.modes == 0, axis=1)
        return self.modes[mask], self.coeffs[mask]

    def characters(self, x):
        """``exp(2 pi i <k, x>)`` with shape ``(points, modes)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n:
            raise DimensionError(f"torus point has dimension {x.shape[1]}, observable {self.n}")
        ph = np.mod(x @ self.modes.T.astype(float), 1.0)
        return np.exp(2j * math.pi * ph)

    def __call__(self, x):
        return self.characters(x) @ self.coeffs

    def with_coeffs(self, coeffs):
        return TrigObservable(self.modes.copy(), coeffs)

    def to_dict(self):
        return {"modes": self.modes.tolist(),
                "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs]}

    @classmethod
    def from_dict(cls, desc):
        coeffs = [complex(*c) if isinstance(c, (list, tuple)) else complex(c)
                  for c in desc["coeffs"]]
        return cls(desc["modes"], coeffs)


def act(action: TorusAction, x, t):
    """``x + M t mod 1`` in [0, 1)^n; ``x`` and ``t`` may be batched."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if x.shape[-1:] != (action.n,) or t.shape[-1:] != (action.d,):
        raise DimensionError(
            f"expected torus points of dimension {action.n} and times of dimension {action.d}")
    y = np.mod(x + t @ action.M.T, 1.0)
    return np.where(y >= 1.0, 0.0, y)


def haar_points(n, count, seed, key="haar"):
    return substream(seed, key, n).random((int(count), n))


# ---------------------------------------------------------------------------
# Ergodicity
# ---------------------------------------------------------------------------

@dataclass
class ErgodicityVerdict:
    status: str                # "ergodic", "non-ergodic" or "resonant-near"
    K: int
    witness: tuple | None = None
    residual: float | None = None
    min_residual: float = math.inf

    @property
    def is_ergodic(self):
        return self.status == "ergodic"


def _half_lattice(n, K):
    """Nonzero k with ``|k|_inf <= K`` whose first nonzero entry is positive, by sup norm."""
    rng = np.arange(-K, K + 1)
    pts = np.array(list(itertools.product(rng, repeat=n)), dtype=np.int64)
    nz = pts != 0
    first = np.argmax(nz, axis=1)
    lead = pts[np.arange(len(pts)), first]
    pts = pts[(lead > 0) & nz.any(axis=1)]
    order = np.lexsort((*pts.T[::-1], np.abs(pts).max(axis=1)))
    return pts[order]


def ergodicity_certificate(action: TorusAction, K) -> ErgodicityVerdict:
    """Bounded lattice scan for ``M^T k = 0`` over ``0 < |k|_inf <= K``.

    Exact witnesses use tolerance 1e-9; residuals below 1e-6 are reported as
    near resonances.  Witnesses are the first hit in (sup norm, lexicographic)
    order with the sign fixed by a positive leading entry.
    """
    K = int(K)
    if K < 1:
        raise ValueError("search bound K must be at least 1")
    if (2 * K + 1) ** action.n > 5e7:
        raise ValueError(f"lattice scan with n={action.n}, K={K} is too large")
    ks = _half_lattice(action.n, K)
    res = np.linalg.norm(ks.astype(float) @ action.M, axis=1)
    i = int(np.argmin(res)) if len(res) else None
    min_res = float(res[i]) if i is not None else math.inf
    exact = np.nonzero(res < EXACT_TOL)[0]
    if len(exact):
        j = exact[0]
        return ErgodicityVerdict("non-ergodic", K, tuple(int(v) for v in ks[j]), float(res[j]),
                                 min_res)
    near = np.nonzero(res < NEAR_TOL)[0]
    if len(near):
        j = near[0]
        return ErgodicityVerdict("resonant-near", K, tuple(int(v) for v in ks[j]), float(res[j]),
                                 min_res)
    return ErgodicityVerdict("ergodic", K, None, None, min_res)


def stuck_modes(action: TorusAction, f: TrigObservable, tol=EXACT_TOL):
    """Nonzero modes ``k`` of ``f`` with ``|M^T k| < tol`` (left fixed by the flow)."""
    k, _ = f.nonzero_modes()
    if not len(k):
        return []
    res = np.linalg.norm(k.astype(float) @ action.M, axis=1)
    return [tuple(int(v) for v in row) for row in k[res < tol]]


# ---------------------------------------------------------------------------
# Averages
# ---------------------------------------------------------------------------

def _check(action, nu, dil, f):
    if nu.d != action.d or dil.d != action.d:
        raise DimensionError(
            f"action acts by R^{action.d}, measure lives in R^{nu.d}, dilation has {dil.d} exponents")
    if f.n != action.n:
        raise DimensionError(f"observable lives on T^{f.n}, action on T^{action.n}")


def averaged_coefficients(action, nu, dil, lam, f, budget=None, seed=0, method="auto"):
    """Coefficients ``c_k nu_hat(-lam.(2 pi M^T k))`` of ``A_lam f`` and their errors."""
    freqs = -apply_dilation(dil, lam, action.dual_frequencies(f.modes))
    vals, errs = transform_many(nu, freqs, budget, seed, method)
    return f.coeffs * vals, np.abs(f.coeffs) * errs


def ergodic_average(action: TorusAction, nu: Measure, dil: Dilation, lam, f: TrigObservable, x,
                    method="closed_form", budget=None, seed=0) -> Estimate:
    """``A_lam f(x) = int f(T_{lam.t} x) d nu(t)``.

    ``method='closed_form'`` uses the mode expansion and the transform of
    ``nu``; ``method='monte_carlo'`` averages ``f(act(x, lam.t_i))`` over
    ``budget`` samples ``t_i ~ nu`` with error three standard errors.
    ``x`` may be one point or an array of points (value then is an array).
    """
    _check(action, nu, dil, f)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if method == "closed_form":
        coeffs, errs = averaged_coefficients(action, nu, dil, lam, f, budget, seed)
        vals = f.characters(xs) @ coeffs
        err = float(errs.sum())
        return Estimate(complex(vals[0]) if single else vals, err)
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}; use 'closed_form' or 'monte_carlo'")
    if budget is None:
        budget = 100_000
    if int(budget) <= 0:
        raise ValueError("Monte Carlo budget must be positive")
    t = apply_dilation(dil, lam, sample(nu, int(budget), derive_seed(seed, "ergodic-average")))
    shift = t @ action.M.T
    vals = np.empty(len(xs), dtype=complex)
    errs = np.empty(len(xs))
    for i, xi in enumerate(xs):
        fx = f(np.mod(xi + shift, 1.0))
        vals[i] = fx.mean()
        errs[i] = 3.0 * math.sqrt((fx.real.var(ddof=1) + fx.imag.var(ddof=1)) / len(fx))
    if single:
        return Estimate(complex(vals[0]), float(errs[0]))
    return Estimate(vals, errs)


@dataclass
class SweepRow:
    lam: float
    deviation_max: float
    deviation_mean: float
    x_samples: int


def convergence_sweep(action, nu, dil, lambdas, f, x_samples=1000, seed=0, budget=None,
                      override=False):
    """Worst-case and mean deviation ``|A_lam f(x) - c_0|`` over Haar-sampled ``x``.

    Refuses with :class:`ErgodicityError` when a nonzero mode of ``f`` is left
    fixed by the flow, unless ``override`` is set (the stuck modes are then
    reported in a warning).  Atomic ``nu`` is flagged as non-Rajchman.
    """
    _check(action, nu, dil, f)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or not len(lambdas):
        raise ValueError("lambdas must be a nonempty list")
    stuck = stuck_modes(action, f)
    if stuck and not override:
        raise ErgodicityError(
            f"modes {stuck} of the observable satisfy M^T k = 0; the average cannot converge "
            "to the mean (pass override=True to sweep anyway)", stuck)
    if stuck:
        warnings.warn(f"sweeping a non-ergodic configuration; stuck modes {stuck}", stacklevel=2)
    near = stuck_modes(action, f, NEAR_TOL)
    if len(near) > len(stuck):
        warnings.warn(f"modes {sorted(set(near) - set(stuck))} are near resonances "
                      f"(|M^T k| < {NEAR_TOL:g})", stacklevel=2)
    if nu.is_atomic:
        warnings.warn("atomic measures are not Rajchman; deviations need not decay", stacklevel=2)
    xs = haar_points(action.n, x_samples, seed, "sweep-x")
    chars = f.characters(xs)
    rows = []
    for lam in lambdas:
        coeffs, _ = averaged_coefficients(action, nu, dil, lam, f, budget, seed)
        dev = np.abs(chars @ coeffs - f.mean)
        rows.append(SweepRow(float(lam), float(dev.max()), float(dev.mean()), int(x_samples)))
    return rows


def orbit_maximal(action, nu, dil, lambda_grid, f, x, budget=None, seed=0):
    """``max_{lam in grid} |A_lam f(x)|`` by the closed form; ``x`` may be batched."""
    _check(action, nu, dil, f)
    lambda_grid = np.asarray(lambda_grid, dtype=float).ravel()
    if not len(lambda_grid):
        raise ValueError("lambda grid is empty")
    x = np.asarray(x, dtype=float)
    chars = f.characters(np.atleast_2d(x))
    out = np.zeros(len(chars))
    for lam in lambda_grid:
        coeffs, _ = averaged_coefficients(action, nu, dil, lam, f, budget, seed)
        np.maximum(out, np.abs(chars @ coeffs), out=out)
    return float(out[0]) if x.ndim == 1 else out


# ---------------------------------------------------------------------------
# Smoothing kernels
# ---------------------------------------------------------------------------

@dataclass
class Kernel:
    """Linear combination of closed-form profiles on R^d.

    Terms are ``(weight, kind, params)`` with ``kind`` ``'gaussian'``
    (``sigma``, optional ``center``) or ``'box'`` (``lower``, ``upper``); each
    profile is a probability density, so ``integral`` is the sum of weights.
    """

    terms: list = field(default_factory=list)

    def __post_init__(self):
        for w, kind, params in self.terms:
            if kind not in ("gaussian", "box"):
                raise UnsupportedError(f"kernel profile {kind!r} has no closed-form transform; "
                                       "use 'gaussian' or 'box'")

    @property
    def integral(self):
        return float(sum(w for w, _, _ in self.terms))

    def __add__(self, other):
        return Kernel(self.terms + other.terms)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, c):
        return Kernel([(c * w, k, p) for w, k, p in self.terms])

    def transform(self, xis):
        xis = np.atleast_2d(np.asarray(xis, dtype=float))
        d = xis.shape[1]
        out = np.zeros(len(xis), dtype=complex)
        for w, kind, p in self.terms:
            if kind == "gaussian":
                center = np.broadcast_to(np.asarray(p.get("center", 0.0), dtype=float), (d,))
                out += w * closed_forms.gaussian_transform(xis, center, float(p["sigma"]))
            else:
                lo = np.broadcast_to(np.asarray(p["lower"], dtype=float), (d,))
                hi = np.broadcast_to(np.asarray(p["upper"], dtype=float), (d,))
                out += w * closed_forms.box_transform(xis, lo, hi)
        return out

    def to_dict(self):
        return {"terms": [{"weight": w, "kind": k, **{a: (np.asarray(v).tolist()) for a, v in p.items()}}
                          for w, k, p in self.terms]}

    @classmethod
    def from_dict(cls, desc):
        terms = []
        for t in desc["terms"]:
            params = {k: v for k, v in t.items() if k not in ("weight", "kind")}
            terms.append((float(t.get("weight", 1.0)), t["kind"], params))
        return cls(terms)


def gaussian_kernel(sigma, center=0.0):
    return Kernel([(1.0, "gaussian", {"sigma": float(sigma), "center": center})])


def box_kernel(lower, upper):
    return Kernel([(1.0, "box", {"lower": lower, "upper": upper})])


def dog_kernel(sigma_small=0.5, sigma_large=1.0):
    """Zero-integral difference of two centered Gaussians."""
    return gaussian_kernel(sigma_small) - gaussian_kernel(sigma_large)


def smooth_observable(action: TorusAction, f0: TrigObservable, kernel: Kernel) -> TrigObservable:
    """``f(x) = int f0(T_s x) phi(s) ds``: modes ``c_k phi_hat(-2 pi M^T k)``."""
    if f0.n != action.n:
        raise DimensionError(f"observable lives on T^{f0.n}, action on T^{action.n}")
    if not isinstance(kernel, Kernel):
        raise UnsupportedError("smoothing needs a Kernel built from closed-form profiles")
    mult = kernel.transform(-action.dual_frequencies(f0.modes))
    return f0.with_coeffs(f0.coeffs * mult)


def random_trig_observable(n, n_modes, max_freq=3, seed=0, real=True, mean=0.0):
    """Seeded observable with ``n_modes`` nonzero modes in ``[-max_freq, max_freq]^n``.

    Real observables pair each drawn mode with its conjugate (so ``n_modes``
    counts modes including conjugates and is rounded up to even).
    """
    rng = substream(seed, "trig-observable", n)
    pool = _half_lattice(n, int(max_freq))
    half = (n_modes + 1) // 2 if real else n_modes
    if half > len(pool):
        raise ValueError(f"cannot draw {half} distinct modes with max_freq={max_freq}")
    pick = pool[rng.choice(len(pool), size=half, replace=False)]
    if not real:
        signs = rng.choice([-1, 1], size=half)[:, None]
        pick = pick * signs
    c = (rng.standard_normal(half) + 1j * rng.standard_normal(half)) / math.sqrt(2 * half)
    modes, coeffs = [pick], [c]
    if real:
        modes.append(-pick)
        coeffs.append(np.conj(c))
    if mean:
        modes.append(np.zeros((1, n), dtype=np.int64))
        coeffs.append(np.array([mean], dtype=complex))
    return TrigObservable(np.vstack(modes), np.concatenate(coeffs))


# ---------------------------------------------------------------------------
# Calderon transfer
# ---------------------------------------------------------------------------

@dataclass
class ObservableFamily:
    """Seeded family of random real trig observables."""

    count: int = 8
    n_modes: int = 20
    max_freq: int = 3

    def generate(self, n, seed):
        if self.count < 1:
            raise ValueError("observable family is empty")
        return [random_trig_observable(n, self.n_modes, self.max_freq, derive_seed(seed, "family", i))
                for i in range(self.count)]


def empirical_lp_ratio(num, den, p):
    """``(mean |num|^p / mean |den|^p)^(1/p)`` on a shared sample."""
    return float((np.mean(np.abs(num) ** p) / np.mean(np.abs(den) ** p)) ** (1.0 / p))


def torus_maximal_constant(action, nu, dil, p, observables, lambda_grid, x_samples=1000, seed=0):
    """Largest empirical ``||M f||_p / ||f||_p`` over the observables."""
    xs = haar_points(action.n, x_samples, seed, "transfer-x")
    best = 0.0
    for f in observables:
        mf = orbit_maximal(action, nu, dil, lambda_grid, f, xs)
        best = max(best, empirical_lp_ratio(mf, f(xs), p))
    return best


def transfer_ratio(action, nu, dil, p, observable_family, grid_params, x_samples=1000, seed=0):
    """Empirical torus maximal constant over the grid constant of the convolution model.

    ``grid_params`` is passed to :func:`ergolab.maximal.grid_maximal_constant`
    and must hold the shared ``lambdas``.  Returns
    ``(torus_constant, grid_constant, ratio)``.
    """
    from .maximal import grid_maximal_constant

    if p < 1:
        raise ValueError("p must be at least 1")
    if isinstance(observable_family, ObservableFamily):
        observables = observable_family.generate(action.n, seed)
    else:
        observables = list(observable_family)
    if not observables:
        raise ValueError("observable family is empty")
    lambdas = np.asarray(grid_params["lambdas"], dtype=float)
    torus = torus_maximal_constant(action, nu, dil, p, observables, lambdas, x_samples, seed)
    grid = grid_maximal_constant(nu, dil, p, **grid_params)
    return torus, grid, torus / grid
