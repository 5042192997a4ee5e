"""Fourier transforms of measures, decay profiles and Fourier-dimension estimates."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import closed_forms
from ._quad import composite_gauss, oscillation_panels
from .errors import DimensionError, UnresolvedDecayError, UnsupportedError
from .measures import (Dilated, Estimate, Measure, _monte_carlo_estimate, _quadrature_estimate,
                       apply_dilation, sphere_area)
from .rng import derive_seed, substream

MODULUS_FLOOR = 1e-14
MC_BASE_BUDGET = 10_000
MC_MAX_BUDGET = 1_000_000
QUAD_MAX_NODES = 2_000_000
METHODS = ("auto", "quadrature", "closed_form", "monte_carlo")


def _check_xis(nu, xis):
    xis = np.asarray(xis, dtype=float)
    if xis.ndim == 1:
        xis = xis[None, :]
    if xis.ndim != 2 or xis.shape[1] != nu.d:
        raise DimensionError(f"frequency must have dimension {nu.d}, got shape {xis.shape}")
    return xis


def _phase_span(nu, xi):
    lo, hi = nu.bbox()
    return float(np.abs(xi) @ (hi - lo))


def _generic(nu, xi, budget, seed, method):
    """Transform at one frequency by integrating the exponential over ``nu``."""
    phi = lambda pts: np.exp(-1j * (pts @ xi))
    span = _phase_span(nu, xi)
    if method != "monte_carlo":
        n = budget or int(min((4.0 * span + 16.0) ** nu.param_dim, QUAD_MAX_NODES))
        try:
            return _quadrature_estimate(nu, phi, max(n, 8))
        except UnsupportedError:
            if method == "quadrature":
                raise
    n = budget or int(min(MC_BASE_BUDGET * (1.0 + span / 10.0), MC_MAX_BUDGET))
    return _monte_carlo_estimate(nu, phi, n, seed, key="fourier")


def transform_many(nu: Measure, xis, budget=None, seed=0, method="auto", with_error=True):
    """Transform of ``nu`` at every row of ``xis``; returns ``(values, errors)``.

    Methods
    -------
    auto
        closed-form oracle when one exists, else the variant's quadrature route,
        else generic quadrature of the exponential, else Monte Carlo.
    quadrature
        deterministic numerical route only (no closed forms).
    closed_form
        built-in oracles only (sinc products, sphere and ball Bessel profiles,
        Gaussians, exact atom and Brownian-piece sums).
    monte_carlo
        sample average with ``budget`` points (default grows with ``|xi|``,
        capped at ``MC_MAX_BUDGET``); errors are three standard errors.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    xis = _check_xis(nu, xis)
    if budget is not None and int(budget) <= 0:
        raise ValueError("budget must be positive")
    if nu.is_atomic or method == "closed_form" or (
            method == "auto" and closed_forms.has_closed_form(nu)):
        return closed_forms.closed_form_transform(nu, xis), np.zeros(len(xis))
    if method in ("auto", "quadrature"):
        routed = nu._transform(xis, with_error=with_error)
        if routed is not None:
            return routed
    vals = np.empty(len(xis), dtype=complex)
    errs = np.empty(len(xis))
    for i, xi in enumerate(xis):
        est = _generic(nu, xi, budget, derive_seed(seed, "fourier", i), method)
        vals[i], errs[i] = est.value, est.error
    return vals, errs


def fourier_transform(nu: Measure, xi, budget=None, seed=0, method="auto") -> Estimate:
    """``nu_hat(xi) = int exp(-i <xi, t>) d nu(t)`` with an error estimate."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1:
        raise DimensionError("xi must be a single frequency vector")
    vals, errs = transform_many(nu, xi, budget, seed, method)
    return Estimate(complex(vals[0]), float(errs[0]))


def fourier_of_dilated(nu, dil, lam, xi, budget=None, seed=0, method="auto") -> Estimate:
    """``hat(nu_lam)(xi) = nu_hat(lam.xi)`` by the dual dilation identity."""
    return fourier_transform(nu, apply_dilation(dil, lam, np.asarray(xi, dtype=float)),
                             budget, seed, method)


# ---------------------------------------------------------------------------
# Decay profiles
# ---------------------------------------------------------------------------

def shell_directions(d, n, seed=0):
    """Unit directions for shell sampling.

    d=1 uses {+1}; d=2 equally spaced angles on a half circle (axes included
    when ``n`` is even); d=3 the coordinate axes plus a Fibonacci lattice on
    the upper hemisphere; d >= 4 the axes plus seeded Gaussian directions.
    Half spheres suffice because ``|nu_hat(-xi)| = |nu_hat(xi)|``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("need at least one direction")
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        th = math.pi * np.arange(n) / n
        return np.column_stack([np.cos(th), np.sin(th)])
    axes = np.eye(d)[: min(d, n)]
    m = n - len(axes)
    if m <= 0:
        return axes
    if d == 3:
        k = np.arange(m) + 0.5
        z = k / m
        phi = math.pi * (3.0 - math.sqrt(5.0)) * k
        r = np.sqrt(1 - z ** 2)
        extra = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    else:
        g = substream(seed, "directions", d).standard_normal((m, d))
        extra = g / np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([axes, extra])


@dataclass
class DecayProfile:
    radii: np.ndarray
    sup_modulus: np.ndarray
    mean_modulus: np.ndarray
    n_directions: int
    quadrature_budget: int | None
    seed: int
    measure: dict = field(default_factory=dict)
    method: str = "auto"
    dim: int = 0

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.sup_modulus = np.asarray(self.sup_modulus, dtype=float)
        self.mean_modulus = np.asarray(self.mean_modulus, dtype=float)
        if self.radii.ndim != 1 or not len(self.radii):
            raise ValueError("profile needs at least one radius")
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["radius", "sup_modulus", "mean_modulus", "n_directions"])
        for r, s, m in zip(self.radii, self.sup_modulus, self.mean_modulus):
            w.writerow([repr(float(r)), repr(float(s)), repr(float(m)), self.n_directions])
        return buf.getvalue()

    def to_json(self):
        d = asdict(self)
        for k in ("radii", "sup_modulus", "mean_modulus"):
            d[k] = [float(v) for v in d[k]]
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def decay_profile(nu: Measure, radii, n_directions=None, budget=None, seed=0,
                  method="auto") -> DecayProfile:
    """Sup and mean of ``|nu_hat|`` over sampled directions on each shell ``|xi| = R``."""
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or not len(radii):
        raise ValueError("radii must be a nonempty list")
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    n_dir = int(n_directions or 64 * nu.d)
    dirs = shell_directions(nu.d, n_dir, seed)
    xis = (radii[:, None, None] * dirs[None]).reshape(-1, nu.d)
    vals, _ = transform_many(nu, xis, budget, seed, method, with_error=False)
    mod = np.minimum(np.abs(vals), 1.0).reshape(len(radii), len(dirs))
    return DecayProfile(radii, mod.max(axis=1), mod.mean(axis=1), len(dirs), budget, int(seed),
                        nu.to_dict(), method, nu.d)


def _window(profile, fit_window):
    n = len(profile.radii)
    if fit_window is None:
        return slice(0, n)
    if isinstance(fit_window, slice):
        return fit_window
    lo, hi = fit_window
    return slice(int(lo), int(hi))


def estimate_fourier_dimension(profile: DecayProfile, fit_window=None):
    """Fourier-dimension estimate ``a_hat = clamp(-2 * slope, 0, d)`` and its stderr.

    The slope is the least-squares log-log slope of the sup envelope over the
    index range ``fit_window = (start, stop)`` (default: all radii).  Moduli
    below ``MODULUS_FLOOR`` carry no information and are dropped.
    """
    sl = _window(profile, fit_window)
    r = profile.radii[sl]
    s = profile.sup_modulus[sl]
    if len(r) < 3:
        raise ValueError(f"fit window holds {len(r)} radii; need at least 3")
    keep = s > MODULUS_FLOOR
    if keep.sum() < 3:
        raise UnresolvedDecayError(
            "decay too fast to resolve: fewer than 3 moduli above the numerical floor "
            f"{MODULUS_FLOOR:g} in the fit window")
    x = np.log(r[keep])
    y = np.log(s[keep])
    fit = stats.linregress(x - x.mean(), y - y.mean())
    d = profile.dim or math.inf
    a_hat = float(np.clip(-2.0 * fit.slope, 0.0, d))
    stderr = float(2.0 * fit.stderr) if np.isfinite(fit.stderr) else 0.0
    return a_hat, stderr


def rajchman_defect(profile: DecayProfile, tail_fraction=0.25):
    """Max of the sup envelope over the outermost ``tail_fraction`` of radii."""
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    n = len(profile.radii)
    k = max(1, int(math.ceil(tail_fraction * n)))
    return float(np.max(profile.sup_modulus[n - k:]))


# ---------------------------------------------------------------------------
# Energy integral and exponents
# ---------------------------------------------------------------------------

@dataclass
class EnergyIncrement:
    r_lo: float
    r_hi: float
    value: float


def sobolev_energy(nu: Measure, a, r_min=1.0, r_max=1e3, budget=None, seed=0, n_directions=None,
                   method="auto"):
    """Truncated energy ``int_{r_min <= |xi| <= r_max} |nu_hat|^2 |xi|^(a-d) d xi``.

    Integrated in polar form, shell by shell: composite Gauss-Legendre in the
    radius on each decade, directional mean over ``n_directions`` directions.
    Returns ``(value, increments)`` with one :class:`EnergyIncrement` per decade.
    ``budget`` caps the radial panels per decade.
    """
    d = nu.d
    if not 0 < a < d:
        raise ValueError(f"energy exponent a must lie in (0, {d}), got {a}")
    if not (r_min >= 1 and r_max > r_min):
        raise ValueError("need 1 <= r_min < r_max")
    dirs = shell_directions(d, n_directions or 8 * d, seed)
    lo, hi = nu.bbox()
    diam = max(float(np.linalg.norm(hi - lo)), 1e-3)
    edges = [float(r_min)]
    while edges[-1] * 10 < r_max * (1 - 1e-12):
        edges.append(edges[-1] * 10)
    edges.append(float(r_max))
    area = sphere_area(d) if d > 1 else 2.0
    incs = []
    for r0, r1 in zip(edges[:-1], edges[1:]):
        panels = oscillation_panels(2 * diam * (r1 - r0), minimum=4)
        if budget is not None:
            panels = min(panels, int(budget))
        rr, wr = composite_gauss(r0, r1, panels)
        xis = (rr[:, None, None] * dirs[None]).reshape(-1, d)
        vals, _ = transform_many(nu, xis, None, seed, method, with_error=False)
        shell = np.mean(np.abs(vals.reshape(len(rr), len(dirs))) ** 2, axis=1)
        incs.append(EnergyIncrement(r0, r1, float(area * np.sum(wr * rr ** (a - 1) * shell))))
    return float(sum(i.value for i in incs)), incs


def critical_exponent(a):
    """The exponent ``p_a = (1 + a) / a``."""
    a = float(a)
    if a <= 0:
        raise ValueError(f"Fourier dimension must be positive, got {a}")
    if a <= 1:
        warnings.warn(f"a = {a} <= 1 lies outside the range where p_a governs the maximal bound",
                      stacklevel=2)
    return (1.0 + a) / a


def dilated_multiplier_sup(nu, dil, lam, xi_max=4.0, n_per_axis=33, multiplier=None, method="auto"):
    """``sup_{|xi|_inf <= xi_max} |nu_hat(lam.xi) psi_hat(xi)|`` on a grid of frequencies.

    ``psi_hat`` defaults to a difference-of-Gaussians profile vanishing at 0.
    """
    axis = np.linspace(-xi_max, xi_max, n_per_axis)
    xis = np.stack(np.meshgrid(*[axis] * nu.d, indexing="ij"), axis=-1).reshape(-1, nu.d)
    mult = multiplier or closed_forms.dog_multiplier
    vals, _ = transform_many(nu, apply_dilation(dil, lam, xis), method=method, with_error=False)
    return float(np.max(np.abs(vals * mult(xis))))
