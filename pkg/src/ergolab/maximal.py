"""Grid convolutions ``D_lam phi = phi * nu_lam``, maximal functions and L^p diagnostics.

Two engines evaluate ``D_lam phi(x) = int phi(x - lam.t) d nu(t)`` on grid nodes:

direct
    sums ``phi`` over quadrature nodes (or atoms, or samples) of ``nu`` with
    multilinear interpolation for off-grid reads; reads outside the grid are 0.
spectral
    multiplies the zero-padded FFT of ``phi`` by ``nu_hat(lam.xi)``; used for
    non-atomic measures with closed-form transforms, where the direct engine
    would need far more nodes than grid points.
"""
from __future__ import annotations

import csv
import io
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import closed_forms
from ._kernels import shifted_multilinear_sum
from ._quad import composite_gauss
from .errors import DimensionError, UnsupportedError
from .measures import (Density, Dilated, Dilation, LebesgueBox, Measure, SphereSurface,
                       apply_dilation, sample)

DIRECT_MAX_NODES = 200_000
_MAGIC = b"ERGRID01"


@dataclass(eq=False)
class GridFunction:
    """Complex samples of a function on ``origin + spacing * index``."""

    origin: np.ndarray
    spacing: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.origin = np.atleast_1d(np.asarray(self.origin, dtype=float))
        self.spacing = float(self.spacing)
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if self.values.ndim != len(self.origin):
            raise DimensionError(
                f"values have {self.values.ndim} axes, origin has {len(self.origin)} coordinates")
        if any(e < 2 for e in self.values.shape):
            raise ValueError("every grid axis needs at least 2 nodes")

    @property
    def d(self):
        return self.values.ndim

    @property
    def extents(self):
        return self.values.shape

    @property
    def cell_volume(self):
        return self.spacing ** self.d

    def axis(self, j):
        return self.origin[j] + self.spacing * np.arange(self.extents[j])

    def nodes(self):
        """All node coordinates, shape ``(*extents, d)``."""
        return np.stack(np.meshgrid(*[self.axis(j) for j in range(self.d)], indexing="ij"), axis=-1)

    def like(self, values):
        return GridFunction(self.origin.copy(), self.spacing, values)

    def is_real(self):
        return not np.any(self.values.imag)

    # -- serialization -----------------------------------------------------

    def to_bytes(self):
        """Little-endian header ``magic, d, origin, spacing, extents`` then complex pairs."""
        head = _MAGIC + struct.pack("<q", self.d)
        head += struct.pack(f"<{self.d}d", *self.origin)
        head += struct.pack("<d", self.spacing)
        head += struct.pack(f"<{self.d}q", *self.extents)
        return head + np.ascontiguousarray(self.values, dtype="<c16").tobytes()

    @classmethod
    def from_bytes(cls, blob):
        if blob[:8] != _MAGIC:
            raise ValueError("not a grid function file")
        off = 8
        (d,) = struct.unpack_from("<q", blob, off)
        off += 8
        origin = struct.unpack_from(f"<{d}d", blob, off)
        off += 8 * d
        (h,) = struct.unpack_from("<d", blob, off)
        off += 8
        extents = struct.unpack_from(f"<{d}q", blob, off)
        off += 8 * d
        vals = np.frombuffer(blob, dtype="<c16", offset=off).reshape(extents)
        return cls(np.array(origin), h, vals.astype(complex))

    def sidecar(self, **extra):
        return {"d": self.d, "origin": self.origin.tolist(), "spacing": self.spacing,
                "extents": list(self.extents), "layout": "row-major complex128 little-endian",
                **extra}

    def save(self, prefix, **extra):
        with open(f"{prefix}.grid", "wb") as fh:
            fh.write(self.to_bytes())
        with open(f"{prefix}.grid.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.sidecar(**extra), fh, sort_keys=True, indent=1)

    @classmethod
    def load(cls, prefix):
        with open(f"{prefix}.grid", "rb") as fh:
            return cls.from_bytes(fh.read())

    def slice_csv(self, axis=0, index=None):
        """CSV of the 1-d slice along ``axis`` through ``index`` (default: center)."""
        index = list(index) if index is not None else [e // 2 for e in self.extents]
        sel = tuple(slice(None) if j == axis else index[j] for j in range(self.d))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "value_re", "value_im"])
        for x, v in zip(self.axis(axis), self.values[sel]):
            w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

TAIL_MASS = 1e-8


@dataclass
class Profile:
    """Closed-form test function: a weighted sum of named radial profiles.

    Terms are ``(weight, kind, params)`` with kinds ``gaussian`` (``sigma``),
    ``bump`` (``radius``, ``power``: ``(1 - r^2/R^2)^power``) and ``critical``
    (``eps``, ``radius``: ``(1 - r^2/R^2)^2 / (r^2 + eps^2)``), each optionally
    shifted by ``center``.
    """

    terms: list = field(default_factory=list)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for w, kind, p in self.terms:
            c = np.asarray(p.get("center", 0.0), dtype=float)
            r2 = np.sum((x - c) ** 2, axis=-1)
            if kind == "gaussian":
                out += w * np.exp(-0.5 * r2 / p["sigma"] ** 2)
            elif kind == "bump":
                out += w * np.clip(1 - r2 / p["radius"] ** 2, 0, None) ** p.get("power", 2)
            elif kind == "critical":
                out += w * np.clip(1 - r2 / p["radius"] ** 2, 0, None) ** 2 / (r2 + p["eps"] ** 2)
            else:
                raise UnsupportedError(f"unknown profile {kind!r}")
        return out

    def support_radius(self):
        """Radius outside which the discarded tail mass is below ``TAIL_MASS``."""
        r = 0.0
        for _, kind, p in self.terms:
            c = float(np.max(np.abs(np.asarray(p.get("center", 0.0)))))
            if kind == "gaussian":
                r = max(r, c + p["sigma"] * math.sqrt(2 * math.log(1 / TAIL_MASS)))
            else:
                r = max(r, c + p["radius"])
        return r

    def __add__(self, other):
        return Profile(self.terms + other.terms)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, c):
        return Profile([(c * w, k, p) for w, k, p in self.terms])

    def to_dict(self):
        return {"terms": [{"weight": w, "kind": k, **p} for w, k, p in self.terms]}

    @classmethod
    def from_dict(cls, desc):
        return cls([(float(t.get("weight", 1.0)), t["kind"],
                     {k: v for k, v in t.items() if k not in ("weight", "kind")})
                    for t in desc["terms"]])


def gaussian_profile(sigma=1.0, center=0.0):
    return Profile([(1.0, "gaussian", {"sigma": sigma, "center": center})])


def bump_profile(radius=1.0, power=2, center=0.0):
    return Profile([(1.0, "bump", {"radius": radius, "power": power, "center": center})])


def critical_profile(eps, radius=0.75):
    """Near-field profile ``~ 1/r^2`` regularized at scale ``eps``."""
    return Profile([(1.0, "critical", {"eps": eps, "radius": radius})])


def sample_profile(profile, d, n, half_width, cell_centered=True):
    """Sample ``profile`` on the cube ``[-half_width, half_width]^d`` with ``n`` nodes per axis."""
    if cell_centered:
        h = 2.0 * half_width / n
        origin = np.full(d, -half_width + 0.5 * h)
    else:
        h = 2.0 * half_width / (n - 1)
        origin = np.full(d, -half_width)
    g = GridFunction(origin, h, np.zeros((n,) * d))
    g.values = profile(g.nodes()).astype(complex)
    return g


# ---------------------------------------------------------------------------
# Engines
# ---------------------------------------------------------------------------

def _check(phi, nu, dil):
    if nu.d != phi.d or dil.d != phi.d:
        raise DimensionError(
            f"grid has dimension {phi.d}, measure {nu.d}, dilation {dil.d} exponents")


def _direct_nodes(nu, dil, lam, h, budget, seed):
    """Points and weights representing ``nu`` for the direct engine."""
    if nu.is_atomic:
        return nu.atoms()
    if budget is None:
        lo, hi = nu.bbox()
        diam = float(np.max((hi - lo) * dil.scale(lam)))
        budget = int(min((2.0 * diam / h + 16.0) ** nu.param_dim * 8, DIRECT_MAX_NODES))
    try:
        return nu._quadrature(int(budget))
    except UnsupportedError:
        pts = sample(nu, int(budget), seed)
        return pts, np.full(len(pts), 1.0 / len(pts))


def _direct(phi, pts, w, dil, lam):
    shifts = apply_dilation(dil, lam, pts) / phi.spacing
    sh3 = np.zeros((len(shifts), 3))
    sh3[:, : phi.d] = shifts
    vals3 = phi.values.reshape(phi.extents + (1,) * (3 - phi.d))
    out = np.zeros_like(vals3)
    shifted_multilinear_sum(vals3, sh3, np.ascontiguousarray(w, dtype=float), out)
    return out.reshape(phi.extents)


def _is_radial(nu):
    return (isinstance(nu, SphereSurface) and nu.cutoff is None) or (
        isinstance(nu, Density) and nu.density == "ball" and not np.any(nu.center))


class _SpectralPlan:
    """FFT of the zero-padded grid plus the frequency grid, reused across lambdas."""

    def __init__(self, phi, reach_cells, size=None):
        self.phi = phi
        self.real = phi.is_real()
        n = phi.extents
        if size is None:
            size = tuple(sfft.next_fast_len(int(e + math.ceil(r) + 1)) for e, r in zip(n, reach_cells))
        self.size = tuple(int(s) for s in np.broadcast_to(size, (phi.d,)))
        h = phi.spacing
        freqs = [2 * math.pi * sfft.fftfreq(m, h) for m in self.size]
        if self.real:
            freqs[-1] = 2 * math.pi * sfft.rfftfreq(self.size[-1], h)
            self.hat = sfft.rfftn(phi.values.real, s=self.size, workers=-1)
        else:
            self.hat = sfft.fftn(phi.values, s=self.size, workers=-1)
        self.freqs = freqs
        self._norm = None
        self._grid = None

    def norm(self):
        if self._norm is None:
            sq = sum(np.meshgrid(*[f ** 2 for f in self.freqs], indexing="ij", sparse=True))
            self._norm = np.sqrt(sq)
        return self._norm

    def grid(self):
        if self._grid is None:
            self._grid = np.stack(np.meshgrid(*self.freqs, indexing="ij"), axis=-1)
        return self._grid

    def multiplier(self, nu, dil, lam):
        if _is_radial(nu) and dil.is_standard:
            rho = lam * self.norm()
            if isinstance(nu, SphereSurface):
                return closed_forms.sphere_profile(nu.radius * rho, nu.d)
            return closed_forms.ball_profile(nu.radius * rho, nu.d)
        if isinstance(nu, LebesgueBox):
            scale = dil.scale(lam)
            out = 1.0
            for j in range(nu.d):
                shape = [1] * nu.d
                shape[j] = -1
                f = closed_forms.interval_transform(self.freqs[j] * scale[j], nu.lower[j], nu.upper[j])
                out = out * f.reshape(shape)
            return out
        g = self.grid()
        flat = apply_dilation(dil, lam, g.reshape(-1, nu.d))
        return closed_forms.closed_form_transform(nu, flat).reshape(g.shape[:-1])

    def apply(self, mult):
        sel = tuple(slice(0, e) for e in self.phi.extents)
        if self.real:
            return sfft.irfftn(self.hat * mult, s=self.size, workers=-1)[sel]
        return sfft.ifftn(self.hat * mult, s=self.size, workers=-1)[sel]


def _reach_cells(nu, dil, lam_max, h):
    lo, hi = nu.bbox()
    return np.maximum(np.abs(lo), np.abs(hi)) * dil.scale(lam_max) / h


def choose_engine(nu, engine="auto"):
    if engine not in ("auto", "direct", "spectral"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine != "auto":
        if engine == "spectral" and (nu.is_atomic or not closed_forms.has_closed_form(nu)):
            raise UnsupportedError(f"spectral engine needs a non-atomic closed-form measure, got {nu.kind}")
        return engine
    if nu.is_atomic or not closed_forms.has_closed_form(nu) or isinstance(nu, Dilated):
        return "direct"
    return "spectral"


def dilated_convolution(phi: GridFunction, nu: Measure, dil: Dilation, lam, budget=None, seed=0,
                        engine="auto", pad_size=None) -> GridFunction:
    """``D_lam phi(x) = int phi(x - lam.t) d nu(t)`` at the nodes of ``phi``'s grid.

    The spectral engine convolves the trigonometric interpolant of the
    zero-padded grid, so its output depends (below the discretization error)
    on the FFT size; pass the same ``pad_size`` to compare runs exactly.
    """
    _check(phi, nu, dil)
    lam = float(lam)
    dil.scale(lam)
    engine = choose_engine(nu, engine)
    if engine == "direct":
        pts, w = _direct_nodes(nu, dil, lam, phi.spacing, budget, seed)
        return phi.like(_direct(phi, pts, w, dil, lam))
    plan = _SpectralPlan(phi, _reach_cells(nu, dil, lam, phi.spacing), pad_size)
    return phi.like(plan.apply(plan.multiplier(nu, dil, lam)))


def maximal_function(phi: GridFunction, nu: Measure, dil: Dilation, lambda_grid, budget=None,
                     seed=0, engine="auto", include_identity=False, pad_size=None) -> GridFunction:
    """``S phi = max over lambda_grid of |D_lam phi|`` (real-valued grid function).

    ``include_identity`` also takes ``|phi|``, the ``lam -> 0`` limit of
    ``D_lam phi`` for continuous ``phi``.  ``pad_size`` fixes the FFT size of
    the spectral engine (default: just enough for linear convolution).
    """
    _check(phi, nu, dil)
    lambdas = np.asarray(lambda_grid, dtype=float).ravel()
    if not len(lambdas):
        raise ValueError("lambda grid is empty")
    if np.any(lambdas <= 0):
        raise ValueError("lambda values must be positive")
    engine = choose_engine(nu, engine)
    out = np.abs(phi.values) if include_identity else np.zeros(phi.extents)
    if engine == "direct":
        for lam in lambdas:
            pts, w = _direct_nodes(nu, dil, lam, phi.spacing, budget, seed)
            np.maximum(out, np.abs(_direct(phi, pts, w, dil, lam)), out=out)
    else:
        plan = _SpectralPlan(phi, _reach_cells(nu, dil, lambdas.max(), phi.spacing), pad_size)
        for lam in lambdas:
            np.maximum(out, np.abs(plan.apply(plan.multiplier(nu, dil, lam))), out=out)
    return phi.like(out)


def curve_maximal(phi: GridFunction, q, dil: Dilation, lambda_grid, panels=1000) -> GridFunction:
    """Maximal averages along ``w -> lam.q(w)``, ``q(w) = (q_1 w, ..., q_d w^d)``.

    The ``w``-integral uses ``panels`` composite 8-point Gauss-Legendre panels.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    d = len(q)
    if dil.exponents != tuple(float(j) for j in range(1, d + 1)):
        raise ValueError(f"curve of degree {d} needs dilation exponents (1, ..., {d}), "
                         f"got {dil.exponents}")
    if phi.d != d:
        raise DimensionError(f"grid has dimension {phi.d}, curve {d}")
    if np.any(q == 0):
        raise ValueError("curve coefficients must be nonzero")
    lambdas = np.asarray(lambda_grid, dtype=float).ravel()
    if not len(lambdas):
        raise ValueError("lambda grid is empty")
    w, wt = composite_gauss(0.0, 1.0, panels)
    pts = q * w[:, None] ** np.arange(1, d + 1)
    out = np.zeros(phi.extents)
    for lam in lambdas:
        np.maximum(out, np.abs(_direct(phi, pts, wt, dil, lam)), out=out)
    return phi.like(out)


# ---------------------------------------------------------------------------
# Norms and ratios
# ---------------------------------------------------------------------------

def lp_norm(g: GridFunction, p) -> float:
    """``(h^d sum |v|^p)^(1/p)``; ``p = inf`` gives the max norm."""
    if not p >= 1:
        raise ValueError(f"p must be at least 1, got {p}")
    a = np.abs(g.values)
    if math.isinf(p):
        return float(a.max())
    return float((g.cell_volume * np.sum(a ** p)) ** (1.0 / p))


def default_alpha_grid(S_phi, count=256, low=1e-3):
    top = float(np.max(np.abs(S_phi.values)))
    if top <= low:
        return np.array([0.5 * top]) if top > 0 else np.array([low])
    return np.logspace(math.log10(low), math.log10(top), count)


def weak_type_ratio(S_phi: GridFunction, phi: GridFunction, p, alpha_grid=None) -> float:
    """``sup_alpha alpha^p |{S phi > alpha}| / ||phi||_p^p`` with counting measure times ``h^d``."""
    if alpha_grid is None:
        alpha_grid = default_alpha_grid(S_phi)
    alpha = np.asarray(alpha_grid, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha values must be positive")
    s = np.sort(np.abs(S_phi.values).ravel())
    counts = len(s) - np.searchsorted(s, alpha, side="right")
    level = alpha ** p * counts * S_phi.cell_volume
    return float(level.max() / lp_norm(phi, p) ** p)


def strong_type_ratio(S_phi, phi, p):
    return lp_norm(S_phi, p) / lp_norm(phi, p)


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

@dataclass
class RefinementRow:
    n: int
    p: float
    weak_ratio: float
    strong_ratio: float


def refinement_study(nu, dil, ps, levels=(32, 64, 128), half_width=1.0, eps_cells=1.0,
                     cutoff_radius=0.75, lam_max=None, engine="auto"):
    """Weak and strong ratios of ``S`` on the critical profile across grid refinements.

    At level ``n`` the cube ``[-half_width, half_width]^d`` carries ``n`` cell-centered
    nodes per axis, the profile is regularized at ``eps_cells`` cells, and the
    lambda grid is ``n/2`` equispaced values on ``(0, lam_max]`` (default: the
    cube's half diagonal), so both resolutions refine together.
    """
    d = nu.d
    lam_max = lam_max or half_width * math.sqrt(d)
    rows = []
    for n in levels:
        h = 2.0 * half_width / n
        phi = sample_profile(critical_profile(eps_cells * h, cutoff_radius * half_width), d, n,
                             half_width)
        lambdas = lam_max * np.arange(1, n // 2 + 1) / (n // 2)
        S = maximal_function(phi, nu, dil, lambdas, engine=engine, include_identity=True,
                             pad_size=2 * n)
        for p in ps:
            rows.append(RefinementRow(n, float(p), weak_type_ratio(S, phi, p),
                                      strong_type_ratio(S, phi, p)))
    return rows


def default_grid_family(half_width):
    """Test profiles for grid constants: Gaussians of three widths, a bump, a critical profile."""
    hw = half_width
    return [gaussian_profile(0.05 * hw), gaussian_profile(0.1 * hw), gaussian_profile(0.2 * hw),
            bump_profile(0.3 * hw), critical_profile(0.02 * hw, 0.3 * hw)]


def grid_maximal_constant(nu, dil, p, lambdas, n=64, half_width=2.0, profiles=None, engine="auto",
                          budget=None):
    """Largest ``||S phi||_p / ||phi||_p`` over a family of sampled profiles."""
    profiles = profiles or default_grid_family(half_width)
    best = 0.0
    for prof in profiles:
        if isinstance(prof, dict):
            prof = Profile.from_dict(prof)
        phi = sample_profile(prof, nu.d, n, half_width)
        S = maximal_function(phi, nu, dil, lambdas, budget=budget, engine=engine,
                             include_identity=False)
        best = max(best, strong_type_ratio(S, phi, p))
    return best
