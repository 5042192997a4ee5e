"""Probability measures on R^d, homogeneous dilations, sampling and integration.

Every measure is a small dataclass tagged by ``kind``.  A measure knows its
bounding box, how to draw samples, and (where a deterministic rule exists) how
to produce quadrature nodes and evaluate its Fourier transform

    nu_hat(xi) = integral of exp(-i <xi, t>) d nu(t).

Test functions ``phi`` passed to :func:`integrate` are vectorized: they take an
``(n, d)`` array of points and return ``n`` values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from ._quad import bucket_by_panels, composite_gauss, oscillation_panels
from .errors import DimensionError, ResolutionError, UnsupportedError
from .rng import derive_seed, substream

SAMPLE_BLOCK = 1 << 16
_EPS_ERR = 1e-14


class Estimate(NamedTuple):
    """A numerical value with an absolute error estimate."""

    value: complex
    error: float

    def __complex__(self):
        return complex(self.value)

    def __abs__(self):
        return abs(self.value)


# ---------------------------------------------------------------------------
# Dilations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dilation:
    """Homogeneous dilation ``lam.t = (lam**a_1 t_1, ..., lam**a_d t_d)``."""

    exponents: tuple

    def __post_init__(self):
        exps = tuple(float(a) for a in np.atleast_1d(self.exponents))
        if not exps:
            raise ValueError("a dilation needs at least one exponent")
        if not all(math.isfinite(a) and a > 0 for a in exps):
            raise ValueError(f"dilation exponents must be positive, got {exps}")
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def standard(cls, d):
        return cls((1.0,) * d)

    @property
    def d(self):
        return len(self.exponents)

    @property
    def is_standard(self):
        return all(a == 1.0 for a in self.exponents)

    def scale(self, lam):
        """Per-axis factors ``lam**a_i``."""
        lam = float(lam)
        if not lam > 0 or not math.isfinite(lam):
            raise ValueError(f"lambda must be positive and finite, got {lam}")
        return np.power(lam, np.asarray(self.exponents))


def apply_dilation(dil: Dilation, lam, t):
    """Return ``lam.t``; ``t`` may be a single point or an ``(n, d)`` array."""
    t = np.asarray(t, dtype=float)
    if t.shape[-1:] != (dil.d,):
        raise DimensionError(
            f"point has dimension {t.shape[-1] if t.ndim else 0}, dilation has {dil.d}")
    return t * dil.scale(lam)


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------

def _as_points(x, d, name="point"):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != d:
        raise DimensionError(f"{name} must have dimension {d}, got shape {x.shape}")
    return x


class Measure:
    """Common interface of the measure variants."""

    kind = "abstract"
    is_atomic = False
    #: dimension of the parameter domain used by quadrature rules
    param_dim = 0

    d: int

    def bbox(self):
        raise NotImplementedError

    def _sample(self, n, rng):
        raise UnsupportedError(f"sampling is not implemented for {self.kind}")

    def _quadrature(self, n):
        raise UnsupportedError(f"no quadrature rule for {self.kind}")

    def _transform(self, xis, with_error=True):
        """Deterministic transform route; ``None`` if the variant has none."""
        return None

    def to_dict(self):
        raise NotImplementedError

    def diameter(self):
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))


def _atomic_transform(points, weights, xis):
    phase = xis @ points.T
    vals = np.exp(-1j * phase) @ weights
    return vals, np.zeros(len(xis))


@dataclass(eq=False)
class Dirac(Measure):
    point: np.ndarray
    kind = "dirac"
    is_atomic = True

    def __post_init__(self):
        self.point = np.atleast_1d(np.asarray(self.point, dtype=float))
        if self.point.ndim != 1:
            raise DimensionError("Dirac point must be a vector")
        self.d = len(self.point)

    def atoms(self):
        return self.point[None, :], np.ones(1)

    def bbox(self):
        return self.point.copy(), self.point.copy()

    def _sample(self, n, rng):
        return np.tile(self.point, (n, 1))

    def _transform(self, xis, with_error=True):
        return _atomic_transform(*self.atoms(), xis)

    def to_dict(self):
        return {"type": "dirac", "point": self.point.tolist()}


@dataclass(eq=False)
class Atomic(Measure):
    points: np.ndarray
    weights: np.ndarray
    kind = "atomic"
    is_atomic = True

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self.weights = np.asarray(self.weights, dtype=float)
        if self.points.ndim != 2 or len(self.points) != len(self.weights) or not len(self.weights):
            raise DimensionError("atomic measure needs matching, nonempty points and weights")
        if np.any(self.weights < 0):
            raise ValueError("atomic weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"atomic weights sum to {self.weights.sum()!r}, not 1")
        self.d = self.points.shape[1]

    def atoms(self):
        return self.points, self.weights

    def bbox(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def _sample(self, n, rng):
        idx = rng.choice(len(self.weights), size=n, p=self.weights / self.weights.sum())
        return self.points[idx]

    def _transform(self, xis, with_error=True):
        return _atomic_transform(self.points, self.weights, xis)

    def to_dict(self):
        return {"type": "atomic", "points": self.points.tolist(),
                "weights": self.weights.tolist()}


def _interval_transform(xi, a, b, with_error):
    """Normalized Lebesgue transform on [a, b] by composite Gauss-Legendre."""
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.shape, dtype=complex)
    err = np.zeros(xi.shape)
    for idx, panels in bucket_by_panels(np.abs(xi) * (b - a)):
        nodes, w = composite_gauss(a, b, panels, 8)
        z = xi[idx]
        out[idx] = np.exp(-1j * np.outer(z, nodes)) @ w / (b - a)
        if with_error:
            n6, w6 = composite_gauss(a, b, panels, 6)
            coarse = np.exp(-1j * np.outer(z, n6)) @ w6 / (b - a)
            err[idx] = np.abs(out[idx] - coarse) + _EPS_ERR
    return out, err


@dataclass(eq=False)
class LebesgueBox(Measure):
    lower: np.ndarray
    upper: np.ndarray
    kind = "box"

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise DimensionError("box corners must be vectors of equal length")
        if np.any(self.upper <= self.lower):
            raise ValueError("box needs lower < upper on every axis")
        self.d = len(self.lower)
        self.param_dim = self.d

    def bbox(self):
        return self.lower.copy(), self.upper.copy()

    def _sample(self, n, rng):
        return self.lower + (self.upper - self.lower) * rng.random((n, self.d))

    def _quadrature(self, n):
        per_axis = max(8, int(round(n ** (1.0 / self.d))))
        panels = max(1, per_axis // 8)
        axes = [composite_gauss(lo, hi, panels) for lo, hi in zip(self.lower, self.upper)]
        return _tensor_rule(axes, self.upper - self.lower)

    def _transform(self, xis, with_error=True):
        vals = np.ones(len(xis), dtype=complex)
        rel = np.zeros(len(xis))
        for j in range(self.d):
            v, e = _interval_transform(xis[:, j], self.lower[j], self.upper[j], with_error)
            vals *= v
            rel += e
        return vals, rel

    def to_dict(self):
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


def _tensor_rule(axes, lengths=None, densities=None):
    """Tensor product of 1-d rules; weights normalized to total mass one."""
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=1), axis=1)
    if densities is not None:
        weights = weights * densities(nodes)
    return nodes, weights / weights.sum()


def _unique_norms(norms):
    """Deduplicate norms equal to 13 significant digits (radial transforms)."""
    key = np.round(norms, 13 - np.floor(np.log10(np.max(norms, initial=1.0) + 1.0)).astype(int))
    uniq, inv = np.unique(key, return_inverse=True)
    return uniq, inv


def sphere_area(d):
    """Surface area of the unit sphere S^{d-1} in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def sphere_radial(rho, d, with_error=True):
    """Transform of normalized surface measure on the unit sphere of R^d at |xi| = rho.

    Evaluates ``int_0^pi exp(-i rho cos th) sin(th)**(d-2) d th`` by composite
    Gauss-Legendre in the polar angle and normalizes; real valued by symmetry.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if d == 1:
        return np.cos(rho).astype(complex), np.zeros(rho.shape)
    norm = math.exp(0.5 * math.log(math.pi) + gammaln((d - 1) / 2.0) - gammaln(d / 2.0))
    out = np.empty(rho.shape, dtype=complex)
    err = np.zeros(rho.shape)
    for idx, panels in bucket_by_panels(2.0 * np.abs(rho), minimum=4):
        th, w = composite_gauss(0.0, math.pi, panels, 8)
        w = w * np.sin(th) ** (d - 2) / norm
        out[idx] = np.cos(np.outer(rho[idx], np.cos(th))) @ w
        if with_error:
            th6, w6 = composite_gauss(0.0, math.pi, panels, 6)
            w6 = w6 * np.sin(th6) ** (d - 2) / norm
            err[idx] = np.abs(out[idx] - np.cos(np.outer(rho[idx], np.cos(th6))) @ w6) + _EPS_ERR
    return out, err


def _orthonormal_frame(axis):
    """Rows: ``axis`` normalized followed by an orthonormal complement."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    q, _ = np.linalg.qr(np.column_stack([axis, np.eye(len(axis))]))
    frame = q.T[: len(axis)].copy()
    if frame[0] @ axis < 0:
        frame[0] = -frame[0]
    return frame


@dataclass(eq=False)
class SphereSurface(Measure):
    """Normalized surface measure on the sphere of radius ``radius`` in R^d.

    ``cutoff`` optionally restricts to a polynomial cap bump
    ``psi(w) = (1 - (s/width)**2)**2`` with ``s = 1 - <w, axis>`` (d = 2 or 3).
    """

    dim: int
    radius: float = 1.0
    cutoff: dict | None = None
    kind = "sphere"

    def __post_init__(self):
        self.d = int(self.dim)
        self.radius = float(self.radius)
        if self.d < 1:
            raise ValueError("sphere dimension must be positive")
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        self.param_dim = max(self.d - 1, 1)
        if self.cutoff is not None:
            if self.d not in (2, 3):
                raise UnsupportedError("sphere cutoffs are implemented for d = 2, 3 only")
            axis = np.asarray(self.cutoff.get("axis", [0.0] * (self.d - 1) + [1.0]), dtype=float)
            width = float(self.cutoff.get("width", 1.0))
            if axis.shape != (self.d,) or not 0 < width <= 2:
                raise ValueError("cutoff needs an axis of length d and width in (0, 2]")
            norm = np.linalg.norm(axis)
            if abs(norm - 1.0) > 1e-14:
                axis = axis / norm
            self.cutoff = {"axis": axis.tolist(), "width": width}

    def _psi(self, s):
        w = self.cutoff["width"]
        return np.where(s < w, (1 - (s / w) ** 2) ** 2, 0.0)

    def bbox(self):
        r = self.radius
        return np.full(self.d, -r), np.full(self.d, r)

    def _sample(self, n, rng):
        if self.cutoff is None:
            g = rng.standard_normal((n, self.d))
            return self.radius * g / np.linalg.norm(g, axis=1, keepdims=True)
        axis = np.asarray(self.cutoff["axis"])
        out = np.empty((0, self.d))
        while len(out) < n:
            g = rng.standard_normal((4 * n + 16, self.d))
            u = g / np.linalg.norm(g, axis=1, keepdims=True)
            keep = rng.random(len(u)) < self._psi(1 - u @ axis)
            out = np.vstack([out, u[keep]])
        return self.radius * out[:n]

    def _rule(self, n_polar, n_azimuth=None):
        """Nodes on the unit sphere and normalized weights."""
        if self.d == 1:
            return np.array([[-1.0], [1.0]]), np.array([0.5, 0.5])
        if self.d == 2:
            if self.cutoff is None:
                th = 2 * math.pi * np.arange(n_polar) / n_polar
                return np.column_stack([np.cos(th), np.sin(th)]), np.full(n_polar, 1.0 / n_polar)
            w = self.cutoff["width"]
            half = math.pi if w >= 2 else math.acos(1 - w)
            th, wt = composite_gauss(-half, half, max(1, n_polar // 8))
            wt = wt * self._psi(1 - np.cos(th))
            frame = _orthonormal_frame(self.cutoff["axis"])
            pts = np.outer(np.cos(th), frame[0]) + np.outer(np.sin(th), frame[1])
            return pts, wt / wt.sum()
        if self.d == 3:
            n_az = n_azimuth or 2 * n_polar
            ph = 2 * math.pi * np.arange(n_az) / n_az
            if self.cutoff is None:
                u, wu = composite_gauss(-1.0, 1.0, max(1, n_polar // 8))
                frame = np.eye(3)[[2, 0, 1]]
            else:
                w = self.cutoff["width"]
                u, wu = composite_gauss(1.0 - w, 1.0, max(1, n_polar // 8))
                wu = wu * self._psi(1 - u)
                frame = _orthonormal_frame(self.cutoff["axis"])
            sin_t = np.sqrt(np.clip(1 - u ** 2, 0, None))
            pts = (u[:, None, None] * frame[0]
                   + (sin_t[:, None] * np.cos(ph))[:, :, None] * frame[1]
                   + (sin_t[:, None] * np.sin(ph))[:, :, None] * frame[2]).reshape(-1, 3)
            wts = np.repeat(wu, n_az)
            return pts, wts / wts.sum()
        raise UnsupportedError("sphere quadrature is implemented for d <= 3")

    def _quadrature(self, n):
        if self.d == 1:
            pts, w = self._rule(0)
        elif self.d == 2:
            pts, w = self._rule(max(8, int(n)))
        else:
            n_polar = max(8, int(math.sqrt(max(n, 1) / 2.0)))
            pts, w = self._rule(n_polar)
        return self.radius * pts, w

    def _transform(self, xis, with_error=True):
        norms = np.linalg.norm(xis, axis=1)
        if self.cutoff is None:
            uniq, inv = _unique_norms(norms)
            vals, errs = sphere_radial(self.radius * uniq, self.d, with_error)
            return vals[inv], errs[inv]
        vals = np.empty(len(xis), dtype=complex)
        errs = np.zeros(len(xis))
        w = self.cutoff["width"]
        for i, xi in enumerate(xis):
            span = self.radius * norms[i]
            if self.d == 2:
                n_polar = 8 * (oscillation_panels(span * min(w, 2.0) * 2, minimum=4))
                rules = [self._rule(n_polar), self._rule(n_polar + 8 * max(1, n_polar // 32))]
            else:
                n_polar = 8 * oscillation_panels(span * w, minimum=4)
                n_az = int(2 * span * math.sqrt(2 * min(w, 2.0))) + 16
                rules = [self._rule(n_polar, n_az), self._rule(n_polar + 8, n_az + 8)]
            est = [np.exp(-1j * (self.radius * pts @ xi)) @ wt for pts, wt in rules]
            vals[i] = est[0]
            errs[i] = abs(est[0] - est[1]) + _EPS_ERR
        return vals, errs

    def to_dict(self):
        return {"type": "sphere", "d": self.d, "radius": self.radius, "cutoff": self.cutoff}


@dataclass(eq=False)
class Density(Measure):
    """Absolutely continuous measure with a closed-form density.

    ``density='gaussian'``: normal with ``center`` and ``sigma``, truncated to the
    declared box ``center +/- 8 sigma``.  ``density='ball'``: uniform on the ball
    of ``radius`` around ``center``.
    """

    density: str
    params: dict
    kind = "density"
    TRUNCATION = 8.0

    def __post_init__(self):
        p = dict(self.params)
        self.center = np.atleast_1d(np.asarray(p.get("center", [0.0]), dtype=float))
        self.d = len(self.center)
        self.param_dim = self.d
        if self.density == "gaussian":
            self.sigma = float(p.get("sigma", 1.0))
            if not self.sigma > 0:
                raise ValueError("gaussian sigma must be positive")
        elif self.density == "ball":
            self.radius = float(p.get("radius", 1.0))
            if not self.radius > 0:
                raise ValueError("ball radius must be positive")
        else:
            raise UnsupportedError(f"unknown density {self.density!r}; use 'gaussian' or 'ball'")
        self.params = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in p.items()}
        self.params["center"] = self.center.tolist()

    def bbox(self):
        half = self.TRUNCATION * self.sigma if self.density == "gaussian" else self.radius
        return self.center - half, self.center + half

    def _sample(self, n, rng):
        if self.density == "gaussian":
            out = np.empty((0, self.d))
            while len(out) < n:
                g = rng.standard_normal((n, self.d))
                g = g[np.all(np.abs(g) <= self.TRUNCATION, axis=1)]
                out = np.vstack([out, g])
            return self.center + self.sigma * out[:n]
        g = rng.standard_normal((n, self.d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.random(n) ** (1.0 / self.d)
        return self.center + g * r[:, None]

    def _quadrature(self, n):
        if self.density == "gaussian":
            per_axis = max(32, int(round(n ** (1.0 / self.d))))
            lo, hi = self.bbox()
            axes = [composite_gauss(a, b, max(4, per_axis // 8)) for a, b in zip(lo, hi)]
            dens = lambda x: np.exp(-0.5 * np.sum(((x - self.center) / self.sigma) ** 2, axis=1))
            return _tensor_rule(axes, densities=dens)
        if self.d > 3:
            raise UnsupportedError("ball quadrature is implemented for d <= 3")
        n_r = max(8, int(round(n ** (1.0 / self.d))))
        r, wr = composite_gauss(0.0, 1.0, max(1, n_r // 8))
        wr = wr * self.d * r ** (self.d - 1)
        sph = SphereSurface(self.d)
        pts, ws = sph._quadrature(max(8, n // n_r))
        nodes = (r[:, None, None] * pts[None]).reshape(-1, self.d)
        weights = np.outer(wr, ws).ravel()
        return self.center + self.radius * nodes, weights / weights.sum()

    def _transform(self, xis, with_error=True):
        shift = np.exp(-1j * xis @ self.center)
        if self.density == "gaussian":
            half = self.TRUNCATION * self.sigma
            vals = np.ones(len(xis), dtype=complex)
            err = np.zeros(len(xis))
            for j in range(self.d):
                z = xis[:, j]
                v = np.empty(len(z), dtype=complex)
                e = np.zeros(len(z))
                for idx, panels in bucket_by_panels(np.abs(z) * 2 * half, minimum=32):
                    for order, slot in ((8, v), (6, None)):
                        t, w = composite_gauss(-half, half, panels, order)
                        w = w * np.exp(-0.5 * (t / self.sigma) ** 2)
                        est = np.exp(-1j * np.outer(z[idx], t)) @ w / w.sum()
                        if slot is not None:
                            v[idx] = est
                        elif with_error:
                            e[idx] = np.abs(v[idx] - est) + _EPS_ERR
                vals *= v
                err += e
            return shift * vals, err
        # ball: radial average of sphere transforms
        uniq, inv = _unique_norms(np.linalg.norm(xis, axis=1))
        vals, err = self._ball_radial(uniq, with_error)
        return shift * vals[inv], err[inv]

    def _ball_radial(self, norms, with_error):
        vals = np.empty(len(norms), dtype=complex)
        err = np.zeros(len(norms))
        for idx, panels in bucket_by_panels(self.radius * norms, minimum=2):
            s, w = composite_gauss(0.0, 1.0, panels, 8)
            w = w * self.d * s ** (self.d - 1)
            inner, inner_err = sphere_radial(np.outer(norms[idx], self.radius * s).ravel(), self.d,
                                             with_error)
            vals[idx] = inner.reshape(len(idx), -1) @ w
            if with_error:
                err[idx] = inner_err.reshape(len(idx), -1) @ w
        return vals, err

    def to_dict(self):
        return {"type": "density", "density": self.density, **self.params}


@dataclass(eq=False)
class CurvePushforward(Measure):
    """Pushforward of Lebesgue measure on [0, 1] under ``w -> (q_1 w, ..., q_d w**d)``."""

    q: tuple
    kind = "curve"
    param_dim = 1

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if self.q.ndim != 1 or not len(self.q):
            raise DimensionError("curve coefficients must be a nonempty vector")
        if np.any(self.q == 0) or not np.all(np.isfinite(self.q)):
            raise ValueError(f"curve coefficients must be finite and nonzero, got {self.q.tolist()}")
        self.d = len(self.q)
        self.powers = np.arange(1, self.d + 1)

    def curve(self, w):
        w = np.asarray(w, dtype=float)
        return self.q * w[..., None] ** self.powers

    def bbox(self):
        return np.minimum(self.q, 0.0), np.maximum(self.q, 0.0)

    def _sample(self, n, rng):
        return self.curve(rng.random(n))

    def _quadrature(self, n):
        w, wt = composite_gauss(0.0, 1.0, max(1, int(n) // 8))
        return self.curve(w), wt

    def _transform(self, xis, with_error=True):
        span = np.abs(xis * self.q) @ self.powers
        vals = np.empty(len(xis), dtype=complex)
        err = np.zeros(len(xis))
        for idx, panels in bucket_by_panels(span, minimum=2):
            w, wt = composite_gauss(0.0, 1.0, panels, 8)
            vals[idx] = np.exp(-1j * (xis[idx] @ self.curve(w).T)) @ wt
            if with_error:
                w6, wt6 = composite_gauss(0.0, 1.0, panels, 6)
                coarse = np.exp(-1j * (xis[idx] @ self.curve(w6).T)) @ wt6
                err[idx] = np.abs(vals[idx] - coarse) + _EPS_ERR
        return vals, err

    def to_dict(self):
        return {"type": "curve", "q": self.q.tolist()}


def cantor_intervals(ratio, depth):
    """Left endpoints (sorted) and common length of the depth-``depth`` Cantor intervals."""
    left = np.zeros(1)
    length = 1.0
    for _ in range(depth):
        new_len = length * ratio
        left = np.concatenate([left, left + length - new_len])
        length = new_len
    return np.sort(left), length


@dataclass(eq=False)
class BrownianImage(Measure):
    """Image of the depth-truncated Cantor measure under a sampled Brownian path.

    The base set is the self-similar Cantor set with two pieces of ratio
    ``cantor_ratio``, truncated at ``depth`` (uniform mass on each of its
    ``2**depth`` intervals).  The path is a standard ``d``-dimensional Brownian
    motion on [0, 1] sampled on the uniform grid of ``resolution`` steps and
    linearly interpolated; only grid points touching the Cantor intervals are
    drawn, which has the same law as drawing the whole grid.
    """

    cantor_ratio: float
    depth: int
    dim: int = 2
    path_seed: int = 0
    resolution: int | None = None
    kind = "brownian"
    param_dim = 1
    MAX_PIECES = 4_000_000

    def __post_init__(self):
        self.cantor_ratio = float(self.cantor_ratio)
        self.depth = int(self.depth)
        self.d = int(self.dim)
        self.path_seed = int(self.path_seed)
        if not 0 < self.cantor_ratio <= 0.5:
            raise ValueError("cantor_ratio must lie in (0, 1/2]")
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.d < 2:
            raise ValueError("Brownian images are built for d >= 2")
        min_res = int(math.ceil(self.cantor_ratio ** (-self.depth) - 1e-9))
        if self.resolution is None:
            self.resolution = min_res
        self.resolution = int(self.resolution)
        if self.resolution < min_res:
            raise ResolutionError(
                f"resolution {self.resolution} too coarse for depth {self.depth}: Cantor "
                f"intervals of length {self.cantor_ratio ** self.depth:.3g} would span less "
                f"than one path step; need resolution >= {min_res}")
        self._build()

    @property
    def hausdorff_dimension(self):
        """Hausdorff dimension ``log 2 / log(1/ratio)`` of the (untruncated) base set."""
        return math.log(2.0) / math.log(1.0 / self.cantor_ratio)

    def _build(self):
        left, length = cantor_intervals(self.cantor_ratio, self.depth)
        n = self.resolution
        i0 = np.floor(left * n).astype(np.int64)
        i1 = np.minimum(np.ceil((left + length) * n).astype(np.int64), n)
        counts = i1 - i0 + 1
        if counts.sum() > self.MAX_PIECES:
            raise ResolutionError(
                f"resolution {n} with depth {self.depth} needs {counts.sum()} path points; "
                f"limit is {self.MAX_PIECES}")
        grid_idx = np.unique(np.concatenate(
            [np.zeros(1, np.int64)] + [np.arange(a, b + 1) for a, b in zip(i0, i1)]))
        rng = substream(self.path_seed, "brownian-path")
        steps = np.diff(grid_idx).astype(float) / n
        incr = rng.standard_normal((len(steps), self.d)) * np.sqrt(steps)[:, None]
        values = np.vstack([np.zeros((1, self.d)), np.cumsum(incr, axis=0)])
        self._grid_idx = grid_idx
        self._grid_val = values
        self._left = left
        self._length = length
        # breakpoints of every piece on which the interpolated path is linear
        starts, ends = [], []
        for a, ia, ib in zip(left, i0, i1):
            inner = np.arange(ia + 1, ib) / n
            inner = inner[(inner > a) & (inner < a + length)]
            pts = np.concatenate([[a], inner, [a + length]])
            starts.append(pts[:-1])
            ends.append(pts[1:])
        s0 = np.concatenate(starts)
        s1 = np.concatenate(ends)
        self._p0 = self.path(s0)
        self._dp = self.path(s1) - self._p0
        self._wts = (s1 - s0) / (length * len(left))
        allp = np.vstack([self._p0, self._p0 + self._dp])
        self._bbox = (allp.min(axis=0), allp.max(axis=0))

    def path(self, s):
        """Interpolated path at times ``s`` lying inside the Cantor intervals."""
        s = np.asarray(s, dtype=float)
        x = s * self.resolution
        i = np.clip(np.floor(x).astype(np.int64), 0, self.resolution - 1)
        frac = (x - i)[:, None]
        j = np.searchsorted(self._grid_idx, i)
        return self._grid_val[j] * (1 - frac) + self._grid_val[j + 1] * frac

    def bbox(self):
        return self._bbox[0].copy(), self._bbox[1].copy()

    def sample_parameters(self, n, rng):
        """Draw base-set times ``w`` from the truncated Cantor measure."""
        k = rng.integers(0, len(self._left), size=n)
        return self._left[k] + self._length * rng.random(n)

    def _sample(self, n, rng):
        return self.path(self.sample_parameters(n, rng))

    def _quadrature(self, n):
        per_piece = max(1, int(n) // len(self._wts))
        x, w = np.polynomial.legendre.leggauss(per_piece)
        s = 0.5 * (x + 1.0)
        nodes = (self._p0[:, None, :] + s[None, :, None] * self._dp[:, None, :]).reshape(-1, self.d)
        weights = np.outer(self._wts, 0.5 * w).ravel()
        return nodes, weights

    def _transform(self, xis, with_error=True):
        out = np.empty(len(xis), dtype=complex)
        chunk = max(1, 2_000_000 // len(self._wts))
        for start in range(0, len(xis), chunk):
            x = xis[start:start + chunk]
            ph0 = x @ self._p0.T
            ph = x @ self._dp.T
            small = np.abs(ph) < 1e-6
            safe = np.where(small, 1.0, ph)
            seg = np.where(small, 1 - 0.5j * ph - ph ** 2 / 6, (1 - np.exp(-1j * safe)) / (1j * safe))
            out[start:start + chunk] = (np.exp(-1j * ph0) * seg) @ self._wts
        return out, np.full(len(xis), _EPS_ERR)

    @property
    def n_pieces(self):
        return len(self._wts)

    def to_dict(self):
        return {"type": "brownian", "cantor_ratio": self.cantor_ratio, "depth": self.depth,
                "d": self.d, "path_seed": self.path_seed, "resolution": self.resolution}


@dataclass(eq=False)
class Dilated(Measure):
    """The dilated measure ``nu_lam`` with ``int phi d nu_lam = int phi(lam.t) d nu(t)``."""

    base: Measure
    dilation: Dilation
    lam: float
    kind = "dilated"

    def __post_init__(self):
        if self.dilation.d != self.base.d:
            raise DimensionError(
                f"dilation has {self.dilation.d} exponents, measure has dimension {self.base.d}")
        self.lam = float(self.lam)
        self.factors = self.dilation.scale(self.lam)
        self.d = self.base.d
        self.param_dim = self.base.param_dim

    def bbox(self):
        lo, hi = self.base.bbox()
        return lo * self.factors, hi * self.factors

    def _sample(self, n, rng):
        return self.base._sample(n, rng) * self.factors

    def _quadrature(self, n):
        nodes, w = self.base._quadrature(n)
        return nodes * self.factors, w

    def to_dict(self):
        return {"type": "dilated", "base": self.base.to_dict(),
                "exponents": list(self.dilation.exponents), "lambda": self.lam}


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def sample(nu: Measure, n, seed=0, start=0):
    """Draw points ``start, ..., start + n - 1`` of the seeded sample stream of ``nu``.

    Points are generated in fixed blocks, each from its own substream, so any
    partition of the index range reproduces the same points.
    """
    n = int(n)
    if n < 1:
        raise ValueError("sample size must be at least 1")
    first, last = start // SAMPLE_BLOCK, (start + n - 1) // SAMPLE_BLOCK
    blocks = [nu._sample(SAMPLE_BLOCK, substream(seed, "sample", nu.kind, b))
              for b in range(first, last + 1)]
    pts = np.vstack(blocks)
    off = start - first * SAMPLE_BLOCK
    return pts[off:off + n]


def _quadrature_estimate(nu, phi, budget):
    nodes, w = nu._quadrature(budget)
    value = complex(np.asarray(phi(nodes)) @ w)
    coarse_budget = max(8, int(budget) // (2 ** nu.param_dim))
    cnodes, cw = nu._quadrature(coarse_budget)
    coarse = complex(np.asarray(phi(cnodes)) @ cw)
    return Estimate(value, abs(value - coarse) + _EPS_ERR * max(1.0, abs(value)))


def _monte_carlo_estimate(nu, phi, n, seed, key="integrate"):
    pts = sample(nu, n, derive_seed(seed, key))
    vals = np.asarray(phi(pts), dtype=complex)
    mean = vals.mean()
    if n > 1:
        se = math.sqrt((vals.real.var(ddof=1) + vals.imag.var(ddof=1)) / n)
    else:
        se = math.inf
    return Estimate(complex(mean), 3.0 * se)


def integrate(nu: Measure, phi, budget=4096, seed=0, method="auto") -> Estimate:
    """Approximate ``int phi d nu`` with an error estimate.

    Parameters
    ----------
    nu : Measure
    phi : callable
        Maps an ``(n, d)`` array of points to ``n`` (real or complex) values.
    budget : int
        Quadrature node count or Monte Carlo sample count.
    method : {"auto", "quadrature", "monte_carlo"}
        ``auto`` is exact for atomic measures, uses a quadrature rule when the
        variant has one and falls back to Monte Carlo otherwise.  Monte Carlo
        errors are three sample standard errors.
    """
    if budget is None or int(budget) <= 0:
        raise ValueError("integration budget must be positive")
    budget = int(budget)
    if nu.is_atomic:
        pts, w = nu.atoms()
        return Estimate(complex(np.asarray(phi(pts)) @ w), 0.0)
    if method not in ("auto", "quadrature", "monte_carlo"):
        raise ValueError(f"unknown integration method {method!r}")
    if method != "monte_carlo":
        try:
            return _quadrature_estimate(nu, phi, budget)
        except UnsupportedError:
            if method == "quadrature":
                raise
    return _monte_carlo_estimate(nu, phi, budget, seed)


def dilate_pushforward(nu: Measure, dil: Dilation, lam) -> Measure:
    """The measure ``nu_lam``; atoms move exactly, other variants are wrapped."""
    if dil.d != nu.d:
        raise DimensionError(f"dilation has {dil.d} exponents, measure has dimension {nu.d}")
    factors = dil.scale(lam)
    if isinstance(nu, Dirac):
        return Dirac(nu.point * factors)
    if isinstance(nu, Atomic):
        return Atomic(nu.points * factors, nu.weights.copy())
    return Dilated(nu, dil, lam)


def make_curve_measure(q) -> CurvePushforward:
    return CurvePushforward(q)


def make_brownian_image(cantor_ratio, depth, d=2, seed=0, resolution=None) -> BrownianImage:
    return BrownianImage(cantor_ratio, depth, d, seed, resolution)


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------

def measure_from_dict(desc) -> Measure:
    """Build a measure from its JSON descriptor (see README for the schema)."""
    if not isinstance(desc, dict) or "type" not in desc:
        raise ValueError("measure descriptor must be an object with a 'type' field")
    t = desc["type"]
    if t == "dirac":
        return Dirac(desc["point"])
    if t == "atomic":
        return Atomic(desc["points"], desc["weights"])
    if t == "box":
        return LebesgueBox(desc["lower"], desc["upper"])
    if t == "sphere":
        return SphereSurface(desc["d"], desc.get("radius", 1.0), desc.get("cutoff"))
    if t == "density":
        params = {k: v for k, v in desc.items() if k not in ("type", "density")}
        return Density(desc["density"], params)
    if t == "curve":
        return CurvePushforward(desc["q"])
    if t == "brownian":
        return BrownianImage(desc["cantor_ratio"], desc["depth"], desc.get("d", 2),
                             desc.get("path_seed", 0), desc.get("resolution"))
    if t == "dilated":
        return Dilated(measure_from_dict(desc["base"]), Dilation(desc["exponents"]),
                       desc["lambda"])
    raise ValueError(f"unknown measure type {t!r}")


MEASURE_TYPES = ("dirac", "atomic", "box", "sphere", "density", "curve", "brownian", "dilated")
