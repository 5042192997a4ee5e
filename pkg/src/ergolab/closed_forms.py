"""Closed-form Fourier transforms used as oracles and by the spectral grid engine.

All transforms use the convention ``nu_hat(xi) = int exp(-i <xi, t>) d nu(t)``.
"""
import math

import numpy as np
from scipy.special import gammaln, jv

from .errors import UnsupportedError


def interval_transform(xi, a, b):
    """Transform of normalized Lebesgue measure on [a, b] at scalar frequencies."""
    xi = np.asarray(xi, dtype=float)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return np.exp(-1j * xi * mid) * np.sinc(xi * half / math.pi)


def box_transform(xis, lower, upper):
    """Product of interval sincs; ``xis`` has shape ``(..., d)``."""
    xis = np.asarray(xis, dtype=float)
    out = np.ones(xis.shape[:-1], dtype=complex)
    for j, (a, b) in enumerate(zip(lower, upper)):
        out = out * interval_transform(xis[..., j], a, b)
    return out


def sphere_profile(rho, d):
    """Radial profile of normalized surface measure on the unit sphere of R^d.

    ``cos(rho)`` for d=1, ``J_0(rho)`` for d=2, ``sin(rho)/rho`` for d=3 and
    ``Gamma(d/2) (2/rho)**(d/2-1) J_{d/2-1}(rho)`` in general.
    """
    rho = np.abs(np.asarray(rho, dtype=float))
    if d == 1:
        return np.cos(rho)
    if d == 2:
        return jv(0, rho)
    if d == 3:
        return np.sinc(rho / math.pi)
    order = d / 2.0 - 1.0
    safe = np.where(rho > 0, rho, 1.0)
    val = np.exp(gammaln(d / 2.0) + order * np.log(2.0 / safe)) * jv(order, safe)
    return np.where(rho > 0, val, 1.0)


def ball_profile(rho, d):
    """Radial profile of the uniform probability measure on the unit ball of R^d."""
    rho = np.abs(np.asarray(rho, dtype=float))
    order = d / 2.0
    safe = np.where(rho > 0, rho, 1.0)
    val = np.exp(gammaln(d / 2.0 + 1.0) + order * np.log(2.0 / safe)) * jv(order, safe)
    return np.where(rho > 0, val, 1.0)


def gaussian_transform(xis, center, sigma):
    """Transform of the (untruncated) normal law ``N(center, sigma**2 I)``."""
    xis = np.asarray(xis, dtype=float)
    return np.exp(-1j * (xis @ np.asarray(center, dtype=float))
                  - 0.5 * sigma ** 2 * np.sum(xis ** 2, axis=-1))


def dog_multiplier(xis, sigma_small=1.0, sigma_large=2.0):
    """Difference-of-Gaussians transform profile; vanishes at the origin."""
    r2 = np.sum(np.asarray(xis, dtype=float) ** 2, axis=-1)
    return np.exp(-0.5 * sigma_small ** 2 * r2) - np.exp(-0.5 * sigma_large ** 2 * r2)


def has_closed_form(nu):
    from . import measures as m

    if isinstance(nu, m.Dilated):
        return has_closed_form(nu.base)
    if isinstance(nu, m.SphereSurface):
        return nu.cutoff is None
    if isinstance(nu, m.CurvePushforward):
        return nu.d == 1
    return isinstance(nu, (m.Dirac, m.Atomic, m.LebesgueBox, m.Density, m.BrownianImage))


def closed_form_transform(nu, xis):
    """Closed-form transform of ``nu`` at the rows of ``xis``.

    Raises :class:`UnsupportedError` for variants without a built-in oracle.
    The Gaussian density is treated as untruncated (tail mass below 1e-14).
    """
    from . import measures as m

    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    if isinstance(nu, m.Dilated):
        return closed_form_transform(nu.base, xis * nu.factors)
    if isinstance(nu, (m.Dirac, m.Atomic)):
        pts, w = nu.atoms()
        return np.exp(-1j * xis @ pts.T) @ w
    if isinstance(nu, m.LebesgueBox):
        return box_transform(xis, nu.lower, nu.upper)
    if isinstance(nu, m.SphereSurface) and nu.cutoff is None:
        return sphere_profile(nu.radius * np.linalg.norm(xis, axis=1), nu.d).astype(complex)
    if isinstance(nu, m.CurvePushforward) and nu.d == 1:
        return interval_transform(xis[:, 0], *sorted((0.0, nu.q[0])))
    if isinstance(nu, m.Density):
        if nu.density == "gaussian":
            return gaussian_transform(xis, nu.center, nu.sigma)
        shift = np.exp(-1j * xis @ nu.center)
        return shift * ball_profile(nu.radius * np.linalg.norm(xis, axis=1), nu.d)
    if isinstance(nu, m.BrownianImage):
        return nu._transform(xis, with_error=False)[0]
    raise UnsupportedError(f"no closed-form transform for {nu.kind}")
