"""Composite Gauss-Legendre rules used by the quadrature routes."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _gauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def composite_gauss(a, b, panels, order=8):
    """Nodes and weights of an ``order``-point rule on ``panels`` equal panels of [a, b]."""
    panels = max(int(panels), 1)
    x, w = _gauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


def oscillation_panels(phase_span, per_panel=2.0, minimum=1):
    """Panel count keeping the phase change per panel below ``per_panel`` radians."""
    return max(int(np.ceil(abs(phase_span) / per_panel)), minimum)


def bucket_by_panels(spans, per_panel=2.0, minimum=1):
    """Group phase spans by power-of-two panel counts.

    Yields ``(indices, panels)`` so each group can share one rule that
    resolves its largest span.
    """
    spans = np.abs(np.asarray(spans, dtype=float))
    panels = np.maximum(np.ceil(spans / per_panel), minimum)
    levels = np.ceil(np.log2(panels)).astype(int)
    for lev in np.unique(levels):
        yield np.nonzero(levels == lev)[0], int(2 ** lev)
