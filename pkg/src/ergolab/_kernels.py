"""Compiled inner loops for the direct grid convolution engine."""
import os

import numba
import numpy as np
from numba import njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    # skip probing an incompatible TBB runtime
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True, parallel=True)
def shifted_multilinear_sum(values, shifts, weights, out):
    """Accumulate ``out[i] += w_q * phi(i - s_q)`` over quadrature nodes ``q``.

    ``values`` is a 3-d complex array (lower-dimensional grids carry unit
    axes), ``shifts`` are per-node offsets in grid units and reads outside the
    array are zero.  Off-grid reads use multilinear interpolation.
    """
    n0, n1, n2 = values.shape
    for q in range(shifts.shape[0]):
        f0 = np.floor(shifts[q, 0])
        f1 = np.floor(shifts[q, 1])
        f2 = np.floor(shifts[q, 2])
        r0 = shifts[q, 0] - f0
        r1 = shifts[q, 1] - f1
        r2 = shifts[q, 2] - f2
        b0, b1, b2 = int(f0), int(f1), int(f2)
        w = weights[q]
        c0 = (1.0 - r0, r0)
        c1 = (1.0 - r1, r1)
        c2 = (1.0 - r2, r2)
        for i in prange(n0):
            for a in range(2):
                ia = i - b0 - a
                wa = c0[a]
                if ia < 0 or ia >= n0 or wa == 0.0:
                    continue
                for j in range(n1):
                    for b in range(2):
                        jb = j - b1 - b
                        wb = wa * c1[b]
                        if jb < 0 or jb >= n1 or wb == 0.0:
                            continue
                        for k in range(n2):
                            acc = 0j
                            for c in range(2):
                                kc = k - b2 - c
                                wc = wb * c2[c]
                                if kc < 0 or kc >= n2 or wc == 0.0:
                                    continue
                                acc += wc * values[ia, jb, kc]
                            out[i, j, k] += w * acc
    return out
