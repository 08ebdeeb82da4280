"""Compiled per-path kernels (numba, GIL released, disk-cached).

The rescaled-range statistic needs, for every grid time t,

    max_{1<=s<=t} [X_s - (s/t) X_t]  and  min_{1<=s<=t} [X_s - (s/t) X_t].

Both are support-function queries against the convex hull of the points
(s, X_s): for any slope c, max_s (X_s - c s) is attained at an upper-hull
vertex and the min at a lower-hull vertex.  The kernels grow both hulls
incrementally as t advances through the grid and answer each query by
binary search over hull edge slopes, so a whole path costs O(n + G log n)
instead of O(sum of grid times).
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _hull_push(hs, hx, m, s, x):
    """Append (s, x) to an upper hull of size m; returns the new size."""
    while m >= 2:
        s1 = hs[m - 2]
        x1 = hx[m - 2]
        s2 = hs[m - 1]
        x2 = hx[m - 1]
        # Middle point on or below the chord: drop it.
        if (s2 - s1) * (x - x1) - (x2 - x1) * (s - s1) >= 0.0:
            m -= 1
        else:
            break
    hs[m] = s
    hx[m] = x
    return m + 1


@njit(cache=True, nogil=True, inline="always")
def _hull_query(hs, hx, m, c):
    """max over hull vertices of (x - c*s); hull slopes strictly decrease."""
    ans = m - 1
    lo = 0
    hi = m - 2
    while lo <= hi:
        mid = (lo + hi) // 2
        # Edge slope <= c (cross-multiplied; s is increasing).
        if hx[mid + 1] - hx[mid] <= c * (hs[mid + 1] - hs[mid]):
            ans = mid
            hi = mid - 1
        else:
            lo = mid + 1
    return hx[ans] - c * hs[ans]


@njit(cache=True, nogil=True)
def _row_stats(d, grid, rs_row, x_row, y_row, z_row, us, ux, ls, lx):
    """One path: R/S ratio and partial sums at each grid time.

    us/ux hold the upper hull of (s, X_s), ls/lx the upper hull of
    (s, -X_s), which answers the min query.  rs is NaN where S_t = 0.
    """
    x = 0.0
    y = 0.0
    z = 0.0
    mu = 0
    ml = 0
    s = 0
    for gi in range(grid.shape[0]):
        t = grid[gi]
        while s < t:
            v = d[s]
            x += v
            y += abs(v)
            z += v * v
            s += 1
            fs = float(s)
            mu = _hull_push(us, ux, mu, fs, x)
            ml = _hull_push(ls, lx, ml, fs, -x)
        tf = float(t)
        mean = x / tf
        s2 = z / tf - mean * mean
        x_row[gi] = x
        y_row[gi] = y
        z_row[gi] = z
        if s2 <= 0.0:
            rs_row[gi] = np.nan
        else:
            hi = _hull_query(us, ux, mu, mean)
            lo = -_hull_query(ls, lx, ml, -mean)
            rs_row[gi] = (hi - lo) / np.sqrt(s2)


@njit(cache=True, nogil=True)
def grid_stats_block(block, grid, rs, xg, yg, zg):
    """Row-wise _row_stats over a contiguous block of paths."""
    n = block.shape[1]
    us = np.empty(n + 1)
    ux = np.empty(n + 1)
    ls = np.empty(n + 1)
    lx = np.empty(n + 1)
    for r in range(block.shape[0]):
        _row_stats(block[r], grid, rs[r], xg[r], yg[r], zg[r], us, ux, ls, lx)


@njit(cache=True, nogil=True)
def vdp_em_path(z, f_diff, f_scale, c0, eps, substeps, out):
    """Euler-Maruyama integration of one diffusion path.

    The fine step is h = 1/substeps starting from X = 0 at t = h; z holds
    the n*substeps - 1 standard normals, f_diff[i] = t_i^(2H-1) and
    f_scale[i] = t_i^(-H) with t_i = (i+1) * h the time entering step i.
    out receives the n unit-time increments.
    """
    x = 0.0
    prev = 0.0
    k = 0
    if substeps == 1:
        # X already sits at t = 1, so the first unit increment is zero.
        out[0] = 0.0
        k = 1
    sqrt_h = 1.0 / np.sqrt(float(substeps))
    for i in range(z.shape[0]):
        u = abs(x) * f_scale[i]
        d = f_diff[i] * c0 * (1.0 + eps * u)
        x += np.sqrt(d) * sqrt_h * z[i]
        if (i + 2) % substeps == 0:
            out[k] = x - prev
            prev = x
            k += 1
