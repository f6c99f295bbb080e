"""Numba kernels for the tiled splatter and its brute-force oracle.

Both blenders share the exact same per-contribution rules so that tiled
output equals the oracle bit-for-bit:

  * skip when the Mahalanobis form d^T Sigma^-1 d exceeds 9 (3-sigma support);
  * sigma = min(0.99, weight * opacity), skipped below 1/255;
  * front-to-back compositing, terminate when transmittance < 1e-4.

The tiled kernel walks per-tile entry lists sorted by (tile, depth, index);
the oracle walks the global (depth, index) order per pixel. Per pixel both
visit the same contributors in the same order.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

TILE = 16
SIGMA_CLAMP = 0.99
ALPHA_FLOOR = 1.0 / 255.0
TRANSMITTANCE_EPS = 1.0e-4
SUPPORT_Q = 9.0  # (3 sigma)^2


@njit(cache=True, parallel=True)
def blend_tiles(width, height, means, conics, opacities, payload, rects,
                entry_points, tile_offsets, tiles_x, out, out_alpha):
    """Front-to-back blending, one thread per 16x16 tile.

    Entries are depth-sorted, so iterating entries in the outer loop and
    each entry's pixel rect inside preserves the per-pixel compositing
    order while skipping pixels outside the entry's 3-sigma extent.
    """
    n_tiles = tile_offsets.shape[0] - 1
    ch = payload.shape[1]
    for t in prange(n_tiles):
        ty = t // tiles_x
        tx = t - ty * tiles_x
        x_lo = tx * TILE
        y_lo = ty * TILE
        x_hi = min(x_lo + TILE, width)
        y_hi = min(y_lo + TILE, height)
        s = tile_offsets[t]
        e = tile_offsets[t + 1]
        trans = np.ones((TILE, TILE))
        for k in range(s, e):
            g = entry_points[k]
            gx0 = max(rects[g, 0], x_lo)
            gx1 = min(rects[g, 1], x_hi - 1)
            gy0 = max(rects[g, 2], y_lo)
            gy1 = min(rects[g, 3], y_hi - 1)
            ca = conics[g, 0]
            cb = conics[g, 1]
            cc = conics[g, 2]
            mx = means[g, 0]
            my = means[g, 1]
            op = opacities[g]
            for py in range(gy0, gy1 + 1):
                dy = py + 0.5 - my
                for px in range(gx0, gx1 + 1):
                    tr = trans[py - y_lo, px - x_lo]
                    if tr < TRANSMITTANCE_EPS:
                        continue
                    dx = px + 0.5 - mx
                    q = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy
                    if q > SUPPORT_Q:
                        continue
                    sigma = np.exp(-0.5 * q) * op
                    if sigma > SIGMA_CLAMP:
                        sigma = SIGMA_CLAMP
                    if sigma < ALPHA_FLOOR:
                        continue
                    w = sigma * tr
                    for c in range(ch):
                        out[py, px, c] += payload[g, c] * w
                    trans[py - y_lo, px - x_lo] = tr * (1.0 - sigma)
        for py in range(y_lo, y_hi):
            for px in range(x_lo, x_hi):
                out_alpha[py, px] = 1.0 - trans[py - y_lo, px - x_lo]


@njit(cache=True, parallel=True)
def blend_brute(width, height, means, conics, opacities, payload, order,
                out, out_alpha):
    """Oracle: per pixel, walk every Gaussian in global (depth, index) order."""
    ch = payload.shape[1]
    n = order.shape[0]
    for py in prange(height):
        cy = py + 0.5
        for px in range(width):
            cx = px + 0.5
            trans = 1.0
            for k in range(n):
                g = order[k]
                dx = cx - means[g, 0]
                dy = cy - means[g, 1]
                q = (conics[g, 0] * dx * dx
                     + 2.0 * conics[g, 1] * dx * dy
                     + conics[g, 2] * dy * dy)
                if q > SUPPORT_Q:
                    continue
                sigma = np.exp(-0.5 * q) * opacities[g]
                if sigma > SIGMA_CLAMP:
                    sigma = SIGMA_CLAMP
                if sigma < ALPHA_FLOOR:
                    continue
                w = sigma * trans
                for c in range(ch):
                    out[py, px, c] += payload[g, c] * w
                trans *= 1.0 - sigma
                if trans < TRANSMITTANCE_EPS:
                    break
            out_alpha[py, px] = 1.0 - trans


@njit(cache=True)
def count_contributions(width, height, means, conics, opacities,
                        entry_points, tile_offsets, tiles_x):
    """Pass 1 of contribution recording: contributions per tile."""
    n_tiles = tile_offsets.shape[0] - 1
    counts = np.zeros(n_tiles, dtype=np.int64)
    for t in range(n_tiles):
        ty = t // tiles_x
        tx = t - ty * tiles_x
        x_lo = tx * TILE
        y_lo = ty * TILE
        x_hi = min(x_lo + TILE, width)
        y_hi = min(y_lo + TILE, height)
        s = tile_offsets[t]
        e = tile_offsets[t + 1]
        if s == e:
            continue
        c = 0
        for py in range(y_lo, y_hi):
            cy = py + 0.5
            for px in range(x_lo, x_hi):
                cx = px + 0.5
                trans = 1.0
                for k in range(s, e):
                    g = entry_points[k]
                    dx = cx - means[g, 0]
                    dy = cy - means[g, 1]
                    q = (conics[g, 0] * dx * dx
                         + 2.0 * conics[g, 1] * dx * dy
                         + conics[g, 2] * dy * dy)
                    if q > SUPPORT_Q:
                        continue
                    sigma = np.exp(-0.5 * q) * opacities[g]
                    if sigma > SIGMA_CLAMP:
                        sigma = SIGMA_CLAMP
                    if sigma < ALPHA_FLOOR:
                        continue
                    c += 1
                    trans *= 1.0 - sigma
                    if trans < TRANSMITTANCE_EPS:
                        break
        counts[t] = c
    return counts


@njit(cache=True, parallel=True)
def record_contributions(width, height, means, conics, opacities,
                         entry_points, tile_offsets, tiles_x, rec_offsets,
                         rec_pixel, rec_point, rec_weight):
    """Pass 2: write (pixel, point, blend weight) triples per tile slice."""
    n_tiles = tile_offsets.shape[0] - 1
    for t in prange(n_tiles):
        ty = t // tiles_x
        tx = t - ty * tiles_x
        x_lo = tx * TILE
        y_lo = ty * TILE
        x_hi = min(x_lo + TILE, width)
        y_hi = min(y_lo + TILE, height)
        s = tile_offsets[t]
        e = tile_offsets[t + 1]
        if s == e:
            continue
        cursor = rec_offsets[t]
        for py in range(y_lo, y_hi):
            cy = py + 0.5
            for px in range(x_lo, x_hi):
                cx = px + 0.5
                trans = 1.0
                for k in range(s, e):
                    g = entry_points[k]
                    dx = cx - means[g, 0]
                    dy = cy - means[g, 1]
                    q = (conics[g, 0] * dx * dx
                         + 2.0 * conics[g, 1] * dx * dy
                         + conics[g, 2] * dy * dy)
                    if q > SUPPORT_Q:
                        continue
                    sigma = np.exp(-0.5 * q) * opacities[g]
                    if sigma > SIGMA_CLAMP:
                        sigma = SIGMA_CLAMP
                    if sigma < ALPHA_FLOOR:
                        continue
                    rec_pixel[cursor] = py * width + px
                    rec_point[cursor] = g
                    rec_weight[cursor] = sigma * trans
                    cursor += 1
                    trans *= 1.0 - sigma
                    if trans < TRANSMITTANCE_EPS:
                        break
