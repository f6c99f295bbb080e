"""Tile-based splatting of posed Gaussian clouds into multi-channel G-buffers.

Pipeline: project each Gaussian's mean and covariance to the image plane
(Sigma_2D = J W Sigma W^T J^T plus a 0.3 px^2 low-pass dilation), bin to all
overlapped 16x16 tiles by the 3-sigma radius, sort per tile by ascending
depth (stable index tie-break), then alpha-blend all channels front-to-back
with identical weights: albedo, roughness, f0, world-space normal, depth.
Background contributes zero (black).

`rasterize_brute` is the independent oracle: per-pixel full-sort blending
with no tiles and no radius culling, the same 3-sigma support test applied.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import Camera, GaussianCloud, GBuffer

__all__ = [
    "ALL_CHANNELS",
    "ProjectedGaussian",
    "covariance3d",
    "quat_to_matrix",
    "project",
    "gaussian_weight",
    "point_normal",
    "point_normals",
    "rasterize",
    "rasterize_brute",
    "normals_from_depth",
    "rotate_normals_to_world",
    "set_threads",
]

LOWPASS_DILATION = 0.3       # px^2 added to Sigma_2D's diagonal
RADIUS_SIGMAS = 3.0
ALL_CHANNELS = ("albedo", "roughness", "f0", "normal", "depth")
_CHANNEL_SLICES = {"albedo": slice(0, 3), "roughness": slice(3, 4),
                   "f0": slice(4, 5), "normal": slice(5, 8),
                   "depth": slice(8, 9)}


def set_threads(n: int | None = None) -> int:
    """Set the worker thread count (or from GSAV_THREADS); returns it."""
    import numba

    if n is None:
        env = os.environ.get("GSAV_THREADS")
        n = int(env) if env else numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternions (...,4) (w,x,y,z) to rotation matrices (...,3,3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def covariance3d(rotation: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """3D covariance R S S^T R^T from unit quaternion(s) and scale(s)."""
    r = quat_to_matrix(rotation)
    s2 = np.asarray(scale, dtype=np.float64) ** 2
    return (r * s2[..., None, :]) @ np.swapaxes(r, -1, -2)


@dataclass(frozen=True)
class ProjectedGaussian:
    """One Gaussian on the image plane: 2D mean/covariance, depth, extent."""

    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    radius: float
    index: int = 0


def _project_arrays(positions, covs, camera: Camera):
    """Vectorized projection; returns per-point arrays plus a validity mask."""
    rot = camera.rotation
    t = camera.to_camera(positions)  # (N,3)
    tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
    valid = tz > camera.near
    tz_safe = np.where(valid, tz, 1.0)

    means = np.empty((len(tx), 2))
    means[:, 0] = camera.fx * tx / tz_safe + camera.cx
    means[:, 1] = camera.fy * ty / tz_safe + camera.cy

    # J is the 2x3 Jacobian of perspective projection at the camera-space mean
    j = np.zeros((len(tx), 2, 3))
    j[:, 0, 0] = camera.fx / tz_safe
    j[:, 0, 2] = -camera.fx * tx / tz_safe ** 2
    j[:, 1, 1] = camera.fy / tz_safe
    j[:, 1, 2] = -camera.fy * ty / tz_safe ** 2
    m = j @ rot[None]
    cov2d = m @ covs @ np.swapaxes(m, 1, 2)
    cov2d[:, 0, 0] += LOWPASS_DILATION
    cov2d[:, 1, 1] += LOWPASS_DILATION

    a = cov2d[:, 0, 0]
    b = cov2d[:, 0, 1]
    c = cov2d[:, 1, 1]
    mid = 0.5 * (a + c)
    disc = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    lam_max = mid + disc
    radius = RADIUS_SIGMAS * np.sqrt(np.maximum(lam_max, 0.0))

    det = a * c - b * b
    det = np.where(det > 1e-12, det, 1e-12)
    conics = np.stack([c / det, -b / det, a / det], axis=1)

    # footprint test against the pixel-center domain
    w, h = camera.width, camera.height
    on_image = ((means[:, 0] + radius >= 0.5) & (means[:, 0] - radius <= w - 0.5)
                & (means[:, 1] + radius >= 0.5) & (means[:, 1] - radius <= h - 0.5))
    return means, cov2d, conics, radius, tz, valid, valid & on_image


def project(position, rotation, scale, camera: Camera,
            index: int = 0) -> ProjectedGaussian | None:
    """Project one Gaussian; None when depth- or footprint-culled."""
    cov = covariance3d(rotation, scale)[None]
    means, cov2d, _, radius, tz, _, keep = _project_arrays(
        np.asarray(position, dtype=np.float64)[None], cov, camera)
    if not keep[0]:
        return None
    return ProjectedGaussian(means[0], cov2d[0], float(tz[0]), float(radius[0]),
                             index)


def gaussian_weight(pixel, proj: ProjectedGaussian) -> float:
    """exp(-1/2 d^T Sigma_2D^-1 d) at a pixel position."""
    d = np.asarray(pixel, dtype=np.float64) - proj.mean2d
    inv = np.linalg.inv(proj.cov2d)
    return float(np.exp(-0.5 * d @ inv @ d))


def point_normal(rotation, scale, to_camera) -> np.ndarray:
    """Shortest-axis normal of one Gaussian, flipped to face the camera.

    `to_camera` points from the Gaussian toward the camera; ties on the
    shortest axis resolve to the lowest axis index.
    """
    return point_normals(np.asarray(rotation, dtype=np.float64)[None],
                         np.asarray(scale, dtype=np.float64)[None],
                         np.asarray(to_camera, dtype=np.float64)[None])[0]


def point_normals(rotations, scales, to_camera) -> np.ndarray:
    """Vectorized shortest-axis normals (N,3), camera-facing."""
    r = quat_to_matrix(rotations)
    scales = np.asarray(scales, dtype=np.float64)
    shortest = np.argmin(scales, axis=1)
    n = r[np.arange(len(shortest)), :, shortest]
    dots = np.sum(n * np.asarray(to_camera, dtype=np.float64), axis=1)
    return np.where(dots[:, None] < 0.0, -n, n)


def _prepare(cloud: GaussianCloud, camera: Camera, channels):
    """Shared projection + payload assembly for both blend paths."""
    positions = cloud.positions.astype(np.float64)
    covs = covariance3d(cloud.rotations.astype(np.float64),
                        cloud.scales.astype(np.float64))
    means, _, conics, radius, depth, front, keep = _project_arrays(
        positions, covs, camera)

    to_cam = camera.center[None, :] - positions
    normals = point_normals(cloud.rotations.astype(np.float64),
                            cloud.scales.astype(np.float64), to_cam)

    payload = np.zeros((cloud.n_points, 9))
    sel = set(ALL_CHANNELS if channels is None else channels)
    unknown = sel.difference(ALL_CHANNELS)
    if unknown:
        raise ValueError(f"unknown channels: {sorted(unknown)}")
    if "albedo" in sel:
        payload[:, 0:3] = cloud.albedo
    if "roughness" in sel:
        payload[:, 3] = cloud.roughness
    if "f0" in sel:
        payload[:, 4] = cloud.f0
    if "normal" in sel:
        payload[:, 5:8] = normals
    if "depth" in sel:
        payload[:, 8] = depth

    opac = cloud.opacities.astype(np.float64)
    return means, conics, radius, depth, front, keep, payload, opac


def _bin_tiles(means, radius, depth, keep, camera: Camera):
    """Duplicate each kept Gaussian into its overlapped tiles; entries are
    sorted by (tile, depth, point index). Also returns per-point pixel
    rects of the 3-sigma support for the blend kernel."""
    w, h = camera.width, camera.height
    tiles_x = (w + _kernels.TILE - 1) // _kernels.TILE
    tiles_y = (h + _kernels.TILE - 1) // _kernels.TILE
    n_tiles = tiles_x * tiles_y
    n_points = means.shape[0]
    rects = np.zeros((n_points, 4), dtype=np.int64)

    def _empty():
        return (np.zeros(0, dtype=np.int64),
                np.zeros(n_tiles + 1, dtype=np.int64), rects,
                tiles_x, tiles_y)

    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        return _empty()

    mx, my = means[idx, 0], means[idx, 1]
    r = radius[idx]
    # pixel-index bounds of the support (pixel centers at half-integers)
    ix0 = np.clip(np.ceil(mx - r - 0.5), 0, w - 1).astype(np.int64)
    ix1 = np.clip(np.floor(mx + r - 0.5), 0, w - 1).astype(np.int64)
    iy0 = np.clip(np.ceil(my - r - 0.5), 0, h - 1).astype(np.int64)
    iy1 = np.clip(np.floor(my + r - 0.5), 0, h - 1).astype(np.int64)
    ok = (ix0 <= ix1) & (iy0 <= iy1)
    idx, ix0, ix1, iy0, iy1 = idx[ok], ix0[ok], ix1[ok], iy0[ok], iy1[ok]
    if idx.size == 0:
        return _empty()
    rects[idx, 0] = ix0
    rects[idx, 1] = ix1
    rects[idx, 2] = iy0
    rects[idx, 3] = iy1

    tx0, tx1 = ix0 // _kernels.TILE, ix1 // _kernels.TILE
    ty0, ty1 = iy0 // _kernels.TILE, iy1 // _kernels.TILE
    nx = tx1 - tx0 + 1
    ny = ty1 - ty0 + 1
    counts = nx * ny
    total = int(counts.sum())

    owner = np.repeat(np.arange(len(idx)), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    local = np.arange(total) - offsets[owner]
    tx = tx0[owner] + local % nx[owner]
    ty = ty0[owner] + local // nx[owner]
    tile_id = ty * tiles_x + tx
    points = idx[owner]

    # single-key sort: per-point (depth, index) rank baked into the key
    rank_of = np.empty(n_points, dtype=np.int64)
    kept_order = np.lexsort((idx, depth[idx]))
    rank_of[idx[kept_order]] = np.arange(idx.size)
    order = np.argsort(tile_id * np.int64(idx.size) + rank_of[points],
                       kind="stable")
    tile_sorted = tile_id[order]
    entry_points = points[order]
    tile_offsets = np.searchsorted(tile_sorted, np.arange(n_tiles + 1))
    return entry_points.astype(np.int64), tile_offsets.astype(np.int64), \
        rects, tiles_x, tiles_y


def _assemble(out, alpha, channels) -> GBuffer:
    sel = set(ALL_CHANNELS if channels is None else channels)
    normal = out[:, :, 5:8].copy()
    if "normal" in sel:
        norms = np.linalg.norm(normal, axis=2)
        fix = (alpha > 0.5) & (norms > 1e-12)
        normal[fix] /= norms[fix][:, None]
    return GBuffer(albedo=out[:, :, 0:3].copy(), roughness=out[:, :, 3].copy(),
                   f0=out[:, :, 4].copy(), normal=normal,
                   depth=out[:, :, 8].copy(), alpha=alpha)


def rasterize(cloud: GaussianCloud, camera: Camera, channels=None,
              record: bool = False):
    """Splat a posed cloud into a G-buffer (all channels unless restricted).

    With record=True additionally returns per-contribution arrays
    (pixel_flat_index, point_index, blend_weight) for gradient back-prop
    through the blending weights.
    """
    means, conics, radius, depth, _, keep, payload, opac = _prepare(
        cloud, camera, channels)
    entry_points, tile_offsets, rects, tiles_x, _ = _bin_tiles(
        means, radius, depth, keep, camera)

    h, w = camera.height, camera.width
    out = np.zeros((h, w, 9))
    alpha = np.zeros((h, w))
    _kernels.blend_tiles(w, h, means, conics, opac, payload, rects,
                         entry_points, tile_offsets, tiles_x, out, alpha)
    gbuf = _assemble(out, alpha, channels)
    if not record:
        return gbuf

    counts = _kernels.count_contributions(w, h, means, conics, opac,
                                          entry_points, tile_offsets, tiles_x)
    rec_offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    total = int(rec_offsets[-1])
    rec_pixel = np.empty(total, dtype=np.int64)
    rec_point = np.empty(total, dtype=np.int64)
    rec_weight = np.empty(total)
    _kernels.record_contributions(w, h, means, conics, opac, entry_points,
                                  tile_offsets, tiles_x, rec_offsets,
                                  rec_pixel, rec_point, rec_weight)
    return gbuf, (rec_pixel, rec_point, rec_weight)


def rasterize_brute(cloud: GaussianCloud, camera: Camera,
                    channels=None) -> GBuffer:
    """Oracle blender: full per-pixel sort, no tiles, no radius culling."""
    means, conics, _, depth, front, _, payload, opac = _prepare(
        cloud, camera, channels)
    idx = np.nonzero(front)[0]
    order = idx[np.lexsort((idx, depth[idx]))]
    h, w = camera.height, camera.width
    out = np.zeros((h, w, 9))
    alpha = np.zeros((h, w))
    _kernels.blend_brute(w, h, means, conics, opac, payload,
                         order.astype(np.int64), out, alpha)
    return _assemble(out, alpha, channels)


def normals_from_depth(depth: np.ndarray, alpha: np.ndarray,
                       camera: Camera) -> np.ndarray:
    """Camera-space normals from central differences of back-projected depth.

    Depth and alpha come from the splatter, so depth is coverage-weighted;
    it is un-premultiplied by alpha before back-projection. Pixels with
    alpha < 0.5 or without two valid horizontal and vertical neighbors get a
    zero normal. Normals are oriented toward the camera.
    """
    h, w = depth.shape
    valid = alpha >= 0.5
    z = np.where(valid, depth / np.maximum(alpha, 1e-12), 0.0)

    xs = (np.arange(w) + 0.5 - camera.cx) / camera.fx
    ys = (np.arange(h) + 0.5 - camera.cy) / camera.fy
    gx, gy = np.meshgrid(xs, ys)
    p = np.stack([gx * z, gy * z, z], axis=-1)

    normals = np.zeros((h, w, 3))
    ok = np.zeros((h, w), dtype=bool)
    ok[1:-1, 1:-1] = (valid[1:-1, 1:-1] & valid[1:-1, :-2] & valid[1:-1, 2:]
                      & valid[:-2, 1:-1] & valid[2:, 1:-1])
    dpdx = np.zeros_like(p)
    dpdy = np.zeros_like(p)
    dpdx[:, 1:-1] = 0.5 * (p[:, 2:] - p[:, :-2])
    dpdy[1:-1, :] = 0.5 * (p[2:, :] - p[:-2, :])
    n = np.cross(dpdx, dpdy)
    norm = np.linalg.norm(n, axis=2)
    ok &= norm > 1e-20
    n = np.divide(n, np.maximum(norm, 1e-20)[..., None])
    # orient toward the camera (at the origin in camera space)
    flip = np.sum(n * p, axis=2) > 0.0
    n[flip] = -n[flip]
    normals[ok] = n[ok]
    return normals


def rotate_normals_to_world(normals_cam: np.ndarray, camera: Camera) -> np.ndarray:
    """Rotate a camera-space normal map into world space."""
    return normals_cam @ camera.rotation  # row-vector form of R^T n
