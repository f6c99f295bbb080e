"""Analytic shading gradients and the desk-scale material fitter.

`shading_gradients` differentiates the deferred shading formula of one
G-buffer pixel with respect to that pixel's blended albedo, roughness, and
base reflectance, treating LUT/prefilter fetches as piecewise-(bi/tri)linear
(derivatives through the interpolation weights). `fit_materials` descends
per-point materials by back-propagating those pixel gradients through the
recorded splat blending weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Camera, EnvironmentLight, GaussianCloud, Rig, PoseState
from .deform import pose_cloud
from .losses import LossBundle, LossReport, LossWeights, total_loss
from .rasterize import normals_from_depth, rasterize, rotate_normals_to_world
from .shade import (ShadeParams, reflect, sample_irradiance,
                    sample_prefiltered, FRESNEL_A, FRESNEL_B)

__all__ = ["PixelGradients", "shading_gradients", "shade_pixels",
           "fit_materials", "FitResult"]

MAX_FIT_POINTS = 5000
MAX_FIT_FRAMES = 10


@dataclass(frozen=True)
class PixelGradients:
    """d(out RGB)/d(material) for one pixel; albedo gradient is diagonal."""

    d_albedo: np.ndarray  # (3,) dout_c/dalbedo_c
    d_roughness: np.ndarray  # (3,)
    d_f0: np.ndarray  # (3,)


def _lut_fetch_with_grad(env: EnvironmentLight, o: np.ndarray, x: np.ndarray):
    """Bilinear (scale, bias) plus d/d(roughness) through the weights."""
    lut = env.brdf_lut.astype(np.float64)
    res = lut.shape[0]

    def _axis(t):
        u = np.clip(t, 0.0, 1.0) * res - 0.5
        i0 = np.floor(u).astype(np.int64)
        f = u - i0
        return np.clip(i0, 0, res - 1), np.clip(i0 + 1, 0, res - 1), f

    i0, i1, fi = _axis(o)
    j0, j1, fj = _axis(x)
    v_lo = lut[i0, j0] * (1 - fj[..., None]) + lut[i0, j1] * fj[..., None]
    v_hi = lut[i1, j0] * (1 - fj[..., None]) + lut[i1, j1] * fj[..., None]
    val = v_lo * (1 - fi[..., None]) + v_hi * fi[..., None]
    # derivative vanishes where the fetch clamps to the table edge
    d_do = np.where((i1 > i0)[..., None], (v_hi - v_lo) * res, 0.0)
    return val[..., 0], val[..., 1], d_do[..., 0], d_do[..., 1]


def _prefiltered_with_grad(env: EnvironmentLight, r: np.ndarray,
                           o: np.ndarray):
    """Trilinear prefiltered fetch plus d/d(roughness) via the mip blend."""
    m = env.n_mips
    if m == 1:
        val = sample_prefiltered(env, r, o)
        return val, np.zeros_like(val)
    t = np.clip(o, 0.0, 1.0) * (m - 1)
    m0 = np.clip(np.floor(t).astype(np.int64), 0, m - 1)
    m1 = np.clip(m0 + 1, 0, m - 1)
    frac = (t - m0)[..., None]
    from .envlight import sample_cubemap
    from .shade import _yawed
    dirs = _yawed(env, r)
    lo = np.empty(dirs.shape[:-1] + (3,))
    hi = np.empty_like(lo)
    for level in range(m):
        mask = m0 == level
        if mask.any():
            lo[mask] = sample_cubemap(env.prefiltered[level].faces, dirs[mask])
        mask = m1 == level
        if mask.any():
            hi[mask] = sample_cubemap(env.prefiltered[level].faces, dirs[mask])
    val = lo * (1 - frac) + hi * frac
    grad = np.where((m1 > m0)[..., None], (hi - lo) * (m - 1), 0.0)
    return val, grad


def shade_pixels(albedo, roughness, f0, normal, view, alpha,
                 env: EnvironmentLight, params: ShadeParams | None = None,
                 with_grads: bool = False):
    """Shade a batch of G-buffer pixels; optionally return material grads.

    Inputs are the per-pixel blended map values: albedo (P,3), roughness (P,),
    f0 (P,), normal (P,3), view (P,3) unit pixel->camera, alpha (P,).
    Matches `shade.shade` exactly pixel-for-pixel.
    """
    params = params or ShadeParams()
    if params.env_yaw != 0.0:
        env = env.with_yaw(env.yaw_rotation + params.env_yaw)
    albedo = np.asarray(albedo, dtype=np.float64)
    o_in = np.asarray(roughness, dtype=np.float64)
    f_in = np.asarray(f0, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    v = np.asarray(view, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)

    o_eff = np.clip(o_in * params.roughness_scale, 0.0, 1.0)
    f_eff = np.clip(f_in * params.f0_scale, 0.0, 1.0)
    x = np.clip(np.sum(n * v, axis=-1), 0.0, 1.0)
    r = reflect(n, v)

    irr = sample_irradiance(env, n)
    scale, bias, dscale_do, dbias_do = _lut_fetch_with_grad(env, o_eff, x)
    pre, dpre_do = _prefiltered_with_grad(env, r, o_eff)

    p = 2.0 ** ((FRESNEL_A * x + FRESNEL_B) * x)
    grazing = (1.0 - o_eff) > f_eff
    ks = f_eff + (np.maximum(1.0 - o_eff, f_eff) - f_eff) * p

    ea = (params.exposure * alpha)[..., None]
    out = ea * (albedo * irr + pre * (ks * scale + bias)[..., None])
    if not with_grads:
        return out

    dks_do = np.where(grazing, -p, 0.0)
    dks_df = np.where(grazing, 1.0 - p, 1.0)
    # clamp gates: zero slope outside the open interval of the clip
    gate_o = ((o_in * params.roughness_scale > 0.0)
              & (o_in * params.roughness_scale < 1.0)) * params.roughness_scale
    gate_f = ((f_in * params.f0_scale > 0.0)
              & (f_in * params.f0_scale < 1.0)) * params.f0_scale

    d_albedo = ea * irr
    d_rough = ea * (dpre_do * (ks * scale + bias)[..., None]
                    + pre * (dks_do * scale + ks * dscale_do + dbias_do)[..., None]
                    ) * gate_o[..., None]
    d_f0 = ea * pre * (dks_df * scale)[..., None] * gate_f[..., None]
    return out, d_albedo, d_rough, d_f0


def shading_gradients(albedo, roughness, f0, normal, view, alpha,
                      env: EnvironmentLight,
                      params: ShadeParams | None = None) -> PixelGradients:
    """Analytic d(out RGB)/d(albedo, roughness, f0) for one pixel."""
    _, da, dr, df = shade_pixels(
        np.asarray(albedo, dtype=np.float64)[None],
        np.asarray([roughness], dtype=np.float64),
        np.asarray([f0], dtype=np.float64),
        np.asarray(normal, dtype=np.float64)[None],
        np.asarray(view, dtype=np.float64)[None],
        np.asarray([alpha], dtype=np.float64),
        env, params, with_grads=True)
    return PixelGradients(da[0], dr[0], df[0])


@dataclass(frozen=True)
class FitResult:
    cloud: GaussianCloud
    trace: list[LossReport]


def _tv_adjoint(rough_map: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """d TV / d roughness-map, matching losses.tv's masked-diff counting."""
    adj = np.zeros_like(rough_map)
    mx = mask[:, 1:] & mask[:, :-1]
    my = mask[1:, :] & mask[:-1, :]
    count = int(mx.sum() + my.sum())
    if count == 0:
        return adj
    sx = np.sign(rough_map[:, 1:] - rough_map[:, :-1]) * mx / count
    sy = np.sign(rough_map[1:, :] - rough_map[:-1, :]) * my / count
    adj[:, 1:] += sx
    adj[:, :-1] -= sx
    adj[1:, :] += sy
    adj[:-1, :] -= sy
    return adj


def fit_materials(cloud: GaussianCloud, rig: Rig, poses: Sequence[PoseState],
                  cameras: Sequence[Camera], targets: Sequence[np.ndarray],
                  env: EnvironmentLight, weights: LossWeights | None = None,
                  iters: int = 500, step: float = 0.01,
                  albedo_targets: Sequence[np.ndarray] | None = None,
                  params: ShadeParams | None = None) -> FitResult:
    """Fixed-step gradient descent on per-point albedo/roughness/f0.

    The descent uses the photometric L1 term (plus albedo-prior and TV terms
    when present) normalized over the foreground mask, back-propagated
    through each point's recorded pixel blending weights; D-SSIM is reported
    in the trace with the standard full-image definitions but not descended.
    Attributes are re-clamped to their ranges each step.
    """
    if cloud.n_points > MAX_FIT_POINTS:
        raise ValueError(f"fit is desk-scale: at most {MAX_FIT_POINTS} points")
    if len(poses) > MAX_FIT_FRAMES:
        raise ValueError(f"fit is desk-scale: at most {MAX_FIT_FRAMES} frames")
    if not (len(poses) == len(cameras) == len(targets)):
        raise ValueError("poses, cameras, and targets must align")
    w = weights or LossWeights()
    params = params or ShadeParams()

    fitted = cloud
    trace: list[LossReport] = []
    n_frames = len(poses)

    for it in range(iters + 1):
        g_albedo = np.zeros((fitted.n_points, 3))
        g_rough = np.zeros(fitted.n_points)
        g_f0 = np.zeros(fitted.n_points)
        reports = []

        for f in range(n_frames):
            cam = cameras[f]
            posed = pose_cloud(fitted, rig, poses[f])
            gbuf, (rpix, rpoint, rweight) = rasterize(posed, cam, record=True)
            lit = gbuf.alpha > 0.0
            mask = gbuf.alpha > 0.5
            n_mask = max(int(mask.sum()), 1)

            views = -cam.pixel_rays_world()
            out_img = np.zeros((cam.height, cam.width, 3))
            d_a = np.zeros((cam.height, cam.width, 3))
            d_o = np.zeros((cam.height, cam.width, 3))
            d_f = np.zeros((cam.height, cam.width, 3))
            if lit.any():
                o_pix, da_pix, do_pix, df_pix = shade_pixels(
                    gbuf.albedo[lit], gbuf.roughness[lit], gbuf.f0[lit],
                    gbuf.normal[lit], views[lit], gbuf.alpha[lit],
                    env, params, with_grads=True)
                out_img[lit] = o_pix
                d_a[lit] = da_pix
                d_o[lit] = do_pix
                d_f[lit] = df_pix

            target = np.asarray(targets[f], dtype=np.float64)
            # adjoints on the pixel property maps
            adj_out = w.l1 * np.sign(out_img - target) / (n_mask * 3)
            adj_albedo_map = adj_out * d_a
            adj_rough_map = (adj_out * d_o).sum(axis=2)
            adj_f0_map = (adj_out * d_f).sum(axis=2)

            if albedo_targets is not None and w.albedo > 0:
                a_gt = np.asarray(albedo_targets[f], dtype=np.float64)
                adj_albedo_map += (w.albedo * np.sign(gbuf.albedo - a_gt)
                                   * mask[..., None] / (n_mask * 3))
            if w.tv > 0:
                adj_rough_map += w.tv * _tv_adjoint(gbuf.roughness, mask)

            # back through the blending weights to per-point materials
            flat_a = adj_albedo_map.reshape(-1, 3)
            flat_o = adj_rough_map.reshape(-1)
            flat_f = adj_f0_map.reshape(-1)
            np.add.at(g_albedo, rpoint, flat_a[rpix] * rweight[:, None])
            np.add.at(g_rough, rpoint, flat_o[rpix] * rweight)
            np.add.at(g_f0, rpoint, flat_f[rpix] * rweight)

            n_cam = normals_from_depth(gbuf.depth, gbuf.alpha, cam)
            reports.append(total_loss(LossBundle(
                pred=out_img, gt=target,
                n_render=gbuf.normal, n_depth=rotate_normals_to_world(n_cam, cam),
                albedo_render=gbuf.albedo,
                albedo_target=(albedo_targets[f] if albedo_targets is not None
                               else None),
                roughness_map=gbuf.roughness, mask=mask), w))

        mean = {k: float(np.mean([r.as_dict()[k] for r in reports]))
                for k in reports[0].as_dict()}
        trace.append(LossReport(rgb=mean["rgb"], jaw=mean["jaw"],
                                normal=mean["normal"], albedo=mean["albedo"],
                                tv=mean["tv"], total=mean["total"],
                                mae=mean["mae"], d_ssim=mean["d_ssim"]))
        if it == iters:
            break

        g_albedo /= n_frames
        g_rough /= n_frames
        g_f0 /= n_frames
        r = fitted.ranges
        fitted = fitted.with_materials(
            albedo=np.clip(fitted.albedo - step * g_albedo, 0.0, 1.0),
            roughness=np.clip(fitted.roughness - step * g_rough,
                              r.roughness_min, r.roughness_max),
            f0=np.clip(fitted.f0 - step * g_f0, r.f0_min, r.f0_max))
    return FitResult(fitted, trace)
