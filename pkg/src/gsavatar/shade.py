"""Deferred split-sum shading of G-buffers under an environment light.

Per covered pixel the shaded color is

    diffuse  = albedo * irradiance(N)
    specular = prefiltered(R, o) * (ks * scale + bias)
    out      = exposure * alpha * (diffuse + specular)

with R the mirror of the view direction about N, (scale, bias) fetched from
the BRDF table at (o, N.V), and ks the approximate Fresnel

    ks = f0 + (max(1-o, f0) - f0) * 2^((-5.55473 (N.V) - 6.698316) (N.V)).

Material-editing scales multiply roughness and f0 before clamping to [0,1].
The environment's yaw rotates light sampling about the +y axis. G-buffer
property maps are consumed as rendered (coverage-weighted); the sum is
composited over a black background, so alpha = 0 pixels stay black.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Camera, EnvironmentLight, GBuffer
from .envlight import rotate_y, sample_cubemap

__all__ = [
    "FRESNEL_A",
    "FRESNEL_B",
    "ShadeParams",
    "reflect",
    "fresnel_ks",
    "sample_irradiance",
    "sample_prefiltered",
    "sample_brdf_lut",
    "specular_term",
    "diffuse_term",
    "shade",
]

FRESNEL_A = -5.55473
FRESNEL_B = -6.698316


@dataclass(frozen=True)
class ShadeParams:
    """Display/material-editing knobs applied at shading time."""

    f0_scale: float = 1.0
    roughness_scale: float = 1.0
    env_yaw: float = 0.0
    exposure: float = 1.0

    def __post_init__(self):
        if not np.isfinite([self.f0_scale, self.roughness_scale,
                            self.env_yaw, self.exposure]).all():
            raise ValueError("shade parameters must be finite")
        if self.f0_scale < 0:
            raise ValueError("f0_scale must be >= 0")
        if self.roughness_scale <= 0 or self.exposure <= 0:
            raise ValueError("roughness_scale and exposure must be > 0")


def reflect(n: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Mirror v about n: r = 2 (n.v) n - v. Unit in, unit out."""
    n = np.asarray(n, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    ndotv = np.sum(n * v, axis=-1, keepdims=True)
    return 2.0 * ndotv * n - v


def fresnel_ks(ndotv, roughness, f0):
    """Approximate Fresnel specular reflectance; broadcasts element-wise.

    Evaluated as f0 (1-p) + max(1-o, f0) p, the endpoint-exact form of
    f0 + (max(1-o, f0) - f0) p: at ndotv = 0 the power p is exactly 1 and
    ks collapses to max(1-o, f0) bitwise.
    """
    x = np.asarray(ndotv, dtype=np.float64)
    o = np.asarray(roughness, dtype=np.float64)
    f = np.asarray(f0, dtype=np.float64)
    p = 2.0 ** ((FRESNEL_A * x + FRESNEL_B) * x)
    return f * (1.0 - p) + np.maximum(1.0 - o, f) * p


def _yawed(env: EnvironmentLight, dirs: np.ndarray) -> np.ndarray:
    if env.yaw_rotation == 0.0:
        return np.asarray(dirs, dtype=np.float64)
    return rotate_y(dirs, -env.yaw_rotation)


def sample_irradiance(env: EnvironmentLight, n: np.ndarray) -> np.ndarray:
    """Irradiance along normal(s); the Lambertian 1/pi is baked in, so
    diffuse = albedo * sample."""
    return sample_cubemap(env.irradiance.faces, _yawed(env, n))


def sample_prefiltered(env: EnvironmentLight, r: np.ndarray,
                       roughness) -> np.ndarray:
    """Trilinear fetch of the prefiltered chain: bilinear in-face, linear
    across mips with roughness mapped linearly onto [0, mips-1]."""
    dirs = _yawed(env, r)
    m = env.n_mips
    t = np.clip(np.asarray(roughness, dtype=np.float64), 0.0, 1.0) * (m - 1)
    m0 = np.floor(t).astype(np.int64)
    m0 = np.clip(m0, 0, m - 1)
    m1 = np.clip(m0 + 1, 0, m - 1)
    frac = (t - m0)[..., None]
    if m == 1:
        return sample_cubemap(env.prefiltered[0].faces, dirs)
    lo = np.empty(dirs.shape[:-1] + (3,))
    hi = np.empty_like(lo)
    for level in range(m):
        mask = m0 == level
        if mask.any():
            lo[mask] = sample_cubemap(env.prefiltered[level].faces, dirs[mask])
        mask = m1 == level
        if mask.any():
            hi[mask] = sample_cubemap(env.prefiltered[level].faces, dirs[mask])
    return lo * (1.0 - frac) + hi * frac


def sample_brdf_lut(env: EnvironmentLight, roughness, ndotv):
    """Bilinear (scale, bias) fetch at (roughness, ndotv), clamp-to-edge."""
    lut = env.brdf_lut.astype(np.float64)
    res = lut.shape[0]
    o = np.clip(np.asarray(roughness, dtype=np.float64), 0.0, 1.0)
    x = np.clip(np.asarray(ndotv, dtype=np.float64), 0.0, 1.0)

    def _axis(t):
        u = t * res - 0.5
        i0 = np.floor(u).astype(np.int64)
        f = u - i0
        return np.clip(i0, 0, res - 1), np.clip(i0 + 1, 0, res - 1), f

    i0, i1, fi = _axis(o)
    j0, j1, fj = _axis(x)
    fi = fi[..., None]
    fj = fj[..., None]
    v = (lut[i0, j0] * (1 - fi) * (1 - fj) + lut[i1, j0] * fi * (1 - fj)
         + lut[i0, j1] * (1 - fi) * fj + lut[i1, j1] * fi * fj)
    return v[..., 0], v[..., 1]


def specular_term(env: EnvironmentLight, n, v, roughness, f0) -> np.ndarray:
    """Split-sum specular radiance for unit n, v and scalar-ish materials."""
    n = np.asarray(n, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    ndotv = np.clip(np.sum(n * v, axis=-1), 0.0, 1.0)
    r = reflect(n, v)
    scale, bias = sample_brdf_lut(env, roughness, ndotv)
    ks = fresnel_ks(ndotv, roughness, f0)
    return sample_prefiltered(env, r, roughness) * (ks * scale + bias)[..., None]


def diffuse_term(env: EnvironmentLight, n, albedo) -> np.ndarray:
    """Diffuse radiance: albedo * irradiance(n)."""
    return np.asarray(albedo, dtype=np.float64) * sample_irradiance(env, n)


def shade(gbuffer: GBuffer, camera: Camera, env: EnvironmentLight,
          params: ShadeParams | None = None) -> np.ndarray:
    """Shade a G-buffer into a linear RGB image (H,W,3)."""
    params = params or ShadeParams()
    if (gbuffer.height, gbuffer.width) != (camera.height, camera.width):
        raise ValueError(
            f"gbuffer resolution {(gbuffer.height, gbuffer.width)} does not "
            f"match camera {(camera.height, camera.width)}")
    if params.env_yaw != 0.0:  # compose with any yaw already on the asset
        env = env.with_yaw(env.yaw_rotation + params.env_yaw)

    alpha = gbuffer.alpha
    lit = alpha > 0.0
    out = np.zeros((gbuffer.height, gbuffer.width, 3))
    if not lit.any():
        return out

    v = -camera.pixel_rays_world()[lit]  # pixel -> camera, world space
    n = gbuffer.normal[lit]
    albedo = gbuffer.albedo[lit]
    o = np.clip(gbuffer.roughness[lit] * params.roughness_scale, 0.0, 1.0)
    f0 = np.clip(gbuffer.f0[lit] * params.f0_scale, 0.0, 1.0)

    color = diffuse_term(env, n, albedo) + specular_term(env, n, v, o, f0)
    out[lit] = params.exposure * alpha[lit, None] * color
    return out
