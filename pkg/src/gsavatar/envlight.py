"""Environment-light precomputation and the Monte Carlo reference integrator.

Bakes an :class:`EnvironmentLight` from an HDR environment: cosine-convolved
irradiance cubemap, GGX-prefiltered mip chain, and the split-sum BRDF
scale/bias lookup table. `mc_reference` is the ground-truth integrator the
split-sum pipeline is certified against.

Cubemap face convention (order +x,-x,+y,-y,+z,-z), u right and v down in
texel space, u = 2(col+0.5)/res - 1, v = 2(row+0.5)/res - 1:

    +x: ( 1, -v, -u)   -x: (-1, -v,  u)
    +y: ( u,  1,  v)   -y: ( u, -1, -v)
    +z: ( u, -v,  1)   -z: (-u, -v, -1)

Microfacet terms used by every bake and by the reference: GGX normal
distribution with alpha = roughness^2, Smith-Schlick geometry with
k = roughness^2 / 2, Schlick Fresnel on f0.
"""

from __future__ import annotations

import numpy as np

from .core import Cubemap, EnvironmentLight

__all__ = [
    "Cubemap",
    "face_uv_to_direction",
    "direction_to_face_uv",
    "cubemap_directions",
    "cubemap_solid_angles",
    "sample_cubemap",
    "rotate_y",
    "rotate_cubemap_y",
    "equirect_direction_to_uv",
    "equirect_uv_to_direction",
    "sample_equirect",
    "equirect_to_cubemap",
    "compute_irradiance",
    "prefilter_ggx",
    "compute_brdf_lut",
    "mc_reference",
    "bake_environment",
]

MIRROR_ROUGHNESS_FLOOR = 0.02  # level-0 prefilter roughness; avoids a delta lobe


# ---------------------------------------------------------------------------
# cubemap addressing
# ---------------------------------------------------------------------------

def face_uv_to_direction(face, u, v) -> np.ndarray:
    """Unit direction for face index + in-face coordinates u,v in [-1,1]."""
    face = np.asarray(face)[..., None]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    one = np.ones_like(u)
    dirs = np.select(
        [face == 0, face == 1, face == 2, face == 3, face == 4, face == 5],
        [np.stack([one, -v, -u], -1), np.stack([-one, -v, u], -1),
         np.stack([u, one, v], -1), np.stack([u, -one, -v], -1),
         np.stack([u, -v, one], -1), np.stack([-u, -v, -one], -1)],
    )
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def direction_to_face_uv(d: np.ndarray):
    """Inverse mapping: unit directions (...,3) -> (face, u, v)."""
    d = np.asarray(d, dtype=np.float64)
    ax, ay, az = np.abs(d[..., 0]), np.abs(d[..., 1]), np.abs(d[..., 2])
    x, y, z = d[..., 0], d[..., 1], d[..., 2]

    face = np.where(
        (ax >= ay) & (ax >= az), np.where(x > 0, 0, 1),
        np.where(ay >= az, np.where(y > 0, 2, 3), np.where(z > 0, 4, 5)))
    m = np.maximum.reduce([ax, ay, az])
    m = np.maximum(m, 1e-30)
    u = np.select(
        [face == 0, face == 1, face == 2, face == 3, face == 4, face == 5],
        [-z / m, z / m, x / m, x / m, x / m, -x / m])
    v = np.select(
        [face == 0, face == 1, face == 2, face == 3, face == 4, face == 5],
        [-y / m, -y / m, z / m, -z / m, -y / m, -y / m])
    return face, u, v


def cubemap_directions(res: int) -> np.ndarray:
    """(6,res,res,3) unit direction of every texel center."""
    c = (np.arange(res) + 0.5) * 2.0 / res - 1.0
    u, v = np.meshgrid(c, c, indexing="xy")  # u varies along columns
    out = np.empty((6, res, res, 3))
    for f in range(6):
        out[f] = face_uv_to_direction(np.full_like(u, f, dtype=np.int64), u, v)
    return out


def cubemap_solid_angles(res: int) -> np.ndarray:
    """(res,res) exact solid angle of each texel (same for all faces)."""

    def area(u, v):
        return np.arctan2(u * v, np.sqrt(u * u + v * v + 1.0))

    edges = np.arange(res + 1) * 2.0 / res - 1.0
    u0, v0 = np.meshgrid(edges[:-1], edges[:-1], indexing="xy")
    u1, v1 = np.meshgrid(edges[1:], edges[1:], indexing="xy")
    return area(u1, v1) - area(u0, v1) - area(u1, v0) + area(u0, v0)


def sample_cubemap(faces: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Bilinear cubemap fetch along unit directions (...,3) -> (...,3).

    Filtering is clamped to each face (no cross-face blending); adequate at
    the small resolutions used here.
    """
    faces = np.asarray(faces, dtype=np.float64)
    res = faces.shape[1]
    face, u, v = direction_to_face_uv(dirs)

    tx = (u + 1.0) * 0.5 * res - 0.5
    ty = (v + 1.0) * 0.5 * res - 0.5
    x0 = np.floor(tx).astype(np.int64)
    y0 = np.floor(ty).astype(np.int64)
    fx = tx - x0
    fy = ty - y0
    x0c = np.clip(x0, 0, res - 1)
    x1c = np.clip(x0 + 1, 0, res - 1)
    y0c = np.clip(y0, 0, res - 1)
    y1c = np.clip(y0 + 1, 0, res - 1)

    f00 = faces[face, y0c, x0c]
    f10 = faces[face, y0c, x1c]
    f01 = faces[face, y1c, x0c]
    f11 = faces[face, y1c, x1c]
    fx = fx[..., None]
    fy = fy[..., None]
    return ((f00 * (1 - fx) + f10 * fx) * (1 - fy)
            + (f01 * (1 - fx) + f11 * fx) * fy)


def rotate_y(dirs: np.ndarray, angle: float) -> np.ndarray:
    """Rotate directions about the +y (up) axis by `angle` radians."""
    d = np.asarray(dirs, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty_like(d)
    out[..., 0] = c * d[..., 0] + s * d[..., 2]
    out[..., 1] = d[..., 1]
    out[..., 2] = -s * d[..., 0] + c * d[..., 2]
    return out


def rotate_cubemap_y(cube: Cubemap, angle: float) -> Cubemap:
    """Resample a cubemap rotated by `angle` about +y (light moves with it)."""
    dirs = cubemap_directions(cube.resolution)
    vals = sample_cubemap(cube.faces, rotate_y(dirs, -angle))
    return Cubemap(vals.astype(np.float32))


# ---------------------------------------------------------------------------
# equirectangular ingestion
# ---------------------------------------------------------------------------

def equirect_direction_to_uv(d: np.ndarray):
    """Unit directions -> normalized (u,v) in [0,1); u wraps in longitude."""
    d = np.asarray(d, dtype=np.float64)
    lon = np.arctan2(d[..., 0], -d[..., 2])
    lat = np.arcsin(np.clip(d[..., 1], -1.0, 1.0))
    return 0.5 + lon / (2.0 * np.pi), 0.5 - lat / np.pi


def equirect_uv_to_direction(u, v) -> np.ndarray:
    """Inverse of :func:`equirect_direction_to_uv`."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    lon = (u - 0.5) * 2.0 * np.pi
    lat = (0.5 - v) * np.pi
    cl = np.cos(lat)
    return np.stack([cl * np.sin(lon), np.sin(lat), -cl * np.cos(lon)], axis=-1)


def sample_equirect(image: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Bilinear equirect fetch; wraps horizontally, clamps vertically."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]
    u, v = equirect_direction_to_uv(dirs)
    px = u * w - 0.5
    py = v * h - 0.5
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = (px - x0)[..., None]
    fy = (py - y0)[..., None]
    x0w = np.mod(x0, w)
    x1w = np.mod(x0 + 1, w)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    f00 = img[y0c, x0w]
    f10 = img[y0c, x1w]
    f01 = img[y1c, x0w]
    f11 = img[y1c, x1w]
    return ((f00 * (1 - fx) + f10 * fx) * (1 - fy)
            + (f01 * (1 - fx) + f11 * fx) * fy)


def equirect_to_cubemap(image: np.ndarray, face_res: int) -> Cubemap:
    """Resample an equirectangular HDR panorama into a cubemap."""
    img = np.asarray(image, dtype=np.float64)
    if not np.isfinite(img).all():
        raise ValueError("equirectangular image contains non-finite texels")
    dirs = cubemap_directions(face_res)
    return Cubemap(sample_equirect(img, dirs).astype(np.float32))


# ---------------------------------------------------------------------------
# microfacet terms (shared by bakes and the reference integrator)
# ---------------------------------------------------------------------------

def _tangent_frame(n: np.ndarray):
    """Orthonormal (t, b) spanning the plane perpendicular to unit n."""
    n = np.asarray(n, dtype=np.float64)
    up = np.where(np.abs(n[..., 2:3]) < 0.999,
                  np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    t = np.cross(up, n)
    t = t / np.linalg.norm(t, axis=-1, keepdims=True)
    b = np.cross(n, t)
    return t, b


def _ggx_half_vectors(u1: np.ndarray, u2: np.ndarray, n: np.ndarray,
                      roughness: float) -> np.ndarray:
    """GGX-importance-sampled half vectors around n (alpha = roughness^2)."""
    a = roughness * roughness
    phi = 2.0 * np.pi * u1
    cos_t = np.sqrt((1.0 - u2) / (1.0 + (a * a - 1.0) * u2))
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    hx = np.cos(phi) * sin_t
    hy = np.sin(phi) * sin_t
    t, b = _tangent_frame(n)
    return (t * hx[..., None] + b * hy[..., None] + n * cos_t[..., None])


def _smith_geometry(ndotv, ndotl, roughness):
    """Smith-Schlick geometry term with the IBL remapping k = roughness^2/2."""
    k = (roughness * roughness) / 2.0
    gv = ndotv / (ndotv * (1.0 - k) + k)
    gl = ndotl / (ndotl * (1.0 - k) + k)
    return gv * gl


def _cosine_directions(u1, u2, n):
    """Cosine-weighted hemisphere directions around unit n."""
    r = np.sqrt(u1)
    phi = 2.0 * np.pi * u2
    x = r * np.cos(phi)
    y = r * np.sin(phi)
    z = np.sqrt(np.maximum(0.0, 1.0 - u1))
    t, b = _tangent_frame(n)
    return t * x[..., None] + b * y[..., None] + n * z[..., None]


# ---------------------------------------------------------------------------
# bakes
# ---------------------------------------------------------------------------

def compute_irradiance(cube: Cubemap, out_res: int = 16) -> Cubemap:
    """Cosine-convolve an environment into an irradiance cubemap.

    Output texel for normal n is the solid-angle quadrature of
    L(w) max(0, n.w), normalized by the quadrature of the cosine lobe, so
    the Lambertian 1/pi is absorbed: diffuse = albedo * irradiance(n).
    A constant environment maps to itself exactly.
    """
    res_in = cube.resolution
    in_dirs = cubemap_directions(res_in).reshape(-1, 3)
    in_l = cube.faces.astype(np.float64).reshape(-1, 3)
    dw = np.tile(cubemap_solid_angles(res_in).reshape(-1), 6)

    out_dirs = cubemap_directions(out_res).reshape(-1, 3)
    out = np.empty((out_dirs.shape[0], 3))
    weighted = in_l * dw[:, None]
    chunk = 512
    for s in range(0, out_dirs.shape[0], chunk):
        n = out_dirs[s:s + chunk]
        cos = np.clip(n @ in_dirs.T, 0.0, None)  # (C, M)
        num = cos @ weighted
        den = cos @ dw
        out[s:s + chunk] = num / den[:, None]
    return Cubemap(out.reshape(6, out_res, out_res, 3).astype(np.float32))


def prefilter_roughness_levels(mips: int) -> np.ndarray:
    """Roughness assigned to each mip: m/(mips-1), level 0 floored near-mirror."""
    if mips < 1:
        raise ValueError("mips must be >= 1")
    if mips == 1:
        return np.array([MIRROR_ROUGHNESS_FLOOR])
    levels = np.arange(mips) / (mips - 1)
    levels[0] = MIRROR_ROUGHNESS_FLOOR
    return levels


def prefilter_ggx(cube: Cubemap, base_res: int = 32, mips: int = 3,
                  samples: int = 256, seed: int = 0) -> tuple[Cubemap, ...]:
    """GGX-prefilter the environment into a roughness-indexed mip chain.

    Level m (resolution base_res/2^m) stores, per texel direction r with
    n = v = r, the n.w-weighted average of environment radiance over GGX
    importance samples — the first split-sum factor. Constant environments
    stay constant at every level.
    """
    if base_res >> (mips - 1) < 1:
        raise ValueError("too many mips for base resolution")
    rng = np.random.default_rng(seed)
    levels = prefilter_roughness_levels(mips)
    chain = []
    for m, rough in enumerate(levels):
        res = base_res >> m
        dirs = cubemap_directions(res).reshape(-1, 3)  # (T,3)
        t = dirs.shape[0]
        u1 = rng.random((t, samples))
        u2 = rng.random((t, samples))
        n = dirs[:, None, :]
        h = _ggx_half_vectors(u1, u2, n, float(rough))
        vdoth = np.sum(n * h, axis=-1, keepdims=True)
        l = 2.0 * vdoth * h - n
        ndotl = np.clip(np.sum(n * l, axis=-1), 0.0, None)  # (T,S)
        radiance = sample_cubemap(cube.faces, l.reshape(-1, 3))
        radiance = radiance.reshape(t, samples, 3)
        wsum = ndotl.sum(axis=1)
        wsum = np.maximum(wsum, 1e-12)
        vals = (radiance * ndotl[..., None]).sum(axis=1) / wsum[:, None]
        chain.append(Cubemap(vals.reshape(6, res, res, 3).astype(np.float32)))
    return tuple(chain)


def compute_brdf_lut(res: int = 64, samples: int = 1024,
                     seed: int = 0) -> np.ndarray:
    """Monte Carlo bake of the split-sum BRDF table.

    Cell (i, j) holds (scale, bias) at roughness (i+0.5)/res and
    ndotv (j+0.5)/res such that specular ~ prefiltered * (f0*scale + bias).
    GGX importance sampling, Smith-Schlick geometry, Fresnel split into
    (1-Fc, Fc) with Fc = (1 - v.h)^5.
    """
    if res < 2:
        raise ValueError("lut resolution must be >= 2")
    rng = np.random.default_rng(seed)
    centers = (np.arange(res) + 0.5) / res
    rough = centers[:, None, None]           # (res,1,1) roughness rows
    ndotv = centers[None, :, None]           # (1,res,1)

    v = np.concatenate([
        np.sqrt(np.maximum(0.0, 1.0 - ndotv ** 2)),
        np.zeros_like(ndotv),
        np.broadcast_to(ndotv, ndotv.shape),
    ], axis=-1)[..., None, :]                # (1,res,1,3)

    u1 = rng.random((res, res, samples))
    u2 = rng.random((res, res, samples))
    # half vectors in the n = +z frame; alpha = roughness^2 varies per row
    a = rough ** 2
    phi = 2.0 * np.pi * u1
    cos_t = np.sqrt((1.0 - u2) / (1.0 + (a * a - 1.0) * u2))
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t ** 2))
    h = np.stack([np.cos(phi) * sin_t, np.sin(phi) * sin_t, cos_t], axis=-1)

    vdoth = np.sum(v * h, axis=-1)
    l = 2.0 * vdoth[..., None] * h - v
    ndotl = l[..., 2]
    ndoth = h[..., 2]

    valid = ndotl > 0.0
    nv = np.broadcast_to(ndotv, ndotl.shape)
    g = _smith_geometry(np.maximum(nv, 1e-8), np.maximum(ndotl, 1e-8),
                        np.broadcast_to(rough, ndotl.shape))
    g_vis = g * np.maximum(vdoth, 0.0) / np.maximum(ndoth * nv, 1e-8)
    fc = (1.0 - np.clip(vdoth, 0.0, 1.0)) ** 5
    g_vis = np.where(valid, g_vis, 0.0)
    scale = ((1.0 - fc) * g_vis).mean(axis=-1)
    bias = (fc * g_vis).mean(axis=-1)
    return np.stack([scale, bias], axis=-1).astype(np.float32)


def bake_environment(equirect: np.ndarray, irr_res: int = 16, env_res: int = 32,
                     mips: int = 3, lut_res: int = 64, seed: int = 0,
                     prefilter_samples: int = 256,
                     lut_samples: int = 1024) -> EnvironmentLight:
    """Full bake: equirect HDR -> EnvironmentLight asset contents."""
    cube = equirect_to_cubemap(equirect, max(env_res, irr_res) * 2)
    irr = compute_irradiance(cube, irr_res)
    pre = prefilter_ggx(cube, env_res, mips, prefilter_samples, seed)
    lut = compute_brdf_lut(lut_res, lut_samples, seed)
    return EnvironmentLight(irr, pre, lut)


# ---------------------------------------------------------------------------
# reference integrator
# ---------------------------------------------------------------------------

def mc_reference(cube: Cubemap, n: np.ndarray, v: np.ndarray, albedo,
                 roughness: float, f0: float, samples: int = 4096,
                 seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Unbiased Monte Carlo estimate of the diffuse and specular integrals.

    Diffuse: cosine-sampled Lambertian lobe, result albedo * mean radiance.
    Specular: GGX-importance-sampled microfacet integral with the full
    normal distribution, Schlick Fresnel on f0, and Smith geometry.
    Ground-truth oracle for the split-sum pipeline and the BRDF table.
    """
    rng = np.random.default_rng(seed)
    n = np.asarray(n, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    albedo = np.broadcast_to(np.asarray(albedo, dtype=np.float64), (3,))

    # diffuse
    wo = _cosine_directions(rng.random(samples), rng.random(samples), n)
    diffuse = albedo * sample_cubemap(cube.faces, wo).mean(axis=0)

    # specular
    h = _ggx_half_vectors(rng.random(samples), rng.random(samples), n,
                          float(roughness))
    vdoth = h @ v
    l = 2.0 * vdoth[:, None] * h - v
    ndotl = l @ n
    ndoth = h @ n
    ndotv = float(np.dot(n, v))
    valid = (ndotl > 0.0) & (vdoth > 0.0)

    fresnel = f0 + (1.0 - f0) * (1.0 - np.clip(vdoth, 0.0, 1.0)) ** 5
    geom = _smith_geometry(max(ndotv, 1e-8), np.maximum(ndotl, 1e-8),
                           float(roughness))
    weight = fresnel * geom * vdoth / np.maximum(ndoth * max(ndotv, 1e-8), 1e-12)
    weight = np.where(valid, weight, 0.0)
    radiance = sample_cubemap(cube.faces, l)
    specular = (radiance * weight[:, None]).mean(axis=0)
    return diffuse, specular
