"""Frame composition shared by the CLI, the benchmark, and the serve loop."""

from __future__ import annotations

import io as _io

import numpy as np

from .core import Camera, EnvironmentLight, GaussianCloud, GBuffer, PoseState, Rig
from .deform import pose_cloud
from .rasterize import rasterize
from .shade import ShadeParams, shade

__all__ = ["render_frame", "png_bytes"]


def render_frame(cloud: GaussianCloud, rig: Rig, pose: PoseState,
                 camera: Camera, env: EnvironmentLight,
                 params: ShadeParams | None = None,
                 background=None) -> tuple[np.ndarray, GBuffer]:
    """Deform, splat, and shade one frame; returns (linear image, G-buffer).

    `background` is an optional linear RGB triple composited where coverage
    is incomplete (default black, matching training).
    """
    posed = pose_cloud(cloud, rig, pose)
    gbuf = rasterize(posed, camera)
    image = shade(gbuf, camera, env, params)
    if background is not None:
        bg = np.asarray(background, dtype=np.float64).reshape(1, 1, 3)
        image = image + bg * (1.0 - gbuf.alpha)[..., None]
    return image, gbuf


def png_bytes(image: np.ndarray) -> bytes:
    """Deterministic in-memory PNG encoding (gamma 1/2.2, 8-bit)."""
    from PIL import Image as PILImage

    from .io import DISPLAY_GAMMA

    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    u8 = np.round(np.power(img, DISPLAY_GAMMA) * 255.0).astype(np.uint8)
    mode = "L" if u8.ndim == 2 else "RGB"
    buf = _io.BytesIO()
    PILImage.fromarray(u8, mode=mode).save(buf, format="PNG")
    return buf.getvalue()
