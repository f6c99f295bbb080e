"""Training losses and evaluation metrics.

Implements the photometric L1 + D-SSIM term, jaw-pose regularization,
normal-consistency and albedo-prior losses, total variation on the rendered
roughness map, and the weighted total; metrics are MAE (and MAE* = MAE x
10^2), PSNR, and SSIM/D-SSIM with the standard 11x11 Gaussian window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import convolve2d

__all__ = [
    "LossWeights",
    "LossReport",
    "LossBundle",
    "mae",
    "mae_star",
    "psnr",
    "ssim",
    "d_ssim",
    "l_rgb",
    "l_jaw",
    "l_normal",
    "l_albedo",
    "tv",
    "total_loss",
]


@dataclass(frozen=True)
class LossWeights:
    """Loss-term weights; defaults are the training configuration values."""

    jaw: float = 0.1
    l1: float = 0.8
    normal: float = 1e-5
    albedo: float = 0.25
    tv: float = 0.02

    def __post_init__(self):
        for name in ("jaw", "l1", "normal", "albedo", "tv"):
            if getattr(self, name) < 0:
                raise ValueError(f"weight {name} must be nonnegative")
        if not 0.0 <= self.l1 <= 1.0:
            raise ValueError("l1 weight must lie in [0, 1]")


@dataclass(frozen=True)
class LossReport:
    """Per-term values plus the weighted total."""

    rgb: float
    jaw: float
    normal: float
    albedo: float
    tv: float
    total: float
    mae: float = float("nan")
    d_ssim: float = float("nan")
    empty_mask: bool = False

    def as_dict(self) -> dict:
        return {"rgb": self.rgb, "jaw": self.jaw, "normal": self.normal,
                "albedo": self.albedo, "tv": self.tv, "total": self.total,
                "mae": self.mae, "d_ssim": self.d_ssim}


def _check_shapes(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def mae(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference over all pixels and channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    return float(np.abs(a - b).mean())


def mae_star(a: np.ndarray, b: np.ndarray) -> float:
    """MAE scaled by 10^2, the reporting convention for face benchmarks."""
    return 100.0 * mae(a, b)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0,1] images; +inf when equal."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-0.5 * (r / sigma) ** 2)
    k /= k.sum()
    return np.outer(k, k)


_SSIM_KERNEL = _gaussian_kernel()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity, 11x11 Gaussian window sigma=1.5,
    C1=(0.01)^2, C2=(0.03)^2, channel-averaged, valid-window crop."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    vals = []
    for c in range(a.shape[2]):
        x, y = a[:, :, c], b[:, :, c]

        def win(img):
            return convolve2d(img, _SSIM_KERNEL, mode="valid")

        mu_x = win(x)
        mu_y = win(y)
        sxx = win(x * x) - mu_x ** 2
        syy = win(y * y) - mu_y ** 2
        sxy = win(x * y) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (sxx + syy + c2)
        vals.append((num / den).mean())
    return float(np.mean(vals))


def d_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural dissimilarity (1 - SSIM) / 2."""
    return (1.0 - ssim(a, b)) / 2.0


def l_rgb(pred: np.ndarray, gt: np.ndarray, l1_weight: float = 0.8) -> float:
    """Photometric loss: l1_weight * MAE + (1 - l1_weight) * D-SSIM."""
    return l1_weight * mae(pred, gt) + (1.0 - l1_weight) * d_ssim(pred, gt)


def l_jaw(pred_jaw: np.ndarray, tracked_jaw: np.ndarray) -> float:
    """Euclidean distance between inferred and pre-tracked jaw poses."""
    p = np.asarray(pred_jaw, dtype=np.float64)
    t = np.asarray(tracked_jaw, dtype=np.float64)
    return float(np.linalg.norm(p - t))


def l_normal(n_render: np.ndarray, n_depth: np.ndarray,
             mask: np.ndarray | None = None) -> tuple[float, bool]:
    """Mean |1 - N . N_hat| over masked pixels; returns (value, empty_mask)."""
    _check_shapes(n_render, n_depth)
    dots = np.sum(np.asarray(n_render, dtype=np.float64)
                  * np.asarray(n_depth, dtype=np.float64), axis=-1)
    if mask is not None:
        if not mask.any():
            return 0.0, True
        dots = dots[mask]
    return float(np.abs(1.0 - dots).mean()), False


def l_albedo(a_render: np.ndarray, a_target: np.ndarray,
             mask: np.ndarray | None = None) -> float:
    """Masked mean absolute albedo difference."""
    a = np.asarray(a_render, dtype=np.float64)
    b = np.asarray(a_target, dtype=np.float64)
    _check_shapes(a, b)
    diff = np.abs(a - b)
    if mask is not None:
        if not mask.any():
            return 0.0
        diff = diff[mask]
    return float(diff.mean())


def tv(map2d: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Total variation: mean |forward dx| + |forward dy| over masked interior.

    A difference contributes only when both pixels it spans are masked.
    """
    m = np.asarray(map2d, dtype=np.float64)
    dx = np.abs(m[:, 1:] - m[:, :-1])
    dy = np.abs(m[1:, :] - m[:-1, :])
    if mask is None:
        vals = np.concatenate([dx.ravel(), dy.ravel()])
    else:
        mx = mask[:, 1:] & mask[:, :-1]
        my = mask[1:, :] & mask[:-1, :]
        vals = np.concatenate([dx[mx], dy[my]])
    if vals.size == 0:
        return 0.0
    return float(vals.mean())


@dataclass(frozen=True)
class LossBundle:
    """Inputs to the total loss; optional parts contribute zero when absent."""

    pred: np.ndarray
    gt: np.ndarray
    pred_jaw: Optional[np.ndarray] = None
    tracked_jaw: Optional[np.ndarray] = None
    n_render: Optional[np.ndarray] = None
    n_depth: Optional[np.ndarray] = None
    albedo_render: Optional[np.ndarray] = None
    albedo_target: Optional[np.ndarray] = None
    roughness_map: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None


def total_loss(bundle: LossBundle, weights: LossWeights | None = None) -> LossReport:
    """Weighted total: L_rgb + w_jaw L_jaw + w_normal L_normal
    + w_albedo L_albedo + w_tv TV(roughness)."""
    w = weights or LossWeights()
    rgb_mae = mae(bundle.pred, bundle.gt)
    rgb_dssim = d_ssim(bundle.pred, bundle.gt)
    rgb = w.l1 * rgb_mae + (1.0 - w.l1) * rgb_dssim

    jaw = 0.0
    if bundle.pred_jaw is not None and bundle.tracked_jaw is not None:
        jaw = l_jaw(bundle.pred_jaw, bundle.tracked_jaw)

    normal, empty = 0.0, False
    if bundle.n_render is not None and bundle.n_depth is not None:
        normal, empty = l_normal(bundle.n_render, bundle.n_depth, bundle.mask)

    albedo = 0.0
    if bundle.albedo_render is not None and bundle.albedo_target is not None:
        albedo = l_albedo(bundle.albedo_render, bundle.albedo_target, bundle.mask)

    tv_val = 0.0
    if bundle.roughness_map is not None:
        tv_val = tv(bundle.roughness_map, bundle.mask)

    total = (rgb + w.jaw * jaw + w.normal * normal
             + w.albedo * albedo + w.tv * tv_val)
    return LossReport(rgb=rgb, jaw=jaw, normal=normal, albedo=albedo,
                      tv=tv_val, total=total, mae=rgb_mae, d_ssim=rgb_dssim,
                      empty_mask=empty)
