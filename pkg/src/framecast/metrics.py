"""Frame-quality metrics, computed in [0, 1] image space.

SSIM follows the standard windowed form: 11x11 Gaussian window with
sigma 1.5, stabilizers K1=0.01 and K2=0.03 at dynamic range 1, grayscale
conversion by channel mean, mean over valid window positions. Images
smaller than the window fall back to a single global window.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .errors import StructuralError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PSNR_CAP_DB = 100.0


def to_unit_interval(frame: np.ndarray) -> np.ndarray:
    """Map a normalized [-1, 1] frame into [0, 1] for metric computation."""
    return np.clip((np.asarray(frame, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)


def _check_pair(pred: np.ndarray, gt: np.ndarray):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise StructuralError(f"metric inputs must share a shape: {pred.shape} vs {gt.shape}")
    return pred, gt


def mse(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = _check_pair(pred, gt)
    return float(np.mean((pred - gt) ** 2))


def psnr(pred: np.ndarray, gt: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); a zero-MSE pair reports the declared 100 dB cap."""
    err = mse(pred, gt)
    if err == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(peak**2 / err))


def _grayscale(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        return image.mean(axis=0)
    if image.ndim == 2:
        return image
    raise StructuralError(f"image must be (H, W) or (C, H, W), got {image.shape}")


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    one_d = np.exp(-(offsets**2) / (2.0 * sigma**2))
    kernel = np.outer(one_d, one_d)
    return kernel / kernel.sum()


def ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    """Structural similarity of two [0, 1] images; 1.0 iff identical."""
    pred, gt = _check_pair(pred, gt)
    x = _grayscale(pred)
    y = _grayscale(gt)
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    if min(x.shape) < SSIM_WINDOW:
        mu_x, mu_y = x.mean(), y.mean()
        var_x, var_y = x.var(), y.var()
        cov = ((x - mu_x) * (y - mu_y)).mean()
        return float(
            ((2 * mu_x * mu_y + c1) * (2 * cov + c2))
            / ((mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2))
        )
    kernel = torch.from_numpy(_gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)).reshape(1, 1, SSIM_WINDOW, SSIM_WINDOW)

    def filt(img: np.ndarray) -> torch.Tensor:
        return F.conv2d(torch.from_numpy(img).reshape(1, 1, *img.shape), kernel)

    mu_x = filt(x)
    mu_y = filt(y)
    mu_xx = filt(x * x)
    mu_yy = filt(y * y)
    mu_xy = filt(x * y)
    var_x = mu_xx - mu_x**2
    var_y = mu_yy - mu_y**2
    cov = mu_xy - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    )
    return float(ssim_map.mean())
