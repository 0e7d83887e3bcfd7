"""Full-reference similarity metrics for judging reconstructions.

psnr pools squared error over all RGB channels against an 8-bit peak.
mssim is the mean local structural similarity index on luma with the
reference constants (11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03,
L=255), averaged over fully valid window positions only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import ShapeError
from .imgutils import luma, require_same_shape

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0


@dataclass
class QualityScorePair:
    psnr: float
    mssim: float


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give +inf."""
    require_same_shape(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _ssim_map(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    k = cv2.getGaussianKernel(SSIM_WINDOW, SSIM_SIGMA)
    window = (k @ k.T).astype(np.float64)
    r = SSIM_WINDOW // 2

    def filt(img):
        # Interior of filter2D equals 'valid' correlation; crop the
        # border ring that saw padded values.
        return cv2.filter2D(img, -1, window)[r:-r, r:-r]

    mu_x = filt(x)
    mu_y = filt(y)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    var_x = filt(x * x) - mu_xx
    var_y = filt(y * y) - mu_yy
    cov = filt(x * y) - mu_xy
    num = (2.0 * mu_xy + c1) * (2.0 * cov + c2)
    den = (mu_xx + mu_yy + c1) * (var_x + var_y + c2)
    return num / den


def mssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM on luma over all fully interior window positions."""
    require_same_shape(a, b)
    h, w = a.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ShapeError(
            f"image {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    x = luma(a, rounded=False) if a.ndim == 3 else a.astype(np.float64)
    y = luma(b, rounded=False) if b.ndim == 3 else b.astype(np.float64)
    return float(np.mean(_ssim_map(x, y)))


def quality_pair(a: np.ndarray, b: np.ndarray) -> QualityScorePair:
    return QualityScorePair(psnr=psnr(a, b), mssim=mssim(a, b))
