"""Image-quality metrics between a reconstruction and the ground truth."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.signal import fftconvolve

SSIM_WIN = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _pair(truth, pred):
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    if t.shape != p.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {p.shape}")
    return t, p


def mae(truth, pred):
    t, p = _pair(truth, pred)
    return float(np.mean(np.abs(t - p)))


def rmse(truth, pred):
    t, p = _pair(truth, pred)
    return float(math.sqrt(np.mean((t - p) ** 2)))


def psnr(truth, pred, data_range=1.0):
    """PSNR in dB; ``inf`` when the maps are identical."""
    if not data_range > 0:
        raise ValueError("data_range must be positive")
    t, p = _pair(truth, pred)
    mse = float(np.mean((t - p) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(data_range ** 2 / mse)


def r2(truth, pred):
    t, p = _pair(truth, pred)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0:
        raise ValueError("R^2 is undefined for a constant ground truth")
    return 1.0 - float(np.sum((t - p) ** 2)) / ss_tot


def gaussian_window(size=SSIM_WIN, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def ssim(truth, pred, data_range=1.0):
    """Mean SSIM over all fully contained 11x11 Gaussian windows."""
    t, p = _pair(truth, pred)
    if t.ndim != 2 or min(t.shape) < SSIM_WIN:
        raise ValueError(f"SSIM needs 2-D maps of at least {SSIM_WIN}x{SSIM_WIN}")
    w = gaussian_window()

    def filt(a):
        return fftconvolve(a, w, mode="valid")

    mu_t, mu_p = filt(t), filt(p)
    var_t = filt(t * t) - mu_t ** 2
    var_p = filt(p * p) - mu_p ** 2
    cov = filt(t * p) - mu_t * mu_p
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    num = (2 * mu_t * mu_p + c1) * (2 * cov + c2)
    den = (mu_t ** 2 + mu_p ** 2 + c1) * (var_t + var_p + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    rmse: float
    psnr: float
    r2: float
    ssim: float
    data_range: float = 1.0
    n_pixels: int = 0

    @classmethod
    def compute(cls, truth, pred, data_range=1.0):
        t, p = _pair(truth, pred)
        return cls(mae(t, p), rmse(t, p), psnr(t, p, data_range), r2(t, p),
                   ssim(t, p, data_range), data_range, t.size)

    def to_dict(self):
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "psnr_db": "inf" if math.isinf(self.psnr) else self.psnr,
            "r2": self.r2,
            "ssim": self.ssim,
            "data_range": self.data_range,
            "n_pixels": self.n_pixels,
        }

    def as_row(self):
        return [self.mae, self.rmse, self.psnr, self.r2, self.ssim]


METRIC_KEYS = ("mae", "rmse", "psnr_db", "r2", "ssim")
