"""Image quality metrics: MSE, PSNR, SSIM, and the combined similarity loss.

Multi-channel inputs are scored per channel and as the unweighted channel
mean. SSIM uses 8x8 sliding windows with the conventional stabilizers
c1 = (0.01*peak)^2, c2 = (0.03*peak)^2.
"""

import json
from dataclasses import dataclass

import numpy as np

from ._backend import ssim_map


def _check_same_shape(x, ref):
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.shape != ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {ref.shape}")
    return x, ref


def mse(x, ref):
    x, ref = _check_same_shape(x, ref)
    return float(np.mean((x - ref) ** 2))


def psnr(x, ref, peak=1.0):
    """10*log10(peak^2 / MSE); +inf for identical images."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    m = mse(x, ref)
    if m == 0:
        return np.inf
    return float(10.0 * np.log10(peak**2 / m))


def _ssim_single(x, ref, window, c1, c2):
    m, n = x.shape
    if window > min(m, n):
        raise ValueError(f"window {window} larger than image {m}x{n}")
    values = ssim_map(
        np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(ref, dtype=float), window, c1, c2
    )
    return float(np.mean(values))


def ssim(x, ref, window=8, peak=1.0, c1=None, c2=None):
    """Mean structural similarity over sliding windows; 1 for identical
    images, in [-1, 1] generally."""
    x, ref = _check_same_shape(x, ref)
    c1 = (0.01 * peak) ** 2 if c1 is None else c1
    c2 = (0.03 * peak) ** 2 if c2 is None else c2
    if x.ndim == 2:
        return _ssim_single(x, ref, window, c1, c2)
    return float(np.mean([_ssim_single(x[..., c], ref[..., c], window, c1, c2) for c in range(x.shape[2])]))


def similarity_loss(x_hat, x, lam=0.2, window=8, peak=1.0):
    """lam * mean|x_hat - x| + (1 - lam) * (1 - SSIM(x_hat, x)).

    The L1 term is the mean absolute difference, which keeps the loss
    scale-free across image sizes.
    """
    if not 0 <= lam <= 1:
        raise ValueError("lambda must lie in [0, 1]")
    x_hat, x = _check_same_shape(x_hat, x)
    l1 = float(np.mean(np.abs(x_hat - x)))
    return lam * l1 + (1.0 - lam) * (1.0 - ssim(x_hat, x, window=window, peak=peak))


@dataclass
class QualityReport:
    mse: float
    psnr_db: float
    ssim: float
    similarity_loss: float
    per_channel: list

    def to_dict(self):
        def enc(v):
            return "inf" if np.isinf(v) else v

        return {
            "mse": enc(self.mse),
            "psnr_db": enc(self.psnr_db),
            "ssim": enc(self.ssim),
            "similarity_loss": enc(self.similarity_loss),
            "per_channel": [{k: enc(v) for k, v in ch.items()} for ch in self.per_channel],
        }

    def to_json(self, path=None):
        payload = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(payload + "\n")
        return payload


def quality_report(x, ref, peak=1.0, window=8, loss_lambda=0.2):
    """Full metric set for a reconstruction against a reference."""
    x, ref = _check_same_shape(x, ref)
    channels = [(x, ref)] if x.ndim == 2 else [(x[..., c], ref[..., c]) for c in range(x.shape[2])]
    per = []
    for xc, rc in channels:
        per.append(
            {
                "mse": mse(xc, rc),
                "psnr_db": psnr(xc, rc, peak),
                "ssim": ssim(xc, rc, window=window, peak=peak),
                "similarity_loss": similarity_loss(xc, rc, window=window, peak=peak),
            }
        )
    agg = {key: float(np.mean([ch[key] for ch in per])) for key in per[0]}
    return QualityReport(
        mse=agg["mse"],
        psnr_db=agg["psnr_db"],
        ssim=agg["ssim"],
        similarity_loss=agg["similarity_loss"],
        per_channel=per,
    )
