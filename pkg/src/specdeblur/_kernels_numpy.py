"""Pure-numpy implementations of the hot kernels.

Selected instead of the numba versions when SPECDEBLUR_DISABLE_NUMBA is set
or numba is unavailable.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def correlate2d_valid(padded, kernel):
    """Valid-mode 2-D correlation of a padded image with a kernel."""
    windows = sliding_window_view(padded, kernel.shape)
    return np.einsum("ijkl,kl->ij", windows, kernel)


def ssim_map(x, y, win, c1, c2):
    """Per-window SSIM values over all valid win x win sliding windows."""
    wx = sliding_window_view(x, (win, win)).reshape(-1, win * win)
    wy = sliding_window_view(y, (win, win)).reshape(-1, win * win)
    mx = wx.mean(axis=1)
    my = wy.mean(axis=1)
    # same expression for variance and covariance so identical inputs give
    # exactly equal numerator and denominator (SSIM == 1)
    vx = (wx * wx).mean(axis=1) - mx * mx
    vy = (wy * wy).mean(axis=1) - my * my
    cov = (wx * wy).mean(axis=1) - mx * my
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return num / den
