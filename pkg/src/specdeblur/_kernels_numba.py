"""Numba-compiled hot kernels: direct 2-D correlation and SSIM window stats."""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def correlate2d_valid(padded, kernel):
    ki, kj = kernel.shape
    m = padded.shape[0] - ki + 1
    n = padded.shape[1] - kj + 1
    out = np.empty((m, n))
    for i in prange(m):
        for j in range(n):
            s = 0.0
            for a in range(ki):
                for b in range(kj):
                    s += padded[i + a, j + b] * kernel[a, b]
            out[i, j] = s
    return out


@njit(cache=True, parallel=True)
def ssim_map(x, y, win, c1, c2):
    m = x.shape[0] - win + 1
    n = x.shape[1] - win + 1
    npix = win * win
    out = np.empty(m * n)
    for i in prange(m):
        for j in range(n):
            sx = 0.0
            sy = 0.0
            sxx = 0.0
            syy = 0.0
            sxy = 0.0
            for a in range(win):
                for b in range(win):
                    vx = x[i + a, j + b]
                    vy = y[i + a, j + b]
                    sx += vx
                    sy += vy
                    sxx += vx * vx
                    syy += vy * vy
                    sxy += vx * vy
            mx = sx / npix
            my = sy / npix
            varx = sxx / npix - mx * mx
            vary = syy / npix - my * my
            cov = sxy / npix - mx * my
            num = (2 * mx * my + c1) * (2 * cov + c2)
            den = (mx * mx + my * my + c1) * (varx + vary + c2)
            out[i * n + j] = num / den
    return out
