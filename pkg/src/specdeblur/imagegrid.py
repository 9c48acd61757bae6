"""Pixel grids, PSFs, boundary padding, 2-D convolution, and noise injection.

Images are plain float64 arrays, nominally in [0, 1], shaped (m, n) or
(m, n, 3); 3-channel images are processed channel-wise with a shared PSF.
Vectorization is column-stacking throughout: entry (i, j) of an m x n image
lands at position j*m + i of the vector. No operation here clamps pixel
values; clamping happens only at image export.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import correlate2d_valid

BOUNDARY_CONDITIONS = ("zero", "periodic", "reflexive")
DEFAULT_BC = "reflexive"

_PAD_MODE = {"zero": "constant", "periodic": "wrap", "reflexive": "symmetric"}


def _check_bc(bc):
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {bc!r}; expected one of {BOUNDARY_CONDITIONS}")


def vectorize(X):
    """Stack the columns of a single-channel image into a length m*n vector."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError("vectorize expects a single-channel (2-D) image")
    return X.flatten(order="F")


def unvectorize(v, m, n):
    """Inverse of vectorize: rebuild the m x n image from a column-stacked vector."""
    v = np.asarray(v)
    if v.size != m * n:
        raise ValueError(f"vector of length {v.size} does not fill a {m}x{n} grid")
    return v.reshape((m, n), order="F")


def pad(X, bc=DEFAULT_BC, margin=0):
    """Pad an image on all sides under the given boundary condition.

    Reflexive padding mirrors with edge duplication (half-sample symmetry),
    the convention matched by the cosine-transform diagonalization in
    operators.dct_spectrum. The mirror source must not be exhausted:
    margin < min(m, n) is required for reflexive padding.
    """
    _check_bc(bc)
    X = np.asarray(X, dtype=float)
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if margin == 0:
        return X.copy()
    m, n = X.shape[:2]
    if bc == "reflexive" and margin >= min(m, n):
        raise ValueError(f"reflexive margin {margin} exhausts the {m}x{n} mirror source")
    width = ((margin, margin), (margin, margin)) + ((0, 0),) * (X.ndim - 2)
    return np.pad(X, width, mode=_PAD_MODE[bc])


def _pad_rect(X, bc, margin_i, margin_j):
    """Per-axis padding used by convolution (kernels can be rectangular)."""
    if margin_i == 0 and margin_j == 0:
        return np.ascontiguousarray(X, dtype=float)
    m, n = X.shape
    if bc == "reflexive" and (margin_i >= m or margin_j >= n):
        raise ValueError("reflexive margin exhausts the mirror source")
    return np.pad(X, ((margin_i, margin_i), (margin_j, margin_j)), mode=_PAD_MODE[bc])


@dataclass
class Psf:
    """A square odd-sized convolution kernel, nonnegative and summing to 1."""

    array: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.array, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("PSF must be a square 2-D array")
        if a.shape[0] % 2 == 0:
            raise ValueError("PSF size must be odd")
        if np.any(a < 0):
            raise ValueError("PSF entries must be nonnegative")
        s = a.sum()
        if s <= 0:
            raise ValueError("PSF must have positive total mass")
        if abs(s - 1.0) > 1e-12:
            a = a / s
        self.array = a

    @property
    def size(self):
        return self.array.shape[0]

    @property
    def center(self):
        c = (self.size - 1) // 2
        return (c, c)


def delta_psf(k=1):
    """Identity kernel: all mass at the center."""
    a = np.zeros((k, k))
    a[(k - 1) // 2, (k - 1) // 2] = 1.0
    return Psf(a)


def gaussian_sigma_for_kernel(kernel_size):
    """Width rule sigma = 0.3*((kernel_size - 1)*0.5 - 1) + 0.8."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError("kernel_size must be odd and >= 1")
    return 0.3 * ((kernel_size - 1) * 0.5 - 1) + 0.8


def gaussian_psf(k, sigma1, sigma2=None, rho=0.0):
    """2-D Gaussian PSF with covariance [[sigma1^2, rho^2], [rho^2, sigma2^2]].

    sigma1/sigma2 control width along the two axes, rho the orientation.
    The kernel is evaluated on the k x k grid centered at ((k-1)/2, (k-1)/2)
    and normalized to unit sum.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError("kernel size must be odd and >= 1")
    if sigma2 is None:
        sigma2 = sigma1
    if sigma1 <= 0 or sigma2 <= 0:
        raise ValueError("sigma1 and sigma2 must be positive")
    det = sigma1**2 * sigma2**2 - rho**4
    if det <= 0:
        raise ValueError("covariance must be positive definite (rho^2 < sigma1*sigma2)")
    c = (k - 1) / 2.0
    di = np.arange(k)[:, None] - c
    dj = np.arange(k)[None, :] - c
    # inverse of [[s1^2, r^2], [r^2, s2^2]]
    a = sigma2**2 / det
    b = -(rho**2) / det
    d = sigma1**2 / det
    quad = a * di**2 + 2 * b * di * dj + d * dj**2
    return Psf(np.exp(-0.5 * quad))


def _splat_bilinear(grid, pos, weight):
    k = grid.shape[0]
    i0 = int(np.floor(pos[0]))
    j0 = int(np.floor(pos[1]))
    fi = pos[0] - i0
    fj = pos[1] - j0
    for di, dj, w in ((0, 0, (1 - fi) * (1 - fj)), (1, 0, fi * (1 - fj)),
                      (0, 1, (1 - fi) * fj), (1, 1, fi * fj)):
        ii, jj = i0 + di, j0 + dj
        if 0 <= ii < k and 0 <= jj < k and w > 0:
            grid[ii, jj] += weight * w


def motion_psf(k, trajectory_steps, seed=None):
    """Random-trajectory motion kernel: dwell time of a continuous path.

    The path starts at the center with a random velocity that wanders
    (reflecting off the window border) and is integrated at subpixel
    resolution with bilinear splatting, so the kernel is a connected smear,
    intensity proportional to dwell time. Deterministic for a fixed seed.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError("kernel size must be odd and >= 1")
    if trajectory_steps < 1:
        raise ValueError("trajectory_steps must be >= 1")
    rng = np.random.default_rng(seed)
    grid = np.zeros((k, k))
    pos = np.array([(k - 1) / 2.0, (k - 1) / 2.0])
    if trajectory_steps == 1 or k == 1:
        grid[int(pos[0]), int(pos[1])] = 1.0
        return Psf(grid)
    vel = rng.normal(0.0, 1.0, 2)
    substeps = 8
    _splat_bilinear(grid, pos, 1.0)
    for _ in range(trajectory_steps - 1):
        vel = 0.7 * vel + 0.5 * rng.normal(0.0, 1.0, 2)
        speed = np.hypot(vel[0], vel[1])
        if speed > 1.0:
            vel = vel / speed
        for _ in range(substeps):
            pos = pos + vel / substeps
            # reflect at the window border
            for axis in (0, 1):
                if pos[axis] < 0.0:
                    pos[axis] = -pos[axis]
                    vel[axis] = -vel[axis]
                elif pos[axis] > k - 1.0:
                    pos[axis] = 2.0 * (k - 1.0) - pos[axis]
                    vel[axis] = -vel[axis]
            _splat_bilinear(grid, pos, 1.0 / substeps)
    return Psf(grid)


def _convolve2d_array(X, kernel, bc):
    """2-D convolution of a single channel with a (possibly rectangular)
    odd-sized kernel; output keeps the input shape.

    Orientation convention: out(i, j) = sum_d X(i + d1, j + d2) * K(c + d1,
    c + d2), so a point source reproduces the kernel mirrored about its
    center (the index-doubling identities of the point-spread response).
    """
    _check_bc(bc)
    X = np.asarray(X, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    ki, kj = kernel.shape
    if ki % 2 == 0 or kj % 2 == 0:
        raise ValueError("kernel sides must be odd")
    m, n = X.shape
    if ki > m or kj > n:
        raise ValueError(f"kernel {ki}x{kj} larger than image {m}x{n}")
    padded = _pad_rect(X, bc, (ki - 1) // 2, (kj - 1) // 2)
    return correlate2d_valid(padded, np.ascontiguousarray(kernel))


def convolve2d(X, psf, bc=DEFAULT_BC):
    """Blur an image with a PSF; a point source responds with the mirrored
    kernel centered on it.

    Accepts (m, n) or (m, n, c) images; channels share the PSF.
    """
    kernel = psf.array if isinstance(psf, Psf) else np.asarray(psf, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        return _convolve2d_array(X, kernel, bc)
    if X.ndim == 3:
        return np.dstack([_convolve2d_array(X[..., c], kernel, bc) for c in range(X.shape[2])])
    raise ValueError("image must be 2-D or 3-D")


@dataclass
class NoiseSpec:
    """Gaussian white noise target: exactly one of std (per-pixel eta) or
    frob_norm (total Frobenius norm of the realization) must be set."""

    std: float | None = None
    frob_norm: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if (self.std is None) == (self.frob_norm is None):
            raise ValueError("set exactly one of std or frob_norm")
        target = self.std if self.std is not None else self.frob_norm
        if target < 0:
            raise ValueError("noise target must be nonnegative")


def add_noise(X, spec):
    """Return (X + E, E) with E drawn white Gaussian to match the target.

    When frob_norm is targeted the draw is rescaled so ||E||_F matches the
    target exactly.
    """
    X = np.asarray(X, dtype=float)
    rng = np.random.default_rng(spec.seed)
    if spec.std is not None:
        E = spec.std * rng.standard_normal(X.shape) if spec.std > 0 else np.zeros_like(X)
    else:
        if spec.frob_norm == 0:
            E = np.zeros_like(X)
        else:
            E = rng.standard_normal(X.shape)
            E *= spec.frob_norm / np.linalg.norm(E)
    return X + E, E
