"""The forward blurring operator in three forms: separable (A_c X A_r^T),
dense (N x N Kronecker assembly), and transform-diagonalized (FFT for
periodic boundaries, orthonormal DCT-II for reflexive boundaries with a
doubly symmetric PSF).

All forms agree with imagegrid.convolve2d on their domain of validity; the
dense form is capped at N <= DENSE_CAP since downstream factorizations cost
O(N^3).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dctn, fft2, idctn, ifft2

from .imagegrid import DEFAULT_BC, Psf, _check_bc, _convolve2d_array, unvectorize, vectorize

DENSE_CAP = 4096


def _conv_matrix_1d(kernel, n, bc):
    """n x n matrix realizing 1-D true convolution under bc, built column by
    column from basis-vector responses."""
    kernel = np.asarray(kernel, dtype=float)
    k = kernel.size
    if k % 2 == 0:
        raise ValueError("kernel length must be odd")
    if k > n:
        raise ValueError(f"kernel of length {k} too long for dimension {n}")
    c = (k - 1) // 2
    A = np.zeros((n, n))
    mode = {"zero": "constant", "periodic": "wrap", "reflexive": "symmetric"}[bc]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if c == 0:
            A[:, j] = e * kernel[0]
            continue
        ep = np.pad(e, c, mode=mode)
        A[:, j] = np.array([ep[i : i + k] @ kernel for i in range(n)])
    return A


@dataclass
class SeparableBlur:
    """Separable forward operator: apply(X) = A_c @ X @ A_r.T."""

    A_r: np.ndarray
    A_c: np.ndarray
    bc: str
    row_kernel: np.ndarray
    col_kernel: np.ndarray

    @property
    def shape_mn(self):
        return (self.A_c.shape[0], self.A_r.shape[0])

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != self.shape_mn:
            raise ValueError(f"image shape {X.shape} does not match operator {self.shape_mn}")
        return self.A_c @ X @ self.A_r.T

    def matvec(self, v):
        m, n = self.shape_mn
        return vectorize(self.apply(unvectorize(v, m, n)))

    def rmatvec(self, v):
        m, n = self.shape_mn
        return vectorize(self.A_c.T @ unvectorize(v, m, n) @ self.A_r)


def build_separable(row_kernel, col_kernel, m, n, bc=DEFAULT_BC):
    """Build the separable blur whose PSF is the outer product
    col_kernel (x) row_kernel^T. Kernels must be odd-length and sum to 1."""
    _check_bc(bc)
    row_kernel = np.asarray(row_kernel, dtype=float)
    col_kernel = np.asarray(col_kernel, dtype=float)
    for kern, name in ((row_kernel, "row"), (col_kernel, "col")):
        if abs(kern.sum() - 1.0) > 1e-10:
            raise ValueError(f"{name} kernel must sum to 1")
    return SeparableBlur(
        A_r=_conv_matrix_1d(row_kernel, n, bc),
        A_c=_conv_matrix_1d(col_kernel, m, bc),
        bc=bc,
        row_kernel=row_kernel,
        col_kernel=col_kernel,
    )


@dataclass
class DenseOperator:
    """Explicit N x N forward operator in column-stacking convention."""

    matrix: np.ndarray
    shape_mn: tuple
    provenance: str = "explicit"

    @property
    def n(self):
        return self.matrix.shape[0]

    def matvec(self, v):
        return self.matrix @ v

    def rmatvec(self, v):
        return self.matrix.T @ v


def assemble_dense(blur):
    """Assemble A = A_r (x) A_c for a separable blur (N <= DENSE_CAP)."""
    m, n = blur.shape_mn
    N = m * n
    if N > DENSE_CAP:
        raise ValueError(f"N = {N} exceeds the dense cap {DENSE_CAP}; use the separable or transform paths")
    return DenseOperator(np.kron(blur.A_r, blur.A_c), (m, n), provenance="assembled-from-separable")


def dense_from_psf(psf, m, n, bc=DEFAULT_BC):
    """Explicit dense operator for an arbitrary PSF, one convolution per
    basis image. Slow path: only for N <= DENSE_CAP."""
    _check_bc(bc)
    kernel = psf.array if isinstance(psf, Psf) else np.asarray(psf, dtype=float)
    N = m * n
    if N > DENSE_CAP:
        raise ValueError(f"N = {N} exceeds the dense cap {DENSE_CAP}")
    A = np.zeros((N, N))
    E = np.zeros((m, n))
    for j in range(N):
        E[j % m, j // m] = 1.0
        A[:, j] = vectorize(_convolve2d_array(E, kernel, bc))
        E[j % m, j // m] = 0.0
    return DenseOperator(A, (m, n), provenance="explicit")


def _embed_psf(kernel, m, n):
    """Embed a kernel in an m x n grid with its center moved to (0, 0)."""
    k = kernel.shape[0]
    c = (k - 1) // 2
    G = np.zeros((m, n))
    G[:k, :k] = kernel
    return np.roll(G, (-c, -c), axis=(0, 1))


@dataclass
class SpectralDiagonalization:
    """Forward operator as basis transform + eigenvalue multiply + inverse."""

    basis: str  # "fourier" | "cosine"
    eigenvalues: np.ndarray  # (m, n) complex (fourier) or real (cosine)
    shape_mn: tuple = field(init=False)

    def __post_init__(self):
        self.shape_mn = self.eigenvalues.shape

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != self.shape_mn:
            raise ValueError(f"image shape {X.shape} does not match operator {self.shape_mn}")
        if self.basis == "fourier":
            return np.real(ifft2(fft2(X) * self.eigenvalues))
        return idctn(dctn(X, type=2, norm="ortho") * self.eigenvalues, type=2, norm="ortho")

    def matvec(self, v):
        m, n = self.shape_mn
        return vectorize(self.apply(unvectorize(v, m, n)))


def bccb_spectrum(psf, m, n):
    """Eigenvalues of the periodic-BC operator: 2-D FFT of the mirrored PSF
    embedded at the origin (center circularly shifted to (0, 0)); the mirror
    matches the point-spread orientation of convolve2d."""
    kernel = psf.array if isinstance(psf, Psf) else np.asarray(psf, dtype=float)
    if kernel.shape[0] > min(m, n):
        raise ValueError("PSF larger than image")
    return SpectralDiagonalization("fourier", fft2(_embed_psf(kernel[::-1, ::-1], m, n)))


def is_doubly_symmetric(kernel, tol=1e-12):
    kernel = np.asarray(kernel, dtype=float)
    return bool(
        np.allclose(kernel, kernel[::-1, :], atol=tol) and np.allclose(kernel, kernel[:, ::-1], atol=tol)
    )


def dct_spectrum(psf, m, n):
    """Eigenvalues of the reflexive-BC operator for a doubly symmetric PSF,
    via the orthonormal DCT-II: dct2(first operator column) / dct2(delta)."""
    kernel = psf.array if isinstance(psf, Psf) else np.asarray(psf, dtype=float)
    if kernel.shape[0] > min(m, n):
        raise ValueError("PSF larger than image")
    if not is_doubly_symmetric(kernel):
        raise ValueError("doubly symmetric PSF required for the cosine diagonalization")
    e1 = np.zeros((m, n))
    e1[0, 0] = 1.0
    a1 = _convolve2d_array(e1, kernel, "reflexive")
    lam = dctn(a1, type=2, norm="ortho") / dctn(e1, type=2, norm="ortho")
    return SpectralDiagonalization("cosine", lam)


def write_dense_csv(path, op):
    """Dense-operator export: first line N, then the N matrix rows."""
    matrix = op.matrix if isinstance(op, DenseOperator) else np.asarray(op, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{matrix.shape[0]}\n")
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_dense_csv(path):
    with open(path) as fh:
        n = int(fh.readline().strip())
        rows = [[float(t) for t in line.strip().split(",")] for line in fh if line.strip()]
    matrix = np.array(rows)
    if matrix.shape != (n, n):
        raise ValueError(f"CSV body {matrix.shape} does not match header N = {n}")
    return matrix


def write_spectrum_csv(path, spectrum):
    """Eigenvalue-grid export: header m,n,basis then one grid row per line
    (complex values serialized as (real+imagj) for the fourier basis)."""
    lam = spectrum.eigenvalues
    m, n = lam.shape
    encode = (lambda v: repr(complex(v))) if spectrum.basis == "fourier" else (lambda v: repr(float(v)))
    with open(path, "w") as fh:
        fh.write(f"{m},{n},{spectrum.basis}\n")
        for row in lam:
            fh.write(",".join(encode(v) for v in row) + "\n")


def condition_number(op):
    """max/min singular value of an operator, spectrum, or value array.

    Accepts a SpectralDiagonalization (moduli of eigenvalues), an SvdTriple
    or anything with a .sigma attribute, or a raw array of spectral values.
    Returns inf when the smallest value is exactly 0.
    """
    if isinstance(op, SpectralDiagonalization):
        values = np.abs(op.eigenvalues).ravel()
    elif hasattr(op, "sigma"):
        values = np.asarray(op.sigma, dtype=float)
    else:
        values = np.abs(np.asarray(op, dtype=complex)).ravel().astype(float)
    if values.size == 0 or np.max(values) == 0:
        raise ValueError("operator has no nonzero spectral values")
    smallest = np.min(values)
    if smallest == 0:
        return np.inf
    return float(np.max(values) / smallest)
