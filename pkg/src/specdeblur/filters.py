"""Spectral filter factors (TSVD, Tikhonov, custom), filtered reconstruction,
closed-form residual/solution norms, and the regularization-vs-perturbation
error decomposition."""

from dataclasses import dataclass

import numpy as np


@dataclass
class FilterSpec:
    """Filter-factor recipe. Use the tsvd/tikhonov/custom constructors."""

    kind: str  # "tsvd" | "tikhonov" | "custom"
    k: int | None = None
    alpha: float | None = None
    phi: np.ndarray | None = None

    @classmethod
    def tsvd(cls, k):
        if k < 1:
            raise ValueError("truncation parameter k must be >= 1")
        return cls(kind="tsvd", k=int(k))

    @classmethod
    def tikhonov(cls, alpha):
        if alpha <= 0:
            raise ValueError("regularization parameter alpha must be positive")
        return cls(kind="tikhonov", alpha=float(alpha))

    @classmethod
    def custom(cls, phi):
        phi = np.asarray(phi, dtype=float)
        if np.any(phi < 0) or np.any(phi > 1):
            raise ValueError("custom filter factors must lie in [0, 1]")
        return cls(kind="custom", phi=phi)


def filter_factors(spec, sigma):
    """Filter factors phi_i for a descending singular-value sequence.

    TSVD passes the first k components; its k is capped at the count of
    nonzero singular values (the reconstruction divides by sigma_i).
    Tikhonov uses phi_i = sigma_i^2 / (sigma_i^2 + alpha^2).
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    if spec.kind == "tsvd":
        if not 1 <= spec.k <= n:
            raise ValueError(f"truncation parameter {spec.k} outside [1, {n}]")
        k = min(spec.k, int(np.count_nonzero(sigma > 0)))
        phi = np.zeros(n)
        phi[:k] = 1.0
        return phi
    if spec.kind == "tikhonov":
        return sigma**2 / (sigma**2 + spec.alpha**2)
    if spec.kind == "custom":
        if spec.phi.size != n:
            raise ValueError("custom phi length does not match sigma")
        return spec.phi.copy()
    raise ValueError(f"unknown filter kind {spec.kind!r}")


def _safe_inv_sigma(sigma, phi):
    """1/sigma where the filter passes anything; zero singular values are
    allowed only where masked by zero filter factors."""
    bad = (sigma == 0) & (phi != 0)
    if np.any(bad):
        raise ValueError("nonzero filter factor at a zero singular value")
    inv = np.zeros_like(sigma)
    nz = sigma > 0
    inv[nz] = 1.0 / sigma[nz]
    return inv


def filtered_reconstruct(svd, b, spec):
    """x = sum_i phi_i (u_i^T b / sigma_i) v_i, returned as a vector."""
    phi = filter_factors(spec, svd.sigma)
    c = svd.coefficients(b)
    inv = _safe_inv_sigma(svd.sigma, phi)
    return svd.synthesize(phi * c * inv)


def residual_and_solution_norms(svd, b, spec):
    """Closed-form (||b - A x||_2, ||x||_2) from the spectral sums."""
    phi = filter_factors(spec, svd.sigma)
    c = svd.coefficients(b)
    inv = _safe_inv_sigma(svd.sigma, phi)
    residual = float(np.sqrt(np.sum(((1.0 - phi) * c) ** 2)))
    solution = float(np.sqrt(np.sum((phi * c * inv) ** 2)))
    return residual, solution


@dataclass
class ErrorSplit:
    """x_true - x_filtered = regularization_error - perturbation_error."""

    regularization_error: np.ndarray
    perturbation_error: np.ndarray
    regularization_norm: float
    perturbation_norm: float
    regularization_norm_closed: float
    perturbation_norm_closed: float


def error_decomposition(svd, spec, x_true, e):
    """Split the filtered-reconstruction error for b = A x_true + e.

    regularization_error = (I - V Phi V^T) x_true
    perturbation_error   = V Phi Sigma^-1 U^T e
    Closed-form norms come from the spectral sums over u_i^T e and
    u_i^T b_exact = sigma_i v_i^T x_true.
    """
    x_true = np.asarray(x_true, dtype=float)
    e = np.asarray(e, dtype=float)
    phi = filter_factors(spec, svd.sigma)
    inv = _safe_inv_sigma(svd.sigma, phi)

    ce = svd.coefficients(e)
    vtx = _right_coefficients(svd, x_true)
    reg_vec = x_true - svd.synthesize(phi * vtx)
    pert_vec = svd.synthesize(phi * ce * inv)

    reg_closed = float(np.sqrt(np.sum(((1.0 - phi) * vtx) ** 2)))
    pert_closed = float(np.sqrt(np.sum((phi * ce * inv) ** 2)))
    return ErrorSplit(
        regularization_error=reg_vec,
        perturbation_error=pert_vec,
        regularization_norm=float(np.linalg.norm(reg_vec)),
        perturbation_norm=float(np.linalg.norm(pert_vec)),
        regularization_norm_closed=reg_closed,
        perturbation_norm_closed=pert_closed,
    )


def _right_coefficients(svd, x):
    """V^T x in sorted order."""
    x = np.asarray(x, dtype=float)
    if svd.structure == "dense":
        return svd.V.T @ x
    from .imagegrid import unvectorize, vectorize

    m, n = svd.shape_mn
    C = svd.Vc.T @ unvectorize(x, m, n) @ svd.Vr
    return vectorize(C)[svd.order]


def write_filter_csv(path, sigma, phi):
    """CSV with columns (i, sigma, phi) for filter-factor plots."""
    with open(path, "w") as fh:
        fh.write("i,sigma,phi\n")
        for i in range(len(sigma)):
            fh.write(f"{i},{sigma[i]!r},{phi[i]!r}\n")
