"""Model-based image deblurring: blur synthesis, spectral analysis and
diagnostics, filtered and variational reconstruction, regularization-
parameter selection, and MAP blind deconvolution."""

from ._backend import BACKEND
from .filters import (
    ErrorSplit,
    FilterSpec,
    error_decomposition,
    filter_factors,
    filtered_reconstruct,
    residual_and_solution_norms,
)
from .imagegrid import (
    BOUNDARY_CONDITIONS,
    DEFAULT_BC,
    NoiseSpec,
    Psf,
    add_noise,
    convolve2d,
    delta_psf,
    gaussian_psf,
    gaussian_sigma_for_kernel,
    motion_psf,
    pad,
    unvectorize,
    vectorize,
)
from .metrics import QualityReport, mse, psnr, quality_report, similarity_loss, ssim
from .operators import (
    DENSE_CAP,
    DenseOperator,
    SeparableBlur,
    SpectralDiagonalization,
    assemble_dense,
    bccb_spectrum,
    build_separable,
    condition_number,
    dct_spectrum,
    dense_from_psf,
    is_doubly_symmetric,
)
from .paramselect import (
    SelectionResult,
    default_alpha_grid,
    discrepancy,
    estimate_lambda,
    gcv_tikhonov,
    gcv_tsvd,
    lcurve,
    menger_curvature,
)
from .spectral import (
    NoiseEstimate,
    PicardSeries,
    SvdTriple,
    noise_plateau,
    picard_check,
    picard_series,
    spectral_coefficients,
    svd_dense,
    svd_separable,
)
from .variational import (
    GdConfig,
    MapConfig,
    Regularizer,
    gradient_reconstruct,
    lambda_schedule,
    map_blind_deblur,
    p_norm_pow,
    regularizer_value,
    regularizer_value_and_gradient,
    tikhonov_stacked_solve,
    zero_count,
)

__version__ = "0.1.0"
