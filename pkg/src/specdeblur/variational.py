"""Optimization-view solvers: stacked Tikhonov least squares, gradient
descent with pluggable regularizers, p-norm/sparse-edge regularization, and
MAP blind deblurring with a geometric regularization schedule.

The gradient-descent reconstructor minimizes ||Ax - b||_2^2 + lambda*R(x)
(data-term coefficient 1). The blind solver minimizes the MAP objective
0.5*||y - h*x||_2^2 + lambda*R(x) (coefficient 1/2), so lambda values are
not interchangeable between the two.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.fft import fft2, ifft2

from .imagegrid import Psf, unvectorize, vectorize
from .operators import DenseOperator, SeparableBlur, _embed_psf


def p_norm_pow(v, p):
    """sum_i |v_i|^p for p in [1, 2] (the p-th power of the p-norm)."""
    if not 1 <= p <= 2:
        raise ValueError("p must lie in [1, 2]")
    return float(np.sum(np.abs(np.asarray(v, dtype=float)) ** p))


def zero_count(v, threshold=0.0):
    """Number of entries with |v_i| > threshold (evaluation-only sparsity)."""
    return int(np.count_nonzero(np.abs(np.asarray(v)) > threshold))


def tikhonov_stacked_solve(A, b, alpha, D=None):
    """Solve min ||[b;0] - [A; alpha*D] x||_2^2 by a least-squares
    factorization. D defaults to the identity."""
    matrix = A.matrix if isinstance(A, DenseOperator) else np.asarray(A, dtype=float)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n = matrix.shape[1]
    Dm = np.eye(n) if D is None else np.asarray(D, dtype=float)
    stacked = np.vstack([matrix, alpha * Dm])
    rhs = np.concatenate([np.asarray(b, dtype=float), np.zeros(Dm.shape[0])])
    x, _, rank, _ = np.linalg.lstsq(stacked, rhs, rcond=None)
    if rank < n:
        raise ValueError("stacked matrix is rank deficient")
    return x


# --- regularizers ----------------------------------------------------------


def _forward_diffs(X):
    """Forward differences along both axes with periodic wrap."""
    return np.roll(X, -1, axis=0) - X, np.roll(X, -1, axis=1) - X


def _diffs_adjoint(tx, ty):
    return (np.roll(tx, 1, axis=0) - tx) + (np.roll(ty, 1, axis=1) - ty)


def _first_difference_apply(x, shape_mn):
    X = unvectorize(x, *shape_mn)
    gx, gy = _forward_diffs(X)
    return np.concatenate([vectorize(gx), vectorize(gy)])


def _first_difference_adjoint(w, shape_mn):
    m, n = shape_mn
    tx = unvectorize(w[: m * n], m, n)
    ty = unvectorize(w[m * n :], m, n)
    return vectorize(_diffs_adjoint(tx, ty))


@dataclass
class Regularizer:
    """Pluggable regularization functional R(x) with an analytic gradient.

    kinds:
      smooth      ||Dx||_2^2 with D identity or first-difference
      pnorm       sum (v_i^2 + eps_p^2)^(p/2) over v = Dx, 1 <= p < 2
      sparse_edge sum (f_i(x) + eps)^q with f the discrete-gradient
                  magnitude sqrt((d1 x)^2 + (d2 x)^2 + eps_f^2), 0 < q <= 1
      zero_count  ||Dx||_0 above a threshold; evaluation-only, no gradient
    """

    kind: str
    D: str = "identity"  # "identity" | "first-difference"
    p: float = 1.0
    eps_p: float = 1e-6
    q: float = 0.7
    eps: float = 1e-3
    eps_f: float = 1e-8
    k_prior: float = 1.0
    sigma2: float | None = None
    threshold: float = 0.0
    shape_mn: tuple | None = None  # required for first-difference / sparse_edge

    @classmethod
    def smooth(cls, D="identity", shape_mn=None):
        return cls(kind="smooth", D=D, shape_mn=shape_mn)

    @classmethod
    def pnorm(cls, p, eps_p=1e-6, D="identity", shape_mn=None):
        if not 1 <= p < 2:
            raise ValueError("p must lie in [1, 2)")
        if eps_p <= 0:
            raise ValueError("eps_p must be positive")
        return cls(kind="pnorm", p=p, eps_p=eps_p, D=D, shape_mn=shape_mn)

    @classmethod
    def sparse_edge(cls, q=0.7, eps=1e-3, eps_f=1e-8, k_prior=1.0, sigma2=None, shape_mn=None):
        if not 0 < q <= 1:
            raise ValueError("q must lie in (0, 1]")
        if eps <= 0:
            raise ValueError("eps must be positive")
        return cls(
            kind="sparse_edge", q=q, eps=eps, eps_f=eps_f, k_prior=k_prior, sigma2=sigma2, shape_mn=shape_mn
        )

    @classmethod
    def zero_count_spec(cls, D="first-difference", threshold=0.0, shape_mn=None):
        return cls(kind="zero_count", D=D, threshold=threshold, shape_mn=shape_mn)


def _apply_D(reg, x):
    if reg.D == "identity":
        return np.asarray(x, dtype=float)
    if reg.D == "first-difference":
        if reg.shape_mn is None:
            raise ValueError("first-difference regularizer needs shape_mn")
        return _first_difference_apply(x, reg.shape_mn)
    raise ValueError(f"unknown regularization operator {reg.D!r}")


def _apply_Dt(reg, w):
    if reg.D == "identity":
        return np.asarray(w, dtype=float)
    return _first_difference_adjoint(w, reg.shape_mn)


def regularizer_value_and_gradient(reg, x):
    """R(x) and its gradient; ZeroCount has no gradient and raises."""
    x = np.asarray(x, dtype=float)
    if reg.kind == "smooth":
        v = _apply_D(reg, x)
        return float(v @ v), 2.0 * _apply_Dt(reg, v)
    if reg.kind == "pnorm":
        v = _apply_D(reg, x)
        sq = v * v + reg.eps_p**2
        value = float(np.sum(sq ** (reg.p / 2.0)))
        grad = _apply_Dt(reg, reg.p * v * sq ** (reg.p / 2.0 - 1.0))
        return value, grad
    if reg.kind == "sparse_edge":
        if reg.shape_mn is None:
            raise ValueError("sparse_edge regularizer needs shape_mn")
        X = unvectorize(x, *reg.shape_mn)
        gx, gy = _forward_diffs(X)
        f = np.sqrt(gx * gx + gy * gy + reg.eps_f**2)
        value = float(np.sum((f + reg.eps) ** reg.q))
        w = np.zeros_like(f)
        nz = f > 0
        w[nz] = reg.q * (f[nz] + reg.eps) ** (reg.q - 1.0) / f[nz]
        grad = vectorize(_diffs_adjoint(w * gx, w * gy))
        return value, grad
    if reg.kind == "zero_count":
        raise ValueError("zero_count is evaluation-only: it has no gradient")
    raise ValueError(f"unknown regularizer kind {reg.kind!r}")


def regularizer_value(reg, x):
    x = np.asarray(x, dtype=float)
    if reg.kind == "zero_count":
        return float(zero_count(_apply_D(reg, x), reg.threshold))
    if reg.kind == "sparse_edge":
        if reg.shape_mn is None:
            raise ValueError("sparse_edge regularizer needs shape_mn")
        gx, gy = _forward_diffs(unvectorize(x, *reg.shape_mn))
        f = np.sqrt(gx * gx + gy * gy + reg.eps_f**2)
        return float(np.sum((f + reg.eps) ** reg.q))
    return regularizer_value_and_gradient(reg, x)[0]


# --- gradient-descent reconstruction ---------------------------------------


@dataclass
class GdConfig:
    """Gradient-descent settings for the variational reconstructor."""

    tau: float = 0.7
    lam: float = 0.3
    max_iter: int = 1500
    tol_rel_change: float = 1e-6
    tol_grad_norm: float = 0.0
    init: str = "pseudo-inverse"  # "pseudo-inverse" | "filtered" | "zero" | "provided"
    x0: np.ndarray | None = None
    init_alpha: float | None = None  # Tikhonov alpha for the "filtered" start

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("step size tau must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class GdTrace:
    objective: list = field(default_factory=list)
    residual_norm: list = field(default_factory=list)
    reg_value: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iteration,objective,residual_norm,reg_value\n")
            for i, (o, r, g) in enumerate(zip(self.objective, self.residual_norm, self.reg_value)):
                fh.write(f"{i},{o!r},{r!r},{g!r}\n")


def gradient_reconstruct(op, b, reg, cfg):
    """Minimize ||Ax - b||_2^2 + lam*R(x) by plain gradient descent:
    x <- x - tau*(2 A^T (Ax - b) + lam * grad R(x)).

    Returns (x, GdTrace). Raises if the objective grows 10x above its
    initial value (step size too large).
    """
    b = np.asarray(b, dtype=float)
    if cfg.init == "provided":
        x = np.asarray(cfg.x0, dtype=float).copy()
    elif cfg.init == "zero":
        x = np.zeros_like(b)
    elif cfg.init == "filtered":
        x = _filtered_start(op, b, cfg.init_alpha)
    else:  # pseudo-inverse start
        x = _pseudo_inverse_start(op, b)
    trace = GdTrace()

    def objective(xv):
        r = op.matvec(xv) - b
        return float(r @ r), r

    obj, r = objective(x)
    if cfg.lam > 0:
        rv, _ = regularizer_value_and_gradient(reg, x)
        obj += cfg.lam * rv
    else:
        rv = 0.0
    initial = obj
    trace.objective.append(obj)
    trace.residual_norm.append(float(np.linalg.norm(r)))
    trace.reg_value.append(rv)
    for _ in range(cfg.max_iter):
        grad = 2.0 * op.rmatvec(r)
        if cfg.lam > 0:
            rv, gr = regularizer_value_and_gradient(reg, x)
            grad = grad + cfg.lam * gr
        gnorm = float(np.linalg.norm(grad))
        x = x - cfg.tau * grad
        new_obj, r = objective(x)
        if cfg.lam > 0:
            rv, _ = regularizer_value_and_gradient(reg, x)
            new_obj += cfg.lam * rv
        trace.objective.append(new_obj)
        trace.residual_norm.append(float(np.linalg.norm(r)))
        trace.reg_value.append(rv)
        if not np.isfinite(new_obj) or new_obj > 10.0 * max(initial, 1e-300):
            raise RuntimeError("gradient descent diverged: step size too large")
        rel_change = abs(trace.objective[-2] - new_obj) / max(abs(trace.objective[-2]), 1e-300)
        obj = new_obj
        if rel_change < cfg.tol_rel_change:
            break
        if cfg.tol_grad_norm > 0 and gnorm < cfg.tol_grad_norm:
            break
    return x, trace


def _pseudo_inverse_start(op, b):
    if isinstance(op, DenseOperator):
        return np.linalg.lstsq(op.matrix, b, rcond=None)[0]
    # generic operators: start from A^T b (scaled), cheap and always defined
    x = op.rmatvec(b)
    denom = float(np.linalg.norm(op.matvec(x)))
    if denom == 0:
        return np.zeros_like(b)
    return x * (float(np.linalg.norm(b)) / denom)


def _filtered_start(op, b, alpha):
    """Tikhonov-filtered start; alpha defaults to 10% of the top singular
    value (a mildly regularized inverse)."""
    from .filters import FilterSpec, filtered_reconstruct
    from .spectral import svd_dense, svd_separable

    if isinstance(op, DenseOperator):
        svd = svd_dense(op)
    elif isinstance(op, SeparableBlur):
        svd = svd_separable(op)
    else:
        raise ValueError("filtered initialization needs a dense or separable operator")
    if alpha is None:
        alpha = 0.1 * float(svd.sigma[0])
    return filtered_reconstruct(svd, b, FilterSpec.tikhonov(alpha))


# --- MAP blind deblurring ---------------------------------------------------


@dataclass
class MapConfig:
    """Settings for the alternating MAP blind-deblur solver.

    The stage weights follow the geometric schedule lam_n = lambda1 / ratio^n
    (n = 0..levels-1); within each stage the objective
    0.5*||y - h*x||_2^2 + lam_n * k_prior * sigma2_scale * R(x) is reduced
    by interleaved monotone gradient steps on x and projected gradient
    steps on h.
    """

    kernel_size: int = 7
    q: float = 0.7
    eps: float = 1e-3
    eps_f: float = 1e-2
    k_prior: float = 1.0
    sigma2_scale: float = 1.0
    lambda1: float = 2.0
    ratio: float = 1.5
    levels: int = 10
    inner_iters: int = 200
    x_steps_per_h: int = 10
    tau_x: float = 1.0
    tau_h: float = 1.0
    h_qp_iters: int = 300
    unsharp_amount: float = 2.5
    unsharp_sigma: float = 1.5

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and >= 1")
        if self.lambda1 <= 0:
            raise ValueError("lambda1 must be positive")
        if self.ratio <= 1:
            raise ValueError("ratio must be > 1")


def lambda_schedule(cfg):
    """Stage weights lambda1 / ratio^n for n = 0..levels-1."""
    return np.array([cfg.lambda1 / cfg.ratio**n for n in range(cfg.levels)])


@dataclass
class MapTrace:
    stage: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    residual_norm: list = field(default_factory=list)
    reg_value: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iteration,stage,lambda,objective,residual_norm,reg_value\n")
            for i in range(len(self.objective)):
                fh.write(
                    f"{i},{self.stage[i]},{self.lam[i]!r},{self.objective[i]!r},"
                    f"{self.residual_norm[i]!r},{self.reg_value[i]!r}\n"
                )


def _conv_spectrum(kernel, m, n):
    """Fourier multiplier reproducing convolve2d(..., bc="periodic")."""
    return fft2(_embed_psf(kernel[::-1, ::-1], m, n))


def _conv_periodic(X, Fh):
    return np.real(ifft2(fft2(X) * Fh))


def _gaussian_kernel_2d(size, sigma):
    t = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (t / sigma) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def _project_kernel(h):
    """One-pass projection: clip negatives to zero, renormalize to sum 1."""
    h = np.clip(h, 0.0, None)
    s = h.sum()
    if s <= 0:
        raise RuntimeError("kernel projection produced an empty kernel")
    return h / s


def _h_subproblem_descent(Xs, ys, k, h0, iters, tau_h):
    """Projected gradient descent on the data term over the kernel window.

    The data term restricted to the k x k window is an explicit quadratic
    built from image auto/cross-correlations (summed over channels, which
    share the kernel), so the descent iterations are cheap. The gradient is
    projected onto the sum-zero tangent space before stepping (the
    common-mode component is removed by the renormalization anyway), then
    the one-pass clip+renormalize projection is applied.
    """
    m, n = Xs[0].shape
    c = (k - 1) // 2
    span = np.arange(-c, c + 1)
    oi = np.repeat(span, k)
    oj = np.tile(span, k)
    G = np.zeros((k * k, k * k))
    rhs = np.zeros(k * k)
    for X, y in zip(Xs, ys):
        Fx = fft2(X)
        auto = np.real(ifft2(np.conj(Fx) * Fx))  # auto[d] = sum_t x(t) x(t+d)
        cross = np.real(ifft2(np.conj(fft2(y)) * Fx))  # cross[d] = sum_t y(t) x(t+d)
        rhs += cross[oi % m, oj % n]
        G += auto[(oi[None, :] - oi[:, None]) % m, (oj[None, :] - oj[:, None]) % n]
    h = h0.flatten().copy()
    cur = 0.5 * h @ G @ h - rhs @ h
    for _ in range(iters):
        g = G @ h - rhs
        g -= g.mean()
        Gg = G @ g
        denom = g @ Gg
        t = tau_h * (g @ g) / denom if denom > 0 else 0.0
        improved = False
        for _ in range(30):
            trial = np.clip(h - t * g, 0.0, None)
            s = trial.sum()
            if s > 0:
                trial /= s
                val = 0.5 * trial @ G @ trial - rhs @ trial
                if val < cur - 1e-15:
                    h, cur, improved = trial, val, True
                    break
            t *= 0.5
        if not improved:
            break
    return h.reshape(k, k)


def map_blind_deblur(y, cfg, x0=None):
    """Alternating MAP estimation of (sharp image, kernel) from a blurry
    observation under periodic boundary handling.

    3-channel observations are handled with a single shared kernel: the
    image steps run per channel and the kernel subproblem sums the
    per-channel quadratics. Returns (x, Psf, MapTrace). The objective is
    non-increasing within each lambda stage: every x and h update is
    accepted only if it does not increase the stage objective.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 2:
        ys = [y]
    elif y.ndim == 3:
        ys = [np.ascontiguousarray(y[..., ch]) for ch in range(y.shape[2])]
    else:
        raise ValueError("observation must be 2-D or 3-D")
    m, n = ys[0].shape
    k = cfg.kernel_size
    if k > min(m, n):
        raise ValueError("kernel size exceeds image")
    c = (k - 1) // 2
    h = np.zeros((k, k))
    h[c, c] = 1.0
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        Xs = [x0.copy()] if x0.ndim == 2 else [x0[..., ch].copy() for ch in range(x0.shape[2])]
    elif cfg.unsharp_amount > 0:
        Fg = _conv_spectrum(_gaussian_kernel_2d(min(7, k | 1), cfg.unsharp_sigma), m, n)
        Xs = [yc + cfg.unsharp_amount * (yc - _conv_periodic(yc, Fg)) for yc in ys]
    else:
        Xs = [yc.copy() for yc in ys]
    Fh = _conv_spectrum(h, m, n)
    prior_scale = cfg.k_prior * cfg.sigma2_scale
    reg = Regularizer.sparse_edge(q=cfg.q, eps=cfg.eps, eps_f=cfg.eps_f, shape_mn=(m, n))
    trace = MapTrace()

    def stage_objective(Xlist, Fhv, lam):
        total = res_sq = reg_total = 0.0
        for Xc, yc in zip(Xlist, ys):
            r = _conv_periodic(Xc, Fhv) - yc
            rv = regularizer_value(reg, vectorize(Xc))
            total += 0.5 * float(np.sum(r * r)) + lam * prior_scale * rv
            res_sq += float(np.sum(r * r))
            reg_total += rv
        return total, float(np.sqrt(res_sq)), reg_total

    for stage, lam in enumerate(lambda_schedule(cfg)):
        cur, rnorm, rv = stage_objective(Xs, Fh, lam)
        if not np.isfinite(cur):
            raise RuntimeError("non-finite objective in blind deblurring")
        it = 0
        while it < cfg.inner_iters:
            for _ in range(cfg.x_steps_per_h):
                for ch, yc in enumerate(ys):
                    Xc = Xs[ch]
                    r = _conv_periodic(Xc, Fh) - yc
                    grad_data = np.real(ifft2(np.conj(Fh) * fft2(r)))
                    _, grad_prior = regularizer_value_and_gradient(reg, vectorize(Xc))
                    grad = grad_data + lam * prior_scale * unvectorize(grad_prior, m, n)
                    t = cfg.tau_x
                    for _ in range(25):
                        Xn = Xc - t * grad
                        trial = list(Xs)
                        trial[ch] = Xn
                        new, nrnorm, nrv = stage_objective(trial, Fh, lam)
                        if new <= cur:
                            Xs[ch], cur, rnorm, rv = Xn, new, nrnorm, nrv
                            break
                        t *= 0.5
                trace.stage.append(stage)
                trace.lam.append(lam)
                trace.objective.append(cur)
                trace.residual_norm.append(rnorm)
                trace.reg_value.append(rv)
                it += 1
                if it >= cfg.inner_iters:
                    break
            h_new = _h_subproblem_descent(Xs, ys, k, h, cfg.h_qp_iters, cfg.tau_h)
            h_new = _project_kernel(h_new)
            Fh_new = _conv_spectrum(h_new, m, n)
            new, nrnorm, nrv = stage_objective(Xs, Fh_new, lam)
            if new <= cur:
                h, Fh, cur, rnorm, rv = h_new, Fh_new, new, nrnorm, nrv
        if not np.isfinite(cur):
            raise RuntimeError("non-finite objective in blind deblurring")
    X_out = Xs[0] if y.ndim == 2 else np.dstack(Xs)
    return X_out, Psf(h), trace
