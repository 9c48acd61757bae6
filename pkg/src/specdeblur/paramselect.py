"""Automatic regularization-parameter selection: GCV for Tikhonov and TSVD,
the L-curve corner, the discrepancy principle, and the gradient-based
lambda estimate for variational solvers.

GCV minimizers are found by grid search (the objective can be extremely
flat near its minimizer, which defeats derivative-based root finding).
"""

from dataclasses import dataclass, field

import numpy as np

from .filters import FilterSpec, residual_and_solution_norms


@dataclass
class SelectionResult:
    """Chosen parameter plus the evaluation curve that produced it."""

    parameter: float
    method: str
    grid: np.ndarray
    values: np.ndarray | None = None  # objective values (GCV)
    log_residual: np.ndarray | None = None  # L-curve points
    log_solution: np.ndarray | None = None
    curvature: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def default_alpha_grid(sigma, num=60):
    """Log-spaced grid over [smallest positive sigma, sigma_1]."""
    sigma = np.asarray(sigma, dtype=float)
    positive = sigma[sigma > 0]
    if positive.size == 0:
        raise ValueError("no positive singular values")
    lo, hi = positive.min(), positive.max()
    if lo == hi:
        return np.full(num, hi)
    return np.geomspace(lo, hi, num)


def gcv_tikhonov(svd, b, alpha_grid=None):
    """Minimize G(alpha) = sum (c_i/(sigma_i^2+alpha^2))^2 / (sum 1/(sigma_i^2+alpha^2))^2
    over the grid."""
    if alpha_grid is None:
        alpha_grid = default_alpha_grid(svd.sigma)
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    if alpha_grid.size == 0:
        raise ValueError("alpha grid is empty")
    if np.any(alpha_grid <= 0):
        raise ValueError("alpha grid entries must be positive")
    c = svd.coefficients(b)
    s2 = svd.sigma**2
    values = np.empty(alpha_grid.size)
    for i, a in enumerate(alpha_grid):
        d = s2 + a * a
        values[i] = np.sum((c / d) ** 2) / np.sum(1.0 / d) ** 2
    best = int(np.argmin(values))
    return SelectionResult(
        parameter=float(alpha_grid[best]),
        method="gcv-tikhonov",
        grid=alpha_grid,
        values=values,
        diagnostics={"index": best},
    )


def gcv_tsvd(svd, b):
    """Minimize G(k) = sum_{i>k} c_i^2 / (N-k)^2 over k = 1..N-1 via suffix
    sums; ties break toward smaller k."""
    c = svd.coefficients(b)
    n = c.size
    if n < 2:
        raise ValueError("need N >= 2 for TSVD GCV")
    suffix = np.cumsum((c**2)[::-1])[::-1]  # suffix[i] = sum_{j>=i} c_j^2
    ks = np.arange(1, n)
    values = suffix[1:] / (n - ks) ** 2
    best = int(np.argmin(values))  # argmin takes the first minimum: smaller k
    return SelectionResult(
        parameter=float(ks[best]),
        method="gcv-tsvd",
        grid=ks.astype(float),
        values=values,
        diagnostics={"index": best, "k_opt": int(ks[best])},
    )


def menger_curvature(log_residual, log_solution, arc_fraction=0.02):
    """Discrete Menger curvature at each grid point of the log-log curve.

    The stencil neighbors are the nearest points at least arc_fraction of
    the total arc length away on each side, which keeps the three-point
    circumradius meaningful where grid points cluster. Positive curvature
    is the turning direction of the L corner.
    """
    pts = np.column_stack([log_residual, log_solution])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total <= 0:
        raise ValueError("no corner: degenerate (zero-length) L-curve")
    h = arc_fraction * total
    n = len(pts)
    kappa = np.full(n, -np.inf)
    for i in range(n):
        j = i
        while j > 0 and arc[i] - arc[j] < h:
            j -= 1
        k = i
        while k < n - 1 and arc[k] - arc[i] < h:
            k += 1
        if j == i or k == i:
            continue
        p0, p1, p2 = pts[j], pts[i], pts[k]
        a = np.linalg.norm(p1 - p0)
        b = np.linalg.norm(p2 - p1)
        c = np.linalg.norm(p2 - p0)
        if a * b * c == 0:
            continue
        cross = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
        kappa[i] = 2.0 * cross / (a * b * c)
    return kappa


def lcurve(svd, b, alpha_grid=None, arc_fraction=0.02):
    """L-curve corner for the Tikhonov filter: the grid point of maximum
    discrete Menger curvature on (log residual, log solution); ties go to
    the larger alpha."""
    if alpha_grid is None:
        alpha_grid = default_alpha_grid(svd.sigma)
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    if alpha_grid.size < 5:
        raise ValueError("alpha grid needs at least 5 points")
    if np.any(np.diff(alpha_grid) <= 0):
        raise ValueError("alpha grid must be sorted ascending")
    log_res = np.empty(alpha_grid.size)
    log_sol = np.empty(alpha_grid.size)
    for i, a in enumerate(alpha_grid):
        r, s = residual_and_solution_norms(svd, b, FilterSpec.tikhonov(a))
        if r <= 0 or s <= 0:
            raise ValueError("no corner: zero residual or solution norm on the grid")
        log_res[i] = np.log(r)
        log_sol[i] = np.log(s)
    kappa = menger_curvature(log_res, log_sol, arc_fraction)
    finite = kappa[np.isfinite(kappa)]
    if finite.size == 0 or np.ptp(finite) < 1e-12:
        raise ValueError("no corner: L-curve points are collinear")
    corner = int(np.flatnonzero(kappa == np.max(kappa))[-1])  # ties: larger alpha
    return SelectionResult(
        parameter=float(alpha_grid[corner]),
        method="lcurve",
        grid=alpha_grid,
        log_residual=log_res,
        log_solution=log_sol,
        curvature=kappa,
        diagnostics={"corner_index": corner, "corner_curvature": float(kappa[corner])},
    )


def discrepancy(svd, b, noise_norm, tau_dp=1.0, rel_tol=1e-9, max_iter=200):
    """Find alpha with ||b - A x_alpha||_2 = tau_dp * noise_norm by bisection
    on the closed-form Tikhonov residual, which increases monotonically with
    alpha."""
    if noise_norm < 0:
        raise ValueError("noise_norm must be nonnegative")
    if tau_dp < 1.0:
        raise ValueError("safety factor tau_dp must be >= 1")
    c = svd.coefficients(b)
    s2 = svd.sigma**2

    def residual(alpha):
        frac = alpha**2 / (s2 + alpha**2)
        return float(np.sqrt(np.sum((frac * c) ** 2)))

    target = tau_dp * noise_norm
    sigma_max = float(np.max(svd.sigma))
    lo, hi = 1e-14 * max(sigma_max, 1.0), 1e6 * max(sigma_max, 1.0)
    r_lo, r_hi = residual(lo), residual(hi)
    norm_b = float(np.linalg.norm(c))
    if target < r_lo:
        # a vanishing target is reachable in the limit alpha -> 0 when the
        # smallest-alpha residual is already negligible
        if r_lo - target <= 1e-10 * max(norm_b, 1.0):
            return SelectionResult(
                parameter=float(lo),
                method="discrepancy",
                grid=np.array([lo, hi]),
                diagnostics={"achieved_residual": r_lo, "target_residual": target, "tau_dp": tau_dp},
            )
        raise ValueError(
            f"target residual {target:.6g} outside the achievable range [{r_lo:.6g}, {r_hi:.6g}]"
        )
    if target > r_hi:
        raise ValueError(
            f"target residual {target:.6g} outside the achievable range [{r_lo:.6g}, {r_hi:.6g}]"
        )
    for _ in range(max_iter):
        mid = np.sqrt(lo * hi)
        if residual(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < rel_tol:
            break
    alpha = np.sqrt(lo * hi)
    achieved = residual(alpha)
    grid = np.array([lo, hi])
    return SelectionResult(
        parameter=float(alpha),
        method="discrepancy",
        grid=grid,
        diagnostics={"achieved_residual": achieved, "target_residual": target, "tau_dp": tau_dp},
    )


def estimate_lambda(op, noise_sampler, trials=100, seed=None):
    """Monte-Carlo estimate lambda_hat = 2 E ||A^T e||_2 over noise draws.

    `op` needs a .rmatvec; `noise_sampler(rng)` returns one noise vector.
    Deterministic for a fixed seed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(trials):
        e = np.asarray(noise_sampler(rng), dtype=float)
        total += 2.0 * float(np.linalg.norm(op.rmatvec(e)))
    return total / trials


def write_gcv_csv(path, result):
    with open(path, "w") as fh:
        fh.write("alpha,G\n")
        for a, g in zip(result.grid, result.values):
            fh.write(f"{a!r},{g!r}\n")


def write_lcurve_csv(path, result):
    with open(path, "w") as fh:
        fh.write("alpha,log_residual,log_solution,curvature\n")
        for a, lr, ls, ka in zip(result.grid, result.log_residual, result.log_solution, result.curvature):
            fh.write(f"{a!r},{lr!r},{ls!r},{ka!r}\n")
