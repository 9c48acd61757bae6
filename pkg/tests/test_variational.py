import numpy as np
import pytest

from _oracles import gauss1d, kernel_ncc, rects_image
from specdeblur import (
    FilterSpec,
    GdConfig,
    MapConfig,
    Regularizer,
    assemble_dense,
    build_separable,
    convolve2d,
    filtered_reconstruct,
    gradient_reconstruct,
    lambda_schedule,
    map_blind_deblur,
    motion_psf,
    p_norm_pow,
    regularizer_value,
    regularizer_value_and_gradient,
    svd_dense,
    tikhonov_stacked_solve,
    vectorize,
    zero_count,
)

Y1 = np.array([1.0, 2.0, 3.0, 4.0])
Y2 = np.array([1.0, 0.2, 3.0, 4.0])
Y3 = np.array([1.0, 0.2, 0.3, 4.0])

P_NORM_TABLE = {
    (1, 1.0): 10.0, (1, 1.2): 12.31, (1, 1.4): 15.26, (1, 1.7): 21.28, (1, 2.0): 30.0,
    (2, 1.0): 8.2, (2, 1.2): 10.16, (2, 1.4): 12.73, (2, 1.7): 18.09, (2, 2.0): 26.04,
    (3, 1.0): 5.5, (3, 1.2): 6.66, (3, 1.4): 8.25, (3, 1.7): 11.75, (3, 2.0): 17.13,
}


@pytest.mark.parametrize("vec_id,p", list(P_NORM_TABLE))
def test_p_norm_pow_table(vec_id, p):
    v = {1: Y1, 2: Y2, 3: Y3}[vec_id]
    assert abs(p_norm_pow(v, p) - P_NORM_TABLE[(vec_id, p)]) <= 0.005


def test_p_norm_pow_exact_endpoints():
    assert p_norm_pow(Y1, 1.0) == 10.0
    assert p_norm_pow(Y1, 2.0) == 30.0


def test_p_norm_pow_rejects_out_of_range():
    with pytest.raises(ValueError):
        p_norm_pow(Y1, 0.5)
    with pytest.raises(ValueError):
        p_norm_pow(Y1, 2.5)


def test_zero_count():
    assert zero_count(np.array([0.0, 1e-3, 0.0, 2.0])) == 2
    assert zero_count(np.array([0.0, 1e-3, 0.0, 2.0]), threshold=0.01) == 1


def dense_problem(m=10, n=10, seed=0, noise=1e-3, k=3, sigma=0.9):
    g = gauss1d(k, sigma)
    blur = build_separable(g, g, m, n, "reflexive")
    A = assemble_dense(blur)
    svd = svd_dense(A)
    rng = np.random.default_rng(seed)
    x_true = rng.random(m * n)
    b = A.matvec(x_true) + noise * rng.standard_normal(m * n)
    return A, svd, x_true, b


def test_stacked_solve_matches_spectral_tikhonov():
    A, svd, _, b = dense_problem()
    for alpha in (1e-3, 1e-2, 0.1):
        x_stacked = tikhonov_stacked_solve(A, b, alpha)
        x_spectral = filtered_reconstruct(svd, b, FilterSpec.tikhonov(alpha))
        assert np.linalg.norm(x_stacked - x_spectral) / np.linalg.norm(x_spectral) < 1e-8


def test_stacked_solve_large_alpha_oversmooths_to_zero():
    A, svd, _, b = dense_problem(seed=1)
    x_naive = np.linalg.solve(A.matrix, b)
    x = tikhonov_stacked_solve(A, b, 1e6 * svd.sigma[0])
    assert np.linalg.norm(x) < 1e-4 * np.linalg.norm(x_naive)


def test_stacked_solve_zero_rhs():
    A, _, _, _ = dense_problem(seed=2)
    assert np.allclose(tikhonov_stacked_solve(A, np.zeros(100), 0.1), 0.0)


def test_stacked_identity():
    # ||b - Ax||^2 + alpha^2 ||Dx||^2 equals the single stacked norm
    A, _, _, b = dense_problem(seed=3)
    rng = np.random.default_rng(4)
    x = rng.random(100)
    alpha = 0.07
    D = np.eye(100)
    stacked = np.vstack([A.matrix, alpha * D])
    rhs = np.concatenate([b, np.zeros(100)])
    lhs = np.linalg.norm(b - A.matvec(x)) ** 2 + alpha**2 * np.linalg.norm(x) ** 2
    rhs_norm = np.linalg.norm(rhs - stacked @ x) ** 2
    assert lhs == pytest.approx(rhs_norm, abs=1e-12 * max(1, lhs))


def test_smooth_regularizer_value_and_gradient():
    x = np.array([1.0, -2.0, 3.0])
    value, grad = regularizer_value_and_gradient(Regularizer.smooth(), x)
    assert value == pytest.approx(14.0)
    assert np.allclose(grad, 2 * x)


def test_sparse_edge_constant_image_value():
    reg = Regularizer.sparse_edge(q=0.7, eps=1e-3, eps_f=0.0, shape_mn=(5, 5))
    x = np.full(25, 0.42)
    assert regularizer_value(reg, x) == pytest.approx(25 * (1e-3) ** 0.7, rel=1e-12)


def test_zero_count_regularizer_has_no_gradient():
    reg = Regularizer.zero_count_spec(shape_mn=(4, 4))
    with pytest.raises(ValueError, match="evaluation-only"):
        regularizer_value_and_gradient(reg, np.zeros(16))


def central_fd_gradient(fun, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fun(xp) - fun(xm)) / (2 * h)
    return g


@pytest.mark.parametrize(
    "reg",
    [
        Regularizer.smooth(),
        Regularizer.smooth(D="first-difference", shape_mn=(4, 5)),
        Regularizer.pnorm(1.0, eps_p=1e-3, D="first-difference", shape_mn=(4, 5)),
        Regularizer.pnorm(1.4, eps_p=1e-3, D="identity"),
        Regularizer.sparse_edge(q=0.7, eps=1e-3, eps_f=1e-2, shape_mn=(4, 5)),
        Regularizer.sparse_edge(q=1.0, eps=1e-2, eps_f=1e-3, shape_mn=(4, 5)),
    ],
    ids=["smooth-I", "smooth-D", "pnorm-1.0", "pnorm-1.4", "sparse-q0.7", "sparse-q1.0"],
)
def test_gradients_match_central_differences(reg):
    rng = np.random.default_rng(5)
    for trial in range(20):
        x = rng.random(20) + 0.1
        _, grad = regularizer_value_and_gradient(reg, x)
        fd = central_fd_gradient(lambda v: regularizer_value_and_gradient(reg, v)[0], x)
        scale = np.maximum(np.abs(fd), np.max(np.abs(fd)) * 1e-3)
        assert np.max(np.abs(grad - fd) / scale) < 1e-5


def test_gradient_reconstruct_matches_spectral_tikhonov():
    A, svd, _, b = dense_problem(m=8, n=8, seed=6)
    alpha = 0.1
    x_spec = filtered_reconstruct(svd, b, FilterSpec.tikhonov(alpha))
    cfg = GdConfig(tau=0.45 / svd.sigma[0] ** 2, lam=alpha**2, max_iter=20000, tol_rel_change=1e-14)
    x_gd, trace = gradient_reconstruct(A, b, Regularizer.smooth(), cfg)
    assert np.linalg.norm(x_gd - x_spec) / np.linalg.norm(x_spec) < 1e-3


def test_gradient_reconstruct_unregularized_well_conditioned():
    A = np.diag(np.linspace(2.0, 1.0, 12))
    from specdeblur import DenseOperator

    op = DenseOperator(A, (3, 4))
    rng = np.random.default_rng(7)
    b = rng.random(12)
    cfg = GdConfig(tau=0.1, lam=0.0, max_iter=5000, tol_rel_change=1e-15)
    x, _ = gradient_reconstruct(op, b, Regularizer.smooth(), cfg)
    assert np.linalg.norm(x - np.linalg.solve(A, b)) < 1e-6


def test_gradient_reconstruct_monotone_descent():
    A, svd, _, b = dense_problem(m=8, n=8, seed=8)
    lam = 1e-3
    # tau below 1/(2 sigma_1^2 + lam L) with L = 2 for the smooth regularizer
    tau = 1.0 / (2 * svd.sigma[0] ** 2 + lam * 2) * 0.99
    cfg = GdConfig(tau=tau, lam=lam, max_iter=300, tol_rel_change=0.0)
    _, trace = gradient_reconstruct(A, b, Regularizer.smooth(), cfg)
    objective = np.array(trace.objective)
    assert np.all(np.diff(objective) <= 1e-10)


def test_gradient_reconstruct_divergence_detected():
    A, svd, _, b = dense_problem(m=8, n=8, seed=9)
    cfg = GdConfig(tau=10.0 / svd.sigma[-1] ** 2, lam=0.0, max_iter=500)
    with pytest.raises(RuntimeError, match="step size"):
        gradient_reconstruct(A, b, Regularizer.smooth(), cfg)


def test_equivalence_chain_spectral_stacked_gd():
    A, svd, _, b = dense_problem(m=8, n=8, seed=10)
    alpha = 0.15
    x_spec = filtered_reconstruct(svd, b, FilterSpec.tikhonov(alpha))
    x_stack = tikhonov_stacked_solve(A, b, alpha)
    cfg = GdConfig(tau=0.45 / svd.sigma[0] ** 2, lam=alpha**2, max_iter=20000, tol_rel_change=1e-14)
    x_gd, _ = gradient_reconstruct(A, b, Regularizer.smooth(), cfg)
    assert np.linalg.norm(x_spec - x_stack) / np.linalg.norm(x_spec) < 1e-8
    assert np.linalg.norm(x_gd - x_spec) / np.linalg.norm(x_spec) < 1e-3
    assert np.linalg.norm(x_gd - x_stack) / np.linalg.norm(x_stack) < 1e-3


def test_sparse_edge_prefers_sparser_edge_map():
    # two images, nearly equal data fit, one with a single strong edge and
    # one with the same total variation spread over many small steps
    m = n = 8
    reg = Regularizer.sparse_edge(q=0.7, eps=1e-3, eps_f=1e-8, shape_mn=(m, n))
    step = np.zeros((m, n))
    step[:, n // 2 :] = 1.0  # one strong edge per row
    ramp = np.tile(np.linspace(0.0, 1.0, n), (m, 1))  # many small steps
    value_step = regularizer_value(reg, vectorize(step))
    value_ramp = regularizer_value(reg, vectorize(ramp))
    assert value_step < value_ramp


def test_lambda_schedule_geometric():
    cfg = MapConfig(kernel_size=7, lambda1=2.0, ratio=1.5, levels=6)
    sched = lambda_schedule(cfg)
    expected = [2.0 / 1.5**i for i in range(6)]
    assert np.allclose(sched, expected, rtol=0, atol=0)
    assert sched[0] == 2.0
    assert sched[1] == pytest.approx(4.0 / 3.0)


def test_map_blind_fixed_point_on_sharp_input():
    rng = np.random.default_rng(11)
    y = rects_image(32, 3)
    cfg = MapConfig(kernel_size=5, levels=2, inner_iters=30, sigma2_scale=0.0, unsharp_amount=0.0)
    x, psf, trace = map_blind_deblur(y, cfg)
    delta = np.zeros((5, 5))
    delta[2, 2] = 1.0
    assert np.max(np.abs(psf.array - delta)) < 1e-6
    assert np.max(np.abs(x - y)) < 1e-6


def test_map_blind_objective_monotone_within_stages():
    rng = np.random.default_rng(12)
    X = rects_image(32, 5)
    h = motion_psf(5, 6, seed=3)
    y = convolve2d(X, h, "periodic") + 1e-3 * rng.standard_normal((32, 32))
    cfg = MapConfig(kernel_size=5, levels=4, inner_iters=40)
    _, _, trace = map_blind_deblur(y, cfg)
    stage = np.array(trace.stage)
    objective = np.array(trace.objective)
    for s in np.unique(stage):
        assert np.all(np.diff(objective[stage == s]) <= 1e-9)


def test_map_blind_recovers_motion_kernel():
    rng = np.random.default_rng(13)
    X = rects_image(64, 500)
    h_true = motion_psf(7, 8, seed=1000)
    b_exact = convolve2d(X, h_true, "periodic")
    eta = np.sqrt(np.mean(b_exact**2)) / 100.0  # 40 dB
    y = b_exact + eta * rng.standard_normal((64, 64))
    _, h_rec, _ = map_blind_deblur(y, MapConfig(kernel_size=7))
    assert kernel_ncc(h_true.array, h_rec.array) >= 0.7


def test_map_blind_rejects_oversized_kernel():
    with pytest.raises(ValueError):
        map_blind_deblur(np.zeros((8, 8)), MapConfig(kernel_size=9))


def test_map_config_validation():
    with pytest.raises(ValueError):
        MapConfig(kernel_size=4)
    with pytest.raises(ValueError):
        MapConfig(ratio=1.0)
    with pytest.raises(ValueError):
        MapConfig(lambda1=0.0)


def test_gd_config_validation():
    with pytest.raises(ValueError):
        GdConfig(tau=0.0)
    with pytest.raises(ValueError):
        GdConfig(lam=-1.0)
    with pytest.raises(ValueError):
        GdConfig(max_iter=0)


def test_gradient_reconstruct_filtered_init():
    A, svd, _, b = dense_problem(m=8, n=8, seed=14)
    cfg = GdConfig(tau=0.4 / svd.sigma[0] ** 2, lam=0.01, max_iter=5, init="filtered")
    x, trace = gradient_reconstruct(A, b, Regularizer.smooth(), cfg)
    # the filtered start is already close to the regularized solution
    assert trace.objective[0] < np.linalg.norm(b) ** 2


def test_map_blind_three_channels_shared_kernel():
    rng = np.random.default_rng(15)
    base = rects_image(32, 9)
    y = np.dstack([base, np.clip(base * 0.8 + 0.1, 0, 1), np.clip(base * 0.6 + 0.2, 0, 1)])
    cfg = MapConfig(kernel_size=5, levels=2, inner_iters=20, sigma2_scale=0.0, unsharp_amount=0.0)
    x, psf, trace = map_blind_deblur(y, cfg)
    assert x.shape == y.shape
    delta = np.zeros((5, 5))
    delta[2, 2] = 1.0
    # sharp input, zero prior: the shared kernel stays at the identity
    assert np.max(np.abs(psf.array - delta)) < 1e-6
    assert np.max(np.abs(x - y)) < 1e-6
