import numpy as np
import pytest
from sklearn.base import clone

from darktrack.filter import (AdmmState, DualCorrelationFilter, SolverParams, dual_objective,
                              fused_response, make_label, regression_loss, solve_v_subproblem,
                              solve_w_subproblem, support_mask, train_dual, train_single,
                              update_model, update_multiplier)
from darktrack.spectral import circular_correlate, fft2, rfft2
from oracles import (correlation_matrix, dense_v_solve, exact_single_filter,
                     reference_single_filter)


def training_instance(seed, rows=16, cols=16, d=4, support=(8, 8)):
    rng = np.random.default_rng(seed)
    x_g = rng.standard_normal((rows, cols, d))
    cells = np.zeros((rows, cols))
    cells[4:12, 4:12] = 1.0
    y = make_label((rows, cols), support, 0.25)
    return x_g, x_g * cells[..., None], y, support_mask((rows, cols), support)


def test_label_peak_and_symmetry():
    y = make_label((10, 12), (4, 4))
    assert y[0, 0] == 1.0 and y.max() == 1.0
    np.testing.assert_allclose(y[1:, 1:], y[1:, 1:][::-1, ::-1])
    sigma = 4 / 16
    assert y[0, 1] == pytest.approx(np.exp(-0.5 / sigma ** 2))


def test_support_mask_centered():
    m = support_mask((8, 10), (4, 4))
    assert m.sum() == 16
    assert m[2:6, 3:7].all()
    assert support_mask((4, 4), (10, 10)).all()


def test_update_model():
    assert np.all(update_model(None, np.ones(3), 0.1) == 1)
    np.testing.assert_allclose(update_model(np.zeros(3), np.ones(3), 0.02), 0.02)
    with pytest.raises(ValueError, match="model shape"):
        update_model(np.zeros(3), np.zeros(4), 0.1)


@pytest.mark.parametrize("d", [1, 2, 8])
def test_v_step_matches_dense_solve(rng, d):
    shape = (4, 4, d)
    xf, thetaf, wf = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
                      for _ in range(3))
    yf = rng.standard_normal(shape[:2]) + 1j * rng.standard_normal(shape[:2])
    fast = solve_v_subproblem(xf, yf, thetaf, wf, 3.7)
    np.testing.assert_allclose(fast, dense_v_solve(xf, yf, thetaf, wf, 3.7), rtol=1e-10,
                               atol=1e-12)


def test_w_step_example():
    support = np.array([[True, False]])
    theta = np.array([[[1.0], [1.0]]])
    v = np.array([[[2.0], [2.0]]])
    w_other = np.array([[[4.0], [4.0]]])
    w = solve_w_subproblem(w_other, theta, v, gamma=1.0, support=support, lambda1=0.0,
                           mu=2.0)
    # T = 2: (2 * 4 + 2 * 1 + 1 * 2 * 2) / (0 + 2 + 2)
    np.testing.assert_allclose(w[..., 0], [[3.5, 0.0]])


def test_penalty_sequence():
    gammas, g = [], 1.0
    for _ in range(6):
        gammas.append(g)
        _, g = update_multiplier(np.zeros(1), np.zeros(1), np.zeros(1), g)
    assert gammas == [1, 10, 100, 1000, 10000, 10000]


def test_multiplier_step():
    theta, _ = update_multiplier(np.array([1.0]), np.array([3.0]), np.array([1.0]), 0.5)
    assert theta[0] == 2.0


def test_single_filter_matches_full_spectrum_reference():
    x, _, y, support = training_instance(1, rows=8, cols=10, d=3, support=(4, 4))
    for iters in (1, 3, 10):
        w, _ = train_single(x, y, support, SolverParams(admm_iters=iters))
        ref = reference_single_filter(x, y, support, 0.01, 1.0, 10.0, 1e4, iters)
        np.testing.assert_allclose(w, ref, atol=1e-10)


def test_fixed_penalty_reaches_exact_optimum():
    x, _, y, support = training_instance(2, rows=8, cols=8, d=3, support=(4, 4))
    exact = exact_single_filter(x, y, support, 0.01)
    w, _ = train_single(x, y, support, SolverParams(gamma0=1.0, beta=1.0, admm_iters=3000))
    np.testing.assert_allclose(w, exact, atol=1e-9)
    loss = regression_loss(w, x, y) + 0.005 * np.sum(w ** 2)
    assert loss < regression_loss(np.zeros_like(x), x, y)


def test_regression_loss_matches_dense_operator(rng):
    x, _, y, support = training_instance(3, rows=6, cols=6, d=2, support=(3, 3))
    w = rng.standard_normal(x.shape) * support[..., None]
    A, cells = correlation_matrix(x, support)
    coef = np.concatenate([w[r, c] for r, c in cells])
    assert regression_loss(w, x, y) == pytest.approx(
        0.5 * np.sum((A @ coef - y.ravel()) ** 2), rel=1e-12)


def test_filters_zero_outside_support():
    x_g, x_o, y, support = training_instance(4)
    result = train_dual(x_g, x_o, y, support, SolverParams(admm_iters=5))
    for w in (result.w_g, result.w_o):
        assert np.all(w[~support] == 0)


def test_residual_decreases():
    x_g, x_o, y, support = training_instance(5)
    res = train_dual(x_g, x_o, y, support, SolverParams(admm_iters=10)).state_g.residuals
    assert len(res) == 10
    assert res[-1] < 1e-3 * res[0]


def test_simultaneous_schedule_is_symmetric():
    x_g, _, y, support = training_instance(6)
    result = train_dual(x_g, x_g.copy(), y, support, SolverParams(admm_iters=4),
                        schedule="simultaneous")
    np.testing.assert_array_equal(result.w_g, result.w_o)


def test_zero_coupling_decouples_filters():
    x_g, x_o, y, support = training_instance(7)
    params = SolverParams(mu=0.0, admm_iters=3)
    result = train_dual(x_g, x_o, y, support, params)
    w, _ = train_single(x_g, y, support, params)
    np.testing.assert_allclose(result.w_g, w, atol=1e-12)


def test_exact_joint_optimum_is_coupled_by_large_mu():
    # dense joint solve: with mu = 1e6 the optimal filters nearly coincide
    x_g, x_o, y, support = training_instance(8, rows=8, cols=8, d=2, support=(4, 4))
    A_g, _ = correlation_matrix(x_g, support)
    A_o, _ = correlation_matrix(x_o, support)
    n, mu = A_g.shape[1], 1e6
    eye = np.eye(n)
    H = np.block([[A_g.T @ A_g + (0.01 + mu) * eye, -mu * eye],
                  [-mu * eye, A_o.T @ A_o + (0.01 + mu) * eye]])
    z = np.linalg.solve(H, np.concatenate([A_g.T @ y.ravel(), A_o.T @ y.ravel()]))
    assert np.linalg.norm(z[:n] - z[n:]) < 1e-4 * np.linalg.norm(z[:n])


def test_warm_start_changes_nothing_outside_support(rng):
    x_g, x_o, y, support = training_instance(9)
    init = (rng.standard_normal(x_g.shape), rng.standard_normal(x_g.shape))
    result = train_dual(x_g, x_o, y, support, SolverParams(admm_iters=1), init=init)
    assert np.all(result.w_g[~support] == 0)


def test_bad_schedule():
    x_g, x_o, y, support = training_instance(0)
    with pytest.raises(ValueError, match="unknown schedule"):
        train_dual(x_g, x_o, y, support, schedule="random")


def test_fused_response_definition(rng):
    w_g, w_o, z_g, z_o = rng.standard_normal((4, 6, 6, 2))
    expected = sum(circular_correlate(w_g[..., c], z_g[..., c]) for c in range(2)) + \
        0.3 * sum(circular_correlate(w_o[..., c], z_o[..., c]) for c in range(2))
    np.testing.assert_allclose(fused_response(w_g, w_o, z_g, z_o, 0.3), expected, atol=1e-12)


def test_dual_objective_at_zero():
    x_g, x_o, y, _ = training_instance(0)
    zero = np.zeros_like(x_g)
    assert dual_objective(zero, zero, x_g, x_o, y) == pytest.approx(np.sum(y ** 2))


def test_admm_state_start():
    st = AdmmState.start(np.ones((4, 4, 2)), 1.0)
    np.testing.assert_allclose(st.vf, rfft2(np.ones((4, 4, 2))))
    assert not st.thetaf.any()


def test_estimator_fit_and_response():
    x_g, x_o, y, support = training_instance(10)
    est = DualCorrelationFilter(admm_iters=5).fit(x_g, y, X_target=x_o, support=support)
    r = est.response(x_g, x_o)
    expected = fused_response(est.coef_, est.coef_target_, x_g, x_o, est.psi)
    np.testing.assert_allclose(r, expected, atol=1e-10)
    assert len(est.residuals_) == 5
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(ValueError, match="feature shape"):
        est.response(x_g[:8])


def test_estimator_single_mode():
    x_g, _, y, support = training_instance(11)
    est = DualCorrelationFilter(dual=False).fit(x_g, y, support=support)
    assert est.coef_target_ is est.coef_
    spec = np.sum(np.conj(fft2(est.coef_)) * fft2(x_g), axis=2)
    np.testing.assert_allclose(est.response(x_g), np.fft.ifft2(spec).real, atol=1e-10)


def test_estimator_float32():
    x_g, x_o, y, support = training_instance(12)
    est = DualCorrelationFilter().fit(x_g.astype(np.float32), y, x_o, support)
    assert est.coef_.dtype == np.float32
    assert est.response(x_g.astype(np.float32)).dtype == np.float32
