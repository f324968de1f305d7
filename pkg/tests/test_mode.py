import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize
from scipy.special import expit

from pfcvm.kernels import KernelSpec, basis_matrix, d_matrix
from pfcvm.model import (
    HyperParams,
    ModelState,
    TrainConfig,
    find_posterior_mode,
    initial_state,
    log_joint,
    log_joint_gradients,
    posterior_covariances,
)


def shifted_instance(seed, n=8, m=2):
    """Two overlapping Gaussian blobs, both features informative."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m))
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    shift = np.where(np.arange(m) % 2 == 0, 1.2, -0.8)
    X += np.outer(y, shift) * 0.9
    return X, y


def oracle_maximize(X, y, hyper, config, z0):
    n = X.shape[0]

    def negq(z):
        return -log_joint(z[:n + 1], z[n + 1:], X, y, hyper, config)

    bounds = [(None, None)] * (n + 1) + [(0.0, None)] * (z0.size - n - 1)
    res = minimize(negq, z0, method="L-BFGS-B", bounds=bounds,
                   options=dict(maxfun=200000, ftol=1e-17, gtol=1e-12, eps=1e-9))
    return res.x[:n + 1], res.x[n + 1:]


class TestModeAgainstBlackBoxOracle:
    @pytest.mark.parametrize("seed", [200, 201, 202, 203, 204])
    def test_agrees_with_scipy(self, seed):
        X, y = shifted_instance(seed)
        config = TrainConfig(inner_mode_iterations=200, mode_grad_tol=1e-7)
        state = initial_state(X, y, config)
        mode = find_posterior_mode(state, X, y, config)
        w_o, t_o = oracle_maximize(X, y, state.hyper, config,
                                   np.concatenate([state.w, state.theta]))
        assert np.max(np.abs(mode.w - w_o)) < 1e-4
        assert np.max(np.abs(mode.theta - t_o)) < 1e-4
        for w_, t_ in ((mode.w, mode.theta), (w_o, t_o)):
            gw, gt = log_joint_gradients(w_, t_, X, y, state.hyper, config)
            assert max(np.abs(gw).max(), np.abs(gt).max()) < 1e-5


class TestModeInvariants:
    def test_objective_never_decreases(self):
        X, y = shifted_instance(210, n=10, m=3)
        config = TrainConfig(inner_mode_iterations=60)
        state = initial_state(X, y, config)
        mode = find_posterior_mode(state, X, y, config)
        hist = np.asarray(mode.q_history)
        assert np.all(np.diff(hist) >= 0.0)
        assert hist[-1] >= hist[0]

    def test_final_point_at_least_initial(self):
        X, y = shifted_instance(211)
        config = TrainConfig(inner_mode_iterations=5)
        state = initial_state(X, y, config)
        q0 = log_joint(state.w, state.theta, X, y, state.hyper, config)
        mode = find_posterior_mode(state, X, y, config)
        q1 = log_joint(mode.w, mode.theta, X, y, state.hyper, config)
        assert q1 >= q0

    def test_soft_nonnegativity(self):
        X, y = shifted_instance(212, n=12, m=4)
        config = TrainConfig(inner_mode_iterations=80)
        state = initial_state(X, y, config)
        mode = find_posterior_mode(state, X, y, config)
        assert np.min(mode.w[1:]) >= -1e-8
        assert np.min(mode.theta) >= -1e-8

    def test_restart_from_mode_keeps_value(self):
        # Restarting at the solution must not lose objective, whether the
        # search re-converges immediately or reports a stall.
        X, y = shifted_instance(213)
        config = TrainConfig(inner_mode_iterations=200, mode_grad_tol=1e-7)
        state = initial_state(X, y, config)
        mode = find_posterior_mode(state, X, y, config)
        state.w, state.theta = mode.w, mode.theta
        tight = TrainConfig(inner_mode_iterations=30, mode_grad_tol=1e-30)
        again = find_posterior_mode(state, X, y, tight)
        q_before = log_joint(mode.w, mode.theta, X, y, state.hyper, config)
        q_after = log_joint(again.w, again.theta, X, y, state.hyper, config)
        assert q_after >= q_before
        hist = np.asarray(again.q_history)
        assert np.all(np.diff(hist) >= 0.0)


class TestStationarity:
    @pytest.mark.parametrize("seed", [220, 221, 222])
    def test_fixed_point_residuals(self, seed):
        X, y = shifted_instance(seed, n=8, m=2)
        config = TrainConfig(inner_mode_iterations=300, mode_grad_tol=1e-8)
        state = initial_state(X, y, config)
        mode = find_posterior_mode(state, X, y, config)
        assert mode.converged
        t = (y + 1.0) / 2.0
        lam = config.lam
        spec = KernelSpec(config.kernel, mode.theta, config.degree)
        phi = basis_matrix(X, y, spec, state.active_samples)
        resid = t - expit(phi @ mode.w)
        D = d_matrix(X, y, mode.w, spec, phi, state.active_samples)
        k_t = lam * (1.0 - expit(lam * mode.theta))
        k_w = np.concatenate([[0.0], lam * (1.0 - expit(lam * mode.w[1:]))])
        u_theta_fp = (D.T @ resid + k_t) / state.hyper.beta
        u_w_fp = (phi.T @ resid + k_w) / state.hyper.alpha
        assert np.max(np.abs(mode.theta - u_theta_fp)) < 1e-4
        assert np.max(np.abs(mode.w - u_w_fp)) < 1e-4


class TestPosteriorCovariances:
    def build_negative_hessians(self, state, X, y, config):
        t = (y + 1.0) / 2.0
        lam = config.lam
        spec = KernelSpec(config.kernel, state.theta, config.degree)
        phi = basis_matrix(X[:, state.active_features], y, spec, state.active_samples)
        sig = expit(phi @ state.w)
        C = sig * (1.0 - sig)
        s_w = expit(lam * state.w[1:])
        H_w = phi.T @ (C[:, None] * phi) + np.diag(
            state.hyper.alpha + np.concatenate([[0.0], lam * lam * s_w * (1 - s_w)]))
        D = d_matrix(X[:, state.active_features], y, state.w, spec, phi,
                     state.active_samples)
        s_t = expit(lam * state.theta)
        H_t = D.T @ (C[:, None] * D) + np.diag(
            state.hyper.beta + lam * lam * s_t * (1 - s_t))
        return H_w, H_t

    def test_multiply_back_identity(self):
        X, y = shifted_instance(230, n=9, m=3)
        config = TrainConfig(inner_mode_iterations=100)
        state = initial_state(X, y, config)
        mode = find_posterior_mode(state, X, y, config)
        state.w, state.theta = mode.w, mode.theta
        sigma_w, sigma_t = posterior_covariances(state, X, y, config)
        H_w, H_t = self.build_negative_hessians(state, X, y, config)
        assert_allclose(H_w @ sigma_w, np.eye(H_w.shape[0]), rtol=0, atol=1e-8)
        assert_allclose(H_t @ sigma_t, np.eye(H_t.shape[0]), rtol=0, atol=1e-8)

    def test_symmetric_positive_diagonals(self):
        X, y = shifted_instance(231)
        config = TrainConfig()
        state = initial_state(X, y, config)
        sigma_w, sigma_t = posterior_covariances(state, X, y, config)
        assert_allclose(sigma_w, sigma_w.T, rtol=0, atol=1e-12)
        assert_allclose(sigma_t, sigma_t.T, rtol=0, atol=1e-12)
        assert np.all(np.diag(sigma_w) > 0)
        assert np.all(np.diag(sigma_t) > 0)

    def test_active_subset_shapes(self):
        X, y = shifted_instance(232, n=10, m=4)
        config = TrainConfig()
        state = ModelState(
            active_samples=np.array([1, 3, 7]),
            active_features=np.array([0, 2]),
            w=np.array([0.0, 0.01, 0.01, 0.01]),
            theta=np.array([0.25, 0.25]),
            hyper=HyperParams(np.ones(4), np.ones(2)),
        )
        sigma_w, sigma_t = posterior_covariances(state, X, y, config)
        assert sigma_w.shape == (4, 4)
        assert sigma_t.shape == (2, 2)
