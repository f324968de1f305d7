import numpy as np
import pytest
from numpy.testing import assert_allclose

from pfcvm.errors import DegenerateModelError, DomainError
from pfcvm.model import (
    HyperParams,
    ModelState,
    PosteriorApprox,
    TrainConfig,
    prune,
    update_hyperparameters,
)


def make_posterior(u_w, diag_w, u_t, diag_t):
    return PosteriorApprox(
        u_w=np.asarray(u_w, dtype=float),
        sigma_w=np.diag(np.asarray(diag_w, dtype=float)),
        u_theta=np.asarray(u_t, dtype=float),
        sigma_theta=np.diag(np.asarray(diag_t, dtype=float)),
    )


class TestUpdateRules:
    def test_mackay_hand_value(self):
        # gamma = 1 - 2 * 0.25 = 0.5, so new precision = 0.5 / 0.25 = 2.
        post = make_posterior([0.5], [0.25], [0.5], [0.25])
        hyper = HyperParams(np.array([2.0]), np.array([2.0]))
        new = update_hyperparameters(post, hyper, TrainConfig(hyper_rule="mackay"))
        assert_allclose(new.alpha, [2.0], rtol=1e-12)
        assert_allclose(new.beta, [2.0], rtol=1e-12)

    def test_em_hand_value(self):
        # 1 / (0.25 + 0.25) = 2, independent of the old precision.
        post = make_posterior([0.5], [0.25], [0.5], [0.25])
        hyper = HyperParams(np.array([7.0]), np.array([7.0]))
        new = update_hyperparameters(post, hyper, TrainConfig(hyper_rule="em"))
        assert_allclose(new.alpha, [2.0], rtol=1e-12)
        assert_allclose(new.beta, [2.0], rtol=1e-12)

    def test_mackay_unit_values(self):
        post = make_posterior([1.0], [0.0], [1.0], [0.0])
        hyper = HyperParams(np.array([3.0]), np.array([5.0]))
        new = update_hyperparameters(post, hyper, TrainConfig(hyper_rule="mackay"))
        assert_allclose(new.alpha, [1.0], rtol=1e-12)
        assert_allclose(new.beta, [1.0], rtol=1e-12)

    def test_gamma_prior_terms(self):
        # mackay with c = d = 0.5: (gamma + 1) / (u^2 + 1).
        post = make_posterior([0.5], [0.25], [1.0], [0.0])
        hyper = HyperParams(np.array([2.0]), np.array([1.0]))
        config = TrainConfig(hyper_rule="mackay", gamma_prior_c=0.5, gamma_prior_d=0.5)
        new = update_hyperparameters(post, hyper, config)
        assert_allclose(new.alpha, [(0.5 + 1.0) / (0.25 + 1.0)], rtol=1e-12)
        assert_allclose(new.beta, [(1.0 + 1.0) / (1.0 + 1.0)], rtol=1e-12)

    def test_zero_mean_routes_to_sentinel(self):
        post = make_posterior([0.0], [1.0], [0.0], [1.0])
        hyper = HyperParams(np.array([1.0]), np.array([1.0]))
        config = TrainConfig(hyper_rule="mackay", prune_threshold_max=1e6)
        new = update_hyperparameters(post, hyper, config)
        assert new.alpha[0] == 1e6 + 1.0
        assert new.beta[0] == 1e6 + 1.0

    def test_negative_gamma_routes_to_sentinel(self):
        # precision * Sigma_kk > 1 makes gamma negative: degenerate update.
        post = make_posterior([0.5], [0.6], [0.5], [0.25])
        hyper = HyperParams(np.array([2.0]), np.array([2.0]))
        new = update_hyperparameters(post, hyper, TrainConfig(hyper_rule="mackay"))
        assert new.alpha[0] == 1e6 + 1.0
        assert new.beta[0] == 2.0

    def test_em_ignores_old_precision_mackay_does_not(self):
        post = make_posterior([0.5], [0.25], [0.5], [0.25])
        for old in (0.5, 4.0):
            hyper = HyperParams(np.array([old]), np.array([old]))
            em = update_hyperparameters(post, hyper, TrainConfig(hyper_rule="em"))
            assert_allclose(em.beta, [2.0], rtol=1e-12)
        h1 = HyperParams(np.array([1.0]), np.array([1.0]))
        h2 = HyperParams(np.array([3.0]), np.array([3.0]))
        m1 = update_hyperparameters(post, h1, TrainConfig(hyper_rule="mackay"))
        m2 = update_hyperparameters(post, h2, TrainConfig(hyper_rule="mackay"))
        assert m1.beta[0] != m2.beta[0]

    def test_unknown_rule_rejected(self):
        with pytest.raises(DomainError):
            TrainConfig(hyper_rule="fixedpoint")


def make_state(alpha, beta):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n = alpha.size - 1
    m = beta.size
    return ModelState(
        active_samples=np.arange(10, 10 + n),
        active_features=np.arange(20, 20 + m),
        w=np.linspace(0.0, 1.0, n + 1),
        theta=np.linspace(0.1, 0.5, m),
        hyper=HyperParams(alpha, beta),
    )


class TestPrune:
    def test_removes_past_threshold(self):
        state = make_state([1.0, 2.0, 2e6, 3.0], [1.0, 2e6])
        out = prune(state, TrainConfig(prune_threshold_max=1e6))
        assert out.active_samples.tolist() == [10, 12]
        assert out.active_features.tolist() == [20]
        assert out.w.size == 3
        assert out.theta.size == 1
        assert out.hyper.alpha.tolist() == [1.0, 2.0, 3.0]

    def test_bias_never_pruned(self):
        state = make_state([5e9, 2.0, 3.0], [1.0])
        out = prune(state, TrainConfig(prune_threshold_max=1e6))
        assert out.hyper.alpha[0] == 5e9
        assert out.w.size == 3

    def test_threshold_is_strict(self):
        state = make_state([1.0, 1e6], [1e6])
        out = prune(state, TrainConfig(prune_threshold_max=1e6))
        assert out.active_samples.size == 1
        assert out.active_features.size == 1

    def test_all_features_pruned_raises(self):
        state = make_state([1.0, 2.0, 3.0], [1e7, 1e7])
        with pytest.raises(DegenerateModelError, match="features pruned"):
            prune(state, TrainConfig(prune_threshold_max=1e6))

    def test_all_samples_pruned_raises(self):
        state = make_state([1.0, 1e7, 1e7], [1.0])
        with pytest.raises(DegenerateModelError, match="samples pruned"):
            prune(state, TrainConfig(prune_threshold_max=1e6))

    def test_error_reports_surviving_side(self):
        state = make_state([1.0, 2.0, 3.0], [1e7])
        with pytest.raises(DegenerateModelError, match="2 samples survive"):
            prune(state, TrainConfig(prune_threshold_max=1e6))

    def test_counts_non_increasing_across_calls(self):
        state = make_state([1.0, 2.0, 2e6, 3.0], [1.0, 0.5, 2e6])
        config = TrainConfig(prune_threshold_max=1e6)
        sizes = [(state.active_samples.size, state.active_features.size)]
        for _ in range(3):
            state = prune(state, config)
            sizes.append((state.active_samples.size, state.active_features.size))
        for (s0, f0), (s1, f1) in zip(sizes, sizes[1:]):
            assert s1 <= s0 and f1 <= f0

    def test_noop_when_all_below(self):
        state = make_state([1.0, 2.0], [3.0])
        out = prune(state, TrainConfig(prune_threshold_max=1e6))
        assert out is state
