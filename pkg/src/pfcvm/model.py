"""Joint sample and feature selection for kernel classification.

The classifier keeps one nonnegative weight per training sample and one per
input feature. Both blocks carry zero-mean Gaussian priors whose precisions
are re-estimated from a Laplace approximation each outer iteration; entries
whose precision explodes past a threshold are pruned, which yields sparsity
in samples and features at the same time. Nonnegativity is handled with a
smoothed step barrier ``log sigmoid(lam * x)`` instead of hard constraints,
so the inner problem stays smooth and Newton steps apply.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import (
    DegenerateModelError,
    DimensionError,
    DomainError,
    NumericError,
)
from .kernels import KERNEL_KINDS, KernelSpec, basis_matrix, d_matrix, e_matrix, pairwise_basis
from .linalg import chol_solve, robust_cholesky, robust_spd_inverse

# Post-step clipping floor: anything further below zero is snapped back to 0.
CLIP_FLOOR = -1e-8
_MAX_HALVINGS = 20


@dataclass
class TrainConfig:
    """Training knobs.

    Parameters
    ----------
    kernel : str
        ``"rbf"``, ``"polynomial"`` or ``"linear"``.
    degree : int
        Polynomial order; ignored by the other kernels.
    lam : float
        Sharpness of the smoothed nonnegativity barrier ``sigmoid(lam * x)``.
    prune_threshold_max : float
        Precision value beyond which a weight is dropped from the model.
    evidence_tol : float
        Outer loop stops when the log evidence moves less than this.
    max_iterations : int
        Cap on outer (re-estimation) iterations.
    inner_mode_iterations : int
        Cap on damped Newton sweeps inside each posterior mode search.
    mode_grad_tol : float
        Infinity-norm gradient target for the mode search.
    hyper_rule : str
        ``"mackay"`` or ``"em"`` precision update.
    gamma_prior_c, gamma_prior_d : float
        Gamma hyperprior parameters; zero recovers the plain updates.
    init_alpha, init_beta, init_w : float
        Initial precisions and sample-weight value (bias starts at 0).
    init_theta : float or None
        Initial feature weight; ``None`` means ``1 / n_features``.
    drop_e : bool
        Drop the second-order curvature term from the feature Hessian.
    rng_seed : int or None
        Recorded for provenance; training itself is deterministic.
    """

    kernel: str = "rbf"
    degree: int = 2
    lam: float = 5.0
    prune_threshold_max: float = 1e6
    evidence_tol: float = 1e-3
    max_iterations: int = 500
    inner_mode_iterations: int = 25
    mode_grad_tol: float = 1e-5
    hyper_rule: str = "mackay"
    gamma_prior_c: float = 0.0
    gamma_prior_d: float = 0.0
    init_alpha: float = 1.0
    init_beta: float = 1.0
    init_w: float = 1e-2
    init_theta: float | None = None
    drop_e: bool = True
    rng_seed: int | None = None

    def __post_init__(self):
        if self.kernel not in KERNEL_KINDS:
            raise DomainError(f"unknown kernel kind {self.kernel!r}")
        if self.hyper_rule not in ("mackay", "em"):
            raise DomainError(f"unknown hyper_rule {self.hyper_rule!r}")
        for name in ("lam", "prune_threshold_max", "evidence_tol", "mode_grad_tol",
                     "init_alpha", "init_beta"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.max_iterations < 1 or self.inner_mode_iterations < 1:
            raise DomainError("iteration caps must be at least 1")
        if self.degree < 1:
            raise DomainError("polynomial degree must be >= 1")
        if self.gamma_prior_c < 0 or self.gamma_prior_d < 0:
            raise DomainError("gamma prior parameters must be nonnegative")
        if self.init_theta is not None and self.init_theta < 0:
            raise DomainError("init_theta must be nonnegative")


@dataclass
class HyperParams:
    """Precisions: ``alpha`` over bias + active samples, ``beta`` over features."""

    alpha: np.ndarray
    beta: np.ndarray


@dataclass
class ModelState:
    """Mutable training state over the currently active index sets."""

    active_samples: np.ndarray
    active_features: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    hyper: HyperParams
    iteration: int = 0


@dataclass
class PosteriorApprox:
    """Gaussian posterior factors from the Laplace step."""

    u_w: np.ndarray
    sigma_w: np.ndarray
    u_theta: np.ndarray
    sigma_theta: np.ndarray


@dataclass
class ModeResult:
    w: np.ndarray
    theta: np.ndarray
    converged: bool
    stalled: bool
    iterations: int
    grad_norm: float
    q_history: list = field(default_factory=list)


def _log_sigmoid(z):
    # Stable for |z| well past 1e4.
    return -np.logaddexp(0.0, -z)


def _barrier_grad(v, lam):
    return lam * (1.0 - expit(lam * v))


def _barrier_curv(v, lam):
    s = expit(lam * v)
    return lam * lam * s * (1.0 - s)


def _clip_soft(v):
    out = v.copy()
    out[out < CLIP_FLOOR] = 0.0
    return out


def _unpack(dataset):
    if hasattr(dataset, "X") and hasattr(dataset, "y"):
        return np.asarray(dataset.X, dtype=float), np.asarray(dataset.y, dtype=float)
    X, y = dataset
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float)


def _active_sets(X, active_samples, active_features):
    if active_samples is None:
        active_samples = np.arange(X.shape[0])
    else:
        active_samples = np.asarray(active_samples, dtype=int)
    if active_features is None:
        active_features = np.arange(X.shape[1])
    else:
        active_features = np.asarray(active_features, dtype=int)
    return active_samples, active_features


def initial_state(X, y, config):
    """Fresh :class:`ModelState` with every sample and feature active."""
    n, m = np.asarray(X).shape
    theta0 = 1.0 / m if config.init_theta is None else config.init_theta
    w = np.full(n + 1, config.init_w, dtype=float)
    w[0] = 0.0
    return ModelState(
        active_samples=np.arange(n),
        active_features=np.arange(m),
        w=w,
        theta=np.full(m, theta0, dtype=float),
        hyper=HyperParams(
            alpha=np.full(n + 1, config.init_alpha, dtype=float),
            beta=np.full(m, config.init_beta, dtype=float),
        ),
    )


def log_joint(w, theta, X, y, hyper, config, active_samples=None, active_features=None):
    """Log joint of likelihood, priors, and the smoothed nonnegativity terms.

    Computes ``sum_n [t_n log s_n + (1 - t_n) log(1 - s_n)]
    - w'Aw/2 - theta'B theta/2 + sum log sigmoid(lam w_i) +
    sum log sigmoid(lam theta_k)`` with the bias excluded from the barrier.
    Always <= 0; the additive normalization constants are left out.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(theta))):
        raise NumericError("non-finite weights passed to log_joint")
    act_s, act_f = _active_sets(X, active_samples, active_features)
    if w.size != act_s.size + 1:
        raise DimensionError(f"w has {w.size} entries, expected {act_s.size + 1}")
    if theta.size != act_f.size:
        raise DimensionError(f"theta has {theta.size} entries, expected {act_f.size}")
    if hyper.alpha.size != w.size or hyper.beta.size != theta.size:
        raise DimensionError("hyperparameter lengths do not match the weights")
    Xa = X[:, act_f]
    phi = basis_matrix(Xa, y, KernelSpec(config.kernel, theta, config.degree), act_s)
    t = (y + 1.0) / 2.0
    return _q_value(phi, w, theta, t, hyper.alpha, hyper.beta, config.lam)


def _q_value(phi, w, theta, t, alpha, beta, lam):
    f = phi @ w
    ll = t @ _log_sigmoid(f) + (1.0 - t) @ _log_sigmoid(-f)
    quad = 0.5 * (alpha @ (w * w)) + 0.5 * (beta @ (theta * theta))
    bar = _log_sigmoid(lam * w[1:]).sum() + _log_sigmoid(lam * theta).sum()
    return float(ll - quad + bar)


def log_joint_gradients(w, theta, X, y, hyper, config,
                        active_samples=None, active_features=None):
    """Analytic gradients of :func:`log_joint` with respect to w and theta."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    theta = np.asarray(theta, dtype=float)
    act_s, act_f = _active_sets(X, active_samples, active_features)
    Xa = X[:, act_f]
    spec = KernelSpec(config.kernel, theta, config.degree)
    phi = basis_matrix(Xa, y, spec, act_s)
    t = (y + 1.0) / 2.0
    resid = t - expit(phi @ w)
    lam = config.lam
    k_w = np.concatenate([[0.0], _barrier_grad(w[1:], lam)])
    g_w = phi.T @ resid - hyper.alpha * w + k_w
    D = d_matrix(Xa, y, w, spec, phi, act_s)
    g_theta = D.T @ resid - hyper.beta * theta + _barrier_grad(theta, lam)
    return g_w, g_theta


def find_posterior_mode(state, X, y, config):
    """Damped block-Newton ascent on the log joint.

    Alternates a Newton step in the sample weights (basis matrix fixed) with
    one in the feature weights (basis matrix rebuilt per trial point). Each
    step backtracks by halving until the objective does not decrease; after
    every accepted step, components below the clipping floor snap to zero.
    Returns a :class:`ModeResult`; ``stalled`` is set when neither block
    could find an acceptable step.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Xa = X[:, state.active_features]
    act = state.active_samples
    t = (y + 1.0) / 2.0
    alpha = state.hyper.alpha
    beta = state.hyper.beta
    lam = config.lam
    w = state.w.astype(float).copy()
    theta = state.theta.astype(float).copy()

    def make_phi(th):
        return basis_matrix(Xa, y, KernelSpec(config.kernel, th, config.degree), act)

    phi = make_phi(theta)
    q_cur = _q_value(phi, w, theta, t, alpha, beta, lam)
    if not np.isfinite(q_cur):
        raise NumericError("non-finite objective at the initial point")
    q_history = [q_cur]
    converged = False
    stalled = False
    grad_norm = np.inf
    iters = 0

    for iters in range(1, config.inner_mode_iterations + 1):
        spec = KernelSpec(config.kernel, theta, config.degree)
        f = phi @ w
        sig = expit(f)
        resid = t - sig
        g_w = phi.T @ resid - alpha * w + np.concatenate([[0.0], _barrier_grad(w[1:], lam)])
        D = d_matrix(Xa, y, w, spec, phi, act)
        g_t = D.T @ resid - beta * theta + _barrier_grad(theta, lam)
        grad_norm = max(np.max(np.abs(g_w)), np.max(np.abs(g_t)))
        if grad_norm < config.mode_grad_tol:
            converged = True
            break

        moved = False

        C = sig * (1.0 - sig)
        H = phi.T @ (C[:, None] * phi)
        H[np.diag_indices_from(H)] += alpha + np.concatenate(
            [[0.0], _barrier_curv(w[1:], lam)])
        L, _ = robust_cholesky(H, "sample-weight step matrix")
        dw = chol_solve(L, g_w)
        step = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            w_try = w + step * dw
            w_try[1:] = _clip_soft(w_try[1:])
            q_try = _q_value(phi, w_try, theta, t, alpha, beta, lam)
            if np.isfinite(q_try) and q_try >= q_cur:
                w = w_try
                q_cur = q_try
                q_history.append(q_cur)
                moved = True
                break
            step *= 0.5

        # Refresh the residual at the new w before stepping theta.
        sig = expit(phi @ w)
        resid = t - sig
        C = sig * (1.0 - sig)
        D = d_matrix(Xa, y, w, spec, phi, act)
        g_t = D.T @ resid - beta * theta + _barrier_grad(theta, lam)
        Ht = D.T @ (C[:, None] * D)
        Ht[np.diag_indices_from(Ht)] += beta + _barrier_curv(theta, lam)
        if not config.drop_e:
            Ht -= e_matrix(Xa, y, w, spec, phi, resid, act)
        Lt, _ = robust_cholesky(Ht, "feature-weight step matrix")
        dt = chol_solve(Lt, g_t)
        step = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            th_try = _clip_soft(theta + step * dt)
            phi_try = make_phi(th_try)
            q_try = _q_value(phi_try, w, th_try, t, alpha, beta, lam)
            if np.isfinite(q_try) and q_try >= q_cur:
                theta = th_try
                phi = phi_try
                q_cur = q_try
                q_history.append(q_cur)
                moved = True
                break
            step *= 0.5

        if not moved:
            stalled = True
            break

    return ModeResult(w=w, theta=theta, converged=converged, stalled=stalled,
                      iterations=iters, grad_norm=float(grad_norm),
                      q_history=q_history)


def posterior_covariances(state, X, y, config):
    """Laplace covariances of both blocks at the current weights.

    Inverts ``phi' C phi + A + O_w`` and ``D' C D + B + O_theta`` (minus the
    curvature term when ``drop_e`` is off) with the jittered Cholesky helper.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    Xa = X[:, state.active_features]
    act = state.active_samples
    t = (y + 1.0) / 2.0
    lam = config.lam
    spec = KernelSpec(config.kernel, state.theta, config.degree)
    phi = basis_matrix(Xa, y, spec, act)
    sig = expit(phi @ state.w)
    C = sig * (1.0 - sig)

    H_w = phi.T @ (C[:, None] * phi)
    H_w[np.diag_indices_from(H_w)] += state.hyper.alpha + np.concatenate(
        [[0.0], _barrier_curv(state.w[1:], lam)])
    sigma_w, _ = robust_spd_inverse(H_w, "sample-weight precision matrix")

    D = d_matrix(Xa, y, state.w, spec, phi, act)
    H_t = D.T @ (C[:, None] * D)
    H_t[np.diag_indices_from(H_t)] += state.hyper.beta + _barrier_curv(state.theta, lam)
    if not config.drop_e:
        H_t -= e_matrix(Xa, y, state.w, spec, phi, t - sig, act)
    sigma_theta, _ = robust_spd_inverse(H_t, "feature-weight precision matrix")
    return sigma_w, sigma_theta


def _reestimate(u, diag_sigma, precision, config):
    c2 = 2.0 * config.gamma_prior_c
    d2 = 2.0 * config.gamma_prior_d
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if config.hyper_rule == "mackay":
            gamma = 1.0 - precision * diag_sigma
            new = (gamma + c2) / (u * u + d2)
        else:
            new = (c2 + 1.0) / (u * u + diag_sigma + d2)
    bad = ~np.isfinite(new) | (new <= 0.0)
    new[bad] = config.prune_threshold_max + 1.0
    return new


def update_hyperparameters(posterior, hyper, config):
    """Type-II precision re-estimates for both blocks.

    MacKay rule: ``(gamma + 2c) / (u^2 + 2d)`` with
    ``gamma = 1 - precision * Sigma_kk``; EM rule:
    ``(2c + 1) / (u^2 + Sigma_kk + 2d)``. Non-positive or non-finite results
    are replaced by ``prune_threshold_max + 1`` so the next prune removes
    them. The bias precision is re-estimated like any other entry; it is
    only exempt from pruning.
    """
    alpha_new = _reestimate(posterior.u_w, np.diag(posterior.sigma_w),
                            hyper.alpha, config)
    beta_new = _reestimate(posterior.u_theta, np.diag(posterior.sigma_theta),
                           hyper.beta, config)
    return HyperParams(alpha=alpha_new, beta=beta_new)


def prune(state, config):
    """Drop samples and features whose precision exceeds the threshold.

    The bias entry never leaves. Raises :class:`DegenerateModelError` when
    one whole side would empty, reporting what survives on the other side.
    """
    thr = config.prune_threshold_max
    keep_s = state.hyper.alpha[1:] <= thr
    keep_f = state.hyper.beta <= thr
    if not keep_s.any():
        raise DegenerateModelError(
            f"all {keep_s.size} samples pruned; {int(keep_f.sum())} features survive")
    if not keep_f.any():
        raise DegenerateModelError(
            f"all {keep_f.size} features pruned; {int(keep_s.sum())} samples survive")
    if keep_s.all() and keep_f.all():
        return state
    w_keep = np.concatenate([[True], keep_s])
    return ModelState(
        active_samples=state.active_samples[keep_s],
        active_features=state.active_features[keep_f],
        w=state.w[w_keep],
        theta=state.theta[keep_f],
        hyper=HyperParams(alpha=state.hyper.alpha[w_keep],
                          beta=state.hyper.beta[keep_f]),
        iteration=state.iteration,
    )


def log_evidence(state, posterior, X, y, config):
    """Laplace estimate of the log marginal likelihood on the active sets.

    ``Q(u_w, u_theta) + log|Sigma_w|/2 + log|Sigma_theta|/2`` plus the prior
    normalization, ``(n_active + m_active) ln 2`` for the half-line priors
    and half the log precisions. Pruned dimensions are excluded throughout.
    """
    q = log_joint(posterior.u_w, posterior.u_theta, X, y, state.hyper, config,
                  state.active_samples, state.active_features)
    sign_w, ld_w = np.linalg.slogdet(posterior.sigma_w)
    sign_t, ld_t = np.linalg.slogdet(posterior.sigma_theta)
    if sign_w <= 0 or sign_t <= 0:
        raise NumericError("posterior covariance lost positive definiteness")
    n_act = state.active_samples.size
    m_act = state.active_features.size
    const = (n_act + m_act) * np.log(2.0) + 0.5 * (
        np.log(state.hyper.alpha).sum() + np.log(state.hyper.beta).sum())
    value = q + 0.5 * (ld_w + ld_t) + const
    if not np.isfinite(value):
        raise NumericError("non-finite log evidence")
    return float(value)


@dataclass
class FittedModel:
    """A trained classifier: kept samples, kept features, and their weights.

    ``rv_X`` holds the relevance-vector rows restricted to the selected
    feature columns; prediction slices incoming vectors with
    ``feature_indices`` (0-based positions in the original layout).
    """

    kernel: str
    degree: int
    feature_indices: np.ndarray
    theta: np.ndarray
    rv_indices: np.ndarray
    rv_X: np.ndarray
    rv_y: np.ndarray
    weights: np.ndarray
    bias: float
    sigma_w: np.ndarray
    n_features_in: int
    n_train: int
    alpha: np.ndarray
    beta: np.ndarray
    init_beta: float
    converged: bool
    n_iterations: int
    final_evidence: float
    config: TrainConfig | None = None
    trace: list = field(default_factory=list, repr=False)

    # -- prediction ------------------------------------------------------

    def _basis_rows(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features_in:
            raise DimensionError(
                f"expected {self.n_features_in} features, got {X.shape[1]}")
        spec = KernelSpec(self.kernel, self.theta, self.degree)
        return pairwise_basis(X[:, self.feature_indices], self.rv_X, self.rv_y, spec)

    def decision_values(self, X):
        return self._basis_rows(X) @ np.concatenate([[self.bias], self.weights])

    def decision_value(self, x):
        """Signed score for a single input vector."""
        return float(self.decision_values(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def predict_probas(self, X):
        phi = self._basis_rows(X)
        dv = phi @ np.concatenate([[self.bias], self.weights])
        spread = np.einsum("ij,jk,ik->i", phi, self.sigma_w, phi)
        kappa = 1.0 / np.sqrt(1.0 + (np.pi / 8.0) * spread)
        return expit(kappa * dv)

    def predict_proba(self, x):
        """Posterior probability of class +1, moderated by the weight spread.

        A decision value of exactly 0 maps to 0.5 regardless of the spread.
        """
        return float(self.predict_probas(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def predict_labels(self, X):
        return np.where(self.predict_probas(X) >= 0.5, 1.0, -1.0)

    def predict_label(self, x):
        """Hard label in {-1, +1}; ties go to +1."""
        return float(self.predict_labels(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    # -- serialization ---------------------------------------------------

    def to_dict(self):
        return {
            "kernel": self.kernel,
            "degree": self.degree,
            "feature_indices": [int(i) for i in self.feature_indices],
            "theta": self.theta.tolist(),
            "rv_indices": [int(i) for i in self.rv_indices],
            "rv_X": self.rv_X.tolist(),
            "rv_y": self.rv_y.tolist(),
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "sigma_w": self.sigma_w.tolist(),
            "n_features_in": self.n_features_in,
            "n_train": self.n_train,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "init_beta": self.init_beta,
            "converged": self.converged,
            "n_iterations": self.n_iterations,
            "final_evidence": self.final_evidence,
            "config": dataclasses.asdict(self.config) if self.config else None,
        }

    @classmethod
    def from_dict(cls, d):
        config = TrainConfig(**d["config"]) if d.get("config") else None
        rv_X = np.asarray(d["rv_X"], dtype=float)
        if rv_X.size == 0:
            rv_X = rv_X.reshape(0, len(d["feature_indices"]))
        return cls(
            kernel=d["kernel"],
            degree=d["degree"],
            feature_indices=np.asarray(d["feature_indices"], dtype=int),
            theta=np.asarray(d["theta"], dtype=float),
            rv_indices=np.asarray(d["rv_indices"], dtype=int),
            rv_X=rv_X,
            rv_y=np.asarray(d["rv_y"], dtype=float),
            weights=np.asarray(d["weights"], dtype=float),
            bias=float(d["bias"]),
            sigma_w=np.asarray(d["sigma_w"], dtype=float),
            n_features_in=int(d["n_features_in"]),
            n_train=int(d["n_train"]),
            alpha=np.asarray(d["alpha"], dtype=float),
            beta=np.asarray(d["beta"], dtype=float),
            init_beta=float(d["init_beta"]),
            converged=bool(d["converged"]),
            n_iterations=int(d["n_iterations"]),
            final_evidence=float(d["final_evidence"]),
            config=config,
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def fit(dataset, config=None):
    """Run the full training loop and return a :class:`FittedModel`.

    Outer iterations rebuild the basis on the active sets, find the posterior
    mode, take the Laplace step, re-estimate precisions, prune, and score the
    log evidence; the loop stops when the evidence moves less than
    ``evidence_tol`` or the iteration cap is hit.
    """
    config = config if config is not None else TrainConfig()
    X, y = _unpack(dataset)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError("X must be a nonempty 2-d matrix")
    if y.shape != (X.shape[0],):
        raise DimensionError("y length must match the rows of X")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite entries in the feature matrix")
    labels = set(np.unique(y))
    if not labels <= {-1.0, 1.0}:
        raise DomainError(f"labels must be -1/+1, got {sorted(labels)}")
    if len(labels) < 2:
        raise DegenerateModelError("both classes required for training")

    state = initial_state(X, y, config)
    trace = []
    prev_ev = None
    ev = None
    converged = False
    sigma_w = sigma_theta = None
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        tick = time.perf_counter()
        mode = find_posterior_mode(state, X, y, config)
        state.w = mode.w
        state.theta = mode.theta
        sigma_w, sigma_theta = posterior_covariances(state, X, y, config)
        post = PosteriorApprox(state.w, sigma_w, state.theta, sigma_theta)
        state.hyper = update_hyperparameters(post, state.hyper, config)
        state = prune(state, config)
        # Evidence is scored on the pruned sets under the fresh precisions.
        sigma_w, sigma_theta = posterior_covariances(state, X, y, config)
        post = PosteriorApprox(state.w, sigma_w, state.theta, sigma_theta)
        ev = log_evidence(state, post, X, y, config)
        if not np.isfinite(ev):
            raise NumericError(f"non-finite log evidence at iteration {iteration}")
        state.iteration = iteration
        trace.append({
            "iteration": iteration,
            "active_samples": int(state.active_samples.size),
            "active_features": int(state.active_features.size),
            "log_evidence": ev,
            "seconds": time.perf_counter() - tick,
        })
        if prev_ev is not None and abs(ev - prev_ev) < config.evidence_tol:
            converged = True
            break
        prev_ev = ev

    return FittedModel(
        kernel=config.kernel,
        degree=config.degree,
        feature_indices=state.active_features.copy(),
        theta=state.theta.copy(),
        rv_indices=state.active_samples.copy(),
        rv_X=X[np.ix_(state.active_samples, state.active_features)].copy(),
        rv_y=y[state.active_samples].copy(),
        weights=state.w[1:].copy(),
        bias=float(state.w[0]),
        sigma_w=sigma_w,
        n_features_in=X.shape[1],
        n_train=X.shape[0],
        alpha=state.hyper.alpha.copy(),
        beta=state.hyper.beta.copy(),
        init_beta=config.init_beta,
        converged=converged,
        n_iterations=iteration,
        final_evidence=float(ev),
        config=config,
        trace=trace,
    )
