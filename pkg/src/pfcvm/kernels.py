"""Feature-weighted kernels and the label-folded basis matrix.

All functions take the data matrix already sliced to the active feature
columns, so ``spec.theta`` always lines up with the columns of ``X``.
Entry ``(i, j>0)`` of the basis matrix is ``phi(x_i, x_j) * y_j`` for the
j-th active training sample; column 0 is the bias column of ones, so the
classifier weights stay nonnegative while labels carry the sign.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError

KERNEL_KINDS = ("rbf", "polynomial", "linear")

# Trial points during mode search may sit a hair below zero before they are
# clipped, so "nonnegative" is enforced down to this floor only.
THETA_FLOOR = -1e-8


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its per-feature weights.

    Parameters
    ----------
    kind : str
        One of ``"rbf"``, ``"polynomial"``, ``"linear"``.
    theta : ndarray of shape (m_active,)
        Per-feature weights, one per active feature, each >= 0 up to the
        clipping floor used by the trainer.
    degree : int
        Polynomial order, ignored by the other kinds.
    """

    kind: str
    theta: np.ndarray
    degree: int = 2

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise DomainError(f"unknown kernel kind {self.kind!r}")
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1:
            raise DimensionError("theta must be a 1-d vector")
        if theta.size and theta.min() < THETA_FLOOR:
            raise DomainError(f"negative feature weight {theta.min():g}")
        if self.kind == "polynomial" and self.degree < 1:
            raise DomainError(f"polynomial degree must be >= 1, got {self.degree}")
        object.__setattr__(self, "theta", theta)


def _check_columns(X, spec):
    if X.shape[1] != spec.theta.size:
        raise DimensionError(
            f"X has {X.shape[1]} columns but theta has {spec.theta.size} entries"
        )


def _pairwise(A, B, spec):
    """Raw kernel values between the rows of A and the rows of B."""
    theta = spec.theta
    if spec.kind == "rbf":
        aw = A * theta
        sq = (aw * A).sum(axis=1)[:, None] + (B * theta * B).sum(axis=1)[None, :]
        sq -= 2.0 * aw @ B.T
        return np.exp(-sq)
    if spec.kind == "polynomial":
        return (1.0 + (A * theta) @ B.T) ** spec.degree
    return (A * theta) @ B.T


def kernel_value(x, z, spec):
    """Evaluate the kernel on a single pair of feature vectors."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    z = np.asarray(z, dtype=float).reshape(1, -1)
    if x.shape[1] != z.shape[1]:
        raise DimensionError(f"x has {x.shape[1]} features, z has {z.shape[1]}")
    _check_columns(x, spec)
    return float(_pairwise(x, z, spec)[0, 0])


def pairwise_basis(X_eval, X_basis, y_basis, spec):
    """Basis matrix between arbitrary evaluation rows and stored basis rows.

    Returns an ``(n_eval, n_basis + 1)`` matrix whose first column is the
    bias column of ones and whose remaining entries are
    ``phi(x_eval_i, x_basis_j) * y_basis_j``.
    """
    X_eval = np.asarray(X_eval, dtype=float)
    X_basis = np.asarray(X_basis, dtype=float)
    y_basis = np.asarray(y_basis, dtype=float)
    _check_columns(X_eval, spec)
    _check_columns(X_basis, spec)
    if y_basis.shape[0] != X_basis.shape[0]:
        raise DimensionError("y_basis length must match X_basis rows")
    out = np.empty((X_eval.shape[0], X_basis.shape[0] + 1))
    out[:, 0] = 1.0
    out[:, 1:] = _pairwise(X_eval, X_basis, spec) * y_basis
    return out


def basis_matrix(X, y, spec, active_samples):
    """Training-time basis matrix over the active sample columns.

    Rows run over every training sample; columns are the bias plus one
    column per active sample, labels folded in.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    active_samples = np.asarray(active_samples, dtype=int)
    return pairwise_basis(X, X[active_samples], y[active_samples], spec)


def d_matrix(X, y, w, spec, phi, active_samples):
    """Jacobian of the decision values with respect to theta.

    Entry ``(i, k)`` is ``d(phi_row_i . w)/d theta_k``. The bias column has
    no theta dependence, so only ``w[1:]`` enters.
    """
    X = np.asarray(X, dtype=float)
    _check_columns(X, spec)
    active_samples = np.asarray(active_samples, dtype=int)
    Xa = X[active_samples]
    w = np.asarray(w, dtype=float)
    if w.size != active_samples.size + 1:
        raise DimensionError("w must have one entry per active sample plus bias")
    if spec.kind == "rbf":
        # (x_i - x_j)^2 expanded so D comes out of two matmuls.
        V = phi[:, 1:] * w[1:]
        s0 = V.sum(axis=1)
        return -(X * X * s0[:, None] - 2.0 * X * (V @ Xa) + V @ (Xa * Xa))
    ya = np.asarray(y, dtype=float)[active_samples]
    if spec.kind == "polynomial":
        base = 1.0 + (X * spec.theta) @ Xa.T
        T = base ** (spec.degree - 1) * (w[1:] * ya)
        return spec.degree * X * (T @ Xa)
    return X * ((w[1:] * ya) @ Xa)


def e_matrix(X, y, w, spec, phi, residual, active_samples):
    """Second-order theta curvature term ``(dD/dtheta)^T residual``.

    Symmetric ``(m, m)``; identically zero for the linear kernel. Cost grows
    as n * n_active * m^2, so the trainer only asks for it when the full
    Hessian is explicitly requested.
    """
    X = np.asarray(X, dtype=float)
    _check_columns(X, spec)
    m = X.shape[1]
    active_samples = np.asarray(active_samples, dtype=int)
    Xa = X[active_samples]
    w = np.asarray(w, dtype=float)
    residual = np.asarray(residual, dtype=float)
    if residual.size != X.shape[0]:
        raise DimensionError("residual must have one entry per row of X")
    if spec.kind == "linear":
        return np.zeros((m, m))
    if spec.kind == "rbf":
        W = residual[:, None] * phi[:, 1:] * w[1:]
        dif2 = (X[:, None, :] - Xa[None, :, :]) ** 2
        return np.einsum("pj,pji,pjk->ik", W, dif2, dif2)
    if spec.degree == 1:
        return np.zeros((m, m))
    ya = np.asarray(y, dtype=float)[active_samples]
    base = 1.0 + (X * spec.theta) @ Xa.T
    T = residual[:, None] * base ** (spec.degree - 2) * (w[1:] * ya)
    cross = X[:, None, :] * Xa[None, :, :]
    return spec.degree * (spec.degree - 1) * np.einsum("pj,pji,pjk->ik", T, cross, cross)
