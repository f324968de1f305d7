"""Jittered Cholesky helpers for the posterior covariance solves."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import IllConditionedError

_JITTER_START = 1e-10
_JITTER_LIMIT = 1e-2


def robust_cholesky(H, name="matrix"):
    """Lower Cholesky factor of ``H``, adding diagonal jitter if needed.

    The jitter is ``eps * mean(diag(H))`` with ``eps`` doubling from 1e-10;
    once ``eps`` passes 1e-2 the matrix is declared ill-conditioned.

    Returns
    -------
    (L, jitter) where ``L`` is the lower factor of ``H + jitter * I``.
    """
    H = np.asarray(H, dtype=float)
    H = (H + H.T) / 2.0
    try:
        return scipy.linalg.cholesky(H, lower=True), 0.0
    except scipy.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(H)))
    eps = _JITTER_START
    while eps <= _JITTER_LIMIT:
        try:
            L = scipy.linalg.cholesky(H + eps * scale * np.eye(H.shape[0]), lower=True)
            return L, eps * scale
        except scipy.linalg.LinAlgError:
            eps *= 2.0
    raise IllConditionedError(
        f"{name} is not positive definite even with jitter up to "
        f"{_JITTER_LIMIT:g} * mean diagonal ({scale:g})"
    )


def robust_spd_inverse(H, name="matrix"):
    """Inverse and log-determinant of a symmetric positive definite matrix.

    Returns ``(H_inv, log_det)``; raises :class:`IllConditionedError` when
    the jitter schedule of :func:`robust_cholesky` is exhausted.
    """
    L, _ = robust_cholesky(H, name=name)
    inv = scipy.linalg.cho_solve((L, True), np.eye(L.shape[0]))
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    return inv, log_det


def chol_solve(L, b):
    """Solve ``H x = b`` given the lower factor ``L`` of ``H``."""
    return scipy.linalg.cho_solve((L, True), b)
