"""Posterior diagnostics: feature-prior divergence and a capacity bound.

The KL divergence here compares, per feature, the half-line truncated
Gaussian posterior (renormalized Laplace approximation with mean theta
and precision beta) against the truncated zero-mean prior with precision
beta0.  Summed over active features it feeds the generalization bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import DimensionError, DomainError

__all__ = ["KLInput", "BoundInput", "kl_feature_divergence", "generalization_bound"]


@dataclass(frozen=True)
class KLInput:
    """Per-feature posterior summaries entering the KL sum.

    theta are the nonnegative posterior means, beta the posterior
    precisions, beta0 the prior precisions; equal lengths.  Features with
    theta exactly 0 are treated as pruned and excluded from the sum.
    """

    theta: np.ndarray
    beta: np.ndarray
    beta0: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float).ravel()
        b = np.asarray(self.beta, dtype=float).ravel()
        b0 = np.asarray(self.beta0, dtype=float).ravel()
        if not (t.shape == b.shape == b0.shape):
            raise DimensionError(
                f"theta/beta/beta0 lengths differ: {t.size}, {b.size}, {b0.size}"
            )
        if t.size and (not np.all(np.isfinite(t)) or np.any(t < 0)):
            raise DomainError("theta must be finite and nonnegative")
        for name, arr in (("beta", b), ("beta0", b0)):
            if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr <= 0)):
                raise DomainError(f"{name} must be finite and positive")
        object.__setattr__(self, "theta", t)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "beta0", b0)


@dataclass(frozen=True)
class BoundInput:
    """Inputs of the generalization bound."""

    empirical_loss: float
    kl: float
    n: int
    c: float = 1.0
    r: float = 2.0
    g: float = 1.0
    delta: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.empirical_loss <= 1.0:
            raise DomainError(f"empirical_loss must lie in [0,1], got {self.empirical_loss}")
        if not self.kl >= 0.0:
            raise DomainError(f"kl must be nonnegative, got {self.kl}")
        if int(self.n) < 1:
            raise DomainError(f"n must be at least 1, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("c", "r", "g"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must lie in (0,1), got {self.delta}")


def kl_feature_divergence(inp: KLInput) -> float:
    """Summed KL divergence of truncated feature posteriors from their priors.

    Per active feature (theta_k > 0, with z = theta*sqrt(beta/2)):

        KL_k = 1/2 [beta0/beta - 1 + ln(beta/beta0) + beta0 theta^2]
               + (beta0+beta) theta exp(-z^2) / (sqrt(2 pi beta) erfc(-z))
               - ln erfc(-z)

    The middle term is the erfcx-scaled hazard contribution written so no
    intermediate overflows: for theta >= 0, erfc(-z) stays in [1, 2] and
    exp(-z^2) only underflows.
    """
    theta, beta, beta0 = inp.theta, inp.beta, inp.beta0
    active = theta > 0.0
    if not np.any(active):
        return 0.0
    t = theta[active]
    b = beta[active]
    b0 = beta0[active]
    z = t * np.sqrt(b / 2.0)
    tail = erfc(-z)
    quad = 0.5 * (b0 / b - 1.0 + np.log(b / b0) + b0 * t * t)
    hazard = (b0 + b) * t * np.exp(-z * z) / (np.sqrt(2.0 * np.pi * b) * tail)
    return float(np.sum(quad + hazard - np.log(tail)))


def generalization_bound(inp: BoundInput) -> float:
    """Upper bound on the misclassification probability.

    bound = loss + (2/c) sqrt(2 g~ / n) + sqrt((ln log_r(r g~ / g) + ln(1/delta)/2) / n)
    with g~ = r * max(kl, g).  The iterated logarithm requires
    r * g~ / g > 1 and a base r != 1.
    """
    g_tilde = inp.r * max(inp.kl, inp.g)
    if inp.r == 1.0:
        raise DomainError("bound undefined for logarithm base r = 1")
    arg = inp.r * g_tilde / inp.g
    if arg <= 1.0:
        raise DomainError(f"iterated logarithm undefined: r*g~/g = {arg} <= 1")
    iterated = math.log(arg) / math.log(inp.r)
    if iterated <= 0.0:
        raise DomainError(
            f"iterated logarithm undefined: log base {inp.r} of {arg} is nonpositive"
        )
    term2 = (2.0 / inp.c) * math.sqrt(2.0 * g_tilde / inp.n)
    term3 = math.sqrt((math.log(iterated) + 0.5 * math.log(1.0 / inp.delta)) / inp.n)
    return inp.empirical_loss + term2 + term3
