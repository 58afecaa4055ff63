"""Log-likelihoods with analytic gradients for the four model families.

Each builder returns the likelihood value/gradient/Hessian as callables
over the parameter vector; `with_gaussian_prior` composes them with an
independent N(0, sd^2) prior per coefficient into the log-posterior that
the Newton optimizer maximizes.

Parameterizations:
  logistic         params = beta;             mean = sigmoid(X beta)
  beta regression  params = [beta, gamma];    mean = sigmoid(X beta),
                   precision phi = exp(gamma) (scalar, log link)
  zero-trunc Pois  params = beta;             rate = exp(X beta), y >= 1
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .optimize import Objective, fd_hessian

# Rates above this are numerically indistinguishable from plain Poisson.
_ZTP_LARGE_RATE = 40.0

# Log-precision cap for the Beta family: a response with (numerically) no
# residual spread drives the precision to infinity; phi saturates at e^27.6
# ~ 1e12 and the precision score is flat beyond the cap.
BETA_LOG_PRECISION_CAP = 27.6


@dataclass(frozen=True)
class LikelihoodParts:
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]


def with_gaussian_prior(parts: LikelihoodParts, prior_sd: np.ndarray) -> Objective:
    """Log-posterior = log-likelihood + independent Gaussian log-priors."""
    prec = 1.0 / np.asarray(prior_sd, dtype=float) ** 2

    def value(params: np.ndarray) -> float:
        return parts.value(params) - 0.5 * float(prec @ (params**2))

    def grad(params: np.ndarray) -> np.ndarray:
        return parts.grad(params) - prec * params

    def hess(params: np.ndarray) -> np.ndarray:
        return parts.hess(params) - np.diag(prec)

    return Objective(value=value, grad=grad, hess=hess)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    return special.expit(eta)


def logistic_loglik(x: np.ndarray, y: np.ndarray) -> LikelihoodParts:
    """Bernoulli with logit link."""

    def value(beta: np.ndarray) -> float:
        eta = x @ beta
        return float(y @ eta - np.logaddexp(0.0, eta).sum())

    def grad(beta: np.ndarray) -> np.ndarray:
        return x.T @ (y - _sigmoid(x @ beta))

    def hess(beta: np.ndarray) -> np.ndarray:
        p = _sigmoid(x @ beta)
        w = p * (1.0 - p)
        return -(x.T * w) @ x

    return LikelihoodParts(value, grad, hess)


def beta_loglik(x: np.ndarray, y: np.ndarray) -> LikelihoodParts:
    """Beta likelihood, logit link on the mean, scalar log-link precision.

    The gradient splits into a mean part and a precision part; the
    Hessian is finite-differenced from the analytic gradient (the
    parameter count is small, and the line search tolerates the error).
    """
    ystar = np.log(y) - np.log1p(-y)
    logy = np.log(y)
    log1my = np.log1p(-y)

    def _shape(params: np.ndarray):
        beta, gamma = params[:-1], float(params[-1])
        mu = _sigmoid(x @ beta)
        phi = float(np.exp(min(gamma, BETA_LOG_PRECISION_CAP)))
        a = np.clip(mu * phi, 1e-12, None)
        b = np.clip((1.0 - mu) * phi, 1e-12, None)
        return mu, phi, a, b

    def value(params: np.ndarray) -> float:
        mu, phi, a, b = _shape(params)
        ll = (
            special.gammaln(phi)
            - special.gammaln(a)
            - special.gammaln(b)
            + (a - 1.0) * logy
            + (b - 1.0) * log1my
        )
        return float(ll.sum())

    def grad(params: np.ndarray) -> np.ndarray:
        mu, phi, a, b = _shape(params)
        mustar = special.digamma(a) - special.digamma(b)
        mean_factor = phi * (ystar - mustar) * mu * (1.0 - mu)
        g_beta = x.T @ mean_factor
        prec_term = mu * (ystar - mustar) + log1my - (
            special.digamma(b) - special.digamma(phi)
        )
        # dphi/dgamma is zero once the cap saturates.
        at_cap = float(params[-1]) >= BETA_LOG_PRECISION_CAP
        g_gamma = 0.0 if at_cap else phi * prec_term.sum()
        return np.concatenate([g_beta, [g_gamma]])

    def hess(params: np.ndarray) -> np.ndarray:
        return fd_hessian(grad, params)

    return LikelihoodParts(value, grad, hess)


def _ztp_factors(lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(u, w): u = lam/(e^lam - 1) enters the score as -(lam + u) + y;
    w = -d2/deta2 is the Newton weight."""
    small = lam <= _ZTP_LARGE_RATE
    lam_s = np.where(small, lam, 1.0)
    em1 = np.expm1(lam_s)
    u = np.where(small, lam_s / em1, 0.0)
    dudlam = np.where(small, (em1 - lam_s * np.exp(lam_s)) / em1**2, 0.0)
    w = lam * (1.0 + dudlam)
    return u, w


def ztpoisson_loglik(x: np.ndarray, y: np.ndarray) -> LikelihoodParts:
    """Zero-truncated Poisson with log link; requires y >= 1."""
    log_yfact = special.gammaln(y + 1.0)

    def value(beta: np.ndarray) -> float:
        eta = x @ beta
        lam = np.exp(eta)
        # log(1 - e^-lam) without cancellation
        log_trunc = np.log(-np.expm1(-lam))
        return float((y * eta - lam - log_yfact - log_trunc).sum())

    def grad(beta: np.ndarray) -> np.ndarray:
        lam = np.exp(x @ beta)
        u, _ = _ztp_factors(lam)
        return x.T @ (y - lam - u)

    def hess(beta: np.ndarray) -> np.ndarray:
        lam = np.exp(x @ beta)
        _, w = _ztp_factors(lam)
        return -(x.T * w) @ x

    return LikelihoodParts(value, grad, hess)


def bernoulli_rate_loglik(n_zero: int, n_pos: int) -> LikelihoodParts:
    """Scalar logit model for the hurdle probability of a zero count."""

    def value(alpha: np.ndarray) -> float:
        a = float(alpha[0])
        return n_zero * a - (n_zero + n_pos) * float(np.logaddexp(0.0, a))

    def grad(alpha: np.ndarray) -> np.ndarray:
        hu = float(_sigmoid(alpha[0]))
        return np.array([n_zero - (n_zero + n_pos) * hu])

    def hess(alpha: np.ndarray) -> np.ndarray:
        hu = float(_sigmoid(alpha[0]))
        return np.array([[-(n_zero + n_pos) * hu * (1.0 - hu)]])

    return LikelihoodParts(value, grad, hess)


def gaussian_loglik_value(resid: np.ndarray, sigma2: float) -> float:
    n = resid.size
    return float(-0.5 * n * np.log(2.0 * np.pi * sigma2) - 0.5 * (resid @ resid) / sigma2)
