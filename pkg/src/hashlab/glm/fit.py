"""MAP fits with Gaussian priors and Laplace-approximation intervals.

Four families cover the measurement pipeline: Beta regression for the
dominant-response proportion, Gaussian for response entropy, Bernoulli
for pairwise coordination, and a hurdle Poisson with per-subject
intercepts for causal-claim counts. Every fit is a deterministic
penalized-likelihood optimization; standard errors come from the inverse
curvature of the log-posterior at its mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg, special, stats

from .dataset import Dataset
from .families import (
    BETA_LOG_PRECISION_CAP,
    bernoulli_rate_loglik,
    beta_loglik,
    gaussian_loglik_value,
    logistic_loglik,
    with_gaussian_prior,
    ztpoisson_loglik,
)
from .optimize import MaximizeResult, Objective, maximize

DEFAULT_PRIOR_SD = 10.0
DEFAULT_SUBJECT_SD = 1.0
SEPARATION_ETA = 10.0


class FitError(RuntimeError):
    """A fit that cannot be produced (degenerate design, bad response)."""


class Family(str, Enum):
    BETA_LOGIT = "beta"
    GAUSSIAN = "gaussian"
    BERNOULLI_LOGIT = "logistic"
    HURDLE_POISSON = "hurdle-poisson"


@dataclass
class GlmFit:
    family: Family
    columns: list[str]
    beta: np.ndarray
    se: np.ndarray
    cov: np.ndarray  # Laplace covariance of the reported coefficients
    loglik: float
    converged: bool
    iterations: int
    phi: float | None = None  # Beta precision
    hu: float | None = None  # hurdle zero probability
    hu_se: float | None = None
    subject_effects: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def coefficient(self, name: str) -> float:
        return float(self.beta[self.columns.index(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self.columns.index(name)])


def _check_rank(x: np.ndarray, columns: list[str]) -> None:
    rank = np.linalg.matrix_rank(x)
    if rank < x.shape[1]:
        raise FitError(
            f"design matrix is rank-deficient (rank {rank} < {x.shape[1]} "
            f"columns {columns})"
        )


def _laplace_cov(objective: Objective, x_map: np.ndarray) -> np.ndarray:
    precision = -objective.hess(x_map)
    precision = (precision + precision.T) / 2.0
    try:
        factor = linalg.cho_factor(precision, lower=True)
        return linalg.cho_solve(factor, np.eye(precision.shape[0]))
    except linalg.LinAlgError:
        return np.linalg.pinv(precision)


def smooth_proportions(y: np.ndarray) -> np.ndarray:
    """Pull boundary proportions into (0,1): y' = (y(n-1) + 1/2) / n."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise FitError("beta regression needs responses in [0, 1]")
    n = y.size
    return (y * (n - 1) + 0.5) / n


def fit_beta_regression(data: Dataset, prior_sd: float = DEFAULT_PRIOR_SD) -> GlmFit:
    """Beta likelihood, logit link on the mean, log link on the precision."""
    _check_rank(data.x, data.columns)
    y = smooth_proportions(data.y)
    k = data.x.shape[1]
    if float(np.var(y)) < 1e-14:
        # A constant response has an unbounded precision: report the exact
        # mean solution with phi pinned at its cap.
        beta, *_ = np.linalg.lstsq(data.x, special.logit(y), rcond=None)
        return GlmFit(
            family=Family.BETA_LOGIT,
            columns=data.columns,
            beta=beta,
            se=np.zeros(k),
            cov=np.zeros((k, k)),
            loglik=beta_loglik(data.x, y).value(
                np.concatenate([beta, [BETA_LOG_PRECISION_CAP]])
            ),
            converged=True,
            iterations=0,
            phi=float(np.exp(BETA_LOG_PRECISION_CAP)),
            diagnostics={"degenerate_constant_response": True},
        )
    parts = beta_loglik(data.x, y)
    objective = with_gaussian_prior(parts, np.full(k + 1, prior_sd))

    beta0, *_ = np.linalg.lstsq(data.x, special.logit(y), rcond=None)
    mu0 = special.expit(data.x @ beta0)
    resid_var = max(float(np.var(y - mu0)), 1e-6)
    phi0 = max(float(np.mean(mu0 * (1 - mu0))) / resid_var - 1.0, 1.0)
    x0 = np.concatenate([beta0, [np.log(phi0)]])

    result = maximize(objective, x0)
    cov = _laplace_cov(objective, result.x)
    beta = result.x[:-1]
    gamma = float(result.x[-1])
    phi = float(np.exp(gamma))
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return GlmFit(
        family=Family.BETA_LOGIT,
        columns=data.columns,
        beta=beta,
        se=se[:-1],
        cov=cov[:-1, :-1],
        loglik=parts.value(result.x),
        converged=result.converged,
        iterations=result.iterations,
        phi=phi,
        diagnostics={"log_precision_se": float(se[-1]), "grad_norm": result.grad_norm},
    )


def fit_gaussian(data: Dataset, prior_sd: float = DEFAULT_PRIOR_SD) -> GlmFit:
    """Gaussian MAP = ridge least squares; closed-form up to the noise scale.

    The noise variance is profiled by a short fixed-point loop (solve for
    the coefficients, re-estimate the residual variance, repeat); with one
    observation per parameter or fewer it falls back to unit noise so the
    prior keeps the problem well-posed.
    """
    x, y = data.x, data.y
    n, k = x.shape
    xtx = x.T @ x
    xty = x.T @ y
    sigma2 = 1.0
    beta = np.zeros(k)
    iterations = 0
    for iterations in range(1, 6):
        a = xtx / sigma2 + np.eye(k) / prior_sd**2
        beta_new = np.linalg.solve(a, xty / sigma2)
        resid = y - x @ beta_new
        if n > k:
            sigma2_new = max(float(resid @ resid) / (n - k), 1e-12)
        else:
            sigma2_new = 1.0
        done = np.allclose(beta_new, beta, rtol=1e-12, atol=1e-15) and np.isclose(
            sigma2_new, sigma2, rtol=1e-12
        )
        beta, sigma2 = beta_new, sigma2_new
        if done:
            break
    a = xtx / sigma2 + np.eye(k) / prior_sd**2
    cov = np.linalg.inv(a)
    resid = y - x @ beta
    return GlmFit(
        family=Family.GAUSSIAN,
        columns=data.columns,
        beta=beta,
        se=np.sqrt(np.clip(np.diag(cov), 0.0, None)),
        cov=cov,
        loglik=gaussian_loglik_value(resid, sigma2),
        converged=True,
        iterations=iterations,
        diagnostics={
            "sigma": float(np.sqrt(sigma2)),
            "condition_number": float(np.linalg.cond(a)),
        },
    )


def fit_logistic(data: Dataset, prior_sd: float = DEFAULT_PRIOR_SD) -> GlmFit:
    """Penalized logistic regression via damped Newton (IRLS with prior)."""
    x, y = data.x, data.y
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise FitError("logistic regression needs a binary response")
    parts = logistic_loglik(x, y)
    objective = with_gaussian_prior(parts, np.full(x.shape[1], prior_sd))
    result = maximize(objective, np.zeros(x.shape[1]))
    cov = _laplace_cov(objective, result.x)
    eta = x @ result.x
    separation = bool(np.max(np.abs(eta)) > SEPARATION_ETA) or len(np.unique(y)) == 1
    return GlmFit(
        family=Family.BERNOULLI_LOGIT,
        columns=data.columns,
        beta=result.x,
        se=np.sqrt(np.clip(np.diag(cov), 0.0, None)),
        cov=cov,
        loglik=parts.value(result.x),
        converged=result.converged,
        iterations=result.iterations,
        diagnostics={"separation": separation, "grad_norm": result.grad_norm},
    )


def _fit_hurdle_probability(
    n_zero: int, n_pos: int, prior_sd: float
) -> tuple[float, float, MaximizeResult]:
    parts = bernoulli_rate_loglik(n_zero, n_pos)
    objective = with_gaussian_prior(parts, np.array([prior_sd]))
    result = maximize(objective, np.zeros(1))
    alpha = float(result.x[0])
    hu = float(special.expit(alpha))
    var_alpha = float(_laplace_cov(objective, result.x)[0, 0])
    hu_se = float(np.sqrt(var_alpha) * hu * (1.0 - hu))
    return hu, hu_se, result


def fit_hurdle_poisson(
    data: Dataset,
    prior_sd: float = DEFAULT_PRIOR_SD,
    subject_sd: float = DEFAULT_SUBJECT_SD,
) -> GlmFit:
    """Two-part count model: zero hurdle + zero-truncated Poisson.

    Counts of zero feed a scalar hurdle probability; positive counts feed
    a log-link truncated Poisson over the fixed design plus one penalized
    intercept per subject (Gaussian shrinkage with sd subject_sd stands in
    for a random-intercept distribution).
    """
    y = data.y
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise FitError("hurdle Poisson needs nonnegative integer counts")
    if data.subjects is None:
        raise FitError("hurdle Poisson needs subject ids for the intercepts")
    _check_rank(data.x, data.columns)

    n_zero = int(np.sum(y == 0))
    n_pos = int(np.sum(y > 0))
    hu, hu_se, hurdle_result = _fit_hurdle_probability(n_zero, n_pos, prior_sd)
    hurdle_loglik = bernoulli_rate_loglik(n_zero, n_pos).value(
        np.array([special.logit(hu)])
    )

    k = data.x.shape[1]
    n_subjects = len(data.subject_labels or [])
    if n_pos == 0:
        # Nothing to inform the count part; report the prior mode.
        return GlmFit(
            family=Family.HURDLE_POISSON,
            columns=data.columns,
            beta=np.zeros(k),
            se=np.full(k, prior_sd),
            cov=np.eye(k) * prior_sd**2,
            loglik=hurdle_loglik,
            converged=hurdle_result.converged,
            iterations=hurdle_result.iterations,
            hu=hu,
            hu_se=hu_se,
            subject_effects=np.zeros(n_subjects),
            diagnostics={"count_part_empty": True},
        )

    pos = y > 0
    subj = data.subjects[pos]
    onehot = np.zeros((int(n_pos), n_subjects))
    onehot[np.arange(int(n_pos)), subj] = 1.0
    x_full = np.hstack([data.x[pos], onehot])
    parts = ztpoisson_loglik(x_full, y[pos])
    prior_vec = np.concatenate([np.full(k, prior_sd), np.full(n_subjects, subject_sd)])
    objective = with_gaussian_prior(parts, prior_vec)

    x0 = np.zeros(k + n_subjects)
    if "intercept" in data.columns:
        x0[data.columns.index("intercept")] = float(np.log(np.mean(y[pos])))
    result = maximize(objective, x0)
    cov_full = _laplace_cov(objective, result.x)
    se_full = np.sqrt(np.clip(np.diag(cov_full), 0.0, None))
    return GlmFit(
        family=Family.HURDLE_POISSON,
        columns=data.columns,
        beta=result.x[:k],
        se=se_full[:k],
        cov=cov_full[:k, :k],
        loglik=hurdle_loglik + parts.value(result.x),
        converged=result.converged and hurdle_result.converged,
        iterations=result.iterations,
        hu=hu,
        hu_se=hu_se,
        subject_effects=result.x[k:],
        diagnostics={"grad_norm": result.grad_norm, "n_pos": n_pos, "n_zero": n_zero},
    )


def log_mean_to_mean(log_count: float) -> float:
    """Expected count implied by a log-link coefficient sum: exp(.)."""
    return float(np.exp(log_count))


@dataclass(frozen=True)
class MarginalEffects:
    grid: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


_INVERSE_LINK = {
    Family.BETA_LOGIT: special.expit,
    Family.BERNOULLI_LOGIT: special.expit,
    Family.GAUSSIAN: lambda eta: eta,
    Family.HURDLE_POISSON: np.exp,
}


def marginal_effects(fit: GlmFit, grid: np.ndarray, level: float = 0.95) -> MarginalEffects:
    """Inverse-link predictions over a design grid with Laplace intervals.

    The interval is computed on the link scale by the delta method and
    mapped through the (monotone) inverse link.
    """
    if not fit.converged:
        raise FitError(
            f"refusing to predict from an unconverged fit "
            f"(family {fit.family.value}, {fit.iterations} iterations)"
        )
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != len(fit.columns):
        raise FitError(
            f"grid has {grid.shape[1]} columns, fit has {len(fit.columns)}"
        )
    eta = grid @ fit.beta
    var = np.einsum("ij,jk,ik->i", grid, fit.cov, grid)
    se = np.sqrt(np.clip(var, 0.0, None))
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    inv = _INVERSE_LINK[fit.family]
    return MarginalEffects(
        grid=grid,
        mean=inv(eta),
        lower=inv(eta - z * se),
        upper=inv(eta + z * se),
    )


def prediction_grid(
    columns: list[str], varying: dict[str, np.ndarray], fixed: dict[str, float] | None = None
) -> np.ndarray:
    """Build a grid matching fit columns: one varying column, others fixed.

    The intercept column defaults to 1, everything else to 0. Interaction
    columns ("a:b") are filled as the product of their parts.
    """
    fixed = dict(fixed or {})
    (var_name, var_values), *rest = varying.items()
    if rest:
        raise FitError("prediction_grid varies exactly one column")
    m = len(var_values)
    grid = np.zeros((m, len(columns)))
    values: dict[str, np.ndarray] = {var_name: np.asarray(var_values, dtype=float)}
    for name, val in fixed.items():
        values[name] = np.full(m, float(val))
    values.setdefault("intercept", np.ones(m))
    for j, name in enumerate(columns):
        if name in values:
            grid[:, j] = values[name]
        elif ":" in name:
            a, b = name.split(":", 1)
            grid[:, j] = values.get(a, np.zeros(m)) * values.get(b, np.zeros(m))
    return grid
