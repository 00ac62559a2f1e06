"""Likelihood evaluation and closed-form regression machinery.

Log-densities drop additive constants throughout: the pCN acceptance
ratio and the Newton objective only ever consume differences.
"""

from dataclasses import dataclass

import math

import numpy as np
from scipy.special import expit, ndtr

from . import prior as priors
from .data import CLASSIFICATION, REGRESSION, Dataset
from .prior import (
    LOGISTIC,
    PROBABILITY_CLAMP,
    PROBIT,
    classification_transform,
    field_values,
)


class NewtonDivergenceError(RuntimeError):
    """Raised when the damped Newton line search cannot make progress."""


@dataclass(frozen=True)
class LikelihoodSpec:
    """Dataset plus the link choice for classification."""

    dataset: Dataset
    link: str = LOGISTIC

    def __post_init__(self):
        if self.link not in (LOGISTIC, PROBIT):
            raise ValueError(f"unknown link {self.link!r}")

    @property
    def task(self):
        return self.dataset.task


def log_likelihood(lik, u):
    """Log likelihood of a latent field (additive constants omitted).

    Regression: -sum (y_i - u_i)^2 / (2 delta^2) over labeled nodes.
    Classification: Bernoulli log likelihood of the clamped link values.
    Only labeled coordinates enter.
    """
    v = field_values(u)
    ds = lik.dataset
    idx, y = ds.label_indices, ds.label_values
    if idx.size == 0:
        return 0.0
    if ds.task == REGRESSION:
        r = y - v[idx]
        return -0.5 * float(r @ r) / ds.noise_std**2
    p = classification_transform(v[idx], lik.link)
    return float(y @ np.log(p) + (1.0 - y) @ np.log1p(-p))


def log_likelihood_grad(lik, u):
    """Gradient of log_likelihood with respect to the latent field.

    Where the link value is clamped the implemented likelihood is locally
    constant, so the gradient there is zero.
    """
    v = field_values(u)
    ds = lik.dataset
    grad = np.zeros_like(v)
    idx, y = ds.label_indices, ds.label_values
    if idx.size == 0:
        return grad
    if ds.task == REGRESSION:
        grad[idx] = (y - v[idx]) / ds.noise_std**2
        return grad
    raw = _raw_link(v[idx], lik.link)
    active = (raw > PROBABILITY_CLAMP) & (raw < 1.0 - PROBABILITY_CLAMP)
    if lik.link == LOGISTIC:
        g = y - raw
    else:
        pdf = _normal_pdf(v[idx])
        g = pdf * (y / raw - (1.0 - y) / (1.0 - raw))
    grad[idx] = np.where(active, g, 0.0)
    return grad


def _raw_link(t, link):
    return expit(t) if link == LOGISTIC else ndtr(t)


def _normal_pdf(t):
    return np.exp(-0.5 * t**2) / math.sqrt(2.0 * math.pi)


def _loglik_hess_diag(lik, v):
    """Diagonal of the log-likelihood Hessian at the labeled nodes."""
    ds = lik.dataset
    idx, y = ds.label_indices, ds.label_values
    diag = np.zeros_like(v)
    if idx.size == 0:
        return diag
    if ds.task == REGRESSION:
        diag[idx] = -1.0 / ds.noise_std**2
        return diag
    t = v[idx]
    raw = _raw_link(t, lik.link)
    active = (raw > PROBABILITY_CLAMP) & (raw < 1.0 - PROBABILITY_CLAMP)
    if lik.link == LOGISTIC:
        h = -raw * (1.0 - raw)
    else:
        pdf = _normal_pdf(t)
        r1 = pdf / np.clip(raw, 1e-300, None)
        r0 = pdf / np.clip(1.0 - raw, 1e-300, None)
        h = -(y * (r1**2 + t * r1) + (1.0 - y) * (r0**2 - t * r0))
    diag[idx] = np.where(active, h, 0.0)
    return diag


def exact_gaussian_posterior(prior_spec, dataset):
    """Conjugate Gaussian posterior for regression (dense, N <= 512).

    With prior precision P = (tau I + L)^s and H selecting the labeled
    coordinates, returns mean = Sigma H^T y / delta^2 and covariance
    Sigma = (P + H^T H / delta^2)^(-1).
    """
    if dataset.task != REGRESSION:
        raise ValueError("conjugate posterior requires a regression task")
    p = priors.dense_precision(prior_spec)
    idx, y = dataset.label_indices, dataset.label_values
    prec = p.copy()
    rhs = np.zeros(p.shape[0])
    if idx.size:
        inv_var = 1.0 / dataset.noise_std**2
        prec[idx, idx] += inv_var
        rhs[idx] = y * inv_var
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ rhs
    return mean, cov


def map_estimate(prior_spec, dataset, link=LOGISTIC, tol=1e-8, max_iter=200):
    """Posterior mode.

    Regression is the conjugate posterior mean. Classification maximizes
    log L(Phi(u); y) - 1/2 u^T P u over the latent u by damped Newton
    (Armijo backtracking, constant 1e-4), stopping when the gradient
    max-norm drops below `tol`.
    """
    if dataset.task == REGRESSION:
        mean, _ = exact_gaussian_posterior(prior_spec, dataset)
        return mean

    lik = LikelihoodSpec(dataset=dataset, link=link)
    p = priors.dense_precision(prior_spec)
    n = p.shape[0]
    u = np.zeros(n)

    def objective(v):
        return log_likelihood(lik, v) - 0.5 * float(v @ (p @ v))

    f = objective(u)
    for _ in range(max_iter):
        grad = log_likelihood_grad(lik, u) - p @ u
        if np.max(np.abs(grad)) < tol:
            return u
        hess = p - np.diag(_loglik_hess_diag(lik, u))  # SPD: -Hessian of objective
        step = np.linalg.solve(hess, grad)
        slope = float(grad @ step)
        alpha = 1.0
        for _ in range(30):
            candidate = u + alpha * step
            f_new = objective(candidate)
            if f_new >= f + 1e-4 * alpha * slope:
                u, f = candidate, f_new
                break
            alpha *= 0.5
        else:
            raise NewtonDivergenceError(
                "line search failed after 30 halvings; Newton step rejected"
            )
    grad = log_likelihood_grad(lik, u) - p @ u
    if np.max(np.abs(grad)) < tol:
        return u
    raise NewtonDivergenceError(
        f"Newton did not reach tolerance {tol:g} in {max_iter} iterations "
        f"(gradient max-norm {np.max(np.abs(grad)):.3e})"
    )
