"""Graph Matern Gaussian priors N(0, (tau I + L)^(-s)).

Stationary (scalar tau) sampling goes through the truncated
Karhunen-Loeve expansion of the Laplacian spectrum. The nonstationary
variant replaces tau I with diag(tau) and samples by solving
(diag(tau) + L)^(s/2) u = w for white noise w: a sparse LU factorization
applied s/2 times for even integer s, a dense fractional power below the
dense cutoff otherwise.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import expit, ndtr

from .spectral import DENSE_CUTOFF, DEFAULT_TRUNCATION, Spectrum, eigendecompose

PROBABILITY_CLAMP = 1e-12  # keeps log-likelihood terms finite

LOGISTIC = "logistic"
PROBIT = "probit"


@dataclass(frozen=True)
class MaternPriorSpec:
    """Parameters of a graph Matern prior tied to a Laplacian spectrum.

    tau is the inverse lengthscale (scalar, or a positive vector for the
    nonstationary variant), s the smoothness, truncation the number of
    KL modes used when sampling through the spectrum.
    """

    tau: float | np.ndarray
    s: float
    truncation: int
    spectrum: Spectrum | None = None
    laplacian: object = None  # graph.Laplacian; needed off the spectral route

    def __post_init__(self):
        tau = self.tau
        if np.ndim(tau) == 0:
            if not float(tau) > 0:
                raise ValueError("tau must be positive")
            object.__setattr__(self, "tau", float(tau))
        else:
            tau = np.asarray(tau, dtype=float).ravel()
            if not np.all(tau > 0):
                raise ValueError("all entries of tau must be positive")
            if self.laplacian is None:
                raise ValueError("vector tau requires the Laplacian")
            if tau.size != self.laplacian.n:
                raise ValueError("tau vector length must equal N")
            object.__setattr__(self, "tau", tau)
            _probe_positive_definite(tau, self.laplacian)
        if not self.s > 0:
            raise ValueError("smoothness s must be positive")
        if self.spectrum is not None and self.truncation > self.spectrum.k:
            raise ValueError("truncation exceeds available spectrum modes")
        if self.truncation > self.n:
            raise ValueError("truncation exceeds graph size")

    @property
    def stationary(self):
        return np.ndim(self.tau) == 0

    @property
    def n(self):
        if self.spectrum is not None:
            return self.spectrum.n
        return self.laplacian.n


@dataclass(frozen=True)
class LatentField:
    """A function over the graph nodes drawn from (or fed to) the prior."""

    values: np.ndarray
    spec: MaternPriorSpec | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(vals)):
            raise ValueError("latent field has non-finite entries")
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def field_values(u):
    """Plain ndarray view of a LatentField or array-like."""
    if isinstance(u, LatentField):
        return u.values
    return np.asarray(u, dtype=float).ravel()


def make_prior(lap, tau, s, truncation=None):
    """Build a MaternPriorSpec, eigendecomposing the Laplacian if needed.

    Truncation defaults to min(N, 256). For vector tau no spectrum is
    computed; sampling goes through the factorization route.
    """
    if truncation is None:
        truncation = min(lap.n, DEFAULT_TRUNCATION)
    spectrum = None
    if np.ndim(tau) == 0:
        spectrum = eigendecompose(lap, truncation)
    return MaternPriorSpec(
        tau=tau, s=s, truncation=truncation, spectrum=spectrum, laplacian=lap
    )


def _probe_positive_definite(tau_vec, lap):
    """Smallest-eigenvalue probe of diag(tau) + L (must be > 0)."""
    a = sp.diags(tau_vec) + lap.matrix
    if lap.n <= DENSE_CUTOFF:
        smallest = float(scipy.linalg.eigvalsh(a.toarray(), subset_by_index=[0, 0])[0])
    else:
        v0 = np.random.default_rng(1).standard_normal(lap.n)
        smallest = float(
            spla.eigsh(a, k=1, which="SA", v0=v0, tol=1e-6, maxiter=20000,
                       return_eigenvectors=False)[0]
        )
    if not smallest > 0:
        raise ValueError(f"diag(tau) + L is not positive definite ({smallest:.3e})")


def kl_coefficients(spec):
    """Per-mode standard deviations (tau + lambda_i)^(-s/2), tiny negative
    eigenvalues clipped to zero."""
    if not spec.stationary:
        raise ValueError("KL coefficients are defined for scalar tau")
    lam = np.maximum(spec.spectrum.eigenvalues[: spec.truncation], 0.0)
    return (spec.tau + lam) ** (-spec.s / 2.0)


def kl_basis(spec):
    """Matrix B with B @ xi a prior draw for standard normal xi."""
    coef = kl_coefficients(spec)
    return spec.spectrum.eigenvectors[:, : spec.truncation] * coef[None, :]


def marginal_variance(spec):
    """Per-node prior variance sum_i (tau + lambda_i)^(-s) psi_i(j)^2."""
    coef = kl_coefficients(spec)
    vecs = spec.spectrum.eigenvectors[:, : spec.truncation]
    return (vecs**2) @ coef**2


def sample_prior(spec, rng, coeffs=None):
    """Draw from the stationary prior via the truncated KL expansion.

    Parameters
    ----------
    spec : MaternPriorSpec with scalar tau.
    rng : numpy Generator or seed.
    coeffs : optional length-truncation vector replacing the standard
        normal draws (test hook).
    """
    if not spec.stationary:
        return sample_prior_nonstationary(spec, rng, noise=coeffs)
    if spec.spectrum is None:
        raise ValueError("stationary sampling requires a spectrum")
    rng = np.random.default_rng(rng)
    if coeffs is None:
        coeffs = rng.standard_normal(spec.truncation)
    else:
        coeffs = np.asarray(coeffs, dtype=float).ravel()
        if coeffs.size != spec.truncation:
            raise ValueError("coeffs length must equal the truncation level")
    values = spec.spectrum.eigenvectors[:, : spec.truncation] @ (
        kl_coefficients(spec) * coeffs
    )
    return LatentField(values=values, spec=spec)


class _FactorizationDraw:
    """Sampler for N(0, A^(-s)), A = diag(tau) + L, even integer s."""

    def __init__(self, tau_vec, lap, s):
        a = (sp.diags(tau_vec) + lap.matrix).tocsc()
        self._lu = spla.splu(a)
        self._half_power = int(round(s)) // 2
        self.n = lap.n

    def __call__(self, noise):
        u = noise
        for _ in range(self._half_power):
            u = self._lu.solve(u)
        return u


class _DenseFractionalDraw:
    """Dense A^(-s/2) for fractional (or odd) s, N <= DENSE_CUTOFF."""

    def __init__(self, tau, lap, s):
        tau_vec = np.full(lap.n, tau) if np.ndim(tau) == 0 else tau
        a = (sp.diags(tau_vec) + lap.matrix).toarray()
        lam, v = scipy.linalg.eigh(a)
        lam = np.maximum(lam, np.finfo(float).tiny)
        self._root = (v * (lam ** (-s / 2.0))[None, :]) @ v.T
        self.n = lap.n

    def __call__(self, noise):
        return self._root @ noise


def _nonstationary_operator(spec):
    s = spec.s
    even_integer = float(s).is_integer() and int(round(s)) % 2 == 0
    if even_integer:
        return _FactorizationDraw(spec.tau, spec.laplacian, s)
    if spec.n <= DENSE_CUTOFF:
        return _DenseFractionalDraw(spec.tau, spec.laplacian, s)
    raise ValueError(
        f"unsupported configuration: non-integer or odd s={s} with "
        f"N={spec.n} > {DENSE_CUTOFF} (vector tau)"
    )


def sample_prior_nonstationary(spec, rng, noise=None):
    """Draw from N(0, (diag(tau) + L)^(-s)) for vector tau.

    Even integer s applies a sparse symmetric factorization s/2 times to
    white noise; other s fall back to a dense fractional power below the
    dense cutoff and raise above it.
    """
    if spec.stationary:
        raise ValueError("scalar tau: use sample_prior")
    op = _nonstationary_operator(spec)
    rng = np.random.default_rng(rng)
    if noise is None:
        noise = rng.standard_normal(spec.n)
    else:
        noise = np.asarray(noise, dtype=float).ravel()
        if noise.size != spec.n:
            raise ValueError("noise length must equal N")
    return LatentField(values=op(noise), spec=spec)


def _shift_matvec(spec, v):
    # scalar tau multiplies, vector tau broadcasts elementwise
    return spec.tau * v + spec.laplacian.matrix @ v


def prior_log_density(spec, u):
    """Unnormalized log prior density -1/2 u^T (tau I + L)^s u.

    Requires full truncation (k = N): a truncated prior is degenerate on
    a subspace and has no density. The additive constant is omitted; only
    differences of this quantity are ever consumed.
    """
    if spec.truncation < spec.n:
        raise ValueError(
            "log density requires full truncation k = N (truncated prior is degenerate)"
        )
    v = field_values(u)
    if v.size != spec.n:
        raise ValueError("field length must equal N")
    s = spec.s
    if float(s).is_integer():
        if spec.laplacian is None:
            raise ValueError("integer-s log density requires the Laplacian")
        w = v
        for _ in range(int(round(s))):
            w = _shift_matvec(spec, w)
        return -0.5 * float(v @ w)
    if spec.stationary:
        coeffs = spec.spectrum.eigenvectors.T @ v
        lam = np.maximum(spec.spectrum.eigenvalues, 0.0)
        return -0.5 * float(np.sum((spec.tau + lam) ** s * coeffs**2))
    if spec.n <= DENSE_CUTOFF:
        a = (sp.diags(spec.tau) + spec.laplacian.matrix).toarray()
        lam, vv = scipy.linalg.eigh(a)
        coeffs = vv.T @ v
        return -0.5 * float(np.sum(lam**s * coeffs**2))
    raise ValueError(
        f"unsupported configuration: fractional s with vector tau at N={spec.n}"
    )


def dense_precision(spec):
    """Dense (tau I + L)^s, usable below the dense cutoff only."""
    if spec.laplacian is None:
        raise ValueError("dense precision requires the Laplacian")
    n = spec.n
    if n > DENSE_CUTOFF:
        raise ValueError(f"dense precision limited to N <= {DENSE_CUTOFF}")
    tau_vec = np.full(n, spec.tau) if spec.stationary else spec.tau
    a = (sp.diags(tau_vec) + spec.laplacian.matrix).toarray()
    lam, v = scipy.linalg.eigh(a)
    lam = np.maximum(lam, np.finfo(float).tiny)
    p = (v * lam**spec.s) @ v.T
    return 0.5 * (p + p.T)


def classification_transform(u, link=LOGISTIC):
    """Elementwise link map into (0, 1), clamped away from the endpoints."""
    v = field_values(u)
    if link == LOGISTIC:
        p = expit(v)
    elif link == PROBIT:
        p = ndtr(v)
    else:
        raise ValueError(f"unknown link {link!r}")
    return np.clip(p, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)


def truncation_tail_fraction(spec):
    """Fraction of total prior variance beyond the truncation level.

    Exact when the spectrum holds all N modes; otherwise an upper bound
    (N - k) (tau + lambda_k)^(-s) / sum_(i<=k) is returned.
    """
    if not spec.stationary:
        raise ValueError("tail fraction is defined for scalar tau")
    lam = np.maximum(spec.spectrum.eigenvalues, 0.0)
    k = spec.truncation
    head = np.sum((spec.tau + lam[:k]) ** (-spec.s))
    if spec.spectrum.k == spec.n:
        tail = np.sum((spec.tau + lam[k:]) ** (-spec.s))
        return float(tail / (head + tail))
    bound = (spec.n - k) * (spec.tau + lam[k - 1]) ** (-spec.s)
    return float(bound / (head + bound))
