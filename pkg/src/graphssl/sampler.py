"""Graph pCN Metropolis-Hastings sampling of the posterior.

The proposal g = sqrt(1 - theta^2) u + theta xi with xi drawn from the
prior preserves the prior exactly, so the acceptance ratio reduces to
the likelihood ratio min{1, exp(l(g) - l(u))}. One chain advances
strictly sequentially; chain states are never all stored. Summaries use
online moment recurrences plus a bounded reservoir of retained thinned
states for quantiles.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import CLASSIFICATION
from .model import log_likelihood
from .prior import (
    classification_transform,
    field_values,
    kl_basis,
    _nonstationary_operator,
)

RESERVOIR_DEFAULT = 10000
_RESERVOIR_SCALAR_CAP = int(2e7)  # total stored scalars across the buffer


@dataclass(frozen=True)
class ChainConfig:
    """pCN tuning: step size theta in (0,1), length, burn-in, thinning."""

    iterations: int
    theta: float = 0.1
    burn_in: int | None = None   # defaults to iterations // 5
    thinning: int = 10
    seed: int = 0
    initial: np.ndarray | None = None  # zero vector (the prior mean) if None
    reservoir: int = RESERVOIR_DEFAULT

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.resolved_burn_in >= self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be positive")

    @property
    def resolved_burn_in(self):
        return self.iterations // 5 if self.burn_in is None else self.burn_in


@dataclass(frozen=True)
class ChainTrace:
    """Per-iteration log-likelihood of the current state and accept flags."""

    log_likelihoods: np.ndarray
    accepted: np.ndarray


@dataclass(frozen=True)
class PosteriorSummary:
    """Node-wise posterior summaries plus chain diagnostics.

    For classification runs `class_probabilities` is the posterior mean
    of the link-transformed field, `probability_std` its posterior
    standard deviation, and `class_labels` the 0.5 threshold of the mean.
    """

    mean: np.ndarray
    variance: np.ndarray
    q05: np.ndarray
    q50: np.ndarray
    q95: np.ndarray
    acceptance_rate: float
    effective_sample_size: float
    kept: int
    trace: ChainTrace
    class_probabilities: np.ndarray | None = None
    class_labels: np.ndarray | None = None
    probability_std: np.ndarray | None = None
    reservoir: np.ndarray | None = field(default=None, repr=False)


def prior_draw_operator(prior_spec):
    """Callable rng -> prior sample, with per-spec precomputation done once."""
    if prior_spec.stationary:
        basis = kl_basis(prior_spec)
        k = prior_spec.truncation

        def draw(rng):
            return basis @ rng.standard_normal(k)

        return draw
    op = _nonstationary_operator(prior_spec)
    n = prior_spec.n

    def draw(rng):
        return op(rng.standard_normal(n))

    return draw


def pcn_step(current, config, prior_spec, lik, rng, xi=None, current_loglik=None):
    """One pCN proposal/accept step.

    Returns (next_values, accepted). `xi` overrides the prior draw (test
    hook); `current_loglik` skips re-evaluating the current state.
    """
    u = field_values(current)
    rng = np.random.default_rng(rng)
    if xi is None:
        xi = prior_draw_operator(prior_spec)(rng)
    g = math.sqrt(1.0 - config.theta**2) * u + config.theta * np.asarray(xi)
    llu = log_likelihood(lik, u) if current_loglik is None else current_loglik
    llg = log_likelihood(lik, g)
    # log U < delta-ll accepts every uphill move and, at equal likelihoods,
    # accepts with probability one
    if np.log(rng.uniform()) < llg - llu:
        return g, True
    return u, False


def acceptance_probability(ll_proposed, ll_current):
    """Metropolis acceptance min{1, exp(l(g) - l(u))}."""
    return min(1.0, math.exp(min(0.0, ll_proposed - ll_current)))


def _compiled_loglik(lik):
    """Closure over the labeled data, faster than log_likelihood per step."""
    ds = lik.dataset
    idx = ds.label_indices
    y = ds.label_values
    if idx.size == 0:
        return lambda u: 0.0
    if ds.task == CLASSIFICATION:
        link = lik.link

        def loglik(u):
            p = classification_transform(u[idx], link)
            return float(y @ np.log(p) + (1.0 - y) @ np.log1p(-p))

        return loglik
    half_inv_var = 0.5 / ds.noise_std**2

    def loglik(u):
        r = y - u[idx]
        return -half_inv_var * float(r @ r)

    return loglik


def run_chain(config, prior_spec, lik):
    """Run one pCN chain and summarize the post-burn-in, thinned states.

    Deterministic given config.seed: proposal noise, acceptance draws and
    reservoir replacement all consume a single seeded generator in fixed
    order.
    """
    k_total = config.iterations
    burn = config.resolved_burn_in
    rng = np.random.default_rng(config.seed)
    draw = prior_draw_operator(prior_spec)
    loglik = _compiled_loglik(lik)
    n = prior_spec.n

    if config.initial is None:
        u = np.zeros(n)
    else:
        u = np.array(field_values(config.initial), copy=True)
        if u.size != n:
            raise ValueError("initial state length must equal N")
    llu = loglik(u)

    contraction = math.sqrt(1.0 - config.theta**2)
    theta = config.theta
    classification = lik.task == CLASSIFICATION

    trace_ll = np.empty(k_total)
    trace_acc = np.zeros(k_total, dtype=bool)

    r_cap = min(config.reservoir, max(1, _RESERVOIR_SCALAR_CAP // max(n, 1)))
    buffer = np.empty((r_cap, n))

    count = 0
    mean = np.zeros(n)
    m2 = np.zeros(n)
    if classification:
        p_mean = np.zeros(n)
        p_m2 = np.zeros(n)

    for it in range(k_total):
        g = contraction * u + theta * draw(rng)
        llg = loglik(g)
        if np.log(rng.uniform()) < llg - llu:
            u = g
            llu = llg
            trace_acc[it] = True
        trace_ll[it] = llu

        if it >= burn and (it - burn) % config.thinning == 0:
            count += 1
            delta = u - mean
            mean += delta / count
            m2 += delta * (u - mean)
            if classification:
                p = classification_transform(u, lik.link)
                pd = p - p_mean
                p_mean += pd / count
                p_m2 += pd * (p - p_mean)
            if count <= r_cap:
                buffer[count - 1] = u
            else:
                # reservoir sampling keeps a uniform subset of retained states
                j = rng.integers(0, count)
                if j < r_cap:
                    buffer[j] = u

    kept = count
    retained = buffer[: min(kept, r_cap)]
    q05, q50, q95 = np.quantile(retained, (0.05, 0.5, 0.95), axis=0)
    variance = m2 / (kept - 1) if kept > 1 else np.zeros(n)

    summary = PosteriorSummary(
        mean=mean,
        variance=variance,
        q05=q05,
        q50=q50,
        q95=q95,
        acceptance_rate=float(np.mean(trace_acc)),
        effective_sample_size=effective_sample_size(trace_ll[burn:]),
        kept=kept,
        trace=ChainTrace(log_likelihoods=trace_ll, accepted=trace_acc),
        reservoir=retained.copy(),
    )
    if classification:
        p_var = p_m2 / (kept - 1) if kept > 1 else np.zeros(n)
        summary = replace(
            summary,
            class_probabilities=p_mean,
            class_labels=(p_mean > 0.5).astype(int),
            probability_std=np.sqrt(np.maximum(p_var, 0.0)),
        )
    return summary


def effective_sample_size(trace):
    """ESS of a scalar trace via Geyer's initial positive sequence.

    A (numerically) constant trace is treated as perfectly mixed and
    returns the trace length.
    """
    x = np.asarray(trace, dtype=float)
    m = x.size
    if m < 4:
        return float(m)
    x = x - x.mean()
    var = float(x @ x) / m
    if var <= 1e-30 * max(1.0, float(np.max(np.abs(x))) ** 2) or var == 0.0:
        return float(m)
    nfft = int(2 ** np.ceil(np.log2(2 * m)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:m].real / m
    rho = acov / acov[0]

    # sum adjacent-pair autocorrelations while the pair sums stay positive
    tau = -1.0
    t = 0
    while 2 * t + 1 < m:
        gamma = rho[2 * t] + rho[2 * t + 1]
        if gamma <= 0.0:
            break
        tau += 2.0 * gamma
        t += 1
    tau = max(tau, 1.0)
    return float(m / tau)


def split_rhat(traces):
    """Split-Rhat over a list of equal-length scalar traces.

    Each trace is halved, giving 2c sequences. Returns (rhat, degenerate);
    the diagnostic is degenerate when the between-chain variance vanishes
    (e.g. identical seeds) or the traces are constant.
    """
    if len(traces) < 2:
        raise ValueError("split-Rhat needs at least two chains")
    half = min(len(t) for t in traces) // 2
    if half < 2:
        raise ValueError("traces too short to split")
    rows = []
    for t in traces:
        t = np.asarray(t, dtype=float)
        rows.append(t[:half])
        rows.append(t[half : 2 * half])
    arr = np.array(rows)
    within = float(np.mean(np.var(arr, axis=1, ddof=1)))
    seq_means = arr.mean(axis=1)
    between = half * float(np.var(seq_means, ddof=1))
    if within <= 0.0 or between == 0.0:
        return float("nan"), True
    var_hat = (half - 1) / half * within + between / half
    return float(np.sqrt(var_hat / within)), False


@dataclass(frozen=True)
class MultiChainResult:
    summary: PosteriorSummary
    rhat: float
    rhat_degenerate: bool
    chain_summaries: tuple


def multi_chain(config, prior_spec, lik, chains):
    """Run several pCN chains with derived seeds and pool their samples.

    Seeds are config.seed + chain index. The pooled summary merges the
    per-chain online moments; split-Rhat is computed on the post-burn-in
    log-likelihood traces and a warning is emitted above 1.05.
    """
    if chains < 2:
        raise ValueError("multi_chain needs at least two chains")
    summaries = [
        run_chain(replace(config, seed=config.seed + i), prior_spec, lik)
        for i in range(chains)
    ]
    burn = config.resolved_burn_in
    traces = [s.trace.log_likelihoods[burn:] for s in summaries]
    rhat, degenerate = split_rhat(traces)
    if not degenerate and rhat > 1.05:
        warnings.warn(f"split-Rhat {rhat:.3f} exceeds 1.05; chains may not have mixed")

    pooled = _pool_summaries(summaries, config)
    return MultiChainResult(
        summary=pooled,
        rhat=rhat,
        rhat_degenerate=degenerate,
        chain_summaries=tuple(summaries),
    )


def _pool_summaries(summaries, config):
    n = summaries[0].mean.size
    count = 0
    mean = np.zeros(n)
    m2 = np.zeros(n)
    for s in summaries:
        c = s.kept
        delta = s.mean - mean
        tot = count + c
        mean += delta * (c / tot)
        m2 += s.variance * (c - 1) + delta**2 * (count * c / tot)
        count = tot

    pooled_res = np.vstack([s.reservoir for s in summaries])
    cap = min(config.reservoir, max(1, _RESERVOIR_SCALAR_CAP // max(n, 1)))
    if pooled_res.shape[0] > cap:
        pick = np.random.default_rng(config.seed).choice(
            pooled_res.shape[0], size=cap, replace=False
        )
        pooled_res = pooled_res[np.sort(pick)]
    q05, q50, q95 = np.quantile(pooled_res, (0.05, 0.5, 0.95), axis=0)

    classification = summaries[0].class_probabilities is not None
    extra = {}
    if classification:
        weights = np.array([s.kept for s in summaries], dtype=float)
        weights /= weights.sum()
        p_mean = sum(w * s.class_probabilities for w, s in zip(weights, summaries))
        p_second = sum(
            w * (s.probability_std**2 + s.class_probabilities**2)
            for w, s in zip(weights, summaries)
        )
        extra = {
            "class_probabilities": p_mean,
            "class_labels": (p_mean > 0.5).astype(int),
            "probability_std": np.sqrt(np.maximum(p_second - p_mean**2, 0.0)),
        }

    return PosteriorSummary(
        mean=mean,
        variance=m2 / (count - 1) if count > 1 else np.zeros(n),
        q05=q05,
        q50=q50,
        q95=q95,
        acceptance_rate=float(np.mean([s.acceptance_rate for s in summaries])),
        effective_sample_size=float(
            sum(s.effective_sample_size for s in summaries)
        ),
        kept=count,
        trace=summaries[0].trace,
        reservoir=pooled_res,
        **extra,
    )


@dataclass(frozen=True)
class AcceptanceStudyRow:
    n_points: int
    acceptance_rate: float
    ess_fraction: float


def acceptance_vs_n_study(problem_factory, n_points_list, config):
    """Acceptance rate and ESS fraction across graph sizes.

    `problem_factory(N, rng)` must return (prior_spec, likelihood_spec)
    for freshly sampled features at size N while keeping the label
    mechanism, theta and chain protocol fixed. The ESS fraction is
    ESS / (post-burn-in length).
    """
    rows = []
    for n_points in n_points_list:
        feature_rng = np.random.default_rng((config.seed, n_points))
        prior_spec, lik = problem_factory(n_points, feature_rng)
        summary = run_chain(config, prior_spec, lik)
        post = config.iterations - config.resolved_burn_in
        rows.append(
            AcceptanceStudyRow(
                n_points=n_points,
                acceptance_rate=summary.acceptance_rate,
                ess_fraction=summary.effective_sample_size / post,
            )
        )
    return rows
