"""Weighted MAP fitting of categorical mixtures with a generalized EM algorithm.

The fit maximises ``sum_i w_i ln h(x_i) + ln p(eta)`` where ``p`` is a product
of symmetric Dirichlet priors on the mixture weights and on every categorical
table. Initial responsibilities come from short pilot runs; the number of
components can be chosen by BIC.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .discrete import MixtureParams, SampleSpace, component_log_joint, log_joint

log = logging.getLogger(__name__)


class FitError(RuntimeError):
    """Base class for failures inside the EM fit."""


class DegenerateSampleError(FitError):
    """A sample has zero probability under every mixture component."""

    def __init__(self, index: int):
        super().__init__(f"sample {index} is impossible under every mixture component")
        self.index = index


class EmptyComponentError(FitError):
    """A component received no weight and the prior cannot fill it (C = 0)."""

    def __init__(self, component: int):
        super().__init__(f"mixture component {component} has zero responsibility mass")
        self.component = component


@dataclass(frozen=True, eq=False)
class DirichletPrior:
    a: np.ndarray  # (K,)
    b: np.ndarray  # (K, M), flat like MixtureParams.theta
    C: float
    epsilon: float
    sizes: tuple = field(repr=False)

    @property
    def K(self) -> int:
        return self.a.shape[0]

    def log_density(self, alphas: np.ndarray, theta: np.ndarray) -> float:
        """Log Dirichlet density of ``alphas`` and all tables, constants included."""
        off = np.concatenate([[0], np.cumsum(self.sizes)])[:-1]
        lp = gammaln(self.a.sum()) - gammaln(self.a).sum() + xlogy(self.a - 1.0, alphas).sum()
        bsum = np.add.reduceat(self.b, off, axis=1)
        lp += (gammaln(bsum) - np.add.reduceat(gammaln(self.b), off, axis=1)).sum()
        lp += xlogy(self.b - 1.0, theta).sum()
        return float(lp)


def build_prior(space: SampleSpace, K: int, C: float, epsilon: float) -> DirichletPrior:
    """Balanced symmetric prior: ``a_k = 1 + epsilon``, ``b = 1 + C / (K n_d)``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if C < 0:
        raise ValueError("C must be >= 0")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    row = np.concatenate([np.full(n, 1.0 + C / (K * n)) for n in space.sizes])
    return DirichletPrior(
        a=np.full(K, 1.0 + epsilon),
        b=np.tile(row, (K, 1)),
        C=float(C),
        epsilon=float(epsilon),
        sizes=space.sizes,
    )


@dataclass(frozen=True, eq=False)
class WeightedSampleSet:
    """States with raw importance weights; ``weights`` are rescaled to sum to N."""

    states: np.ndarray
    raw_weights: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=np.int64))
        raw = np.asarray(self.raw_weights, dtype=np.float64)
        if raw.shape != (states.shape[0],):
            raise ValueError("one raw weight per state is required")
        if np.any(raw < 0) or not np.all(np.isfinite(raw)):
            raise ValueError("raw weights must be finite and nonnegative")
        if not np.any(raw > 0):
            raise ValueError("at least one raw weight must be positive")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "raw_weights", raw)

    @classmethod
    def unweighted(cls, states) -> "WeightedSampleSet":
        states = np.atleast_2d(states)
        return cls(states, np.ones(states.shape[0]))

    @property
    def N(self) -> int:
        return self.states.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return self.N * self.raw_weights / self.raw_weights.sum()


@dataclass(frozen=True, eq=False)
class FitResult:
    params: MixtureParams
    weighted_log_likelihood: float
    weighted_log_posterior: float
    bic: float
    iterations: int
    converged: bool
    lp_trace: tuple = field(default=(), repr=False)

    @property
    def K(self) -> int:
        return self.params.K


def _normalise_rows(lj):
    m = lj.max(axis=1, keepdims=True)
    bad = ~np.isfinite(m[:, 0])
    if bad.any():
        raise DegenerateSampleError(int(np.flatnonzero(bad)[0]))
    e = np.exp(lj - m)
    s = e.sum(axis=1, keepdims=True)
    return e / s, m[:, 0] + np.log(s[:, 0])


def responsibilities(params: MixtureParams, space: SampleSpace, states) -> np.ndarray:
    """Posterior component probabilities, one row per sample."""
    params.check_space(space)
    gamma, _ = _normalise_rows(component_log_joint(params, space.one_hot(states)))
    return gamma


def _m_step(gamma, w, onehot, prior: DirichletPrior, offsets, empty="raise"):
    wg = gamma * w[:, None]
    nk = wg.sum(axis=0)
    K = nk.shape[0]
    alphas = (nk + prior.a - 1.0) / (nk.sum() + prior.a.sum() - K)
    counts = wg.T @ onehot
    excess = np.add.reduceat(prior.b - 1.0, offsets[:-1], axis=1)  # sum_j b - n_d, (K, D)
    denom = nk[:, None] + excess
    sizes = np.diff(offsets)
    denom_flat = np.repeat(denom, sizes, axis=1)
    theta = np.empty_like(counts)
    ok = denom_flat > 0
    theta[ok] = (counts[ok] + prior.b[ok] - 1.0) / denom_flat[ok]
    if not ok.all():
        k = int(np.flatnonzero(~ok.all(axis=1))[0])
        if empty == "raise":
            raise EmptyComponentError(k)
        theta[~ok] = np.repeat(1.0 / sizes, sizes)[np.nonzero(~ok)[1]]
    # Exact in arithmetic; removes summation-order drift at large N.
    theta /= np.repeat(np.add.reduceat(theta, offsets[:-1], axis=1), sizes, axis=1)
    return alphas / alphas.sum(), theta


def m_step_map(gamma, samples: WeightedSampleSet, prior: DirichletPrior, space: SampleSpace,
               empty: str = "raise") -> MixtureParams:
    """Closed-form weighted MAP update given responsibilities.

    ``empty="uniform"`` keeps a component with no data under a flat prior as
    a uniform table instead of raising :class:`EmptyComponentError`.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (samples.N, prior.K):
        raise ValueError(f"responsibilities must have shape ({samples.N}, {prior.K})")
    alphas, theta = _m_step(gamma, samples.weights, space.one_hot(samples.states), prior,
                            space.offsets, empty)
    return MixtureParams(alphas, theta, space.sizes)


def map_decomposition(gamma, samples: WeightedSampleSet, prior: DirichletPrior,
                      space: SampleSpace) -> tuple:
    """Split the MAP table update into a data estimate and a prior estimate.

    Returns ``(lam, theta_data, theta_prior)`` with ``lam`` of shape (K, D) and
    both tables flat (K, M), so that every table of the M-step output equals
    ``lam * theta_data + (1 - lam) * theta_prior``. Requires a proper prior
    (``C > 0``) and positive component mass.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    wg = gamma * samples.weights[:, None]
    nk = wg.sum(axis=0)
    sizes = np.asarray(space.sizes)
    excess = np.add.reduceat(prior.b - 1.0, space.offsets[:-1], axis=1)
    theta_data = (wg.T @ space.one_hot(samples.states)) / nk[:, None]
    theta_prior = (prior.b - 1.0) / np.repeat(excess, sizes, axis=1)
    lam = nk[:, None] / (nk[:, None] + excess)
    return lam, theta_data, theta_prior


def weighted_log_posterior(params: MixtureParams, samples: WeightedSampleSet,
                           prior: DirichletPrior, space: SampleSpace) -> tuple:
    """Return ``(weighted log-likelihood, weighted log-posterior)``."""
    params.check_space(space)
    w = samples.weights
    used = w > 0
    lj = component_log_joint(params, space.one_hot(samples.states[used]))
    ll = float(w[used] @ logsumexp(lj, axis=1))
    return ll, ll + prior.log_density(params.alphas, params.theta)


def n_free_parameters(K: int, space: SampleSpace) -> int:
    return (K - 1) + K * sum(n - 1 for n in space.sizes)


def bic(log_likelihood: float, K: int, space: SampleSpace, N: int) -> float:
    """``-2 LL + dim ln N`` with dim the count of free simplex parameters."""
    return -2.0 * log_likelihood + n_free_parameters(K, space) * math.log(N)


@dataclass
class _State:
    alphas: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    ll: float
    lp: float
    r: float
    t: int
    trace: list


def _run_em(gamma, w, onehot, prior, offsets, tol, max_iters, state=None):
    """Alternate M and E steps until the relative LP change drops below ``tol``.

    With ``state`` given, resume a previous run (its counter and last LP) and
    stop at the same overall iteration limit.
    """
    if state is None:
        state = _State(None, None, gamma, math.nan, math.nan, math.inf, 1, [])
        lp_prev = 1.0
    else:
        lp_prev = state.lp
    while state.r >= tol and state.t <= max_iters:
        alphas, theta = _m_step(state.gamma, w, onehot, prior, offsets, empty="uniform")
        gamma, lpmf = _normalise_rows(log_joint(alphas, theta, onehot))
        ll = float(w @ lpmf)
        lp = ll + prior.log_density(alphas, theta)
        diff = abs(lp - lp_prev)
        if diff == 0.0:
            r = 0.0
        elif lp_prev == 0.0 or not math.isfinite(lp_prev):
            r = math.inf
        else:
            r = diff / abs(lp_prev)
        state.alphas, state.theta, state.gamma = alphas, theta, gamma
        state.ll, state.lp, state.r = ll, lp, r
        state.trace.append(lp)
        state.t += 1
        lp_prev = lp
    return state


def fit_map(samples: WeightedSampleSet, space: SampleSpace, K: int, prior: DirichletPrior,
            rng: np.random.Generator, n_pilot: int = 20, pilot_iters: int = 20,
            main_iters: int = 500, tol: float | None = None) -> FitResult:
    """Approximate weighted MAP of a K-component mixture.

    Each pilot run starts from responsibility rows (one per distinct state)
    drawn uniformly on the simplex and runs at most ``pilot_iters`` EM iterations; the pilot with the
    highest weighted log-posterior (later pilots win ties) is continued up to
    ``main_iters`` iterations in total. EM is deterministic given its start,
    so continuing the winner is the same as restarting from its initial
    responsibilities.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if prior.K != K or prior.sizes != space.sizes:
        raise ValueError("prior does not match K and the sample space")
    N = samples.N
    tol = 1.0 / (10 * N) if tol is None else tol
    w = samples.weights
    # Zero-weight samples do not enter the M step; dropping them also keeps a
    # flat-prior fit from failing on states it has legitimately zeroed out.
    # Repeated states are merged by summing their weights, which leaves every
    # M step and log-posterior unchanged.
    used = w > 0
    uniq, inverse = np.unique(samples.states[used], axis=0, return_inverse=True)
    w = np.bincount(inverse.reshape(-1), weights=w[used], minlength=uniq.shape[0])
    onehot = space.one_hot(uniq)
    offsets = space.offsets
    n_used = w.shape[0]

    if K == 1:
        best = _run_em(np.ones((n_used, 1)), w, onehot, prior, offsets, tol, main_iters)
    else:
        best = None
        for _ in range(max(n_pilot, 1)):
            e = rng.standard_exponential((n_used, K))
            gamma0 = e / e.sum(axis=1, keepdims=True)
            st = _run_em(gamma0, w, onehot, prior, offsets, tol, min(pilot_iters, main_iters))
            if best is None or st.lp >= best.lp:
                best = st
        best = _run_em(None, w, onehot, prior, offsets, tol, main_iters, state=best)

    params = MixtureParams(best.alphas, best.theta, space.sizes)
    return FitResult(
        params=params,
        weighted_log_likelihood=best.ll,
        weighted_log_posterior=best.lp,
        bic=bic(best.ll, K, space, N),
        iterations=best.t - 1,
        converged=best.r < tol,
        lp_trace=tuple(best.trace),
    )


def select_k(samples: WeightedSampleSet, space: SampleSpace, kmax: int, C: float, epsilon: float,
             rng: np.random.Generator, **fit_opts) -> tuple:
    """Fit K = 1..kmax and return ``(best_fit, K)`` by smallest BIC (ties -> smaller K)."""
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    best, best_k = None, None
    for K in range(1, kmax + 1):
        try:
            fit = fit_map(samples, space, K, build_prior(space, K, C, epsilon), rng, **fit_opts)
        except FitError as exc:
            log.warning("skipping K=%d: %s", K, exc)
            continue
        if best is None or fit.bic < best.bic:
            best, best_k = fit, K
    if best is None:
        raise FitError(f"no K in 1..{kmax} could be fitted")
    return best, best_k
