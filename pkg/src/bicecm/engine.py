"""Bayesian improved cross-entropy with categorical mixture sampling densities.

Each level draws N states from the current mixture, tempers the failure
indicator with ``Phi(-g / sigma)``, picks the next sigma so the weight
c.o.v. hits a target, and refits the mixture by weighted MAP. The loop stops
once the indicator-to-smoothed ratio is stable enough; those last samples give
the importance-sampling estimate.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import log_ndtr

from .discrete import MixtureParams, SampleSpace, log_pmf, sample
from .gem import WeightedSampleSet, build_prior, fit_map, select_k

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class AllZeroWeightsError(ValueError):
    """Weights with zero mean: no sample has any contact with the failure domain."""


class LevelFailureError(RuntimeError):
    """A level produced no usable weights; ``trace`` holds the levels so far."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


class DegenerateLevelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PerformanceModel:
    """Any discrete reliability problem: input distribution plus a vectorised g."""

    space: SampleSpace
    input_params: MixtureParams
    g: Callable[[np.ndarray], np.ndarray]

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(self.g(states), dtype=np.float64)


@dataclass(frozen=True)
class EngineConfig:
    N: int = 1000
    delta_tar: float = 1.5
    delta_eps: float = 1.5
    C: float = 200.0
    epsilon: float = 1e-8
    kmax: int = 0  # 0 selects fixed-K mode with ``k`` components
    k: int = 1
    t_max: int = 50
    seed: int = 0
    n_pilot: int = 20
    pilot_iters: int = 20
    main_iters: int = 500

    def __post_init__(self):
        problems = []
        if self.N < 2:
            problems.append("N must be >= 2")
        if not self.delta_tar > 0:
            problems.append("delta_tar must be > 0")
        if not self.delta_eps > 0:
            problems.append("delta_eps must be > 0")
        if self.C < 0:
            problems.append("C must be >= 0")
        if not self.epsilon > 0:
            problems.append("epsilon must be > 0")
        if self.kmax < 0:
            problems.append("kmax must be >= 0")
        if self.kmax == 0 and self.k < 1:
            problems.append("k must be >= 1 in fixed-K mode")
        if self.t_max < 1:
            problems.append("t_max must be >= 1")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True, eq=False)
class LevelTrace:
    """One sampling round. The terminal round has no sigma, ESS or fit."""

    stop_cov: float
    n_failures: int
    g_evaluations: int
    sigma: float | None = None
    ess: float | None = None
    selected_k: int | None = None
    params_after: MixtureParams | None = field(default=None, repr=False)


@dataclass(frozen=True, eq=False)
class RunResult:
    pf_hat: float
    levels: list
    total_g_evaluations: int
    converged: bool
    final_params: MixtureParams = field(repr=False)
    final_states: np.ndarray = field(repr=False)
    # I{g <= 0} p(x) / h(x) for the final samples; their mean is pf_hat.
    final_weights: np.ndarray = field(repr=False)

    @property
    def final_samples(self) -> WeightedSampleSet | None:
        """Final states with their indicator IS weights (None if nothing failed)."""
        if not np.any(self.final_weights > 0):
            return None
        return WeightedSampleSet(self.final_states, self.final_weights)

    @property
    def sigmas(self) -> list:
        return [lv.sigma for lv in self.levels if lv.sigma is not None]

    @property
    def selected_ks(self) -> list:
        return [lv.selected_k for lv in self.levels if lv.selected_k is not None]


def smoothed_indicator_log(g, sigma):
    """``ln Phi(-g / sigma)``; ``sigma = inf`` gives ``ln 0.5``."""
    g = np.asarray(g, dtype=np.float64)
    if math.isinf(sigma):
        return np.full_like(g, math.log(0.5)) if g.ndim else math.log(0.5)
    out = log_ndtr(-g / sigma)
    return out if g.ndim else float(out)


def sample_cov(values) -> float:
    """Sample standard deviation (N - 1 divisor) over the sample mean."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] < 2:
        raise ValueError("c.o.v. needs at least two values")
    mean = v.mean()
    if mean == 0.0:
        raise AllZeroWeightsError("all weights are zero")
    return float(v.std(ddof=1) / mean)


def ess(raw_weights) -> float:
    w = np.asarray(raw_weights, dtype=np.float64)
    return w.shape[0] / (1.0 + sample_cov(w) ** 2)


def level_log_weights(g, sigma, log_p, log_h) -> np.ndarray:
    log_h = np.asarray(log_h, dtype=np.float64)
    if not np.all(np.isfinite(log_h)):
        raise ValueError("reference log-density must be finite at every sample")
    return np.asarray(log_p, dtype=np.float64) + smoothed_indicator_log(g, sigma) - log_h


def level_weights(g, sigma, log_p, log_h) -> np.ndarray:
    """Raw weights ``p(x) Phi(-g/sigma) / h(x)``.

    If that would overflow or underflow wholesale, every weight is divided by
    the largest one instead; only ratios matter downstream.
    """
    lw = level_log_weights(g, sigma, log_p, log_h)
    top = lw.max()
    shift = top if (top > 700.0 or top < -700.0) else 0.0
    return np.exp(lw - shift)


def _weight_cov(log_w):
    w = np.exp(log_w - log_w.max())
    return float(w.std(ddof=1) / w.mean())


def solve_sigma(g, sigma_prev, delta_tar, n_grid: int = 60, rel_width: float = 1e-4) -> float:
    """Next smoothing parameter: minimise ``|cov(Phi(-g/s) / Phi(-g/sigma_prev)) - delta_tar|``.

    A log-spaced grid over ``[1e-6 scale, min(sigma_prev, 10 scale))`` with
    ``scale = max|g|`` locates the best cell, which golden-section search then
    narrows to relative width ``rel_width``. The result is always below
    ``sigma_prev``.

    When every ``g`` is equal the objective is flat and carries no information
    about the failure domain, so the top of the interval is returned (with a
    warning) rather than sharpening the indicator blindly.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.size == 0:
        raise ValueError("g_values must be nonempty")
    scale = float(np.max(np.abs(g))) or 1.0
    lo, hi = 1e-6 * scale, min(sigma_prev, 10.0 * scale)
    if lo >= hi:
        lo = 1e-3 * hi
    x_lo, x_hi = math.log(lo), math.log(hi)
    if hi >= sigma_prev:
        x_hi -= rel_width
    if np.ptp(g) == 0.0:
        warnings.warn("all performance values are identical; sigma kept at its upper bound",
                      DegenerateLevelWarning, stacklevel=2)
        return math.exp(x_hi)
    log_den = smoothed_indicator_log(g, sigma_prev)

    def objective(x):
        return abs(_weight_cov(smoothed_indicator_log(g, math.exp(x)) - log_den) - delta_tar)

    grid = np.linspace(x_lo, x_hi, n_grid)
    vals = np.array([objective(x) for x in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    best_x, best_v = grid[i], vals[i]
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > rel_width:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = objective(d)
    for x, v in ((c, fc), (d, fd)):
        if v < best_v:
            best_x, best_v = x, v
    return math.exp(best_x)


def stopping_cov(g, sigma) -> float:
    """c.o.v. of ``I{g <= 0} / Phi(-g / sigma)``; ``inf`` when nothing failed."""
    g = np.asarray(g, dtype=np.float64)
    fail = g <= 0
    if not fail.any():
        return math.inf
    ratio = np.zeros_like(g)
    ratio[fail] = np.exp(-smoothed_indicator_log(g[fail], sigma))
    return sample_cov(ratio)


def _evaluate_unique(model, states):
    uniq, inverse = np.unique(states, axis=0, return_inverse=True)
    return model.evaluate(uniq)[inverse.reshape(-1)]


def run(model, config: EngineConfig) -> RunResult:
    """Estimate ``P(g(X) <= 0)`` for ``model`` under ``config``.

    ``model`` needs ``space``, ``input_params`` (a single-component mixture)
    and ``evaluate(states) -> g``.
    """
    rng = np.random.default_rng(config.seed)
    space = model.space
    p_params = model.input_params
    p_params.check_space(space)
    h = p_params
    sigma_prev = math.inf
    levels = []
    converged = True
    t = 1
    while True:
        x = sample(h, space, rng, config.N)
        g = _evaluate_unique(model, x)
        if not np.all(np.isfinite(g)):
            raise ValueError(f"level {t}: performance function returned non-finite values")
        log_p = log_pmf(p_params, space, x)
        log_h = log_p if h is p_params else log_pmf(h, space, x)
        cov = stopping_cov(g, sigma_prev)
        n_fail = int(np.count_nonzero(g <= 0))
        if cov <= config.delta_eps or t > config.t_max:
            converged = cov <= config.delta_eps
            levels.append(LevelTrace(cov, n_fail, config.N))
            break

        sigma = solve_sigma(g, sigma_prev, config.delta_tar)
        log_w = level_log_weights(g, sigma, log_p, log_h)
        if not np.isfinite(log_w.max()):
            raise LevelFailureError(f"level {t}: every weight is zero", levels)
        raw = np.exp(log_w - log_w.max())
        samples = WeightedSampleSet(x, raw)
        if config.kmax > 0:
            fit, k_sel = select_k(samples, space, config.kmax, config.C, config.epsilon, rng,
                                  n_pilot=config.n_pilot, pilot_iters=config.pilot_iters,
                                  main_iters=config.main_iters)
        else:
            k_sel = config.k
            fit = fit_map(samples, space, k_sel, build_prior(space, k_sel, config.C, config.epsilon),
                          rng, n_pilot=config.n_pilot, pilot_iters=config.pilot_iters,
                          main_iters=config.main_iters)
        levels.append(LevelTrace(cov, n_fail, config.N, sigma=sigma, ess=ess(raw),
                                 selected_k=k_sel, params_after=fit.params))
        log.debug("level %d: sigma=%.4g ess=%.1f K=%d failures=%d", t, sigma, levels[-1].ess,
                  k_sel, n_fail)
        h = fit.params
        sigma_prev = sigma
        t += 1

    weights = np.where(g <= 0, np.exp(log_p - log_h), 0.0)
    return RunResult(
        pf_hat=float(weights.mean()),
        levels=levels,
        total_g_evaluations=sum(lv.g_evaluations for lv in levels),
        converged=converged,
        final_params=h,
        final_states=x,
        final_weights=weights,
    )
