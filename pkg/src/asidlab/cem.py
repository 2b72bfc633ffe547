"""Cross-entropy method for box-constrained black-box minimisation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import rng as rng_mod
from .errors import ConfigurationError, OptimizationError


@dataclass(frozen=True)
class CemConfig:
    population: int = 32
    elite_frac: float = 0.2
    iterations: int = 30
    init_std: float | tuple[float, ...] = 1.0
    min_std: float = 1e-6
    seed: int = 0
    # re-score the current mean alongside each population
    include_mean: bool = True
    # relative spread below which a population counts as tied
    tie_rtol: float = 1e-12
    # weight kept on the previous std at each refit; slows the collapse of
    # the sampling distribution so the mean can travel before it freezes
    smoothing: float = 0.5

    def __post_init__(self):
        if self.population < 2:
            raise ConfigurationError("CEM population must be >= 2")
        if not 0 < self.elite_frac <= 1:
            raise ConfigurationError("elite_frac must lie in (0, 1]")
        if self.iterations < 1:
            raise ConfigurationError("CEM needs at least one iteration")
        if self.min_std < 0:
            raise ConfigurationError("min_std must be >= 0")
        if not 0 <= self.smoothing < 1:
            raise ConfigurationError("smoothing must lie in [0, 1)")
        if not isinstance(self.init_std, (int, float)):
            object.__setattr__(self, "init_std", tuple(float(x) for x in self.init_std))

    @property
    def n_elite(self) -> int:
        return max(1, int(math.floor(self.elite_frac * self.population + 1e-9)))

    def with_seed(self, seed: int) -> CemConfig:
        return CemConfig(**{**self.__dict__, "seed": seed})


@dataclass
class IterationStats:
    iteration: int
    best_value: float
    population_best: float
    elite_mean_value: float
    mean: np.ndarray = field(repr=False)
    std: np.ndarray = field(repr=False)
    refit: bool = True


class CemResult(NamedTuple):
    best_params: np.ndarray
    best_value: float
    history: list[IterationStats]

    @property
    def final_mean(self) -> np.ndarray:
        return self.history[-1].mean

    @property
    def final_std(self) -> np.ndarray:
        return self.history[-1].std

    def solution(self, stochastic: bool) -> np.ndarray:
        """The answer to report.

        For a deterministic objective this is the best-ever candidate. When
        the objective's random numbers change between iterations the
        best-ever value is biased toward lucky draws, so the final sampling
        mean (an average over many elites) is returned instead.
        """
        return self.final_mean.copy() if stochastic else self.best_params.copy()


BatchObjective = Callable[[np.ndarray, int], np.ndarray]


def cem_minimize(
    objective: Callable,
    init_mean: Sequence[float] | np.ndarray,
    cfg: CemConfig,
    lower: Sequence[float] | np.ndarray | None = None,
    upper: Sequence[float] | np.ndarray | None = None,
    batched: bool = False,
) -> CemResult:
    """Minimise ``objective`` with the cross-entropy method.

    Parameters
    ----------
    objective
        Either ``f(x) -> float`` or, with ``batched=True``,
        ``f(X, iteration) -> values`` scoring a (population, p) matrix at
        once. The iteration index lets batched objectives hold their random
        numbers fixed across one population.
    init_mean
        Starting mean of the sampling distribution.
    cfg
        Population size, elite fraction, iteration count, initial and
        minimum standard deviation, std smoothing, seed.
    lower, upper
        Optional box. Candidates are clipped into it for evaluation; the
        sampling distribution is refit on the unclipped samples and its
        mean kept inside the box.

    Returns
    -------
    CemResult
        ``(best_params, best_value, history)``. ``best_params`` is the
        best-ever candidate; history records best-so-far values, which are
        non-increasing.

    Notes
    -----
    Non-finite objective values count as ``+inf``. When every member of a
    population scores the same the sampling distribution is left unchanged,
    since the data carry no preference.
    """
    mean = np.array(init_mean, dtype=float).ravel()
    p = mean.shape[0]
    std = np.broadcast_to(np.asarray(cfg.init_std, dtype=float), (p,)).copy()
    lo = None if lower is None else np.broadcast_to(np.asarray(lower, float), (p,))
    hi = None if upper is None else np.broadcast_to(np.asarray(upper, float), (p,))
    if lo is not None or hi is not None:
        mean = np.clip(mean, lo, hi)

    if batched:
        score = objective
    else:

        def score(X, _iteration):
            return np.array([objective(x) for x in X], dtype=float)

    gen = rng_mod.generator(cfg.seed, "cem")
    best_x, best_v = mean.copy(), math.inf
    history: list[IterationStats] = []
    for it in range(cfg.iterations):
        raw = mean + std * gen.standard_normal((cfg.population, p))
        if cfg.include_mean:
            raw[0] = mean
        X = raw if lo is None and hi is None else np.clip(raw, lo, hi)
        values = np.asarray(score(X, it), dtype=float).reshape(cfg.population)
        values = np.where(np.isfinite(values), values, math.inf)
        if np.all(np.isinf(values)):
            raise OptimizationError(f"every candidate in CEM iteration {it} scored non-finite")

        order = np.argsort(values, kind="stable")
        if values[order[0]] < best_v:
            best_v, best_x = float(values[order[0]]), X[order[0]].copy()

        elite = order[: cfg.n_elite]
        finite = values[np.isfinite(values)]
        spread = finite.max() - finite.min()
        refit = not (
            finite.size == values.size
            and spread <= cfg.tie_rtol * max(1.0, abs(float(finite.min())))
        )
        if refit:
            # refit on the unclipped samples: clipped elites piled on a bound
            # would otherwise collapse the spread there
            mean = raw[elite].mean(axis=0)
            elite_std = raw[elite].std(axis=0)
            std = np.maximum((1 - cfg.smoothing) * elite_std + cfg.smoothing * std, cfg.min_std)
            if lo is not None or hi is not None:
                mean = np.clip(mean, lo, hi)
        history.append(
            IterationStats(
                iteration=it,
                best_value=best_v,
                population_best=float(values[order[0]]),
                elite_mean_value=float(np.mean(values[elite])),
                mean=mean.copy(),
                std=std.copy(),
                refit=refit,
            )
        )
    return CemResult(best_x, best_v, history)
