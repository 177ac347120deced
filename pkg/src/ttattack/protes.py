"""Probabilistic tensor-train optimizer for discrete black-box minimization.

Each iteration samples a batch of candidate multi-indices from a tensor-train
probability model, evaluates the black-box objective on all of them, keeps
the lowest-valued elite subset, and raises the model's log-likelihood of the
elites by plain gradient ascent on the cores.  Over iterations the sampling
distribution concentrates near the minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tt import TTTensor, tt_ascent_run, tt_random_nonneg, tt_sample

__all__ = [
    "ProtesConfig",
    "ProtesState",
    "elite_indices",
    "protes_init",
    "protes_iterate",
    "protes_minimize",
]


def elite_indices(values, count: int) -> np.ndarray:
    """Positions of the `count` smallest values; ties keep the earlier position."""
    return np.argsort(np.asarray(values), kind="stable")[:count]


@dataclass(frozen=True)
class ProtesConfig:
    """Hyperparameters of the optimizer.

    num_candidates: batch size sampled per iteration.
    num_elites: how many of the lowest-valued candidates drive the update.
    ascent_steps: gradient-ascent steps on the elite log-likelihood per iteration.
    learning_rate: step size of the ascent.
    rank: bond dimension cap of the probability train.
    """

    num_candidates: int = 100
    num_elites: int = 10
    ascent_steps: int = 100
    learning_rate: float = 0.01
    rank: int = 5
    seed: int = 0

    def validate(self):
        if not (1 <= self.num_elites <= self.num_candidates):
            raise ValueError("need 1 <= num_elites <= num_candidates")
        if self.ascent_steps < 1:
            raise ValueError("ascent_steps must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")


@dataclass
class ProtesState:
    """Optimizer state; treat as a value, iteration returns a new one."""

    distribution: TTTensor
    rng: np.random.Generator
    queries_used: int = 0
    best_index: np.ndarray | None = None
    best_value: float | None = None


def _derived_seeds(seed: int) -> tuple[int, int]:
    words = np.random.SeedSequence(seed).generate_state(2)
    return int(words[0]), int(words[1])


def protes_init(mode_sizes, config: ProtesConfig) -> ProtesState:
    """Fresh state: random positive distribution, zero queries, no best yet."""
    config.validate()
    init_seed, sample_seed = _derived_seeds(config.seed)
    dist = tt_random_nonneg(mode_sizes, config.rank, init_seed)
    return ProtesState(distribution=dist, rng=np.random.default_rng(sample_seed))


def protes_iterate(state: ProtesState, objective, config: ProtesConfig) -> ProtesState:
    """One sample / evaluate / select / ascend round.

    `objective` is called once with the whole (num_candidates, d) batch of
    1-based multi-indices and must return one value per row.  If it raises,
    the state is left untouched, including the sampler's random stream.
    """
    config.validate()
    k_batch = config.num_candidates
    rng_checkpoint = state.rng.bit_generator.state
    try:
        candidates = tt_sample(state.distribution, k_batch, state.rng)
        values = np.asarray(objective(candidates), dtype=np.float64)
        if values.shape != (k_batch,):
            raise ValueError(
                f"objective returned shape {values.shape}, expected ({k_batch},)"
            )
    except Exception:
        state.rng.bit_generator.state = rng_checkpoint
        raise
    # Stable sort keeps the earlier-sampled candidate on ties at the elite cut.
    elites = candidates[elite_indices(values, config.num_elites)]
    dist = tt_ascent_run(
        state.distribution, elites, config.ascent_steps, config.learning_rate
    )
    best_index, best_value = state.best_index, state.best_value
    j = int(np.argmin(values))
    if best_value is None or values[j] < best_value:
        best_value = float(values[j])
        best_index = candidates[j].copy()
    return replace(
        state,
        distribution=dist,
        queries_used=state.queries_used + k_batch,
        best_index=best_index,
        best_value=best_value,
    )


def protes_minimize(
    mode_sizes,
    objective,
    budget: int,
    config: ProtesConfig,
    warm_start: TTTensor | None = None,
    stop_when=None,
) -> tuple[ProtesState, str]:
    """Iterate until `stop_when(best_value)` holds or the budget runs out.

    The budget counts objective evaluations; iterations are only issued while
    a full candidate batch fits, so a budget below num_candidates returns
    immediately with reason "budget".  A warm start replaces the random
    initial distribution.
    """
    config.validate()
    if warm_start is not None:
        if warm_start.mode_sizes != [int(n) for n in mode_sizes]:
            raise ValueError("warm start mode sizes do not match")
        _, sample_seed = _derived_seeds(config.seed)
        state = ProtesState(
            distribution=warm_start, rng=np.random.default_rng(sample_seed)
        )
    else:
        state = protes_init(mode_sizes, config)
    while state.queries_used + config.num_candidates <= budget:
        state = protes_iterate(state, objective, config)
        if stop_when is not None and stop_when(state.best_value):
            return state, "stop_when"
    return state, "budget"
