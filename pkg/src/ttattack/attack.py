"""The pixel-space attack loop.

A query budget is spent on successive optimizer runs over a 3-way discrete
choice per selected pixel: desaturate it by the current amplitude, leave it
alone, or brighten it.  Each run stops at the first candidate that flips the
attacked model's prediction; the amplitude is then halved and the next run
warm-starts from the probability train the previous run ended with.  The
returned image is the most recent perturbation that actually flipped the
prediction, applied at its own amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .attribution import AttributionMap, integrated_gradients, select_top_pixels
from .color import hsv_to_rgb, rgb_to_hsv
from .images import validate_image
from .model import predict
from .protes import ProtesConfig, protes_minimize

__all__ = [
    "AttackConfig",
    "AttackResult",
    "AttackRefused",
    "encode_grid",
    "perturb",
    "tetradat",
    "compute_norms",
]


class AttackRefused(RuntimeError):
    """Raised when the attribution model disagrees with the attacked model."""


@dataclass(frozen=True)
class AttackConfig:
    num_pixels: int  # how many top-attribution pixels the attack may touch
    epsilon0: float = 1.0
    budget: int = 10_000
    protes: ProtesConfig = field(default_factory=ProtesConfig)
    attribution_steps: int = 15

    def validate(self):
        if self.num_pixels < 1:
            raise ValueError("num_pixels must be >= 1")
        if not (0.0 < self.epsilon0 <= 1.0):
            raise ValueError("epsilon0 must lie in (0, 1]")
        if self.budget < self.protes.num_candidates:
            raise ValueError("budget must cover at least one candidate batch")
        self.protes.validate()


@dataclass(frozen=True)
class AttackResult:
    success: bool
    adversarial: np.ndarray
    original_class: int
    adversarial_class: int
    final_epsilon: float
    queries: int
    l1: float
    l2: float
    linf: float


def encode_grid(epsilon: float, n: int) -> np.ndarray:
    """The symmetric amplitude grid {(2(k-1)/(n-1) - 1) * epsilon : k=1..n}."""
    if n < 2:
        raise ValueError("grid needs at least 2 nodes")
    k = np.arange(1, n + 1)
    return (2.0 * (k - 1) / (n - 1) - 1.0) * epsilon


def compute_norms(original: np.ndarray, adversarial: np.ndarray) -> tuple[float, float, float]:
    """L1, L2 and Linf of the flattened difference on the 0-255 scale."""
    original = np.asarray(original, dtype=np.float64)
    adversarial = np.asarray(adversarial, dtype=np.float64)
    if original.shape != adversarial.shape:
        raise ValueError(
            f"shape mismatch: {original.shape} vs {adversarial.shape}"
        )
    diff = (adversarial - original).reshape(-1) * 255.0
    absd = np.abs(diff)
    return float(absd.sum()), float(np.sqrt((diff * diff).sum())), float(absd.max(initial=0.0))


def _apply_choices(pixels: np.ndarray, choices: np.ndarray, epsilon: float) -> np.ndarray:
    # pixels: (..., 3) RGB of the selected positions; choices same leading shape.
    out = pixels.copy()
    active = choices != 2
    if not np.any(active):
        return out
    hsv = rgb_to_hsv(pixels[active])
    act = choices[active]
    desat = act == 1
    brighten = act == 3
    hsv[desat, 1] = np.maximum(0.0, hsv[desat, 1] - epsilon)
    hsv[brighten, 2] = np.minimum(1.0, hsv[brighten, 2] + epsilon)
    out[active] = np.clip(hsv_to_rgb(hsv), 0.0, 1.0)
    return out


def perturb(
    image: np.ndarray, n, selection: np.ndarray, epsilon: float
) -> np.ndarray:
    """Apply one discrete perturbation multi-index to the selected pixels.

    Per selected pixel the 1-based entry means: 1 lower the HSV saturation by
    epsilon, 2 leave the pixel untouched, 3 raise the HSV value by epsilon.
    Unselected pixels are returned bit-for-bit unchanged.
    """
    image = validate_image(image)
    choices = np.asarray(n, dtype=np.int64)
    selection = np.asarray(selection, dtype=np.int64)
    if choices.shape != (selection.shape[0],):
        raise ValueError("index length does not match the pixel selection")
    if np.any((choices < 1) | (choices > 3)):
        raise ValueError("perturbation entries must be 1, 2 or 3")
    if not (0.0 < epsilon <= 1.0):
        raise ValueError("epsilon must lie in (0, 1]")
    out = image.copy()
    rows, cols = selection[:, 0], selection[:, 1]
    out[rows, cols] = _apply_choices(image[rows, cols], choices, epsilon)
    return out


class _RunObjective:
    """Loss for one optimizer run: the attacked model's score of the original
    class under each candidate perturbation.  Records the first candidate
    that flips the prediction and the best-scoring candidate seen."""

    def __init__(self, endpoint, image, selection, epsilon, target_class):
        self.endpoint = endpoint
        self.image = image
        self.selection = selection
        self.epsilon = epsilon
        self.target_class = target_class
        self.base_hsv = rgb_to_hsv(image[selection[:, 0], selection[:, 1]])
        self.flip = None  # (multi-index, new class)
        self.best = None  # (value, multi-index, top class)

    def _perturbed(self, rows: np.ndarray) -> np.ndarray:
        count = rows.shape[0]
        out = np.broadcast_to(self.image, (count,) + self.image.shape).copy()
        active = rows != 2  # choice 2 keeps the pixel bit-for-bit
        if np.any(active):
            hsv = np.broadcast_to(self.base_hsv, rows.shape + (3,))[active]
            act = rows[active]
            desat = act == 1
            brighten = act == 3
            hsv[desat, 1] = np.maximum(0.0, hsv[desat, 1] - self.epsilon)
            hsv[brighten, 2] = np.minimum(1.0, hsv[brighten, 2] + self.epsilon)
            cand, pix = np.nonzero(active)
            out[cand, self.selection[pix, 0], self.selection[pix, 1]] = np.clip(
                hsv_to_rgb(hsv), 0.0, 1.0
            )
        return out

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        probs = self.endpoint.query_batch(self._perturbed(batch))
        values = probs[:, self.target_class - 1]
        tops = np.argmax(probs, axis=1) + 1
        if self.flip is None:
            flipped = np.nonzero(tops != self.target_class)[0]
            if flipped.size:
                j = int(flipped[0])
                self.flip = (batch[j].copy(), int(tops[j]))
        j = int(np.argmin(values))
        if self.best is None or values[j] < self.best[0]:
            self.best = (float(values[j]), batch[j].copy(), int(tops[j]))
        return values


def tetradat(
    attacked,
    auxiliary,
    image: np.ndarray,
    config: AttackConfig,
    run_trace: list | None = None,
) -> AttackResult:
    """Attack one image.

    `attacked` is a black-box endpoint (query/query_batch); `auxiliary` a
    differentiable classifier used only to build the attribution map.  The
    initial classification costs one query on top of the optimization budget.
    If the auxiliary model's top class disagrees with the attacked model's,
    the attack refuses to run.  When no run ever flips the prediction the
    best-scoring perturbation is returned with success=False.

    `run_trace`, if given, receives one dict per optimizer run with the
    amplitude, queries consumed, success flag, and the serialized probability
    train entering and leaving the run.
    """
    config.validate()
    image = validate_image(image)
    original_class = attacked.query(image).top_class
    aux_class = predict(auxiliary, image).top_class
    if aux_class != original_class:
        raise AttackRefused(
            f"attribution model predicts {aux_class}, attacked model {original_class}"
        )
    amap = integrated_gradients(
        auxiliary, image, original_class, steps=config.attribution_steps
    )
    # Rank pixels by attribution magnitude: evidence the perturbation can
    # erase (a pixel's low channels) carries a negative signed score, and
    # selecting only the positive extreme would leave it untouchable.
    magnitude = AttributionMap(
        scores=np.abs(amap.scores),
        class_index=amap.class_index,
        baseline_kind=amap.baseline_kind,
    )
    selection = select_top_pixels(magnitude, config.num_pixels)

    epsilon = config.epsilon0
    warm = None
    remaining = config.budget
    last_success = None  # (multi-index, epsilon, new class)
    best_overall = None  # (value, multi-index, top class, epsilon)
    run_index = 0
    while remaining >= config.protes.num_candidates:
        objective = _RunObjective(attacked, image, selection, epsilon, original_class)
        run_seed = int(
            np.random.SeedSequence((config.protes.seed, run_index)).generate_state(1)[0]
        )
        run_config = replace(config.protes, seed=run_seed)
        entry_bytes = None if warm is None else warm.to_bytes()
        state, reason = protes_minimize(
            [3] * config.num_pixels,
            objective,
            remaining,
            run_config,
            warm_start=warm,
            stop_when=lambda value: objective.flip is not None,
        )
        remaining -= state.queries_used
        warm = state.distribution
        if run_trace is not None:
            run_trace.append(
                {
                    "epsilon": epsilon,
                    "queries": state.queries_used,
                    "success": objective.flip is not None,
                    "reason": reason,
                    "entry_bytes": entry_bytes,
                    "exit_bytes": warm.to_bytes(),
                }
            )
        if objective.best is not None:
            if best_overall is None or objective.best[0] < best_overall[0]:
                best_overall = (*objective.best, epsilon)
        if objective.flip is not None:
            last_success = (objective.flip[0], epsilon, objective.flip[1])
            epsilon = epsilon / 2.0
            run_index += 1
        else:
            break

    queries = config.budget - remaining
    if last_success is not None:
        n_adv, eps_adv, new_class = last_success
        adversarial = perturb(image, n_adv, selection, eps_adv)
        success = True
    elif best_overall is not None:
        _, n_adv, new_class, eps_adv = best_overall
        adversarial = perturb(image, n_adv, selection, eps_adv)
        success = new_class != original_class
    else:
        # budget below one batch: nothing was ever tried
        adversarial = image.copy()
        new_class = original_class
        eps_adv = epsilon
        success = False
    l1, l2, linf = compute_norms(image, adversarial)
    return AttackResult(
        success=success,
        adversarial=adversarial,
        original_class=original_class,
        adversarial_class=new_class,
        final_epsilon=eps_adv,
        queries=queries,
        l1=l1,
        l2=l2,
        linf=linf,
    )
