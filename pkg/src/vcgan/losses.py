"""Scalar objectives for the generators and the shared discriminator.

Each loss has a tape form (``*_term``, returns a (1,) tensor for backprop)
and a plain float form built on the same arithmetic. Expectations are means
over the batch and, for per-frame norms, over frames.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diffnum import Tape, Tensor


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    lambda_c: float = 1e-3
    lambda_m: float = 1e-5

    def __post_init__(self):
        if self.lambda_c < 0 or self.lambda_m < 0:
            raise ValueError("loss weights must be non-negative")
        if not self.lambda_c + self.lambda_m < 1:
            raise ValueError("lambda_c + lambda_m must be < 1")

    @property
    def adversarial(self) -> float:
        return 1.0 - self.lambda_c - self.lambda_m


@dataclass(frozen=True)
class LossBreakdown:
    cycle: float
    momenta_smoothness: float
    adversarial: float
    total: float


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_scores(scores: np.ndarray):
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise LossError("empty score list")
    if not np.all((s > 0) & (s < 1)):
        raise LossError(f"discriminator scores must lie strictly inside (0, 1): {s}")


# ------------------------------------------------------------------ tape forms


def cycle_term(tape: Tape, original, reconstructed) -> Tensor:
    a, b = _t(original), _t(reconstructed)
    if a.dims != b.dims:
        raise LossError(f"cycle loss: length mismatch {a.dims} vs {b.dims}")
    return tape.mean(tape.abs(tape.sub(a, b)))


def smoothness_term(tape: Tape, m) -> Tensor:
    m = _t(m)
    T = m.dims[0]
    if T < 2:
        raise LossError("momenta smoothness needs at least 2 frames")
    diff = tape.sub(tape.slice(m, 0, 1, T), tape.slice(m, 0, 0, T - 1))
    return tape.mean(tape.square(diff))


def adversarial_term(tape: Tape, scores: list[Tensor], direction: str) -> Tensor:
    """Mean of log(score) (forward) or log(1 - score) (backward)."""
    if direction not in ("forward", "backward"):
        raise LossError(f"direction must be forward or backward, got {direction!r}")
    _check_scores([s.item() for s in scores])
    s = scores[0] if len(scores) == 1 else tape.concat(scores, axis=0)
    if direction == "backward":
        s = tape.sub(Tensor(np.ones(s.dims)), s)
    return tape.mean(tape.log(s))


def weighted_total(tape: Tape, cycle: Tensor, smooth: Tensor, adv: Tensor,
                   weights: LossWeights) -> Tensor:
    return tape.add(
        tape.add(tape.scale(cycle, weights.lambda_c), tape.scale(smooth, weights.lambda_m)),
        tape.scale(adv, weights.adversarial),
    )


def discriminator_term(tape: Tape, forward_scores: list[Tensor],
                       backward_scores: list[Tensor]) -> Tensor:
    fwd = adversarial_term(tape, forward_scores, "forward")
    bwd = adversarial_term(tape, backward_scores, "backward")
    return tape.scale(tape.add(fwd, bwd), -1.0)


# ------------------------------------------------------------------ float forms


def cycle_loss(original, reconstructed) -> float:
    """Mean absolute difference in Hz between a contour and its A->B->A reconstruction."""
    return cycle_term(Tape(recording=False), original, reconstructed).item()


def momenta_smoothness(m) -> float:
    """Mean squared first difference of the momenta."""
    return smoothness_term(Tape(recording=False), m).item()


def generator_adversarial(scores, direction: str) -> float:
    tape = Tape(recording=False)
    return adversarial_term(tape, [Tensor(s) for s in np.atleast_1d(scores)], direction).item()


def generator_total(cycle: float, momenta_smoothness: float, adversarial: float,
                    weights: LossWeights = LossWeights()) -> LossBreakdown:
    parts = (cycle, momenta_smoothness, adversarial)
    if not all(math.isfinite(x) for x in parts):
        raise LossError(f"non-finite loss component in {parts}")
    total = weighted_total(Tape(recording=False), *(Tensor(x) for x in parts), weights).item()
    return LossBreakdown(float(cycle), float(momenta_smoothness), float(adversarial), total)


def discriminator_loss(scores_on_forward_pairs, scores_on_backward_pairs) -> float:
    """``-mean(log D(fwd)) - mean(log(1 - D(bwd)))``."""
    tape = Tape(recording=False)
    return discriminator_term(
        tape,
        [Tensor(s) for s in np.atleast_1d(scores_on_forward_pairs)],
        [Tensor(s) for s in np.atleast_1d(scores_on_backward_pairs)],
    ).item()
