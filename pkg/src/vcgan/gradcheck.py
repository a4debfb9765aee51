"""Finite-difference audit of the three gradient paths used in training.

Groups: the warp alone, the summed generator objective (both generators,
both cycles, smoothness and the adversarial term through the
discriminator), and the discriminator objective. Dropout is frozen by
re-seeding every network's sampling generator before each evaluation, so
the objective seen by central differences is deterministic while still
running the exact code path the trainer uses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .corpus import Utterance
from .diffnum import GradCheckReport, Tensor, finite_diff_check
from .nets import N_MFCC
from .trainer import (
    NETS,
    discriminator_fakes,
    discriminator_objective,
    generator_objective,
    init_state,
)
from .warp import generate_f0_with_gradients

GROUPS = ("warp", "generator", "discriminator")


@dataclass
class GroupResult:
    group: str
    report: GradCheckReport

    @property
    def passed(self) -> bool:
        return self.report.passed

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        errs = self.report.max_rel_error
        name = max(errs, key=errs.get)
        err = errs[name]
        text = f"{status} {self.group:<13s} max_rel_error={err:.3e} (worst tensor {name})"
        if not self.passed:
            text += f" failing: {', '.join(self.report.failures)}"
        return text


def toy_problem(seed: int, T: int):
    rng = np.random.default_rng([seed, 11])
    t = np.arange(T)
    a = Utterance("gc_a", "neutral", 120 + 15 * np.sin(0.4 * t + rng.uniform(0, 6)),
                  rng.normal(0, 1, (T, N_MFCC)))
    b = Utterance("gc_b", "angry", 160 + 20 * np.sin(0.5 * t + rng.uniform(0, 6)),
                  rng.normal(0, 1, (T, N_MFCC)))
    # a larger gain than the default puts the warp well away from identity
    cfg = TrainConfig.from_dict({"seed": seed, "momenta_output_gain_init": 1.0})
    state = init_state(cfg, "neutral-angry", (np.zeros(N_MFCC), np.ones(N_MFCC)), T=T)
    return rng, state, a, b


def freeze_dropout(state, seed):
    for i, net in enumerate(NETS):
        state.nets[net].rng = np.random.default_rng([seed, 13, i])


def check_warp(seed=0, T=8, eps=1e-5, tol=1e-4, cfg=None) -> GradCheckReport:
    rng, state, a, _ = toy_problem(seed, T)
    warp = cfg or state.config.warp
    w = Tensor(rng.uniform(-1, 1, T))
    params = {"momenta": rng.normal(0, 1.0, T), "source": a.contour}

    def objective(P, tape):
        out = generate_f0_with_gradients(P["momenta"], P["source"], warp, tape)
        return tape.sum(tape.mul(out, w))

    return finite_diff_check(objective, params, eps, tol)


def _net_params(state, nets):
    return {f"{n}/{k}": v for n in nets for k, v in state.nets[n].tensors.items()}


def _leaves_from(P, nets, state):
    out = {}
    for n in nets:
        out[n] = {k: P[f"{n}/{k}"] for k in state.nets[n].tensors}
    return out


def check_generator(seed=0, T=8, eps=1e-5, tol=1e-4, max_entries=None) -> GradCheckReport:
    _, state, a, b = toy_problem(seed, T)
    params = _net_params(state, ("gen_ab", "gen_ba"))

    def objective(P, tape):
        freeze_dropout(state, seed)
        leaves = _leaves_from(P, ("gen_ab", "gen_ba"), state)
        leaves["disc"] = state.nets["disc"].leaves()
        obj, _ = generator_objective(tape, state, leaves, a, b)
        return obj

    return finite_diff_check(objective, params, eps, tol, max_entries=max_entries,
                             rng=np.random.default_rng([seed, 17]))


def check_discriminator(seed=0, T=8, eps=1e-5, tol=1e-4, max_entries=None) -> GradCheckReport:
    _, state, a, b = toy_problem(seed, T)
    params = _net_params(state, ("disc",))
    # the generated contours do not depend on discriminator parameters
    freeze_dropout(state, seed)
    fakes = discriminator_fakes(state, a, b)

    def objective(P, tape):
        return discriminator_objective(tape, state, _leaves_from(P, ("disc",), state), a, b,
                                       fakes)

    return finite_diff_check(objective, params, eps, tol, max_entries=max_entries,
                             rng=np.random.default_rng([seed, 19]))


def run_all(seed=0, T=8, eps=1e-5, tol=1e-4, max_entries=None) -> list[GroupResult]:
    return [
        GroupResult("warp", check_warp(seed, T, eps, tol)),
        GroupResult("generator", check_generator(seed, T, eps, tol, max_entries)),
        GroupResult("discriminator", check_discriminator(seed, T, eps, tol, max_entries)),
    ]
