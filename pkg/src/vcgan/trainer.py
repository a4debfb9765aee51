"""Alternating adversarial training of two warp generators and one pair discriminator.

``gen_ab`` converts emotion A to B, ``gen_ba`` converts B to A. The shared
discriminator scores (source, converted) contour pairs: it is pushed towards
1 on forward pairs ``(p_A, gen_ab(p_A))`` and towards 0 on backward pairs
``(gen_ba(p_B), p_B)``. Generator and discriminator epochs alternate,
starting with a generator epoch.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .config import TrainConfig
from .corpus import Corpus, Utterance, window_128
from .diffnum import Tape, Tensor, backward
from .losses import (
    LossBreakdown,
    adversarial_term,
    cycle_term,
    discriminator_term,
    smoothness_term,
    weighted_total,
)
from .nets import ParameterSet, discriminator_score, generator_momenta, init_params
from .util import atomic_write_text
from .warp import generate_f0, generate_f0_with_gradients

log = logging.getLogger(__name__)

NETS = ("gen_ab", "gen_ba", "disc")
HISTORY_HEADER = ["epoch", "role", "cycle", "momenta_smoothness", "adversarial", "total",
                  "disc_loss"]


class TrainingAborted(RuntimeError):
    def __init__(self, msg, last_checkpoint=None):
        self.last_checkpoint = last_checkpoint
        super().__init__(f"{msg} (last good checkpoint: {last_checkpoint or 'none'})")


# ------------------------------------------------------------------ Adam


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              moments: dict[str, tuple[np.ndarray, np.ndarray]], lr: float, beta1: float,
              beta2: float, epsilon: float, t: int):
    """One bias-corrected Adam update; returns new ``(params, moments)``."""
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    new_p, new_m = {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
        m, v = moments.get(name, (np.zeros_like(p), np.zeros_like(p)))
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new_p[name] = p - lr * m_hat / (np.sqrt(v_hat) + epsilon)
        new_m[name] = (m, v)
    return new_p, new_m


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total <= max_norm:
        return grads
    return {k: g * (max_norm / total) for k, g in grads.items()}


# ------------------------------------------------------------------ state


@dataclass
class TrainState:
    config: TrainConfig
    pair: str
    nets: dict[str, ParameterSet]
    norm: tuple[np.ndarray, np.ndarray]
    rng: np.random.Generator
    moments: dict[str, dict[str, tuple[np.ndarray, np.ndarray]]] = field(default_factory=dict)
    adam_t: dict[str, int] = field(default_factory=lambda: {k: 0 for k in NETS})
    epoch: int = 0
    history: list[dict] = field(default_factory=list)
    # contour length the discriminator's dense layer was built for
    T: int = 128

    def to_bytes(self) -> bytes:
        tensors: dict[str, np.ndarray] = {}
        for net in NETS:
            for name, arr in self.nets[net].tensors.items():
                tensors[f"{net}/{name}"] = arr
        for net in NETS:
            for name, (m, v) in self.moments.get(net, {}).items():
                tensors[f"adam/{net}/m/{name}"] = m
                tensors[f"adam/{net}/v/{name}"] = v
        meta = {
            "format": "vcgan-checkpoint",
            "pair": self.pair,
            "epoch": self.epoch,
            "T": self.T,
            "config": self.config.to_dict(),
            "adam_t": self.adam_t,
            "rng": {"shuffle": self.rng.bit_generator.state,
                    **{net: self.nets[net].rng.bit_generator.state for net in NETS}},
            "norm": {"mfcc_mean": [float(x) for x in self.norm[0]],
                     "mfcc_std": [float(x) for x in self.norm[1]]},
            "history": self.history,
        }
        return ckpt.pack(tensors, meta)

    @classmethod
    def from_bytes(cls, data: bytes) -> "TrainState":
        tensors, meta = ckpt.unpack(data)
        try:
            config = TrainConfig.from_dict(meta["config"])
            nets, moments = {}, {}
            for net in NETS:
                params = {k.split("/", 1)[1]: v for k, v in tensors.items()
                          if k.startswith(net + "/")}
                rng = _rng_from_state(meta["rng"][net])
                kind = "discriminator" if net == "disc" else "generator"
                nets[net] = ParameterSet(kind, params, rng)
                ms = {}
                for name in params:
                    m = tensors.get(f"adam/{net}/m/{name}")
                    if m is not None:
                        ms[name] = (m, tensors[f"adam/{net}/v/{name}"])
                moments[net] = ms
            state = cls(config, meta["pair"], nets,
                        (np.array(meta["norm"]["mfcc_mean"]), np.array(meta["norm"]["mfcc_std"])),
                        _rng_from_state(meta["rng"]["shuffle"]), moments,
                        {k: int(v) for k, v in meta["adam_t"].items()}, int(meta["epoch"]),
                        list(meta["history"]), int(meta["T"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ckpt.CheckpointError(f"checkpoint metadata incomplete: {e}") from None
        return state

    def save(self, path) -> bytes:
        data = self.to_bytes()
        ckpt.atomic_write_bytes(path, data)
        return data

    @classmethod
    def load(cls, path) -> "TrainState":
        return cls.from_bytes(Path(path).read_bytes())

    def quantized(self) -> "TrainState":
        """The state exactly as a reload of its checkpoint would see it."""
        return TrainState.from_bytes(self.to_bytes())


def _rng_from_state(state: dict) -> np.random.Generator:
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = state
    return rng


def init_state(config: TrainConfig, pair: str, norm, T: int = 128) -> TrainState:
    s = config.seed
    nets = {
        "gen_ab": init_params("generator", config.net, seed=1000 * s + 1),
        "gen_ba": init_params("generator", config.net, seed=1000 * s + 2),
        "disc": init_params("discriminator", config.net, seed=1000 * s + 3, T=T),
    }
    state = TrainState(config, pair, nets, (np.asarray(norm[0], float), np.asarray(norm[1], float)),
                       np.random.default_rng([s, 7]), T=T)
    state.moments = {k: {} for k in NETS}
    return state


# ------------------------------------------------------------------ conversion


def convert(state: TrainState, utt: Utterance, direction: str = "forward",
            sampling: bool = True, rng: np.random.Generator | None = None):
    """Converted contour and the momenta that produced it (no gradients)."""
    net = {"forward": "gen_ab", "backward": "gen_ba"}.get(direction)
    if net is None:
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    params = state.nets[net]
    if rng is not None:
        params = ParameterSet(params.kind, params.tensors, rng)
    m = generator_momenta(utt.spectrum, utt.contour, params, state.config.net, sampling,
                          norm=state.norm)
    return generate_f0(m.data, utt.contour, state.config.warp), m.data


def _convert_on_tape(tape, state, net, leaves, spectrum, f0):
    cfg = state.config
    m = generator_momenta(spectrum, f0, state.nets[net], cfg.net, True, record=tape,
                          norm=state.norm, leaves=leaves[net])
    return m, generate_f0_with_gradients(m, f0, cfg.warp, tape)


def generator_objective(tape: Tape, state: TrainState, leaves: dict, a: Utterance,
                        b: Utterance):
    """Sum of both generator objectives for one (A, B) pair.

    Returns the (1,) tensor to minimize and a per-direction breakdown
    ``{"ab": (cycle, smooth, adv, total), "ba": ...}`` of floats.
    """
    cfg = state.config
    p_a, p_b = Tensor(a.contour), Tensor(b.contour)
    m_ab, fake_b = _convert_on_tape(tape, state, "gen_ab", leaves, a.spectrum, p_a)
    _, rec_a = _convert_on_tape(tape, state, "gen_ba", leaves, a.spectrum, fake_b)
    m_ba, fake_a = _convert_on_tape(tape, state, "gen_ba", leaves, b.spectrum, p_b)
    _, rec_b = _convert_on_tape(tape, state, "gen_ab", leaves, b.spectrum, fake_a)

    disc = state.nets["disc"]
    s_fwd = discriminator_score(p_a, fake_b, disc, cfg.net, tape, leaves["disc"])
    s_bwd = discriminator_score(fake_a, p_b, disc, cfg.net, tape, leaves["disc"])

    parts = {}
    totals = []
    for key, src, rec, m, score, direction in (
        ("ab", p_a, rec_a, m_ab, s_fwd, "forward"),
        ("ba", p_b, rec_b, m_ba, s_bwd, "backward"),
    ):
        c = cycle_term(tape, src, rec)
        # a single frame has no first difference
        sm = smoothness_term(tape, m) if m.dims[0] > 1 else Tensor([0.0])
        adv = adversarial_term(tape, [score], direction)
        tot = weighted_total(tape, c, sm, adv, cfg.weights)
        totals.append(tot)
        parts[key] = (c.item(), sm.item(), adv.item(), tot.item())
    return tape.add(*totals), parts


def discriminator_fakes(state: TrainState, a: Utterance, b: Utterance):
    """Generated ``(fake_b, fake_a)`` the discriminator is trained against."""
    return convert(state, a, "forward")[0], convert(state, b, "backward")[0]


def discriminator_objective(tape: Tape, state: TrainState, leaves: dict, a: Utterance,
                            b: Utterance, fakes=None):
    cfg = state.config
    fake_b, fake_a = fakes if fakes is not None else discriminator_fakes(state, a, b)
    disc = state.nets["disc"]
    s_fwd = discriminator_score(a.contour, fake_b, disc, cfg.net, tape, leaves["disc"])
    s_bwd = discriminator_score(fake_a, b.contour, disc, cfg.net, tape, leaves["disc"])
    return discriminator_term(tape, [s_fwd], [s_bwd])


# ------------------------------------------------------------------ epochs


def _pairs(state: TrainState, side_a: list[Utterance], side_b: list[Utterance]):
    ia = state.rng.permutation(len(side_a))
    ib = state.rng.permutation(len(side_b))
    n = min(len(ia), len(ib))
    for i, j in zip(ia[:n], ib[:n]):
        sa, sb = state.rng.integers(0, 2**31, size=2)
        yield (window_128(side_a[i], int(sa), state.T), window_128(side_b[j], int(sb), state.T))


def _batches(it, size):
    batch = []
    for item in it:
        batch.append(item)
        if len(batch) == size:
            yield batch
            batch = []
    if batch:
        yield batch


def _update(state: TrainState, nets: tuple[str, ...], grads: dict[str, dict], lr: float):
    cfg = state.config
    flat = {f"{n}/{k}": g for n in nets for k, g in grads[n].items()}
    for name, g in flat.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
    for n in nets:
        g = {k: v for k, v in grads[n].items() if f"{n}/{k}" not in cfg.freeze}
        g = clip_global_norm(g, cfg.clip_norm)
        params = state.nets[n].tensors
        live = {k: params[k] for k in g}
        state.adam_t[n] += 1
        new_p, new_m = adam_step(live, g, state.moments.setdefault(n, {}), lr,
                                 cfg.adam_beta1_decay, cfg.adam_beta2, cfg.adam_epsilon,
                                 state.adam_t[n])
        for k, v in new_p.items():
            if not np.all(np.isfinite(v)):
                raise FloatingPointError(f"update produced non-finite {n}/{k}")
        params.update(new_p)
        state.moments[n].update(new_m)


def _leaves(state, nets):
    return {n: state.nets[n].leaves() for n in nets}


def _grads_for(g: dict[int, np.ndarray], leaves: dict, nets) -> dict[str, dict]:
    return {n: {k: g[t.id] for k, t in leaves[n].items()} for n in nets}


def _accumulate(acc, new, scale):
    for n, d in new.items():
        tgt = acc.setdefault(n, {})
        for k, v in d.items():
            tgt[k] = tgt[k] + scale * v if k in tgt else scale * v


def train_epoch(state: TrainState, side_a: list[Utterance], side_b: list[Utterance]) -> dict:
    """Run the next epoch (generator if it is odd-numbered, else discriminator).

    Mutates ``state`` and returns the history row appended for the epoch.
    """
    if not side_a or not side_b:
        raise ValueError("both emotion sides need at least one utterance")
    cfg = state.config
    epoch = state.epoch + 1
    role = "generator" if epoch % 2 == 1 else "discriminator"
    sums = np.zeros(4)
    disc_sum = 0.0
    n_pairs = 0
    for batch in _batches(_pairs(state, side_a, side_b), cfg.batch_size):
        acc: dict = {}
        for a, b in batch:
            tape = Tape()
            if role == "generator":
                nets = ("gen_ab", "gen_ba")
                leaves = _leaves(state, nets + ("disc",))
                obj, parts = generator_objective(tape, state, leaves, a, b)
                sums += (np.array(parts["ab"]) + np.array(parts["ba"])) / 2.0
            else:
                nets = ("disc",)
                leaves = _leaves(state, nets)
                obj = discriminator_objective(tape, state, leaves, a, b)
                disc_sum += obj.item()
            if not math.isfinite(obj.item()):
                raise FloatingPointError(f"non-finite {role} loss at epoch {epoch}")
            g = backward(tape, np.ones(1), obj)
            _accumulate(acc, _grads_for(g, leaves, nets), 1.0 / len(batch))
            n_pairs += 1
        if role == "generator":
            _update(state, ("gen_ab", "gen_ba"), acc, cfg.lr_generator)
        else:
            _update(state, ("disc",), acc, cfg.lr_discriminator)

    if role == "generator":
        c, sm, adv, tot = sums / n_pairs
        row = {"epoch": epoch, "role": role, "cycle": c, "momenta_smoothness": sm,
               "adversarial": adv, "total": tot, "disc_loss": None}
    else:
        row = {"epoch": epoch, "role": role, "cycle": None, "momenta_smoothness": None,
               "adversarial": None, "total": None, "disc_loss": disc_sum / n_pairs}
    state.epoch = epoch
    state.history.append(row)
    return row


def epoch_breakdown(row: dict) -> LossBreakdown | None:
    if row["role"] != "generator":
        return None
    return LossBreakdown(row["cycle"], row["momenta_smoothness"], row["adversarial"], row["total"])


def history_csv(history: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_HEADER)
    for row in history:
        w.writerow(["" if row[k] is None else (repr(row[k]) if isinstance(row[k], float)
                                                else row[k]) for k in HISTORY_HEADER])
    return buf.getvalue()


def train(config: TrainConfig, corpus: Corpus, checkpoint_dir, resume=None,
          state: TrainState | None = None) -> TrainState:
    """Train for ``config.epochs`` epochs, checkpointing every ``checkpoint_every``.

    Writes ``epoch_NNNN.vcgn`` files, ``final.vcgn`` and ``loss_history.csv``
    into ``checkpoint_dir``. After every checkpoint the in-memory state is
    replaced by its float32 reload, so resuming from any written checkpoint
    continues exactly like the uninterrupted run.
    """
    out = Path(checkpoint_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as e:
        raise PermissionError(f"checkpoint directory {out} is not writable: {e}") from None

    a, b = corpus.manifest.emotions
    side_a, side_b = corpus.split("train", a), corpus.split("train", b)
    if state is None:
        if resume is not None:
            state = TrainState.load(resume)
            # the resumed run keeps the config it was started with, except its length
            state.config = _with_epochs(state.config, config.epochs)
        else:
            state = init_state(config, corpus.manifest.pair, corpus.norm)

    last_good = resume
    while state.epoch < state.config.epochs:
        try:
            row = train_epoch(state, side_a, side_b)
        except FloatingPointError as e:
            raise TrainingAborted(str(e), last_good) from e
        log.info("epoch %d %s %s", row["epoch"], row["role"],
                 row["cycle"] if row["role"] == "generator" else row["disc_loss"])
        if state.epoch % state.config.checkpoint_every == 0:
            path = out / f"epoch_{state.epoch:04d}.vcgn"
            state.save(path)
            state = state.quantized()
            last_good = path
    state.save(out / "final.vcgn")
    atomic_write_text(out / "loss_history.csv", history_csv(state.history))
    return state


def _with_epochs(config: TrainConfig, epochs: int) -> TrainConfig:
    d = config.to_dict()
    d["epochs"] = epochs
    return TrainConfig.from_dict(d)
