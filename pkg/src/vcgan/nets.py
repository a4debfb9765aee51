"""Trainable networks: the momenta generator and the joint-pair discriminator.

Generator: ``[f0/400, standardized MFCC]`` (T x 24) -> same-padded 1-D
convolutions with tanh and dropout -> width-5 convolution to one channel ->
times a trainable scalar gain -> T momenta.

Discriminator: ``[p_a/400, p_b/400]`` (T x 2) -> stride-2 convolutions with
relu -> dense -> sigmoid.

Convolutions are written with tape primitives only (zero-pad by concat,
im2col by slices, one matmul), so every backward rule is one of the audited
primitives in :mod:`vcgan.diffnum`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffnum import Tape, Tensor

N_MFCC = 23
F0_SCALE = 400.0


class ParameterError(KeyError):
    pass


@dataclass(frozen=True)
class NetConfig:
    dropout_rate: float = 0.2
    conv_channels: tuple[int, ...] = (32, 64)
    kernel_width: int = 5
    momenta_output_gain_init: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.kernel_width < 1 or self.kernel_width % 2 == 0:
            raise ValueError("kernel_width must be a positive odd integer")
        if not self.conv_channels or any(c <= 0 for c in self.conv_channels):
            raise ValueError("conv_channels must be positive")


@dataclass
class ParameterSet:
    """Named float64 tensors plus the generator used for dropout sampling."""

    kind: str
    tensors: dict[str, np.ndarray]
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def __getitem__(self, name):
        try:
            return self.tensors[name]
        except KeyError:
            raise ParameterError(f"{self.kind} parameter {name!r} missing") from None

    def names(self):
        return list(self.tensors)

    def copy(self) -> "ParameterSet":
        rng = np.random.default_rng()
        rng.bit_generator.state = self.rng.bit_generator.state
        return ParameterSet(self.kind, {k: v.copy() for k, v in self.tensors.items()}, rng)

    def leaves(self) -> dict[str, Tensor]:
        return {k: Tensor(v) for k, v in self.tensors.items()}


def _xavier(rng, shape, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_params(kind: str, cfg: NetConfig = NetConfig(), seed: int = 0,
                T: int = 128) -> ParameterSet:
    """Xavier-uniform weights, zero biases; deterministic in ``seed``.

    ``T`` only matters for the discriminator, whose dense layer width depends
    on the contour length.
    """
    rng = np.random.default_rng(seed)
    w = cfg.kernel_width
    t: dict[str, np.ndarray] = {}
    if kind == "generator":
        chans = [N_MFCC + 1, *cfg.conv_channels, 1]
        for i, (cin, cout) in enumerate(zip(chans[:-1], chans[1:])):
            name = "out" if i == len(chans) - 2 else f"conv{i + 1}"
            t[f"{name}.w"] = _xavier(rng, (w * cin, cout), w * cin, w * cout)
            t[f"{name}.b"] = np.zeros((1, cout))
        t["out.gain"] = np.array([float(cfg.momenta_output_gain_init)])
    elif kind == "discriminator":
        chans = [2, *cfg.conv_channels]
        for i, (cin, cout) in enumerate(zip(chans[:-1], chans[1:])):
            t[f"conv{i + 1}.w"] = _xavier(rng, (w * cin, cout), w * cin, w * cout)
            t[f"conv{i + 1}.b"] = np.zeros((1, cout))
        n = cfg.conv_channels[-1] * _strided_length(T, len(cfg.conv_channels))
        t["dense.w"] = _xavier(rng, (1, n), n, 1)
        t["dense.b"] = np.zeros(1)
    else:
        raise ValueError(f"unknown network kind {kind!r}")
    return ParameterSet(kind, t, np.random.default_rng([seed, 1]))


def _strided_length(T, n_layers):
    for _ in range(n_layers):
        T = (T - 1) // 2 + 1
    return T


def conv1d(tape: Tape, x: Tensor, w: Tensor, b: Tensor, width: int, stride: int = 1) -> Tensor:
    """Zero-padded 1-D convolution over rows of ``x`` (T x Cin) -> (ceil(T/stride) x Cout)."""
    T, cin = x.dims
    half = width // 2
    pad = Tensor(np.zeros((half, cin)))
    xp = tape.concat([pad, x, pad], axis=0)
    n_out = (T - 1) // stride + 1
    cols = [
        tape.slice(xp, 0, k, k + stride * (n_out - 1) + 1, stride) for k in range(width)
    ]
    patches = cols[0] if width == 1 else tape.concat(cols, axis=1)
    y = tape.matmul(patches, w)
    ones = Tensor(np.ones((n_out, 1)))
    return tape.add(y, tape.matmul(ones, b))


def dropout_masks(cfg: NetConfig, T: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Inverted-dropout masks for each hidden generator layer."""
    keep = 1.0 - cfg.dropout_rate
    return [(rng.random((T, c)) < keep) / keep for c in cfg.conv_channels]


def standardize_spectrum(spectrum, T: int, norm=None) -> np.ndarray:
    spec = np.asarray(spectrum, dtype=np.float64)
    if spec.shape != (T, N_MFCC):
        raise ValueError(f"expected spectrum ({T}, {N_MFCC}), got {spec.shape}")
    if norm is not None:
        mean, std = norm
        spec = (spec - mean) / std
    return spec


def generator_momenta(spectrum, f0, params: ParameterSet, cfg: NetConfig, sampling: bool,
                      record: Tape | None = None, masks: list[np.ndarray] | None = None,
                      norm: tuple[np.ndarray, np.ndarray] | None = None,
                      leaves: dict[str, Tensor] | None = None) -> Tensor:
    """Momenta for ``f0`` conditioned on ``spectrum``.

    ``f0`` may be an array or a tensor already on ``record`` (the cycle pass
    feeds a generated contour back in). ``masks`` freezes the dropout draw;
    otherwise, when ``sampling`` is on, masks come from ``params.rng``.
    ``leaves`` lets the caller supply the tensors wrapping ``params`` so
    gradients can be looked up by id. ``norm`` is ``(mfcc_mean, mfcc_std)``.
    """
    tape = record if record is not None else Tape(recording=False)
    f = f0 if isinstance(f0, Tensor) else Tensor(f0)
    if len(f.dims) != 1:
        raise ValueError(f"f0 must be 1-D, got {f.dims}")
    T = f.dims[0]
    spec = Tensor(standardize_spectrum(spectrum, T, norm))
    P = leaves if leaves is not None else params.leaves()
    if sampling and masks is None:
        masks = dropout_masks(cfg, T, params.rng)

    h = tape.concat([tape.reshape(tape.scale(f, 1 / F0_SCALE), (T, 1)), spec], axis=1)
    for i in range(len(cfg.conv_channels)):
        h = tape.tanh(conv1d(tape, h, _get(P, params, f"conv{i + 1}.w"),
                             _get(P, params, f"conv{i + 1}.b"), cfg.kernel_width))
        if sampling:
            h = tape.dropout(h, masks[i])
    out = conv1d(tape, h, _get(P, params, "out.w"), _get(P, params, "out.b"), cfg.kernel_width)
    return tape.matvec(out, _get(P, params, "out.gain"))


def discriminator_score(p_a, p_b, params: ParameterSet, cfg: NetConfig,
                        record: Tape | None = None,
                        leaves: dict[str, Tensor] | None = None) -> Tensor:
    """Probability that ``(p_a, p_b)`` is a forward (A->B) pair; shape (1,).

    ``p_a``/``p_b`` may be arrays or tensors already on ``record``.
    """
    tape = record if record is not None else Tape(recording=False)
    a = p_a if isinstance(p_a, Tensor) else Tensor(p_a)
    b = p_b if isinstance(p_b, Tensor) else Tensor(p_b)
    if a.dims != b.dims or len(a.dims) != 1:
        raise ValueError(f"contour pair must have equal 1-D shapes, got {a.dims} and {b.dims}")
    T = a.dims[0]
    P = leaves if leaves is not None else params.leaves()
    col = (T, 1)
    h = tape.concat([tape.reshape(tape.scale(a, 1 / F0_SCALE), col),
                     tape.reshape(tape.scale(b, 1 / F0_SCALE), col)], axis=1)
    for i in range(len(cfg.conv_channels)):
        h = tape.relu(conv1d(tape, h, _get(P, params, f"conv{i + 1}.w"),
                             _get(P, params, f"conv{i + 1}.b"), cfg.kernel_width, stride=2))
    flat = tape.reshape(h, (h.data.size,))
    w = _get(P, params, "dense.w")
    if w.dims[1] != flat.dims[0]:
        raise ParameterError(f"dense.w expects {w.dims[1]} inputs, got {flat.dims[0]} (T={T})")
    logit = tape.add(tape.matvec(w, flat), _get(P, params, "dense.b"))
    return tape.sigmoid(logit)


def _get(P, params, name):
    try:
        return P[name]
    except KeyError:
        raise ParameterError(f"{params.kind} parameter {name!r} missing") from None
