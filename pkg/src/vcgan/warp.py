"""Kernel warping of an F0 contour by momenta (geodesic shooting in Hz space).

Each step builds pairwise differences ``d`` between contour values and a
Gaussian kernel ``K = exp(-d**2 / sigma**2)``; the contour moves by ``K @ m``
and the momenta evolve by ``-2/sigma**2 * m * ((K * d) @ m)``. The kernel
lives in F0-value space, not time.

Both the plain and the differentiable entry points go through the same tape
primitives, so their outputs agree bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .diffnum import Tape, Tensor

DEFAULT_T = 128
F0_CEILING = 800.0


class DistanceSource(str, Enum):
    EVOLVING = "EVOLVING"
    FROZEN = "FROZEN"


class WarpError(ValueError):
    pass


@dataclass(frozen=True)
class WarpConfig:
    sigma: float = 50.0
    steps: int = 3
    step_size: float = 1.0
    distance_source: DistanceSource = DistanceSource.EVOLVING

    def __post_init__(self):
        object.__setattr__(self, "distance_source", DistanceSource(self.distance_source))
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be an integer >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")


def check_contour(values, name: str = "contour") -> np.ndarray:
    """Validate the F0 contour invariants: finite, positive, below 800 Hz."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise WarpError(f"{name} must be a non-empty 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise WarpError(f"{name} has non-finite values")
    if np.any(v <= 0) or np.any(v >= F0_CEILING):
        raise WarpError(f"{name} values must lie in (0, {F0_CEILING:g}) Hz")
    return v


def gaussian_kernel(contour_state, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(K, d)`` with ``d[i, j] = p_i - p_j`` and ``K = exp(-d**2/sigma**2)``."""
    p = np.asarray(contour_state, dtype=np.float64)
    tape = Tape(recording=False)
    d, K = _kernel(tape, Tensor(p), sigma)
    return K.data, d.data


def _kernel(tape: Tape, p: Tensor, sigma: float):
    d = tape.outer_diff(p)
    K = tape.exp(tape.scale(tape.square(d), -1.0 / sigma**2))
    return d, K


def _shoot(tape: Tape, m: Tensor, p: Tensor, cfg: WarpConfig, keep_path: bool = False):
    src = p
    path = [(p.data, m.data)] if keep_path else None
    coef = -2.0 * cfg.step_size / cfg.sigma**2
    for s in range(cfg.steps):
        ref = p if cfg.distance_source is DistanceSource.EVOLVING else src
        d, K = _kernel(tape, ref, cfg.sigma)
        p_next = tape.add(p, tape.scale(tape.matvec(K, m), cfg.step_size))
        m_next = tape.add(m, tape.scale(tape.mul(m, tape.matvec(tape.mul(K, d), m)), coef))
        if not (np.all(np.isfinite(p_next.data)) and np.all(np.isfinite(m_next.data))):
            raise WarpError(f"non-finite state at warp step {s}")
        p, m = p_next, m_next
        if keep_path:
            path.append((p.data, m.data))
    return p, path


def _check_pair(momenta, source):
    m = np.asarray(momenta, dtype=np.float64)
    p = np.asarray(source, dtype=np.float64)
    if m.ndim != 1 or p.ndim != 1 or m.shape != p.shape:
        raise WarpError(f"momenta {m.shape} and source {p.shape} must be equal-length vectors")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(p))):
        raise WarpError("momenta and source must be finite")
    return m, p


def generate_f0(momenta, source, cfg: WarpConfig = WarpConfig()) -> np.ndarray:
    """Warp ``source`` by ``momenta``; zero momenta return ``source`` unchanged."""
    m, p = _check_pair(momenta, source)
    out, _ = _shoot(Tape(recording=False), Tensor(m), Tensor(p), cfg)
    return out.data


def geodesic_path(momenta, source, cfg: WarpConfig = WarpConfig()):
    """Contour and momenta after every step, starting with the inputs.

    Returns two arrays of shape ``(steps + 1, T)``.
    """
    m, p = _check_pair(momenta, source)
    _, path = _shoot(Tape(recording=False), Tensor(m), Tensor(p), cfg, keep_path=True)
    return np.stack([a for a, _ in path]), np.stack([b for _, b in path])


def generate_f0_with_gradients(momenta: Tensor, source: Tensor, cfg: WarpConfig,
                               record: Tape) -> Tensor:
    """Same as :func:`generate_f0` but recorded on ``record`` for backprop."""
    _check_pair(momenta.data, source.data)
    out, _ = _shoot(record, momenta, source, cfg)
    return out
