"""Small reverse-mode differentiation core on dense float64 arrays.

A :class:`Tape` records primitive operations as they run; :func:`backward`
walks the tape in reverse and returns gradients for every leaf tensor.
Primitives live in the :data:`PRIMITIVES` registry as ``(forward, vjp)``
pairs so each backward rule can be audited (or swapped out in tests) on its
own.

Only the shape adaptations listed in the registry exist. There is no
implicit broadcasting: a bias is added through an explicit outer product and
a scalar gain through a matrix-vector product.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

_ids = itertools.count(1)


class ShapeError(ValueError):
    """Incompatible input dimensions for a primitive."""

    def __init__(self, kind: str, dims: list[tuple[int, ...]], detail: str = ""):
        self.kind = kind
        self.dims = dims
        msg = f"{kind}: incompatible dims {dims}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class GradientError(RuntimeError):
    pass


class Tensor:
    """Dense float64 array with a unique identity used as a gradient key."""

    __slots__ = ("data", "id")

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        self.data = arr
        self.id = next(_ids)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self):
        return f"Tensor(id={self.id}, dims={self.dims})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])


# ---------------------------------------------------------------- primitives
# forward(arrays, attrs) -> (out, cache); vjp(g, arrays, out, cache, attrs) -> grads


def _same(kind, a, b):
    if a.shape != b.shape:
        raise ShapeError(kind, [a.shape, b.shape])


def _f_add(x, at):
    _same("add", *x)
    return x[0] + x[1], None


def _f_sub(x, at):
    _same("subtract", *x)
    return x[0] - x[1], None


def _f_mul(x, at):
    _same("multiply", *x)
    return x[0] * x[1], None


def _f_matvec(x, at):
    a, v = x
    if a.ndim != 2 or v.ndim != 1 or a.shape[1] != v.shape[0]:
        raise ShapeError("matvec", [a.shape, v.shape])
    return a @ v, None


def _f_matmul(x, at):
    a, b = x
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", [a.shape, b.shape])
    return a @ b, None


def _f_sum(x, at):
    return np.array([x[0].sum()]), None


def _f_mean(x, at):
    return np.array([x[0].mean()]), None


def _f_log(x, at):
    if np.any(x[0] <= 0):
        raise ValueError("log: non-positive input")
    return np.log(x[0]), None


def _f_concat(x, at):
    axis = at["axis"]
    ref = x[0]
    for a in x[1:]:
        if a.ndim != ref.ndim or any(
            a.shape[k] != ref.shape[k] for k in range(ref.ndim) if k != axis
        ):
            raise ShapeError("concat", [a.shape for a in x], f"axis={axis}")
    return np.concatenate(x, axis=axis), None


def _slicer(ndim, axis, start, stop, step):
    idx = [slice(None)] * ndim
    idx[axis] = slice(start, stop, step)
    return tuple(idx)


def _f_slice(x, at):
    a = x[0]
    axis = at["axis"]
    if axis >= a.ndim:
        raise ShapeError("slice", [a.shape], f"axis={axis}")
    out = a[_slicer(a.ndim, axis, at["start"], at["stop"], at.get("step", 1))]
    if out.shape[axis] == 0:
        raise ShapeError("slice", [a.shape], "empty result")
    return out.copy(), None


def _v_slice(g, x, out, c, at):
    a = x[0]
    ga = np.zeros_like(a)
    ga[_slicer(a.ndim, at["axis"], at["start"], at["stop"], at.get("step", 1))] = g
    return [ga]


def _f_outer_diff(x, at):
    v = x[0]
    if v.ndim != 1:
        raise ShapeError("outer_diff", [v.shape])
    return v[:, None] - v[None, :], None


def _f_dropout(x, at):
    mask = at["mask"]
    if mask.shape != x[0].shape:
        raise ShapeError("dropout", [x[0].shape, mask.shape])
    return x[0] * mask, None


def _f_reshape(x, at):
    shape = tuple(at["shape"])
    if int(np.prod(shape)) != x[0].size:
        raise ShapeError("reshape", [x[0].shape, shape])
    return x[0].reshape(shape).copy(), None


def _unary(fn):
    return lambda x, at: (fn(x[0]), None)


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


PRIMITIVES: dict[str, tuple[Callable, Callable]] = {
    "add": (_f_add, lambda g, x, o, c, at: [g, g]),
    "subtract": (_f_sub, lambda g, x, o, c, at: [g, -g]),
    "multiply": (_f_mul, lambda g, x, o, c, at: [g * x[1], g * x[0]]),
    "scale": (
        lambda x, at: (x[0] * at["factor"], None),
        lambda g, x, o, c, at: [g * at["factor"]],
    ),
    "matvec": (_f_matvec, lambda g, x, o, c, at: [np.outer(g, x[1]), x[0].T @ g]),
    "matmul": (_f_matmul, lambda g, x, o, c, at: [g @ x[1].T, x[0].T @ g]),
    "exp": (_unary(np.exp), lambda g, x, o, c, at: [g * o]),
    "tanh": (_unary(np.tanh), lambda g, x, o, c, at: [g * (1.0 - o * o)]),
    "sigmoid": (_unary(_sigmoid), lambda g, x, o, c, at: [g * o * (1.0 - o)]),
    "relu": (
        _unary(lambda a: np.maximum(a, 0.0)),
        lambda g, x, o, c, at: [g * (x[0] > 0)],
    ),
    "sum": (_f_sum, lambda g, x, o, c, at: [np.full_like(x[0], g[0])]),
    "mean": (_f_mean, lambda g, x, o, c, at: [np.full_like(x[0], g[0] / x[0].size)]),
    "abs": (_unary(np.abs), lambda g, x, o, c, at: [g * np.sign(x[0])]),
    "square": (_unary(np.square), lambda g, x, o, c, at: [2.0 * g * x[0]]),
    "log": (_f_log, lambda g, x, o, c, at: [g / x[0]]),
    "concat": (
        _f_concat,
        lambda g, x, o, c, at: np.split(
            g, np.cumsum([a.shape[at["axis"]] for a in x[:-1]]), axis=at["axis"]
        ),
    ),
    "slice": (_f_slice, _v_slice),
    "outer_diff": (_f_outer_diff, lambda g, x, o, c, at: [g.sum(axis=1) - g.sum(axis=0)]),
    "dropout": (_f_dropout, lambda g, x, o, c, at: [g * at["mask"]]),
    "reshape": (_f_reshape, lambda g, x, o, c, at: [g.reshape(x[0].shape)]),
}


@dataclass
class Entry:
    kind: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    attrs: dict
    cache: object = None


@dataclass
class Tape:
    """Computation record. With ``recording=False`` ops run but nothing is kept."""

    recording: bool = True
    entries: list[Entry] = field(default_factory=list)

    def apply(self, kind: str, *inputs: Tensor, **attrs) -> Tensor:
        try:
            fwd, _ = PRIMITIVES[kind]
        except KeyError:
            raise ValueError(f"unknown primitive {kind!r}") from None
        out_arr, cache = fwd([t.data for t in inputs], attrs)
        out = Tensor.__new__(Tensor)
        out.data = out_arr
        out.id = next(_ids)
        if self.recording:
            self.entries.append(Entry(kind, inputs, out, attrs, cache))
        return out

    # thin named wrappers; keeps call sites readable
    def add(self, a, b):
        return self.apply("add", a, b)

    def sub(self, a, b):
        return self.apply("subtract", a, b)

    def mul(self, a, b):
        return self.apply("multiply", a, b)

    def scale(self, a, factor: float):
        return self.apply("scale", a, factor=float(factor))

    def matvec(self, a, v):
        return self.apply("matvec", a, v)

    def matmul(self, a, b):
        return self.apply("matmul", a, b)

    def exp(self, a):
        return self.apply("exp", a)

    def tanh(self, a):
        return self.apply("tanh", a)

    def sigmoid(self, a):
        return self.apply("sigmoid", a)

    def relu(self, a):
        return self.apply("relu", a)

    def sum(self, a):
        return self.apply("sum", a)

    def mean(self, a):
        return self.apply("mean", a)

    def abs(self, a):
        return self.apply("abs", a)

    def square(self, a):
        return self.apply("square", a)

    def log(self, a):
        return self.apply("log", a)

    def concat(self, tensors, axis: int):
        return self.apply("concat", *tensors, axis=axis)

    def slice(self, a, axis: int, start: int, stop: int, step: int = 1):
        return self.apply("slice", a, axis=axis, start=start, stop=stop, step=step)

    def outer_diff(self, v):
        return self.apply("outer_diff", v)

    def dropout(self, a, mask: np.ndarray):
        return self.apply("dropout", a, mask=mask)

    def reshape(self, a, shape):
        return self.apply("reshape", a, shape=tuple(shape))

    def leaves(self) -> list[Tensor]:
        produced = {e.output.id for e in self.entries}
        seen: dict[int, Tensor] = {}
        for e in self.entries:
            for t in e.inputs:
                if t.id not in produced and t.id not in seen:
                    seen[t.id] = t
        return list(seen.values())

    def replay(self) -> list[np.ndarray]:
        """Re-run every recorded step on the recorded inputs."""
        return [PRIMITIVES[e.kind][0]([t.data for t in e.inputs], e.attrs)[0] for e in self.entries]


def forward(op_kind: str, inputs: list[Tensor], record: Tape | None, **attrs) -> Tensor:
    return (record if record is not None else Tape(recording=False)).apply(
        op_kind, *inputs, **attrs
    )


def backward(record: Tape, seed_gradient, output: Tensor | None = None) -> dict[int, np.ndarray]:
    """Gradients of ``<seed, output>`` for every leaf in ``record``, keyed by tensor id.

    ``output`` defaults to the last recorded tensor. Leaves that do not feed
    ``output`` get zero gradients.
    """
    if not record.entries:
        raise GradientError("empty record")
    if output is None:
        output = record.entries[-1].output
    positions = {e.output.id: i for i, e in enumerate(record.entries)}
    if output.id not in positions:
        raise GradientError(f"seed tensor {output!r} was not produced by this record")
    seed = np.asarray(seed_gradient.data if isinstance(seed_gradient, Tensor) else seed_gradient,
                      dtype=np.float64)
    if seed.shape != output.dims:
        raise ShapeError("backward", [seed.shape, output.dims])

    grads: dict[int, np.ndarray] = {output.id: seed.copy()}
    for e in reversed(record.entries[: positions[output.id] + 1]):
        g = grads.pop(e.output.id, None)
        if g is None:
            continue
        vjp = PRIMITIVES[e.kind][1]
        parts = vjp(g, [t.data for t in e.inputs], e.output.data, e.cache, e.attrs)
        for t, gt in zip(e.inputs, parts):
            if t.id in grads:
                grads[t.id] = grads[t.id] + gt
            else:
                grads[t.id] = np.array(gt, dtype=np.float64).reshape(t.dims)

    return {t.id: grads.get(t.id, np.zeros(t.dims)) for t in record.leaves()}


# ---------------------------------------------------------------- gradcheck


@dataclass
class GradCheckReport:
    max_rel_error: dict[str, float]
    tolerance: float
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)


def finite_diff_check(
    objective: Callable[[Mapping[str, Tensor], Tape], Tensor],
    params: Mapping[str, np.ndarray],
    epsilon: float = 1e-5,
    tolerance: float = 1e-6,
    analytic: Mapping[str, np.ndarray] | None = None,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare reverse-mode gradients with central differences, entry by entry.

    ``objective`` builds a scalar from tensors wrapping ``params`` on the given
    tape; it must be deterministic (freeze any dropout masks beforehand).
    Passing ``analytic`` replaces the computed gradients, which is how a
    corrupted gradient can be shown to fail. With ``max_entries`` only that
    many entries per tensor are probed, drawn without replacement from
    ``rng`` (default seed 0).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    if analytic is None:
        tape = Tape()
        leaves = {k: Tensor(v) for k, v in base.items()}
        out = objective(leaves, tape)
        g = backward(tape, np.ones(out.dims), out)
        analytic = {k: g.get(t.id, np.zeros(t.dims)) for k, t in leaves.items()}

    def value(vals):
        out = objective({k: Tensor(v) for k, v in vals.items()}, Tape(recording=False))
        return out.item()

    report: dict[str, float] = {}
    failures = []
    for name, arr in base.items():
        worst = 0.0
        indices = list(np.ndindex(arr.shape))
        if max_entries is not None and len(indices) > max_entries:
            pick = (rng or np.random.default_rng(0)).choice(len(indices), max_entries,
                                                          replace=False)
            indices = [indices[i] for i in sorted(pick)]
        for idx in indices:
            vals = dict(base)
            plus, minus = arr.copy(), arr.copy()
            plus[idx] += epsilon
            minus[idx] -= epsilon
            vals[name] = plus
            fp = value(vals)
            vals[name] = minus
            fm = value(vals)
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise GradientError(f"non-finite objective when perturbing {name}{list(idx)}")
            num = (fp - fm) / (2.0 * epsilon)
            ana = float(np.asarray(analytic[name])[idx])
            rel = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
            worst = max(worst, rel)
        report[name] = worst
        if worst > tolerance:
            failures.append(name)
    return GradCheckReport(report, tolerance, failures)
