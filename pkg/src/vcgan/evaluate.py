"""Objective evaluation against parallel targets, plus contour plot files.

The report compares each converted neutral test utterance with its parallel
emotional rendering (MAE in Hz) and with the identity baseline that leaves
the source untouched.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, parallel_targets
from .nets import discriminator_score
from .trainer import TrainState, convert
from .util import atomic_write_text

REPORT_KEYS = (
    "pair",
    "eval_seed",
    "ids",
    "mae_converted",
    "mae_converted_mean",
    "mae_converted_median",
    "mae_identity",
    "mae_identity_mean",
    "mae_identity_median",
    "disc_score_converted_mean",
    "disc_score_target_mean",
    "frame_mean_source",
    "frame_std_source",
    "frame_mean_converted",
    "frame_std_converted",
    "frame_mean_target",
    "frame_std_target",
)


class MissingTargetsError(LookupError):
    pass


def mae(a, b) -> float:
    """Mean absolute difference in Hz."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


@dataclass
class EvalReport:
    pair: str
    eval_seed: int
    ids: list[str]
    mae_converted: list[float]
    mae_identity: list[float]
    disc_converted: list[float]
    disc_target: list[float]
    source: np.ndarray
    converted: np.ndarray
    target: np.ndarray

    def to_dict(self) -> dict:
        c, i = np.array(self.mae_converted), np.array(self.mae_identity)
        doc = {
            "pair": self.pair,
            "eval_seed": self.eval_seed,
            "ids": self.ids,
            "mae_converted": self.mae_converted,
            "mae_converted_mean": float(c.mean()),
            "mae_converted_median": float(np.median(c)),
            "mae_identity": self.mae_identity,
            "mae_identity_mean": float(i.mean()),
            "mae_identity_median": float(np.median(i)),
            "disc_score_converted_mean": float(np.mean(self.disc_converted)),
            "disc_score_target_mean": float(np.mean(self.disc_target)),
        }
        for name in ("source", "converted", "target"):
            arr = getattr(self, name)
            doc[f"frame_mean_{name}"] = arr.mean(axis=0).tolist()
            doc[f"frame_std_{name}"] = arr.std(axis=0).tolist()
        return {k: doc[k] for k in REPORT_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def evaluate(state: TrainState, corpus: Corpus, out_report=None, out_plot_dir=None,
             eval_seed: int = 0, split: str = "test") -> EvalReport:
    """Convert every source-emotion utterance in ``split`` and score it.

    One dropout draw per utterance from a generator seeded with ``eval_seed``.
    """
    try:
        pairs = parallel_targets(corpus, split)
    except LookupError as e:
        raise MissingTargetsError(str(e)) from None
    if not pairs:
        raise MissingTargetsError(f"{split} split has no source utterances")

    rng = np.random.default_rng(eval_seed)
    disc = state.nets["disc"]
    ids, m_conv, m_id, d_conv, d_tgt = [], [], [], [], []
    src_rows, conv_rows, tgt_rows = [], [], []
    for src, tgt in pairs:
        converted, _ = convert(state, src, "forward", sampling=True, rng=rng)
        ids.append(src.id)
        m_conv.append(mae(converted, tgt.contour))
        m_id.append(mae(src.contour, tgt.contour))
        if src.n_frames == state.T:
            d_conv.append(discriminator_score(src.contour, converted, disc, state.config.net).item())
            d_tgt.append(discriminator_score(src.contour, tgt.contour, disc, state.config.net).item())
        src_rows.append(src.contour)
        conv_rows.append(converted)
        tgt_rows.append(tgt.contour)
        if out_plot_dir is not None:
            Path(out_plot_dir).mkdir(parents=True, exist_ok=True)
            emit_plot(src.contour, converted, tgt.contour, Path(out_plot_dir) / src.id)

    report = EvalReport(corpus.manifest.pair, eval_seed, ids, m_conv, m_id,
                        d_conv or [float("nan")], d_tgt or [float("nan")],
                        _stack(src_rows), _stack(conv_rows), _stack(tgt_rows))
    if out_report is not None:
        atomic_write_text(out_report, report.to_json())
    return report


def _stack(rows):
    n = min(r.size for r in rows)
    return np.stack([r[:n] for r in rows])


# ------------------------------------------------------------------ plots

_W, _H = 800, 400
_MARGIN = 60
_COLORS = {"source": "#1f77b4", "converted": "#d62728", "target": "#2ca02c"}


def emit_plot(source, converted, target, path_prefix) -> tuple[Path, Path]:
    """Write ``<prefix>.csv`` (t,source,converted,target) and ``<prefix>.svg``."""
    curves = {k: np.asarray(v, dtype=np.float64)
              for k, v in (("source", source), ("converted", converted), ("target", target))}
    T = curves["source"].size
    if any(c.shape != (T,) for c in curves.values()):
        raise ValueError("source, converted and target must have equal lengths")
    prefix = Path(path_prefix)
    csv_path, svg_path = prefix.with_name(prefix.name + ".csv"), prefix.with_name(prefix.name + ".svg")

    rows = ["t,source,converted,target"]
    for t in range(T):
        rows.append(",".join([str(t)] + [repr(float(curves[k][t])) for k in _COLORS]))
    atomic_write_text(csv_path, "\n".join(rows) + "\n")
    atomic_write_text(svg_path, _svg(curves, T))
    return csv_path, svg_path


def _svg(curves, T) -> str:
    lo = min(float(c.min()) for c in curves.values())
    hi = max(float(c.max()) for c in curves.values())
    if hi - lo < 1e-9:
        lo, hi = lo - 1.0, hi + 1.0
    x0, x1, y0, y1 = _MARGIN, _W - 20, _H - _MARGIN, 20

    def sx(t):
        return x0 + (x1 - x0) * (t / max(T - 1, 1))

    def sy(v):
        return y0 + (y1 - y0) * (v - lo) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_W} {_H}" '
        f'width="{_W}" height="{_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    for v in np.linspace(lo, hi, 5):
        y = sy(v)
        parts.append(f'<line x1="{x0 - 5}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{y + 4:.2f}" font-size="11" '
                     f'text-anchor="end">{v:.0f} Hz</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:.0f}" y="{_H - 20}" font-size="12" '
                 f'text-anchor="middle">frame</text>')
    for i, (name, c) in enumerate(curves.items()):
        pts = " ".join(f"{sx(t):.2f},{sy(float(v)):.2f}" for t, v in enumerate(c))
        parts.append(f'<polyline fill="none" stroke="{_COLORS[name]}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        parts.append(f'<text x="{x1 - 90}" y="{y1 + 14 * (i + 1)}" font-size="11" '
                     f'fill="{_COLORS[name]}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
