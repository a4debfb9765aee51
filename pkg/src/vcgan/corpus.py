"""Utterance files, synthetic pseudo-emotion corpora, windowing and MFCC statistics.

Utterance file layout (UTF-8 CSV)::

    id,<id>,emotion,<label>,group,<group-or-empty>
    f0,mfcc1,...,mfcc23
    <f0>,<c1>,...,<c23>        one row per frame; f0 == 0 marks an unvoiced frame

A corpus directory holds one such file per utterance plus ``manifest.json``
with keys ``pair``, ``train``, ``val``, ``test``, ``mfcc_mean``, ``mfcc_std``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nets import N_MFCC
from .util import atomic_write_text

T_CONTEXT = 128

PAIRS = ("neutral-angry", "neutral-happy", "neutral-sad")

# mean shift (Hz), range multiplier, modulation-rate multiplier, declination multiplier
EMOTION_STYLE = {
    "neutral": (0.0, 1.0, 1.0, 1.0),
    "angry": (40.0, 1.5, 1.3, 1.0),
    "happy": (25.0, 1.3, 1.0, 1.0),
    "sad": (-20.0, 0.6, 1.0, 2.0),
}
NEUTRAL_MEAN = 120.0
NEUTRAL_RANGE = 15.0


class CorpusFormatError(ValueError):
    """Malformed utterance file; ``line`` is 1-based when known."""

    def __init__(self, path, line, msg):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {msg}")


class CorpusExistsError(FileExistsError):
    pass


@dataclass
class Utterance:
    id: str
    emotion: str
    contour: np.ndarray
    spectrum: np.ndarray
    parallel_group: str | None = None
    voiced: np.ndarray | None = None

    def __post_init__(self):
        self.contour = np.asarray(self.contour, dtype=np.float64)
        self.spectrum = np.asarray(self.spectrum, dtype=np.float64)
        if not self.emotion:
            raise ValueError("emotion label must be non-empty")
        if self.spectrum.shape != (self.contour.size, N_MFCC):
            raise ValueError(
                f"{self.id}: spectrum {self.spectrum.shape} does not match "
                f"{self.contour.size} frames x {N_MFCC}"
            )
        if self.voiced is None:
            self.voiced = self.contour > 0

    @property
    def n_frames(self) -> int:
        return self.contour.size


@dataclass
class CorpusManifest:
    pair: str
    train: list[str]
    val: list[str]
    test: list[str]
    mfcc_mean: np.ndarray
    mfcc_std: np.ndarray

    def __post_init__(self):
        seen: dict[str, str] = {}
        for split in ("train", "val", "test"):
            for uid in getattr(self, split):
                if uid in seen:
                    raise ValueError(f"utterance {uid} appears in both {seen[uid]} and {split}")
                seen[uid] = split
        self.mfcc_mean = np.asarray(self.mfcc_mean, dtype=np.float64)
        self.mfcc_std = np.asarray(self.mfcc_std, dtype=np.float64)

    @property
    def emotions(self) -> tuple[str, str]:
        return split_pair(self.pair)

    def to_json(self) -> str:
        doc = {
            "pair": self.pair,
            "train": self.train,
            "val": self.val,
            "test": self.test,
            "mfcc_mean": [float(x) for x in self.mfcc_mean],
            "mfcc_std": [float(x) for x in self.mfcc_std],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CorpusManifest":
        doc = json.loads(text)
        return cls(doc["pair"], list(doc["train"]), list(doc["val"]), list(doc["test"]),
                   np.array(doc["mfcc_mean"]), np.array(doc["mfcc_std"]))


@dataclass
class Corpus:
    root: Path
    manifest: CorpusManifest
    utterances: dict[str, Utterance] = field(default_factory=dict)

    def split(self, name: str, emotion: str | None = None) -> list[Utterance]:
        out = [self.utterances[u] for u in getattr(self.manifest, name)]
        if emotion is not None:
            out = [u for u in out if u.emotion == emotion]
        return out

    @property
    def norm(self) -> tuple[np.ndarray, np.ndarray]:
        return self.manifest.mfcc_mean, self.manifest.mfcc_std


def split_pair(pair: str) -> tuple[str, str]:
    if pair not in PAIRS:
        raise ValueError(f"unknown emotion pair {pair!r}; expected one of {', '.join(PAIRS)}")
    a, b = pair.split("-")
    return a, b


# ------------------------------------------------------------------ file I/O


def _fmt(x: float) -> str:
    return repr(float(x))


def format_utterance(utt: Utterance, f0: np.ndarray | None = None) -> str:
    """CSV text for ``utt``.

    Without ``f0`` the utterance's own contour is written with unvoiced frames
    set back to 0, so a load/write cycle reproduces the file. An explicit
    ``f0`` (a converted contour) is written for every frame.
    """
    if f0 is None:
        f0 = np.where(utt.voiced, utt.contour, 0.0)
    else:
        f0 = np.asarray(f0, dtype=np.float64)
    lines = [
        f"id,{utt.id},emotion,{utt.emotion},group,{utt.parallel_group or ''}",
        ",".join(["f0"] + [f"mfcc{i + 1}" for i in range(N_MFCC)]),
    ]
    for v, row in zip(f0, utt.spectrum):
        lines.append(",".join([_fmt(v)] + [_fmt(c) for c in row]))
    return "\n".join(lines) + "\n"


def write_utterance(utt: Utterance, path, f0: np.ndarray | None = None) -> None:
    atomic_write_text(path, format_utterance(utt, f0))


def interpolate_unvoiced(f0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fill f0 == 0 frames linearly between voiced neighbours; edges hold the nearest value."""
    f0 = np.asarray(f0, dtype=np.float64)
    voiced = f0 != 0
    if not voiced.any():
        raise ValueError("contour has no voiced frames")
    idx = np.arange(f0.size)
    filled = f0.copy()
    filled[~voiced] = np.interp(idx[~voiced], idx[voiced], f0[voiced])
    return filled, voiced


def load_utterance(path) -> Utterance:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as e:
        raise CorpusFormatError(path, None, f"not UTF-8: {e}") from None
    if len(lines) < 3:
        raise CorpusFormatError(path, None, "need a metadata line, a header and at least one frame")

    meta = lines[0].split(",")
    if len(meta) != 6 or meta[0] != "id" or meta[2] != "emotion" or meta[4] != "group":
        raise CorpusFormatError(path, 1, "expected 'id,<id>,emotion,<label>,group,<group>'")
    header = lines[1].split(",")
    expected = ["f0"] + [f"mfcc{i + 1}" for i in range(N_MFCC)]
    if header != expected:
        raise CorpusFormatError(
            path, 2, f"header must be f0,mfcc1..mfcc{N_MFCC}; got {len(header) - 1} mfcc columns"
        )

    rows = []
    for n, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != len(expected):
            raise CorpusFormatError(
                path, n, f"row has {len(fields)} columns, header declares {len(expected)}"
            )
        try:
            rows.append([float(x) for x in fields])
        except ValueError as e:
            raise CorpusFormatError(path, n, f"non-numeric field ({e})") from None
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise CorpusFormatError(path, None, "non-finite values")
    if np.any(data[:, 0] < 0):
        raise CorpusFormatError(path, None, "negative f0")
    try:
        contour, voiced = interpolate_unvoiced(data[:, 0])
    except ValueError:
        raise CorpusFormatError(path, None, "all frames unvoiced") from None
    if not meta[3]:
        raise CorpusFormatError(path, 1, "empty emotion label")
    return Utterance(meta[1], meta[3], contour, data[:, 1:], meta[5] or None, voiced)


def load_corpus(root) -> Corpus:
    root = Path(root)
    mpath = root / "manifest.json"
    if not mpath.exists():
        raise FileNotFoundError(f"no manifest.json in {root}")
    manifest = CorpusManifest.from_json(mpath.read_text(encoding="utf-8"))
    utts = {}
    for uid in manifest.train + manifest.val + manifest.test:
        utts[uid] = load_utterance(root / f"{uid}.csv")
    return Corpus(root, manifest, utts)


# ------------------------------------------------------------------ windowing and stats


def window_128(utt: Utterance, seed: int = 0, T: int = T_CONTEXT) -> Utterance:
    """Random T-frame window of a long utterance, reflect padding for a short one."""
    n = utt.n_frames
    if n == T:
        return utt
    if n > T:
        start = int(np.random.default_rng(seed).integers(0, n - T + 1))
        sl = slice(start, start + T)
        return Utterance(utt.id, utt.emotion, utt.contour[sl], utt.spectrum[sl],
                         utt.parallel_group, utt.voiced[sl])
    left = (T - n) // 2
    idx = _reflect_indices(n, left, T - n - left)
    return Utterance(utt.id, utt.emotion, utt.contour[idx], utt.spectrum[idx],
                     utt.parallel_group, utt.voiced[idx])


def _reflect_indices(n, left, right):
    if n == 1:
        return np.zeros(left + 1 + right, dtype=int)
    return np.pad(np.arange(n), (left, right), mode="reflect")


def mfcc_stats(utterances) -> tuple[np.ndarray, np.ndarray]:
    frames = np.concatenate([u.spectrum for u in utterances], axis=0)
    std = frames.std(axis=0)
    std[std == 0] = 1.0
    return frames.mean(axis=0), std


# ------------------------------------------------------------------ synthesis


def _emotion_offsets(emotion: str) -> np.ndarray:
    # fixed per-emotion spectral tilt, independent of the corpus seed
    key = list(EMOTION_STYLE).index(emotion)
    return np.random.default_rng([7919, key]).normal(0.0, 0.4, N_MFCC)


MIN_TEMPO_CORRELATION = 0.9


def _shape(latent, t, rate_mult, decl_mult):
    # tempo changes act around the utterance midpoint so the two ends stay aligned
    waves = np.sin(2 * np.pi * np.outer(0.5 + rate_mult * (t - 0.5), latent["freq"])
                   + latent["phase"])
    return waves, waves @ latent["amp"] - latent["decl"] * decl_mult * (t - 0.5)


def _phrase(rng, T):
    """Draw a phrase latent whose shape survives the fastest tempo change.

    Latents whose sinusoids nearly cancel lose their identity under a tempo
    change; those are redrawn so every emotion rendering stays recognisably
    the same phrase.
    """
    t = np.arange(T) / (T - 1)
    fastest = max(style[2] for style in EMOTION_STYLE.values())
    while True:
        n = int(rng.integers(3, 7))
        latent = {
            "freq": rng.uniform(0.25, 1.0, n),
            "phase": rng.uniform(0.0, 2 * np.pi, n),
            "amp": rng.uniform(0.5, 1.0, n),
            "decl": rng.uniform(0.5, 1.5),
        }
        _, base = _shape(latent, t, 1.0, 1.0)
        _, fast = _shape(latent, t, fastest, 1.0)
        if np.corrcoef(base, fast)[0, 1] >= MIN_TEMPO_CORRELATION:
            break
    latent["speaker"] = rng.uniform(-8.0, 8.0)
    latent["spec_base"] = rng.normal(0.0, 1.0, N_MFCC)
    latent["spec_mix"] = rng.normal(0.0, 0.3, (N_MFCC, n))
    return latent


def _render(latent, emotion, T, rng):
    shift, rng_mult, rate, decl_mult = EMOTION_STYLE[emotion]
    t = np.arange(T) / (T - 1)
    _, neutral_shape = _shape(latent, t, 1.0, 1.0)
    scale = np.max(np.abs(neutral_shape))
    waves, s = _shape(latent, t, rate, decl_mult)
    contour = NEUTRAL_MEAN + latent["speaker"] + shift + NEUTRAL_RANGE * rng_mult * s / scale
    if emotion == "happy":
        contour = contour + NEUTRAL_RANGE * rng_mult * np.clip((t - 0.75) / 0.25, 0.0, 1.0)
    contour = contour + rng.normal(0.0, 0.5, T)

    spectrum = (latent["spec_base"] + waves @ latent["spec_mix"].T
                + _emotion_offsets(emotion) + rng.normal(0.0, 0.05, (T, N_MFCC)))
    return contour, spectrum


def synth_corpus(out_dir, pair: str = "neutral-angry", n_train: int = 8, n_val: int = 2,
                 n_test: int = 2, seed: int = 0, overwrite: bool = False,
                 T: int = T_CONTEXT) -> Path:
    """Write a parallel synthetic corpus and return the manifest path.

    Counts are parallel groups; each group yields one utterance per emotion
    of ``pair`` rendered from a shared phrase latent.
    """
    a, b = split_pair(pair)
    if min(n_train, n_val, n_test) < 1:
        raise ValueError("split counts must be >= 1")
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not overwrite:
        raise CorpusExistsError(f"{out} is not empty")
    out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    splits: dict[str, list[str]] = {"train": [], "val": [], "test": []}
    train_utts = []
    order = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
    for g, split in enumerate(order):
        group = f"g{g:04d}"
        latent = _phrase(rng, T)
        for emo in (a, b):
            contour, spectrum = _render(latent, emo, T, rng)
            utt = Utterance(f"{group}_{emo}", emo, contour, spectrum, group)
            write_utterance(utt, out / f"{utt.id}.csv")
            splits[split].append(utt.id)
            if split == "train":
                train_utts.append(utt)

    # stats from the values as they will be read back
    train_loaded = [load_utterance(out / f"{u.id}.csv") for u in train_utts]
    mean, std = mfcc_stats(train_loaded)
    manifest = CorpusManifest(pair, splits["train"], splits["val"], splits["test"], mean, std)
    mpath = out / "manifest.json"
    atomic_write_text(mpath, manifest.to_json())
    return mpath


def parallel_targets(corpus: Corpus, split: str = "test") -> list[tuple[Utterance, Utterance]]:
    """(source, target) pairs sharing a parallel group in ``split``.

    Raises ``LookupError`` listing every source utterance with no target.
    """
    a, b = corpus.manifest.emotions
    targets = {u.parallel_group: u for u in corpus.split(split, b) if u.parallel_group}
    pairs, orphans = [], []
    for u in corpus.split(split, a):
        t = targets.get(u.parallel_group) if u.parallel_group else None
        if t is None:
            orphans.append(u.id)
        else:
            pairs.append((u, t))
    if orphans:
        raise LookupError(f"no parallel target for: {', '.join(orphans)}")
    return pairs


def ensure_dir_writable(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    if not os.access(p, os.W_OK):
        raise PermissionError(f"{p} is not writable")
    return p
