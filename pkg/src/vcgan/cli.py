"""``vcgan`` command line: synth-data, train, convert, eval, gradcheck.

Exit codes: 0 success, 1 check failure, 2 usage/config error, 3 output data
already exists, 4 numeric abort, 5 corrupt artifact, 6 missing data.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import gradcheck
from .checkpoint import CheckpointError
from .config import ConfigError, TrainConfig, load_run_config, parse_config
from .corpus import (
    PAIRS,
    CorpusExistsError,
    CorpusFormatError,
    load_corpus,
    load_utterance,
    synth_corpus,
    write_utterance,
)
from .evaluate import MissingTargetsError, evaluate
from .trainer import TrainingAborted, TrainState, convert, train

OK, CHECK_FAILED, USAGE, DATA_EXISTS, NUMERIC, CORRUPT, MISSING = range(7)

log = logging.getLogger("vcgan")


def _err(msg: str) -> None:
    print(f"vcgan: error: {msg}", file=sys.stderr)


def cmd_synth_data(args) -> int:
    try:
        manifest = synth_corpus(args.out, args.pair, args.n_train, args.n_val, args.n_test,
                                args.seed, overwrite=args.overwrite)
    except CorpusExistsError as e:
        _err(f"{e} (pass --overwrite to replace)")
        return DATA_EXISTS
    except ValueError as e:
        _err(str(e))
        return USAGE
    print(manifest)
    return OK


def _run_config(args) -> TrainConfig:
    cfg = load_run_config(args.config) if args.config else TrainConfig()
    overrides = {k: getattr(args, k) for k in ("seed", "epochs") if getattr(args, k) is not None}
    if overrides:
        cfg = parse_config({**cfg.to_dict(), **overrides})
    return cfg


def cmd_train(args) -> int:
    try:
        cfg = _run_config(args)
    except ConfigError as e:
        _err(f"{e} [keys: {', '.join(e.keys)}]" if e.keys else str(e))
        return USAGE
    except OSError as e:
        _err(f"cannot read config: {e}")
        return MISSING
    try:
        corpus = load_corpus(args.data)
    except FileNotFoundError as e:
        _err(str(e))
        return MISSING
    except CorpusFormatError as e:
        _err(str(e))
        return CORRUPT
    try:
        state = train(cfg, corpus, args.out, resume=args.resume)
    except TrainingAborted as e:
        _err(str(e))
        return NUMERIC
    except CheckpointError as e:
        _err(f"{args.resume}: {e}")
        return CORRUPT
    except PermissionError as e:
        _err(str(e))
        return USAGE
    except FileNotFoundError as e:
        _err(str(e))
        return MISSING
    print(Path(args.out) / "final.vcgn")
    gen = [r for r in state.history if r["role"] == "generator"]
    if gen:
        print(f"epochs={state.epoch} cycle first={gen[0]['cycle']:.4f} last={gen[-1]['cycle']:.4f}")
    return OK


def _load_state(path):
    try:
        return TrainState.load(path), OK
    except FileNotFoundError as e:
        _err(str(e))
        return None, MISSING
    except CheckpointError as e:
        _err(f"{path}: {e}")
        return None, CORRUPT


def cmd_convert(args) -> int:
    state, code = _load_state(args.ckpt)
    if state is None:
        return code
    try:
        utt = load_utterance(args.input)
    except FileNotFoundError as e:
        _err(str(e))
        return MISSING
    except CorpusFormatError as e:
        _err(str(e))
        return CORRUPT
    converted, _ = convert(state, utt, args.direction, sampling=True,
                           rng=np.random.default_rng(args.seed))
    a, b = state.pair.split("-")
    src, tgt = (a, b) if args.direction == "forward" else (b, a)
    if utt.emotion != src:
        log.warning("input is labelled %r, checkpoint converts %s -> %s", utt.emotion, src, tgt)
    out = type(utt)(utt.id, tgt, utt.contour, utt.spectrum, utt.parallel_group, utt.voiced)
    write_utterance(out, args.out, f0=converted)
    print(args.out)
    return OK


def cmd_eval(args) -> int:
    state, code = _load_state(args.ckpt)
    if state is None:
        return code
    try:
        corpus = load_corpus(args.data)
    except FileNotFoundError as e:
        _err(str(e))
        return MISSING
    except CorpusFormatError as e:
        _err(str(e))
        return CORRUPT
    try:
        report = evaluate(state, corpus, args.report, args.plots, eval_seed=args.seed)
    except MissingTargetsError as e:
        _err(str(e))
        return MISSING
    doc = report.to_dict()
    print(f"mae_converted_mean={doc['mae_converted_mean']:.4f} "
          f"mae_identity_mean={doc['mae_identity_mean']:.4f}")
    return OK


def cmd_gradcheck(args) -> int:
    if args.t < 1 or args.eps <= 0 or args.tol <= 0:
        _err("--t must be >= 1 and --eps, --tol positive")
        return USAGE
    results = gradcheck.run_all(args.seed, args.t, args.eps, args.tol,
                                args.max_entries or None)
    for r in results:
        print(r.line())
    return OK if all(r.passed for r in results) else CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vcgan", description=__doc__.splitlines()[0])
    p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-data", help="write a synthetic parallel corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--pair", required=True, choices=PAIRS)
    s.add_argument("--n-train", type=int, default=8)
    s.add_argument("--n-val", type=int, default=2)
    s.add_argument("--n-test", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_synth_data)

    s = sub.add_parser("train", help="train generators and discriminator")
    s.add_argument("--data", required=True)
    s.add_argument("--config", help="JSON run config; omitted keys take defaults")
    s.add_argument("--out", required=True)
    s.add_argument("--resume")
    s.add_argument("--seed", type=int, help="overrides the config")
    s.add_argument("--epochs", type=int, help="overrides the config")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("convert", help="convert one utterance file")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--direction", required=True, choices=("forward", "backward"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("eval", help="MAE report against parallel test targets")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--plots")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference audit of all gradients")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--t", type=int, default=8)
    s.add_argument("--eps", type=float, default=1e-5)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--max-entries", type=int, default=200,
                   help="entries probed per tensor; 0 probes every entry")
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    return args.func(args)
