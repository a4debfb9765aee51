"""Acceptance suite: one test per headline criterion.

Thresholds are fixed here before any run and are not tuned afterwards.
The training criterion runs three full default-config trainings on a
200-group corpus and takes several minutes on one CPU core.
"""
import math
import time

import numpy as np
import pytest

from vcgan.cli import main
from vcgan.config import TrainConfig
from vcgan.corpus import N_MFCC, Utterance, format_utterance, load_corpus, load_utterance, synth_corpus
from vcgan.evaluate import evaluate
from vcgan.losses import discriminator_loss, generator_total
from vcgan.trainer import TrainState, train
from vcgan.warp import WarpConfig, generate_f0, geodesic_path

from warp_oracle import shoot

CYCLE_RATIO_MAX = 0.5
MAE_RATIO_MAX = 0.7
MAE_RATIO_TOLERANCE = 0.05
TRAIN_SEEDS = (1, 2, 3)
CORPUS_SEED = 0
ORDER_GAP_HZ = 1.0


def verdict(name, passed, detail):
    print(f"\n[acceptance] {name}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, detail


def test_warp_identity_is_bit_exact():
    rng = np.random.default_rng(1)
    cfg = WarpConfig()
    start = time.perf_counter()
    exact = all(np.array_equal(generate_f0(np.zeros(128), p, cfg), p)
                for p in (rng.uniform(60, 600, 128) for _ in range(1000)))
    elapsed = time.perf_counter() - start
    verdict("warp identity", exact and elapsed < 5.0, f"1000 contours, {elapsed:.2f}s")


def test_warp_golden_fixtures():
    start = time.perf_counter()
    single = generate_f0([5.0], [100.0]).tolist() == [115.0]
    ours = generate_f0([2.0, -2.0], [100.0, 150.0])
    oracle = np.array(shoot([2.0, -2.0], [100.0, 150.0]))
    rel = float(np.max(np.abs(ours - oracle) / np.abs(oracle)))
    elapsed = time.perf_counter() - start
    verdict("warp golden fixtures", single and rel <= 1e-12 and elapsed < 1.0,
            f"T=1 -> {generate_f0([5.0], [100.0]).tolist()}, T=2 rel err {rel:.1e}")


def test_gradient_oracle(capsys):
    start = time.perf_counter()
    code = main(["gradcheck", "--seed", "0", "--t", "8", "--eps", "1e-5", "--tol", "1e-4"])
    elapsed = time.perf_counter() - start
    lines = capsys.readouterr().out.strip().splitlines()
    with capsys.disabled():
        verdict("gradient oracle", code == 0 and len(lines) == 3 and elapsed < 60,
                f"exit {code}, {elapsed:.1f}s; " + " | ".join(lines))


def _bounded_instance(rng, cfg, g):
    t = np.linspace(0, 1, 128)
    raw = 150 + 40 * np.sin(2 * np.pi * rng.uniform(0.3, 1.5) * t + rng.uniform(0, 6))
    raw += rng.normal(0, 15, 4) @ np.sin(np.outer(np.arange(1, 5), np.pi * t))
    p = np.clip(np.round(raw / g) * g, g, 790)
    m, cap = rng.normal(0, 1, 128), g / (3 * cfg.steps)
    while True:
        path, _ = geodesic_path(m, p, cfg)
        worst = np.max(np.abs(np.diff(path, axis=0)))
        if worst <= cap:
            return p, path[-1]
        m = m * 0.9 * cap / worst


def test_order_preservation():
    rng = np.random.default_rng(2)
    cfg = WarpConfig()
    start = time.perf_counter()
    violations = 0
    for _ in range(1000):
        p, out = _bounded_instance(rng, cfg, ORDER_GAP_HZ)
        order = np.argsort(p, kind="stable")
        distinct = np.diff(p[order]) > 0
        violations += int(np.sum(np.diff(out[order])[distinct] <= 0))
    elapsed = time.perf_counter() - start
    verdict("order preservation", violations == 0 and elapsed < 10,
            f"{violations} violations in 1000 instances, {elapsed:.2f}s")


def test_loss_arithmetic():
    total = generator_total(2.0, 0.5, -0.3).total
    disc = discriminator_loss([0.5], [0.5])
    ok = abs(total - (-0.297692)) <= 1e-9 and abs(disc - 2 * math.log(2)) <= 1e-9
    verdict("loss arithmetic", ok, f"generator total {total!r}, discriminator {disc!r}")


@pytest.fixture(scope="module")
def training_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    synth_corpus(root / "corpus", "neutral-angry", n_train=200, n_val=10, n_test=20,
                 seed=CORPUS_SEED)
    corpus = load_corpus(root / "corpus")
    runs = {}
    for seed in TRAIN_SEEDS:
        start = time.perf_counter()
        state = train(TrainConfig(seed=seed), corpus, root / f"seed{seed}")
        report = evaluate(state, corpus, eval_seed=0).to_dict()
        cycles = [r["cycle"] for r in state.history if r["role"] == "generator"]
        runs[seed] = {
            "dir": root / f"seed{seed}",
            "cycle_ratio": cycles[-1] / cycles[0],
            "mae_ratio": report["mae_converted_mean"] / report["mae_identity_mean"],
            "seconds": time.perf_counter() - start,
        }
    return corpus, root, runs


def test_training_improvement(training_runs):
    _, _, runs = training_runs
    lines, ok = [], True
    for seed, r in runs.items():
        seed_ok = (r["cycle_ratio"] < CYCLE_RATIO_MAX
                   and r["mae_ratio"] <= MAE_RATIO_MAX + MAE_RATIO_TOLERANCE)
        ok &= seed_ok
        lines.append(f"seed {seed}: cycle last/first {r['cycle_ratio']:.4f}, "
                     f"MAE converted/identity {r['mae_ratio']:.4f}, {r['seconds']:.0f}s")
    verdict("training improvement", ok, "; ".join(lines))


def test_training_determinism(training_runs):
    corpus, root, runs = training_runs
    seed = TRAIN_SEEDS[0]
    train(TrainConfig(seed=seed), corpus, root / "repeat")
    same = (root / "repeat" / "final.vcgn").read_bytes() == \
        (runs[seed]["dir"] / "final.vcgn").read_bytes()
    verdict("determinism", same, f"seed {seed} final checkpoints byte-identical: {same}")


def test_format_round_trips(training_runs, tmp_path):
    _, _, runs = training_runs
    data = (runs[TRAIN_SEEDS[0]]["dir"] / "final.vcgn").read_bytes()
    ckpt_ok = TrainState.from_bytes(data).to_bytes() == data

    rng = np.random.default_rng(3)
    f0 = rng.uniform(70, 400, 300)
    f0[rng.random(300) < 0.2] = 0.0
    u = Utterance("rt", "angry", f0, rng.normal(0, 3, (300, N_MFCC)), "g")
    (tmp_path / "rt.csv").write_text(format_utterance(u))
    back = load_utterance(tmp_path / "rt.csv")
    csv_ok = np.array_equal(back.contour[f0 > 0], f0[f0 > 0]) and \
        np.array_equal(back.voiced, f0 > 0)
    verdict("format round-trips", ckpt_ok and csv_ok,
            f"checkpoint bytes identical: {ckpt_ok}; voiced values exact: {csv_ok}")
