import json

import numpy as np
import pytest

from vcgan.corpus import (
    N_MFCC,
    CorpusExistsError,
    CorpusFormatError,
    Utterance,
    format_utterance,
    interpolate_unvoiced,
    load_corpus,
    load_utterance,
    parallel_targets,
    synth_corpus,
    window_128,
    write_utterance,
)


def ramp_utterance(n):
    return Utterance("u", "neutral", 100.0 + np.arange(n), np.tile(np.arange(n)[:, None], N_MFCC))


def test_rerun_is_byte_identical(tmp_path, toy_corpus_dir):
    synth_corpus(tmp_path / "again", "neutral-angry", n_train=4, n_val=1, n_test=2, seed=7)
    names = sorted(p.name for p in toy_corpus_dir.iterdir())
    assert names == sorted(p.name for p in (tmp_path / "again").iterdir())
    for n in names:
        assert (toy_corpus_dir / n).read_bytes() == (tmp_path / "again" / n).read_bytes()


def test_file_count_and_manifest(toy_corpus_dir):
    assert len(list(toy_corpus_dir.glob("*.csv"))) == 2 * (4 + 1 + 2)
    doc = json.loads((toy_corpus_dir / "manifest.json").read_text())
    assert list(doc) == ["pair", "train", "val", "test", "mfcc_mean", "mfcc_std"]
    assert len(doc["mfcc_mean"]) == len(doc["mfcc_std"]) == N_MFCC


@pytest.fixture(scope="module")
def medium_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("medium") / "c"
    synth_corpus(root, "neutral-angry", n_train=40, n_val=2, n_test=8, seed=11)
    return load_corpus(root)


def test_neutral_mean_f0(medium_corpus):
    means = [u.contour.mean() for u in medium_corpus.split("train", "neutral")]
    assert 110.0 <= np.mean(means) <= 130.0


def test_angry_contours_track_their_neutral_phrase(medium_corpus):
    for split in ("train", "test"):
        for src, tgt in parallel_targets(medium_corpus, split):
            assert np.corrcoef(src.contour, tgt.contour)[0, 1] > 0.8, src.parallel_group


def test_emotion_styles_shift_the_mean(tmp_path):
    expected = {"angry": 40.0, "happy": 25.0, "sad": -20.0}
    for emo, shift in expected.items():
        synth_corpus(tmp_path / emo, f"neutral-{emo}", n_train=30, n_val=1, n_test=1, seed=2)
        c = load_corpus(tmp_path / emo)
        diffs = [t.contour.mean() - s.contour.mean() for s, t in parallel_targets(c, "train")]
        assert abs(np.mean(diffs) - shift) < 8.0


def test_contours_respect_contour_invariants(medium_corpus):
    for u in medium_corpus.utterances.values():
        assert np.all(np.isfinite(u.contour)) and u.contour.min() > 0 and u.contour.max() < 800


def test_interpolation_example():
    filled, voiced = interpolate_unvoiced(np.array([0.0, 100.0, 0.0, 200.0]))
    assert filled.tolist() == [100.0, 100.0, 150.0, 200.0]
    assert voiced.tolist() == [False, True, False, True]


def test_round_trip_preserves_voiced_values(tmp_path, rng):
    f0 = rng.uniform(80, 300, 50)
    f0[[0, 7, 8, 49]] = 0.0
    u = Utterance("x1", "sad", f0, rng.normal(size=(50, N_MFCC)), "g9")
    (tmp_path / "x1.csv").write_text(format_utterance(u))
    back = load_utterance(tmp_path / "x1.csv")
    assert back.id == "x1" and back.emotion == "sad" and back.parallel_group == "g9"
    assert np.array_equal(back.contour[back.voiced], f0[f0 > 0])
    assert np.array_equal(back.voiced, f0 > 0)
    assert np.array_equal(back.spectrum, u.spectrum)
    write_utterance(back, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_text() == (tmp_path / "x1.csv").read_text()


def test_short_row_names_the_line(tmp_path, rng):
    u = Utterance("x", "neutral", rng.uniform(90, 200, 5), rng.normal(size=(5, N_MFCC)))
    lines = format_utterance(u).splitlines()
    lines[4] = ",".join(lines[4].split(",")[:-1])
    (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(CorpusFormatError) as err:
        load_utterance(tmp_path / "bad.csv")
    assert err.value.line == 5
    assert "bad.csv:5:" in str(err.value)


@pytest.mark.parametrize("mutate, line", [
    (lambda ls: ls.__setitem__(3, ls[3].replace(ls[3].split(",")[1], "abc", 1)), 4),
    (lambda ls: ls.__setitem__(0, "name,x"), 1),
    (lambda ls: ls.__setitem__(1, ",".join(["f0"] + [f"mfcc{i}" for i in range(1, 23)])), 2),
])
def test_format_errors_carry_line_numbers(tmp_path, rng, mutate, line):
    u = Utterance("x", "neutral", rng.uniform(90, 200, 5), rng.normal(size=(5, N_MFCC)))
    lines = format_utterance(u).splitlines()
    mutate(lines)
    (tmp_path / "bad.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(CorpusFormatError) as err:
        load_utterance(tmp_path / "bad.csv")
    assert err.value.line == line


def test_all_unvoiced_is_rejected(tmp_path):
    u = Utterance("x", "neutral", np.zeros(4), np.zeros((4, N_MFCC)))
    (tmp_path / "u.csv").write_text(format_utterance(u))
    with pytest.raises(CorpusFormatError, match="unvoiced"):
        load_utterance(tmp_path / "u.csv")


def test_window_exact_length_is_unchanged():
    u = ramp_utterance(128)
    assert window_128(u, seed=3) is u


def test_window_long_input_is_contiguous_and_seeded():
    u = ramp_utterance(200)
    w = window_128(u, seed=3)
    start = int(w.contour[0] - 100)
    assert np.array_equal(w.contour, u.contour[start:start + 128])
    assert np.array_equal(w.spectrum, u.spectrum[start:start + 128])
    assert np.array_equal(window_128(u, seed=3).contour, w.contour)
    starts = {int(window_128(u, seed=s).contour[0]) for s in range(20)}
    assert len(starts) > 1


def test_window_short_input_is_reflect_padded():
    u = ramp_utterance(100)
    w = window_128(u)
    assert w.n_frames == 128
    # first 14 frames mirror original frames 2..15 (1-based), nearest first
    assert np.array_equal(w.contour[:14], u.contour[14:0:-1])
    assert np.array_equal(w.contour[14:114], u.contour)
    assert np.array_equal(w.contour[114:], u.contour[98:84:-1])


def test_window_single_frame():
    w = window_128(ramp_utterance(1))
    assert w.n_frames == 128 and np.all(w.contour == 100.0)


def test_stored_stats_standardize_train_split(toy_corpus):
    frames = np.concatenate([u.spectrum for u in toy_corpus.split("train")])
    mean, std = toy_corpus.norm
    z = (frames - mean) / std
    assert np.max(np.abs(z.mean(axis=0))) < 1e-9
    assert np.max(np.abs(z.std(axis=0) - 1)) < 1e-9


def test_splits_are_disjoint(toy_corpus):
    m = toy_corpus.manifest
    assert not (set(m.train) & set(m.val) or set(m.train) & set(m.test) or
                set(m.val) & set(m.test))


def test_existing_directory_is_protected(tmp_path):
    (tmp_path / "c").mkdir()
    (tmp_path / "c" / "keep.txt").write_text("x")
    with pytest.raises(CorpusExistsError):
        synth_corpus(tmp_path / "c", n_train=1, n_val=1, n_test=1)
    synth_corpus(tmp_path / "c", n_train=1, n_val=1, n_test=1, overwrite=True)


@pytest.mark.parametrize("kwargs", [{"pair": "neutral-bored"}, {"n_train": 0}])
def test_bad_synth_arguments(tmp_path, kwargs):
    with pytest.raises(ValueError):
        synth_corpus(tmp_path / "c", **kwargs)


def test_orphaned_test_utterances_are_listed(tmp_path):
    synth_corpus(tmp_path / "c", n_train=1, n_val=1, n_test=2, seed=1)
    (tmp_path / "c" / "g0003_angry.csv").write_text(
        (tmp_path / "c" / "g0003_angry.csv").read_text().replace("group,g0003", "group,zz"))
    with pytest.raises(LookupError, match="g0003_neutral"):
        parallel_targets(load_corpus(tmp_path / "c"), "test")
