import numpy as np
import pytest

from vcgan.config import TrainConfig
from vcgan.corpus import window_128
from vcgan.diffnum import Tape, Tensor, backward, finite_diff_check
from vcgan.nets import (
    N_MFCC,
    NetConfig,
    ParameterError,
    ParameterSet,
    discriminator_score,
    dropout_masks,
    generator_momenta,
    init_params,
)
from vcgan.trainer import discriminator_objective, generator_objective, init_state


def random_inputs(rng, T=128):
    return rng.normal(0, 1, (T, N_MFCC)), rng.uniform(90, 250, T)


def test_zero_gain_gives_zero_momenta(rng):
    params = init_params("generator", NetConfig(momenta_output_gain_init=0.0), seed=3)
    spec, f0 = random_inputs(rng)
    m = generator_momenta(spec, f0, params, NetConfig(), sampling=True)
    assert np.array_equal(m.data, np.zeros(128))


def test_generator_shape_contract(rng):
    spec, f0 = random_inputs(rng)
    m = generator_momenta(spec, f0, init_params("generator", seed=0), NetConfig(), True)
    assert m.dims == (128,)


@pytest.mark.parametrize("T", [5, 7, 33])
def test_generator_same_padding(rng, T):
    spec, f0 = random_inputs(rng, T)
    assert generator_momenta(spec, f0, init_params("generator"), NetConfig(), False).dims == (T,)


def test_sampling_differs_across_rng_states(rng):
    spec, f0 = random_inputs(rng)
    base = init_params("generator", seed=0)
    a = ParameterSet("generator", base.tensors, np.random.default_rng(1))
    b = ParameterSet("generator", base.tensors, np.random.default_rng(2))
    cfg = NetConfig()
    assert not np.array_equal(generator_momenta(spec, f0, a, cfg, True).data,
                              generator_momenta(spec, f0, b, cfg, True).data)


def test_no_sampling_is_deterministic(rng):
    spec, f0 = random_inputs(rng)
    p = init_params("generator", seed=0)
    first = generator_momenta(spec, f0, p, NetConfig(), False).data
    assert np.array_equal(first, generator_momenta(spec, f0, p, NetConfig(), False).data)


def test_generator_errors(rng):
    spec, f0 = random_inputs(rng)
    p = init_params("generator")
    with pytest.raises(ValueError):
        generator_momenta(spec[:, :22], f0, p, NetConfig(), False)
    with pytest.raises(ValueError):
        generator_momenta(spec, f0[:100], p, NetConfig(), False)
    del p.tensors["conv2.w"]
    with pytest.raises(ParameterError, match="conv2.w"):
        generator_momenta(spec, f0, p, NetConfig(), False)


def test_all_zero_discriminator_scores_half(rng):
    p = init_params("discriminator", seed=0)
    for k in p.tensors:
        p.tensors[k] = np.zeros_like(p.tensors[k])
    assert discriminator_score(rng.uniform(90, 300, 128), rng.uniform(90, 300, 128), p,
                               NetConfig()).item() == 0.5


def test_discriminator_scores_stay_in_open_interval(rng):
    p = init_params("discriminator", seed=1)
    for _ in range(1000):
        s = discriminator_score(rng.uniform(50, 700, 128), rng.uniform(50, 700, 128), p,
                                NetConfig()).item()
        assert 0.0 < s < 1.0


def test_discriminator_symmetric_input(rng):
    p = init_params("discriminator", seed=1)
    c = rng.uniform(90, 250, 128)
    s = discriminator_score(c, c, p, NetConfig()).item()
    assert np.isfinite(s) and 0 < s < 1


def test_discriminator_length_mismatch(rng):
    with pytest.raises(ValueError):
        discriminator_score(np.ones(128), np.ones(127), init_params("discriminator"), NetConfig())


def test_discriminator_built_for_other_length():
    with pytest.raises(ParameterError, match="dense.w"):
        discriminator_score(np.ones(64) * 100, np.ones(64) * 100,
                            init_params("discriminator", T=128), NetConfig())


@pytest.mark.parametrize("kind", ["generator", "discriminator"])
def test_init_is_deterministic_and_seed_sensitive(kind):
    a, b, c = init_params(kind, seed=5), init_params(kind, seed=5), init_params(kind, seed=6)
    assert a.names() == b.names()
    assert all(np.array_equal(a[k], b[k]) for k in a.names())
    assert any(not np.array_equal(a[k], c[k]) for k in a.names())


def test_init_bounds_and_biases():
    p = init_params("generator", seed=0)
    w = p["conv1.w"]
    fan_in, fan_out = 5 * (N_MFCC + 1), 5 * 32
    assert np.max(np.abs(w)) <= np.sqrt(6 / (fan_in + fan_out))
    assert not np.any(p["conv1.b"]) and not np.any(p["out.b"])
    assert p["out.gain"].tolist() == [0.1]


def test_unknown_kind():
    with pytest.raises(ValueError):
        init_params("critic")


def test_net_config_validation():
    with pytest.raises(ValueError):
        NetConfig(kernel_width=4)
    with pytest.raises(ValueError):
        NetConfig(dropout_rate=1.0)
    with pytest.raises(ValueError):
        NetConfig(conv_channels=(0,))


def test_initial_momenta_are_small(rng):
    p = init_params("generator", seed=0)
    sizes = []
    for _ in range(20):
        spec, f0 = random_inputs(rng)
        sizes.append(np.mean(np.abs(generator_momenta(spec, f0, p, NetConfig(), True).data)))
    assert max(sizes) < 5.0


def test_every_parameter_gets_a_gradient(toy_corpus):
    state = init_state(TrainConfig(seed=2), toy_corpus.manifest.pair, toy_corpus.norm)
    a = window_128(toy_corpus.split("train", "neutral")[0], 0)
    b = window_128(toy_corpus.split("train", "angry")[1], 1)

    tape = Tape()
    leaves = {n: state.nets[n].leaves() for n in ("gen_ab", "gen_ba", "disc")}
    obj, _ = generator_objective(tape, state, leaves, a, b)
    g = backward(tape, [1.0], obj)
    for net in ("gen_ab", "gen_ba"):
        for name, leaf in leaves[net].items():
            assert np.any(g[leaf.id] != 0), f"{net}/{name}"

    tape = Tape()
    leaves = {"disc": state.nets["disc"].leaves()}
    obj = discriminator_objective(tape, state, leaves, a, b)
    g = backward(tape, [1.0], obj)
    for name, leaf in leaves["disc"].items():
        assert np.any(g[leaf.id] != 0), f"disc/{name}"


def test_discriminator_gradients_match_finite_differences(rng):
    T = 8
    cfg = NetConfig()
    p = init_params("discriminator", cfg, seed=4, T=T)
    pa, pb = rng.uniform(90, 250, T), rng.uniform(90, 250, T)

    def objective(P, tape):
        return tape.log(discriminator_score(P["pa"], P["pb"], p, cfg, tape, leaves=P))

    params = {"pa": pa, "pb": pb, **p.tensors}
    report = finite_diff_check(objective, params, epsilon=1e-5, tolerance=1e-4)
    assert report.passed, report.worst


def test_generator_gradients_match_finite_differences_with_frozen_dropout(rng):
    T = 8
    cfg = NetConfig()
    p = init_params("generator", cfg, seed=4)
    spec, f0 = random_inputs(rng, T)
    masks = dropout_masks(cfg, T, rng)
    w = Tensor(rng.uniform(-1, 1, T))

    def objective(P, tape):
        m = generator_momenta(spec, P["f0"], p, cfg, True, tape, masks=masks, leaves=P)
        return tape.sum(tape.mul(m, w))

    report = finite_diff_check(objective, {"f0": f0, **p.tensors}, 1e-5, 1e-4)
    assert report.passed, report.worst
