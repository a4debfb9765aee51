import numpy as np
import pytest

from vcgan import corpus


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def toy_corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy") / "corpus"
    corpus.synth_corpus(root, "neutral-angry", n_train=4, n_val=1, n_test=2, seed=7)
    return root


@pytest.fixture(scope="session")
def toy_corpus(toy_corpus_dir):
    return corpus.load_corpus(toy_corpus_dir)
