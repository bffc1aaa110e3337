import pytest

from emonmt.bpe import bpe_train

# one "name: PASS/FAIL" line per acceptance criterion, echoed after the run
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
from emonmt.corpus import ParallelCorpus, ParallelPair
from emonmt.model import ModelConfig, TrainConfig, train

TOY_PAIRS = [
    ("the cat", "le chat"),
    ("the dog", "le chien"),
    ("a cat", "un chat"),
    ("a dog", "un chien"),
    ("the house", "la maison"),
    ("a house", "une maison"),
    ("the red cat", "le chat rouge"),
    ("the red dog", "le chien rouge"),
    ("a red cat", "un chat rouge"),
    ("a red dog", "un chien rouge"),
]


def toy_corpus():
    return ParallelCorpus(
        tuple(ParallelPair(f"{i:04d}", s, t) for i, (s, t) in enumerate(TOY_PAIRS))
    )


@pytest.fixture(scope="session")
def toy_vocab():
    texts = [s for s, _ in TOY_PAIRS] + [t for _, t in TOY_PAIRS]
    return bpe_train(texts, 80)


@pytest.fixture(scope="session")
def toy_model_config(toy_vocab):
    return ModelConfig(
        vocab_size=len(toy_vocab),
        enc_layers=2,
        dec_layers=2,
        heads=4,
        model_dim=64,
        ff_dim=128,
        dropout=0.0,
        max_len=32,
        seed=1,
    )


@pytest.fixture(scope="session")
def toy_checkpoints(toy_vocab, toy_model_config):
    """Checkpoints of a model trained to memorize the 10-pair toy corpus."""
    tcfg = TrainConfig(
        warmup_steps=200,
        batch_size=10,
        epochs=120,
        label_smoothing=0.0,
        avg_top_k=5,
        peak_scale=0.5,
    )
    corpus = toy_corpus()
    return train(corpus, corpus, toy_vocab, toy_model_config, tcfg)


@pytest.fixture(scope="session")
def toy_params(toy_checkpoints):
    return toy_checkpoints[-1].params
