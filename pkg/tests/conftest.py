"""Shared fixtures: the standard data split and session-trained models.

Training fixtures run once per session and are shared by every acceptance
criterion that needs a trained model. Use ``pytest -k "not acceptance"`` for
a fast loop that skips them.
"""
import numpy as np
import pytest

from finqlab.bsm import generate_dataset
from finqlab.training import TrainConfig, train

TRAIN_SEED = 42
TEST_SEED = 43

_acceptance_outcomes = {}


@pytest.fixture(scope="session")
def paper_split():
    """500 training / 100 test samples, with a 10% validation carve-out."""
    full = generate_dataset(500, seed=TRAIN_SEED)
    test = generate_dataset(100, seed=TEST_SEED)
    order = np.random.default_rng(np.random.SeedSequence(0, spawn_key=(1 << 20,))).permutation(500)
    val = full.subset(order[:50])
    tr = full.subset(order[50:])
    return {"train": tr, "val": val, "test": test, "full_train": full}


@pytest.fixture(scope="session")
def trained_finqbit(paper_split):
    config = TrainConfig(target="finqbit", seed=0)  # defaults: 5 restarts, 1000 iters
    return train(config, paper_split["train"], paper_split["val"])


@pytest.fixture(scope="session")
def trained_baseline4_l3(paper_split):
    config = TrainConfig(target="baseline4", layers=3, max_iters=500, restarts=2, seed=7)
    return train(config, paper_split["train"], paper_split["val"])


@pytest.fixture(scope="session")
def trained_baseline4_l1(paper_split):
    config = TrainConfig(target="baseline4", layers=1, max_iters=400, restarts=3, seed=7)
    return train(config, paper_split["train"], paper_split["val"])


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_acceptance_outcomes):
        outcome = _acceptance_outcomes[nodeid]
        tag = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{tag:<6} {nodeid.split('::')[-1]}")
