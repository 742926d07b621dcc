"""Shared fixtures: one small -1 dB training/evaluation setup.

The heavyweight four-level setup used by the acceptance suite lives in
test_acceptance.py; everything here is sized for fast module tests.
"""

import pytest

from emgdecon.agent import TrainConfig, train
from emgdecon.contamination import (
    ContaminationConfig,
    NoiseKind,
    NoiseSequence,
    contaminate,
)
from emgdecon.reward import ModelRegistry, train_level_models
from emgdecon.signals import synth_clean_semg


@pytest.fixture(scope="session")
def clean32():
    return synth_clean_semg(32.0, seed=3)


@pytest.fixture(scope="session")
def nd_train(clean32):
    cfg = ContaminationConfig(-1.0, seed=11)
    return contaminate(clean32, NoiseSequence.random(5), cfg, dataset_id="ND1", role="train")


@pytest.fixture(scope="session")
def nd_test(clean32):
    cfg = ContaminationConfig(-1.0, seed=11)
    return contaminate(clean32, NoiseSequence.random(6), cfg, dataset_id="ND2", role="test")


@pytest.fixture(scope="session")
def pli_dataset(clean32):
    """Every segment contaminated by powerline interference."""
    cfg = ContaminationConfig(-1.0, seed=13)
    seq = NoiseSequence((NoiseKind.PLI,) * 64, seed=0)
    return contaminate(clean32, seq, cfg, dataset_id="ND9", role="test")


@pytest.fixture(scope="session")
def mini_registry(nd_train):
    registry = ModelRegistry()
    train_level_models(registry, nd_train, seed=7)
    return registry


@pytest.fixture(scope="session")
def mini_checkpoint(nd_train, mini_registry):
    checkpoint, _ = train(nd_train, mini_registry, TrainConfig(episodes=300, seed=1))
    return checkpoint
