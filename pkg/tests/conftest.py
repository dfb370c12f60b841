"""Shared fixtures: small trained classifier and tiny test sequences."""

import numpy as np
import pytest

from texcodec.analyzer import train_classifier
from texcodec.datasets import DatasetConfig, synthesize_dataset
from texcodec.nnet import NetSpec, TrainConfig


SMALL_SPEC = NetSpec(conv_channels=(8, 16), fc_sizes=(32,))


@pytest.fixture(scope="session")
def small_dataset():
    return synthesize_dataset(DatasetConfig(n_texture=300, n_non_texture=1500),
                              seed=11)


@pytest.fixture(scope="session")
def trained_net(small_dataset):
    """A quickly trained classifier good enough for smoke inference tests."""
    cfg = TrainConfig(batch_size=128, epochs=6, rng_seed=1)
    net, log = train_classifier(small_dataset, cfg, spec=SMALL_SPEC,
                                target_val_accuracy=0.97)
    assert log[-1]["val_balanced_accuracy"] > 0.9
    return net
