"""Shared fixtures for the ns3l_lab test-suite."""
import numpy as np
import pytest

from ns3l_lab.classifier import init_params
from ns3l_lab.data import gen_blobs, split_labeled_unlabeled
from ns3l_lab.models import ExperimentConfig, MLPSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_spec():
    return MLPSpec(layer_widths=(3, 5, 4), seed=7)


@pytest.fixture
def tiny_params(tiny_spec):
    return init_params(tiny_spec)


@pytest.fixture
def blobs():
    return gen_blobs(K=3, per_class=40, d=4, spread=0.3, rng=np.random.default_rng(0))


@pytest.fixture
def blob_split(blobs):
    return split_labeled_unlabeled(blobs, n_labeled=9, seed=0)


@pytest.fixture
def small_config():
    """A few-second blob run used by the training and CLI tests."""
    return ExperimentConfig(
        num_classes=3,
        per_class=60,
        dim=4,
        n_labeled=9,
        hidden=(8,),
        labeled_batch=9,
        unlabeled_batch=16,
        total_steps=40,
        warmup_steps=10,
        eval_interval=10,
        lr=0.01,
    )
