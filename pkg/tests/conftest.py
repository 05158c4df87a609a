import numpy as np
import pytest

from dragfl.drag_core import DragConfig
from dragfl.models import ModelSpec
from dragfl.simulator import DataConfig, ExperimentConfig


def tiny_config(**overrides) -> ExperimentConfig:
    """A run that finishes in well under a second."""
    base = dict(
        M=4, S=2, U=2, B=8, T_max=3, q=1.0,
        model=ModelSpec("logistic", input_dim=3, num_classes=4),
        data=DataConfig(num_classes=4, per_class=20, dim=3, separation=3.0, test_per_class=10),
        drag=DragConfig(),
        seed=7,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def tiny_raw_config(**overrides) -> dict:
    raw = tiny_config().to_dict()
    raw.update(overrides)
    return raw


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
