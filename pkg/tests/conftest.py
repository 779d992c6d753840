"""
Shared fixtures: a tiny model shape and synthetic windowed domains
"""
import pytest

import dataseries
from models import ModelConfig, SyntheticDomainSpec


def synthetic_windows(n, m=6, h=2, mean=0.0, amplitude=1.0, noise_std=0.1, seed=0, name="synthetic"):
    """Raw windows of an AR(1) + seasonal series"""
    spec = SyntheticDomainSpec(n=n + m + h - 1, phi=0.5, period=12, amplitude=amplitude, mean=mean,
                               noise_std=noise_std, seed=seed, name=name)
    return dataseries.make_windows(dataseries.synth_generate(spec), m, h)


@pytest.fixture
def model_cfg():
    return ModelConfig(n_features=1, m=6, h=2, d_model=8, n_heads=2, n_layers=2, d_ff=16)


@pytest.fixture
def source_windows():
    return synthetic_windows(32, seed=1, name="source")


@pytest.fixture
def target_windows():
    return synthetic_windows(16, mean=1.5, amplitude=1.3, seed=2, name="target")
