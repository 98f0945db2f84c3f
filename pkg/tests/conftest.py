"""Shared fixtures for the bounds toolkit tests."""

import pytest

from sparsity_bounds.config import settings
from sparsity_bounds.simulator.instance import generate_instance
from sparsity_bounds.structure.pydantic import ProblemConfig


@pytest.fixture
def small_instance():
    """n=40, k=4, J=2, m=20 at 20 dB."""
    return generate_instance(n=40, k=4, J=2, m=20, snr=100.0, seed=7)


@pytest.fixture
def mf_config():
    return ProblemConfig(kappa=0.05, snr=10.0, J=2, alpha=0.1, rho=1.0)


@pytest.fixture
def override_settings():
    """Set attributes on the global settings for one test and restore them afterwards."""
    saved = {}

    def apply(**values):
        for key, value in values.items():
            saved.setdefault(key, getattr(settings, key))
            setattr(settings, key, value)

    yield apply
    for key, value in saved.items():
        setattr(settings, key, value)
