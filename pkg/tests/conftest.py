import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dmcag import PipelineConfig, SyntheticSpec, generate_synthetic  # noqa: E402

# widths small enough for a laptop core; the full-size defaults are config
DESK = dict(hidden_dims=(50, 50, 200), latent_dim=10, k=4, m=20, pretrain_epochs=200,
            selfsup_epochs=100, contrastive_epochs=50, rounds=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def blobs():
    return generate_synthetic(SyntheticSpec(n=500, k=4, seed=0))


@pytest.fixture(scope="session")
def small_blobs():
    return generate_synthetic(SyntheticSpec(n=120, k=3, view_dims=(8, 6), seed=3))


@pytest.fixture
def tiny_config():
    return PipelineConfig(k=3, m=8, hidden_dims=(16,), latent_dim=4, pretrain_epochs=20,
                          selfsup_epochs=5, contrastive_epochs=5, rounds=2, kmeans_n_init=2,
                          seed=7)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
