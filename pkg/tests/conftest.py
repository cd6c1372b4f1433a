import numpy as np
import pytest
import torch

from uwstereo.camera import make_default_rig
from uwstereo.net.config import ModelConfig


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_rig():
    return make_default_rig(12).resized(128, 64)


@pytest.fixture
def tiny_config():
    return ModelConfig(base_channels=16, n_loftr=1, attention_heads=2, max_disparity=32, train_iters=2,
                       eval_iters=3, hidden_dim=16, corr_groups=4, corr_radius=2)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
