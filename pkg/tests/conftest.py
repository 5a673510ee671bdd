import numpy as np
import pytest

from mtl_ehr.data.dataset import generate_cohort
from mtl_ehr.models import EncoderConfig
from mtl_ehr.training import TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def cohort():
    """A 200-patient synthetic cohort, shared by the slower tests."""
    return generate_cohort(5, 200)


TINY_ENCODER = EncoderConfig(kind="gru", embed_dim=8, hidden_dim=8, num_layers=1, dropout=0.0,
                             input_window_hours=12)
TINY_TRAIN = TrainConfig(epochs=2, batch_size=32, learning_rate=3e-3)


@pytest.fixture
def tiny():
    return TINY_ENCODER, TINY_TRAIN


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
