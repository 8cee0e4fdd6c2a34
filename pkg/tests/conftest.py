import numpy as np
import pytest

from clda.model import ModelConfig, TransformerModel
from clda.tensor_core import active_tape

TINY = ModelConfig(vocab_size=11, seq_len=6, width=8, mlp_width=12,
                   n_classes=3, depth=3)


@pytest.fixture
def tiny_config() -> ModelConfig:
    return TINY


@pytest.fixture
def tiny_model() -> TransformerModel:
    return TransformerModel.init(TINY, seed=7)


@pytest.fixture
def tiny_tokens() -> np.ndarray:
    rng = np.random.default_rng(99)
    return rng.integers(0, TINY.vocab_size, (5, TINY.seq_len), dtype=np.int64)


@pytest.fixture(autouse=True)
def _clean_tape():
    # a test that leaks tape entries must not poison its neighbours
    active_tape().clear()
    active_tape().enabled = True
    yield
    active_tape().clear()
    active_tape().enabled = True
