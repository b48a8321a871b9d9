import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from ghyena.autodiff.params import ParamStore
from ghyena.autodiff.tensor import set_default_dtype
from ghyena.nn.geometry import GeometricSequence
from ghyena.schemas.config import BlockConfig, ModelConfig, TrainConfig


# Every test starts from 64-bit math, whatever a previous test switched to
@pytest.fixture(autouse=True)
def float64_mode():
    set_default_dtype("float64")
    yield
    set_default_dtype("float64")


@pytest.fixture(scope="function")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="function")
def rotations():
    def make(count, seed=0):
        mats = Rotation.random(count, random_state=seed).as_matrix()
        return list(mats.reshape(count, 3, 3))

    return make


@pytest.fixture(scope="function")
def store():
    return ParamStore()


@pytest.fixture(scope="function")
def block_config():
    return BlockConfig(num_global_tokens=4, siren_hidden=8)


@pytest.fixture(scope="function")
def small_model_config(block_config):
    return ModelConfig(hidden_dim=8, depth=2, block_config=block_config)


@pytest.fixture(scope="function")
def tiny_train_config():
    return TrainConfig(
        epochs=2, warmup_epochs=1, batch_size=4, train_size=8, val_size=4, test_size=4,
        seq_len=8, on_the_fly=False, seed=7,
    )


@pytest.fixture(scope="function")
def make_seq(rng):
    def make(n=10, d=8, batch=()):
        return GeometricSequence(f=rng.normal(size=batch + (n, d)), x=rng.normal(size=batch + (n, 3)))

    return make
