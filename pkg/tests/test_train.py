import numpy as np
import pytest

from ghyena.autodiff import Tensor
from ghyena.core.errors import NumericalError
from ghyena.nn.model import GHyenaModel, load_model
from ghyena.recall.data import STREAMS, AssocRecallInstance, generate_dataset, rotate_instance
from ghyena.recall.train import (
    batch_sequence,
    evaluate,
    mean_predictor_mse,
    mse_loss,
    resume_state,
    train,
)
from ghyena.schemas.config import ModelConfig, TrainConfig


class ConstantModel:
    """Stand-in model returning fixed predictions batch by batch."""

    def __init__(self, predictions):
        self.predictions = list(predictions)

    def __call__(self, seq):
        batch = seq.x.shape[0]
        out, self.predictions = self.predictions[:batch], self.predictions[batch:]
        return Tensor(np.stack(out))


@pytest.fixture(scope="function")
def tiny_data(tiny_train_config):
    cfg = tiny_train_config
    train_set = generate_dataset(cfg.train_size, cfg.vocab_size, cfg.seq_len, cfg.seed, STREAMS["train"])
    val_set = generate_dataset(cfg.val_size, cfg.vocab_size, cfg.seq_len, cfg.seed, STREAMS["val"])
    return train_set, val_set


def test_batch_sequence_stacks_instances(tiny_data):
    seq = batch_sequence(tiny_data[0][:3])
    assert seq.f.shape == (3, 8, 16)
    assert seq.x.shape == (3, 8, 3)


def test_batch_sequence_needs_equal_lengths(tiny_data):
    other = generate_dataset(1, 3, 10, seed=1, stream=0)
    with pytest.raises(ValueError):
        batch_sequence([tiny_data[0][0], other[0]])


def test_mse_loss_divides_by_components():
    loss = mse_loss(Tensor(np.zeros((2, 3))), np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]))
    assert loss.item() == pytest.approx((1.0 + 4.0) / 6.0)


def test_evaluate_perfect_and_zero_predictors():
    targets = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, -1.0]), np.array([0.0, 1.0, 0.0])]
    data = [AssocRecallInstance(tokens=np.zeros((4, 3)), target=t) for t in targets]
    assert evaluate(ConstantModel(targets), data, batch_size=2) == pytest.approx(0.0)
    assert evaluate(ConstantModel([np.zeros(3)] * 3), data) == pytest.approx(1.0 / 3.0)
    with pytest.raises(ValueError):
        evaluate(ConstantModel([]), [])


def test_mean_predictor_mse_closed_form():
    data = [AssocRecallInstance(tokens=np.zeros((4, 3)), target=t)
            for t in (np.array([2.0, 0.0, 0.0]), np.array([0.0, 0.0, 0.0]))]
    assert mean_predictor_mse(data) == pytest.approx(1.0 / 3.0)


def test_evaluation_is_rotation_invariant(small_model_config, tiny_data, rotations):
    model = GHyenaModel(small_model_config, seed=0)
    data = tiny_data[1]
    base = evaluate(model, data)
    for rot in rotations(2, seed=6):
        rotated = [rotate_instance(inst, rot) for inst in data]
        assert abs(evaluate(model, rotated) - base) < 1e-6


def test_one_epoch_is_finite(small_model_config, tiny_train_config, tiny_data):
    cfg = tiny_train_config.model_copy(update={"epochs": 2})
    model = GHyenaModel(small_model_config, seed=0)
    seen = []
    result = train(model, cfg, train_set=tiny_data[0], val_set=tiny_data[1], on_epoch=seen.append)
    assert [m.epoch for m in result.history] == [0, 1]
    assert seen == result.history
    assert all(np.isfinite(m.train_mse) and np.isfinite(m.val_mse) for m in result.history)
    assert result.optimizer.step == 2 * 2


def test_training_reduces_loss_on_fixed_data(small_model_config, tiny_train_config, tiny_data):
    cfg = tiny_train_config.model_copy(update={"epochs": 6, "batch_size": 8, "base_lr": 3e-3})
    model = GHyenaModel(small_model_config, seed=0)
    result = train(model, cfg, train_set=tiny_data[0], val_set=tiny_data[1])
    assert result.history[-1].train_mse < result.history[0].train_mse


def test_on_the_fly_training_draws_fresh_data(small_model_config, tiny_train_config):
    cfg = tiny_train_config.model_copy(update={"on_the_fly": True, "epochs": 2, "train_size": 4})
    result = train(GHyenaModel(small_model_config, seed=0), cfg)
    assert len(result.history) == 2


def test_non_finite_loss_aborts_with_diagnostics(small_model_config, tiny_train_config, tiny_data):
    model = GHyenaModel(small_model_config, seed=0)
    model.params["embed.weight"].data[0, 0] = np.nan
    with pytest.raises(NumericalError) as info:
        train(model, tiny_train_config, train_set=tiny_data[0], val_set=tiny_data[1])
    assert info.value.diagnostics["epoch"] == 0
    assert info.value.diagnostics["batch"] == 0
    assert "embed.weight" in info.value.diagnostics["param_norms"]


def test_resumed_training_continues_epoch_numbering(tmp_path, small_model_config, tiny_train_config, tiny_data):
    stem = tmp_path / "model"
    cfg = tiny_train_config.model_copy(update={"epochs": 2})
    train(GHyenaModel(small_model_config, seed=0), cfg, train_set=tiny_data[0], val_set=tiny_data[1], checkpoint=stem)

    model, meta, extra = load_model(stem)
    assert meta.epoch == 2
    resume = resume_state(model, meta, extra)
    assert resume.optimizer.step == 4
    more = cfg.model_copy(update={"epochs": 3})
    result = train(model, more, train_set=tiny_data[0], val_set=tiny_data[1], resume=resume, checkpoint=stem)
    assert [m.epoch for m in result.history] == [0, 1, 2]
    assert load_model(stem)[1].epoch == 3


class Interrupted(Exception):
    pass


def test_resumed_run_matches_uninterrupted_run(tmp_path, small_model_config, tiny_train_config, tiny_data):
    cfg = tiny_train_config.model_copy(update={"epochs": 3})
    full = train(GHyenaModel(small_model_config, seed=0), cfg, train_set=tiny_data[0], val_set=tiny_data[1])

    def stop_after_second_epoch(metrics):
        if metrics.epoch == 1:
            raise Interrupted

    stem = tmp_path / "model"
    with pytest.raises(Interrupted):
        train(GHyenaModel(small_model_config, seed=0), cfg, train_set=tiny_data[0], val_set=tiny_data[1],
              checkpoint=stem, on_epoch=stop_after_second_epoch)
    model, meta, extra = load_model(stem)
    assert meta.epoch == 2
    resumed = train(model, cfg, train_set=tiny_data[0], val_set=tiny_data[1], resume=resume_state(model, meta, extra))

    assert resumed.history == full.history
    for name, p in full.model.params.items():
        np.testing.assert_array_equal(resumed.model.params[name].data, p.data)


@pytest.mark.slow
def test_trained_model_beats_half_the_mean_predictor():
    config = ModelConfig(hidden_dim=32, depth=2)
    test_mse, baseline = [], []
    for seed in (0, 1, 2):
        cfg = TrainConfig(vocab_size=3, seq_len=128, train_size=600, val_size=100, test_size=100,
                          epochs=100, warmup_epochs=10, on_the_fly=False, seed=seed)
        test_set = generate_dataset(cfg.test_size, cfg.vocab_size, cfg.seq_len, seed, STREAMS["test"])
        result = train(GHyenaModel(config, seed=seed), cfg)
        test_mse.append(evaluate(result.model, test_set))
        baseline.append(mean_predictor_mse(test_set))
    assert np.mean(test_mse) < 0.5 * np.mean(baseline)
