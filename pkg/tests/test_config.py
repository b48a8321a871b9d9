import argparse
import logging
from pathlib import Path

import pytest

from ghyena.commands import deps
from ghyena.core.config import Settings
from ghyena.core.errors import ConfigError
from ghyena.core.logging import configure_logging
from ghyena.schemas.config import RunConfig


def namespace(**kwargs):
    base = {"config": None, "overrides": [], "out": None, "seed": None, "threads": None}
    base.update(kwargs)
    return argparse.Namespace(**base)


def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("GHYENA_THREADS", "4")
    monkeypatch.setenv("GHYENA_LOG_LEVEL", "debug")
    s = Settings()
    assert s.THREADS == 4
    assert s.LOG_LEVEL == "DEBUG"


def test_settings_reject_zero_threads():
    with pytest.raises(ValueError):
        Settings(THREADS=0)


def test_configure_logging_installs_one_handler():
    configure_logging(Settings(LOG_LEVEL="WARNING"))
    configure_logging(Settings(LOG_LEVEL="DEBUG"))
    logger = logging.getLogger("ghyena")
    assert sum(1 for h in logger.handlers if getattr(h, "_ghyena", False)) == 1
    assert logger.level == logging.DEBUG


def test_merge_order(tmp_path):
    config = tmp_path / "cfg.env"
    config.write_text("epochs=20\nbatch_size=2\nseed=3\n")
    args = namespace(config=config, overrides=["batch_size=5", "seed=4"], seed=9)
    values = deps.collect_values(args, deps.TRAIN_KEYS)
    assert values == {"epochs": "20", "batch_size": "5", "seed": 9}
    cfg = deps.resolve_train_config(values)
    assert (cfg.epochs, cfg.batch_size, cfg.seed) == (20, 5, 9)


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError):
        deps.collect_values(namespace(overrides=["hidden_dim=8"]), deps.TRAIN_KEYS)


def test_list_values_are_split():
    values = deps.collect_values(namespace(overrides=["lengths=8, 16,32"]), deps.BENCH_KEYS)
    assert deps.resolve_bench_config(values).lengths == [8, 16, 32]


def test_model_config_takes_block_toggles_at_top_level():
    values = {"hidden_mult": 0.25, "kv_norm": "false", "gating_mode": "K", "depth": 3}
    cfg = deps.resolve_model_config(values)
    assert cfg.hidden_dim == 20
    assert cfg.depth == 3
    assert cfg.block_config.kv_norm is False
    assert cfg.block_config.gating_mode == "K"


def test_model_config_base_is_overridden():
    base = {"hidden_dim": 12, "block_config": {"num_global_tokens": 2}}
    cfg = deps.resolve_model_config({"local_context": False}, base=base)
    assert cfg.hidden_dim == 12
    assert cfg.block_config.num_global_tokens == 2
    assert cfg.block_config.local_context is False


def test_bool_flag():
    assert deps.bool_flag("Yes") is True
    assert deps.bool_flag("0") is False
    with pytest.raises(argparse.ArgumentTypeError):
        deps.bool_flag("maybe")


def test_run_config_creates_output_dir(tmp_path):
    run = deps.get_run_config("train", namespace(out=tmp_path / "a" / "b"), 7, Settings())
    assert run.out_dir.is_dir()
    assert run.stream_seed("val") == [7, sum(map(ord, "val"))]


def test_run_config_default_location(tmp_path):
    settings = Settings(OUTPUT_DIR=str(tmp_path / "runs"))
    run = deps.get_run_config("bench", namespace(), 0, settings)
    assert run.out_dir == Path(tmp_path / "runs" / "bench")


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ValueError):
        RunConfig(command="x", out_dir=blocker / "sub")


def test_thread_override():
    assert deps.get_settings(namespace(threads=3)).THREADS == 3
    with pytest.raises(ValueError):
        deps.get_settings(namespace(threads=0))
