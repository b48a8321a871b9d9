"""Shared command dependencies: settings, config files and resolved run configuration.

Values are merged as schema defaults < ``--config`` file < ``--set KEY=VALUE`` < named
flags. Config files are flat ``key=value`` text read with python-dotenv; keys are the
field names of the config schemas (block toggles sit at top level).
"""
import argparse
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

from dotenv import dotenv_values

from ghyena.commands.router import Argument, arg
from ghyena.core.config import Settings, settings as default_settings
from ghyena.core.errors import ConfigError
from ghyena.schemas.config import BenchConfig, BlockConfig, CheckConfig, ModelConfig, RunConfig, TrainConfig

BLOCK_KEYS = set(BlockConfig.model_fields)
MODEL_KEYS = (set(ModelConfig.model_fields) - {"block_config"}) | {"hidden_mult"}
TRAIN_KEYS = set(TrainConfig.model_fields)
BENCH_KEYS = set(BenchConfig.model_fields)
CHECK_KEYS = set(CheckConfig.model_fields)
LIST_KEYS = {"ops", "lengths", "oracle_lengths", "stability_scales"}


def csv_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def bool_flag(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


COMMON_ARGUMENTS: List[Argument] = [
    arg("--config", type=Path, default=None, help="flat key=value config file"),
    arg("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override any config key; repeatable"),
    arg("--out", type=Path, default=None, help="output directory (default: $GHYENA_OUTPUT_DIR/<command>)"),
    arg("--seed", type=int, default=None),
    arg("--threads", type=int, default=None, help="override GHYENA_THREADS"),
]

MODEL_ARGUMENTS: List[Argument] = [
    arg("--hidden-dim", dest="hidden_dim", type=int, default=None),
    arg("--hidden-mult", dest="hidden_mult", type=float, default=None, help="hidden width as a multiple of 80"),
    arg("--depth", type=int, default=None),
    arg("--block", choices=["hyena", "gtransformer"], default=None),
    arg("--attention", choices=["dot", "cross"], default=None),
    arg("--gating-mode", dest="gating_mode", default=None, help="QK, K or none"),
    arg("--kv-norm", dest="kv_norm", type=bool_flag, default=None),
    arg("--local-context", dest="local_context", type=bool_flag, default=None),
    arg("--global-context", dest="global_context", type=bool_flag, default=None),
    arg("--geometric-conv", dest="geometric_conv", type=bool_flag, default=None),
    arg("--neighborhood", choices=["chain", "spatial"], default=None),
]


def get_settings(args: argparse.Namespace) -> Settings:
    threads = getattr(args, "threads", None)
    if threads is None:
        return default_settings
    return default_settings.model_copy(update={"THREADS": Settings(THREADS=threads).THREADS})


def read_config_file(path: Optional[Path]) -> Dict[str, str]:
    if path is None:
        return {}
    if not Path(path).is_file():
        raise ConfigError(f"config file {path} does not exist")
    return {k: v for k, v in dotenv_values(path).items() if v is not None}


def parse_overrides(items: Iterable[str]) -> Dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def collect_values(args: argparse.Namespace, known: Iterable[str]) -> Dict[str, Any]:
    """Merged configuration values for ``known`` keys; unknown keys are an error."""
    known = set(known)
    values: Dict[str, Any] = dict(read_config_file(getattr(args, "config", None)))
    values.update(parse_overrides(getattr(args, "overrides", [])))
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    for key in known:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    for key in LIST_KEYS & set(values):
        if isinstance(values[key], str):
            values[key] = csv_list(values[key])
    return values


def _pick(values: Mapping[str, Any], keys: Iterable[str]) -> Dict[str, Any]:
    return {k: values[k] for k in keys if k in values}


def resolve_model_config(values: Mapping[str, Any], base: Optional[Mapping[str, Any]] = None) -> ModelConfig:
    data = dict(base or {})
    block = dict(data.pop("block_config", {}) or {})
    block.update(_pick(values, BLOCK_KEYS))
    data.update(_pick(values, MODEL_KEYS - {"hidden_mult"}))
    if values.get("hidden_mult") is not None:
        data["hidden_dim"] = ModelConfig.scaled(float(values["hidden_mult"])).hidden_dim
    return ModelConfig(block_config=BlockConfig(**block), **data)


def resolve_train_config(values: Mapping[str, Any], base: Optional[Mapping[str, Any]] = None) -> TrainConfig:
    data = dict(base or {})
    data.update(_pick(values, TRAIN_KEYS))
    return TrainConfig(**data)


def resolve_bench_config(values: Mapping[str, Any]) -> BenchConfig:
    return BenchConfig(**_pick(values, BENCH_KEYS))


def resolve_check_config(values: Mapping[str, Any]) -> CheckConfig:
    return CheckConfig(**_pick(values, CHECK_KEYS))


def get_run_config(command: str, args: argparse.Namespace, seed: int, settings: Settings) -> RunConfig:
    """Validates (and creates) the output directory before any work starts."""
    out_dir = args.out if args.out is not None else Path(settings.OUTPUT_DIR) / command
    return RunConfig(
        command=command,
        out_dir=out_dir,
        seed=seed,
        config_file=getattr(args, "config", None),
        overrides=parse_overrides(getattr(args, "overrides", [])),
    )
