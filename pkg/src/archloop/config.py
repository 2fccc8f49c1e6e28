"""Declarative run configuration: a single JSON document, strictly validated.

Unknown keys are rejected and every diagnostic names the offending field, so
a typo fails fast instead of silently running with defaults.  Secrets never
live in the file; endpoints name the environment variable holding the key.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from archloop.llm import LlmEndpoint
from archloop.model import Ablation, DatasetSpec, RunConfig, SamplingParams, TrainConfig
from archloop.datasets import get_dataset

DEFAULT_SIM = {"dimension": 8, "noise_amplitude": 0.02, "failure_rate": 0.2}


class ConfigError(ValueError):
    """Invalid configuration; the message names the field and the problem."""


def _check_keys(data: Mapping[str, Any], allowed: set[str], context: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}; allowed keys are {sorted(allowed)}")


def _get(data: Mapping[str, Any], key: str, kind: type | tuple, context: str, default: Any = ...) -> Any:
    if key not in data:
        if default is ...:
            raise ConfigError(f"{context}.{key}: required field is missing")
        return default
    value = data[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{context}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


@dataclass(frozen=True)
class SimParams:
    dimension: int = 8
    noise_amplitude: float = 0.02
    failure_rate: float = 0.2


@dataclass(frozen=True)
class CliConfig:
    """On-disk run description: the loop config plus backend wiring."""

    run: RunConfig
    backend: str  # "sim" | "llm"
    sim: SimParams = field(default_factory=SimParams)
    generator_endpoint: LlmEndpoint | None = None
    improver_endpoint: LlmEndpoint | None = None
    worker_argv: tuple[str, ...] = ()
    template_dir: str | None = None
    log_path: str | None = None
    train_seed: int = 43


_TOP_LEVEL_KEYS = {
    "max_iterations",
    "window_size",
    "seed",
    "evaluation_timeout",
    "extended_prompt",
    "top_k_exemplars",
    "ablation",
    "backend",
    "dataset",
    "sampling",
    "train",
    "train_seed",
    "llm",
    "worker_argv",
    "template_dir",
    "log_path",
    "sim",
}

_SAMPLING_KEYS = {"temperature", "top_p", "max_new_tokens"}
_TRAIN_KEYS = {
    "epochs",
    "momentum",
    "weight_decay",
    "learning_rate",
    "cosine_annealing",
    "batch_size",
    "random_crop_pad",
    "horizontal_flip",
    "normalize",
    "crop_padding",
    "subset_fraction",
}
_ENDPOINT_KEYS = {"base_url", "model_name", "api_key_env", "request_timeout", "max_retries", "retry_backoff", "debug_log_path"}
_SIM_KEYS = {"dimension", "noise_amplitude", "failure_rate"}
_DATASET_KEYS = {"name", "input_channels", "input_height", "input_width", "num_classes", "task_description"}


def _parse_dataset(value: Any) -> DatasetSpec:
    if isinstance(value, str):
        try:
            return get_dataset(value)
        except ValueError as exc:
            raise ConfigError(f"dataset: {exc}") from exc
    if isinstance(value, dict):
        _check_keys(value, _DATASET_KEYS, "dataset")
        try:
            return DatasetSpec.from_dict(value)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"dataset: {exc}") from exc
    raise ConfigError("dataset: expected a registry name or an inline dataset object")


def _parse_endpoint(data: Mapping[str, Any], context: str) -> LlmEndpoint:
    _check_keys(data, _ENDPOINT_KEYS, context)
    try:
        return LlmEndpoint(
            base_url=_get(data, "base_url", str, context),
            model_name=_get(data, "model_name", str, context),
            api_key_env=_get(data, "api_key_env", str, context, default="ARCHLOOP_API_KEY"),
            request_timeout=_get(data, "request_timeout", float, context, default=120.0),
            max_retries=_get(data, "max_retries", int, context, default=3),
            retry_backoff=_get(data, "retry_backoff", float, context, default=1.0),
            debug_log_path=_get(data, "debug_log_path", (str, type(None)), context, default=None),
        )
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def parse_cli_config(data: Mapping[str, Any]) -> CliConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("top level: expected a JSON object")
    _check_keys(data, _TOP_LEVEL_KEYS, "top level")

    sampling_data = _get(data, "sampling", dict, "top level", default={})
    _check_keys(sampling_data, _SAMPLING_KEYS, "sampling")
    try:
        sampling = SamplingParams(
            temperature=_get(sampling_data, "temperature", float, "sampling", default=0.7),
            top_p=_get(sampling_data, "top_p", float, "sampling", default=0.9),
            max_new_tokens=_get(sampling_data, "max_new_tokens", int, "sampling", default=2048),
        )
    except ValueError as exc:
        raise ConfigError(f"sampling: {exc}") from exc

    train_data = _get(data, "train", dict, "top level", default={})
    _check_keys(train_data, _TRAIN_KEYS, "train")
    try:
        train = TrainConfig(**train_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from exc

    ablation_name = _get(data, "ablation", str, "top level", default="None")
    try:
        ablation = Ablation(ablation_name)
    except ValueError:
        raise ConfigError(
            f"ablation: unknown variant {ablation_name!r}; expected one of {[a.value for a in Ablation]}"
        ) from None

    try:
        run = RunConfig(
            max_iterations=_get(data, "max_iterations", int, "top level"),
            dataset=_parse_dataset(data.get("dataset", "CIFAR-10")),
            seed=_get(data, "seed", int, "top level", default=0),
            sampling=sampling,
            train=train,
            window_size=_get(data, "window_size", int, "top level", default=5),
            evaluation_timeout=_get(data, "evaluation_timeout", float, "top level", default=1800.0),
            extended_prompt=_get(data, "extended_prompt", bool, "top level", default=False),
            top_k_exemplars=_get(data, "top_k_exemplars", int, "top level", default=5),
            ablation=ablation,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        # RunConfig validation messages already name the offending field.
        raise ConfigError(str(exc)) from exc

    backend = _get(data, "backend", str, "top level", default="sim")
    if backend not in ("sim", "llm"):
        raise ConfigError(f"backend: expected 'sim' or 'llm', got {backend!r}")

    generator_endpoint = None
    improver_endpoint = None
    llm_data = _get(data, "llm", dict, "top level", default=None)
    if llm_data is not None:
        _check_keys(llm_data, {"generator", "improver"}, "llm")
        if "generator" in llm_data:
            generator_endpoint = _parse_endpoint(llm_data["generator"], "llm.generator")
        if "improver" in llm_data:
            improver_endpoint = _parse_endpoint(llm_data["improver"], "llm.improver")
        if improver_endpoint is None:
            improver_endpoint = generator_endpoint
    if backend == "llm" and generator_endpoint is None:
        raise ConfigError("llm.generator: required when backend is 'llm'")

    sim_data = _get(data, "sim", dict, "top level", default={})
    _check_keys(sim_data, _SIM_KEYS, "sim")
    sim = SimParams(
        dimension=_get(sim_data, "dimension", int, "sim", default=8),
        noise_amplitude=_get(sim_data, "noise_amplitude", float, "sim", default=0.02),
        failure_rate=_get(sim_data, "failure_rate", float, "sim", default=0.2),
    )
    if sim.dimension < 1:
        raise ConfigError("sim.dimension: must be >= 1")
    if not 0.0 <= sim.failure_rate <= 1.0:
        raise ConfigError("sim.failure_rate: must be in [0, 1]")

    worker_argv = _get(data, "worker_argv", list, "top level", default=[])
    if not all(isinstance(item, str) for item in worker_argv):
        raise ConfigError("worker_argv: expected a list of strings")
    if backend == "llm" and not worker_argv:
        raise ConfigError("worker_argv: required when backend is 'llm'")

    return CliConfig(
        run=run,
        backend=backend,
        sim=sim,
        generator_endpoint=generator_endpoint,
        improver_endpoint=improver_endpoint,
        worker_argv=tuple(worker_argv),
        template_dir=_get(data, "template_dir", (str, type(None)), "top level", default=None),
        log_path=_get(data, "log_path", (str, type(None)), "top level", default=None),
        train_seed=_get(data, "train_seed", int, "top level", default=43),
    )


def load_cli_config(path: str | Path) -> CliConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_cli_config(data)
