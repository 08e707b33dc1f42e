"""Run configuration: nested dataclasses with strict loading.

Configs are plain mappings (YAML or JSON files). Unknown keys, wrong
types and invariant violations raise :class:`ConfigError` naming the
dotted key. :func:`to_dict` emits the fully resolved form, which loads
back to an equal :class:`RunConfig`.
"""

from __future__ import annotations

import dataclasses
import json
import re
import sys
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .attacks import KINDS as ATTACK_KINDS, NONE, AttackConfig
from .dp import DEFAULT_DELTA, DEFAULT_EPSILON_CAP
from .errors import ConfigError
from .incentive import IncentiveParams
from .model import IID, NON_IID
from .reputation import BandParams
from .sle import SleParams

SLE = "sle"
FEDAVG = "fedavg"
AGGREGATORS = (SLE, FEDAVG)
SOURCES = ("synthetic", "csv", "idx")


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"
    mode: str = IID
    dirichlet_alpha: float = 0.5
    # synthetic blobs
    num_classes: int = 10
    num_features: int = 100
    samples_per_client: int = 200
    separation: float = 4.0
    # file sources
    csv_path: str | None = None
    label_column: str | None = None
    numeric: tuple[str, ...] = ()
    categorical: dict[str, tuple[str, ...]] = field(default_factory=dict)
    label_levels: tuple[str, ...] | None = None
    idx_images: str | None = None
    idx_labels: str | None = None
    max_samples: int | None = None

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ConfigError(f"must be one of {SOURCES}", key="data.source")
        if self.mode not in (IID, NON_IID):
            raise ConfigError(f"must be {IID!r} or {NON_IID!r}", key="data.mode")
        if not self.dirichlet_alpha > 0:
            raise ConfigError("must be > 0", key="data.dirichlet_alpha")
        for name in ("num_classes", "num_features", "samples_per_client"):
            if getattr(self, name) < 1:
                raise ConfigError("must be positive", key=f"data.{name}")
        if self.source == "csv" and (self.csv_path is None or self.label_column is None):
            raise ConfigError("csv source needs csv_path and label_column", key="data.csv_path")
        if self.source == "idx" and (self.idx_images is None or self.idx_labels is None):
            raise ConfigError("idx source needs idx_images and idx_labels", key="data.idx_images")
        if self.max_samples is not None and self.max_samples < 1:
            raise ConfigError("must be positive", key="data.max_samples")


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 2
    lr: float = 0.1
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError("must be positive", key="training.epochs")
        if not self.lr > 0:
            raise ConfigError("must be > 0", key="training.lr")
        if self.batch_size < 1:
            raise ConfigError("must be positive", key="training.batch_size")


@dataclass(frozen=True)
class PrivacyConfig:
    eps_min: float = 10.0
    eps_max: float = 12.0
    delta: float = DEFAULT_DELTA
    clip_norm: float = 1.0
    epsilon_cap: float = DEFAULT_EPSILON_CAP

    def __post_init__(self) -> None:
        if not 0 < self.eps_min <= self.eps_max:
            raise ConfigError("need 0 < eps_min <= eps_max", key="privacy.eps_min")
        if self.eps_max > self.epsilon_cap:
            raise ConfigError("exceeds privacy.epsilon_cap", key="privacy.eps_max")
        if not 0 < self.delta < 1:
            raise ConfigError("must lie in (0, 1)", key="privacy.delta")
        if not self.clip_norm > 0:
            raise ConfigError("must be > 0", key="privacy.clip_norm")


@dataclass(frozen=True)
class ResourceConfig:
    capacity_min: float = 2.0e5
    capacity_max: float = 8.0e5
    overhead_min: float = 0.01
    overhead_max: float = 0.05
    jitter_cv: float = 0.05
    liar_overreport: float = 3.0

    def __post_init__(self) -> None:
        if not 0 < self.capacity_min <= self.capacity_max:
            raise ConfigError("need 0 < capacity_min <= capacity_max", key="resources.capacity_min")
        if not 0 <= self.overhead_min <= self.overhead_max:
            raise ConfigError("need 0 <= overhead_min <= overhead_max", key="resources.overhead_min")
        if not 0 <= self.jitter_cv < 0.5:
            raise ConfigError("must lie in [0, 0.5)", key="resources.jitter_cv")
        if not self.liar_overreport > 1:
            raise ConfigError("must be > 1", key="resources.liar_overreport")


@dataclass(frozen=True)
class RunConfig:
    num_clients: int = 100
    rounds: int = 20
    liar_fraction: float = 0.1
    resource_liar_share: float = 0.5
    aggregator: str = SLE
    reputation_enabled: bool = True
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    privacy: PrivacyConfig = field(default_factory=PrivacyConfig)
    resources: ResourceConfig = field(default_factory=ResourceConfig)
    reputation: BandParams = field(default_factory=BandParams)
    sle: SleParams = field(default_factory=SleParams)
    incentive: IncentiveParams = field(default_factory=IncentiveParams)
    attack: AttackConfig = field(default_factory=AttackConfig)

    def __post_init__(self) -> None:
        if self.num_clients < 1:
            raise ConfigError("must be positive", key="num_clients")
        if self.rounds < 0:
            raise ConfigError("must be >= 0", key="rounds")
        if not 0 <= self.liar_fraction <= 1:
            raise ConfigError(f"must lie in [0, 1], got {self.liar_fraction}", key="liar_fraction")
        if not 0 <= self.resource_liar_share <= 1:
            raise ConfigError("must lie in [0, 1]", key="resource_liar_share")
        if self.aggregator not in AGGREGATORS:
            raise ConfigError(f"must be one of {AGGREGATORS}", key="aggregator")
        if self.seed < 0:
            raise ConfigError("must be >= 0", key="seed")
        if self.attack.kind != NONE and self.liar_fraction + self.attack.attacker_fraction > 1:
            raise ConfigError(
                "liar_fraction + attack.attacker_fraction must not exceed 1",
                key="attack.attacker_fraction",
            )


# --------------------------------------------------------------------------
# loading / dumping


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e-5`` style scalars as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+][0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


def _type_name(tp) -> str:
    return getattr(tp, "__name__", str(tp))


def _coerce(value: Any, tp, key: str):
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"expected a section, got {type(value).__name__}", key=key)
        return _build(tp, value, key + ".")
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError("must not be null", key=key)
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(value, inner, key)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {type(value).__name__}", key=key)
        (inner, _) = typing.get_args(tp)
        return tuple(_coerce(v, inner, f"{key}[{i}]") for i, v in enumerate(value))
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"expected a mapping, got {type(value).__name__}", key=key)
        kt, vt = typing.get_args(tp)
        return {_coerce(k, kt, key): _coerce(v, vt, f"{key}.{k}") for k, v in value.items()}
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected bool, got {type(value).__name__}", key=key)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected int, got {type(value).__name__}", key=key)
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected float, got {type(value).__name__}", key=key)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected str, got {type(value).__name__}", key=key)
        return value
    raise ConfigError(f"unsupported field type {_type_name(tp)}", key=key)


def _build(cls, raw: dict, prefix: str = ""):
    hints = typing.get_type_hints(cls, vars(sys.modules[cls.__module__]))
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for k, v in raw.items():
        if k not in names:
            raise ConfigError("unknown key", key=f"{prefix}{k}")
        kwargs[k] = _coerce(v, hints[k], f"{prefix}{k}")
    return cls(**kwargs)


def from_dict(raw: dict | None) -> RunConfig:
    """Build a validated :class:`RunConfig`; missing keys take defaults."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return _build(RunConfig, raw)


def to_dict(config: RunConfig) -> dict:
    def plain(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, (list, tuple)):
            return [plain(v) for v in obj]
        if isinstance(obj, dict):
            return {k: plain(v) for k, v in obj.items()}
        return obj

    return plain(config)


def dumps(config: RunConfig) -> str:
    """Canonical JSON text; floats use shortest round-trip repr."""
    return json.dumps(to_dict(config), indent=2, sort_keys=True) + "\n"


def loads(text: str, fmt: str = "yaml") -> RunConfig:
    try:
        raw = json.loads(text) if fmt == "json" else yaml.load(text, Loader=_Loader)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return from_dict(raw)


def parse_config(source: str | Path | None = None, text: str | None = None) -> RunConfig:
    """Load a config file (``.json`` as JSON, anything else as YAML) or raw text.

    ``source`` of ``"-"`` reads stdin. With neither argument the defaults are returned.
    """
    if text is not None:
        return loads(text, "yaml")
    if source is None:
        return RunConfig()
    if str(source) == "-":
        return loads(sys.stdin.read(), "yaml")
    path = Path(source)
    try:
        body = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return loads(body, "json" if path.suffix == ".json" else "yaml")


def with_overrides(config: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Apply dotted-key overrides such as ``{"reputation.reliability_threshold": 0.3}``."""
    raw = to_dict(config)
    for dotted, value in overrides.items():
        node = raw
        *parents, leaf = dotted.split(".")
        for p in parents:
            if not isinstance(node.get(p), dict):
                raise ConfigError("unknown section", key=dotted)
            node = node[p]
        if leaf not in node:
            raise ConfigError("unknown key", key=dotted)
        node[leaf] = value
    return from_dict(raw)


__all__ = [
    "AGGREGATORS",
    "ATTACK_KINDS",
    "DataConfig",
    "FEDAVG",
    "PrivacyConfig",
    "ResourceConfig",
    "RunConfig",
    "SLE",
    "TrainingConfig",
    "dumps",
    "from_dict",
    "loads",
    "parse_config",
    "to_dict",
    "with_overrides",
]
