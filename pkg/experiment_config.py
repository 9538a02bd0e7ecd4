#!/usr/bin/env python3
"""
Experiment configuration
Environment settings (.env aware) and TOML experiment files parsed into
frozen dataclasses. Every missing or invalid field raises ConfigError.
"""

from __future__ import annotations

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from core_types import ConfigError, FeedbackSystem, OrdinalFeedbackError, check_seed, parse_system
from losses import DEFAULT_DPO_BETA, DEFAULT_HINGE_MARGIN, LossKind
from reward_trainer import (
    DEFAULT_DIMENSION,
    DEFAULT_HOLDOUT_SIZE,
    DEFAULT_TEMPERATURE,
    TrainConfig,
)
from soft_label_lab import DEFAULT_CLASSES, DEFAULT_ENSEMBLE_SIZE, DEFAULT_TEACHER_POOL

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("granularity", "tied_ratio", "rademacher", "softlabel")


@dataclass(frozen=True)
class Settings:
    """Process-level settings from the environment."""
    threads: int = 1
    db_path: Optional[str] = None
    log_level: str = "INFO"


def get_settings() -> Settings:
    """Read ORDFB_THREADS, ORDFB_DB_PATH and ORDFB_LOG_LEVEL."""
    raw_threads = os.getenv("ORDFB_THREADS", "1")
    try:
        threads = int(raw_threads)
    except ValueError:
        raise ConfigError("ORDFB_THREADS", f"not an integer: {raw_threads!r}") from None
    if threads < 1:
        raise ConfigError("ORDFB_THREADS", "must be at least 1")
    return Settings(
        threads=threads,
        db_path=os.getenv("ORDFB_DB_PATH") or None,
        log_level=os.getenv("ORDFB_LOG_LEVEL", "INFO").upper(),
    )


# ============================================================
# Sections
# ============================================================

@dataclass(frozen=True)
class WorldConfig:
    dimension: int = DEFAULT_DIMENSION
    temperature: float = DEFAULT_TEMPERATURE
    seed: int = 0


@dataclass(frozen=True)
class TrainSection:
    n: int = 500
    holdout_size: int = DEFAULT_HOLDOUT_SIZE
    loss: str = "ce"
    learning_rate: float = 0.5
    epochs: int = 200
    batch_size: Optional[int] = None
    l2: float = 0.0
    momentum: float = 0.0
    eval_every: int = 10
    hinge_margin: float = DEFAULT_HINGE_MARGIN
    dpo_beta: float = DEFAULT_DPO_BETA

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            loss=LossKind(self.loss),
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            l2=self.l2,
            momentum=self.momentum,
            eval_every=self.eval_every,
            hinge_margin=self.hinge_margin,
            dpo_beta=self.dpo_beta,
        )


@dataclass(frozen=True)
class GranularitySection:
    scales: Tuple[FeedbackSystem, ...]


@dataclass(frozen=True)
class TiedRatioSection:
    ratios: Tuple[float, ...]


@dataclass(frozen=True)
class RademacherSection:
    systems: Tuple[FeedbackSystem, ...]
    n: int = 4
    n_datasets: int = 5000
    mode: str = "exact"
    loss: str = "ce"
    hypotheses: str = "tiny"


@dataclass(frozen=True)
class SoftLabelSection:
    k: int = DEFAULT_CLASSES
    dimension: int = 2
    n: int = 6
    n_datasets: int = 500
    mode: str = "exact"
    ensemble_size: int = DEFAULT_ENSEMBLE_SIZE
    teacher_pool: int = DEFAULT_TEACHER_POOL
    hypotheses: int = 8
    radius: float = 1.5


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    seeds: Tuple[int, ...]
    output_dir: Path
    world: WorldConfig = field(default_factory=WorldConfig)
    train: TrainSection = field(default_factory=TrainSection)
    granularity: Optional[GranularitySection] = None
    tied_ratio: Optional[TiedRatioSection] = None
    rademacher: Optional[RademacherSection] = None
    softlabel: Optional[SoftLabelSection] = None

    def as_dict(self) -> Dict[str, Any]:
        """Stable JSON-ready view stored with each run."""
        def systems(values):
            return [s if isinstance(s, str) else list(s.levels) for s in values]

        out: Dict[str, Any] = {
            "name": self.name,
            "kind": self.kind,
            "seeds": list(self.seeds),
            "world": asdict(self.world),
            "train": asdict(self.train),
        }
        if self.granularity:
            out["granularity"] = {"scales": systems(self.granularity.scales)}
        if self.tied_ratio:
            out["tied_ratio"] = {"ratios": list(self.tied_ratio.ratios)}
        if self.rademacher:
            section = asdict(self.rademacher)
            section["systems"] = systems(self.rademacher.systems)
            out["rademacher"] = section
        if self.softlabel:
            out["softlabel"] = asdict(self.softlabel)
        return out


# ============================================================
# Parsing
# ============================================================

_MISSING = object()


def _get(table: Dict[str, Any], key: str, path: str, kind: Union[type, Tuple[type, ...]],
         default: Any = _MISSING) -> Any:
    name = f"{path}.{key}" if path else key
    if key not in table:
        if default is _MISSING:
            raise ConfigError(name, "missing")
        return default
    value = table[key]
    # bool is an int subclass; reject it for numeric fields
    if isinstance(value, bool) and bool not in (kind if isinstance(kind, tuple) else (kind,)):
        raise ConfigError(name, f"expected {kind}, got bool")
    if not isinstance(value, kind):
        raise ConfigError(name, f"expected {kind}, got {type(value).__name__}")
    return value


def _number(table: Dict[str, Any], key: str, path: str, default: float) -> float:
    return float(_get(table, key, path, (int, float), default))


def _positive(value, name: str):
    if value is not None and value <= 0:
        raise ConfigError(name, "must be positive")
    return value


def _systems(raw: Any, name: str) -> Tuple[FeedbackSystem, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(name, "expected a nonempty list")
    try:
        return tuple(parse_system(item) for item in raw)
    except (OrdinalFeedbackError, TypeError) as e:
        raise ConfigError(name, str(e)) from None


def _section(data: Dict[str, Any], key: str) -> Dict[str, Any]:
    value = data.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(key, "expected a table")
    return value


def parse_config(data: Dict[str, Any], base_dir: Path = Path(".")) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed TOML document."""
    exp = _section(data, "experiment")
    if not exp:
        raise ConfigError("experiment", "missing")

    name = _get(exp, "name", "experiment", str)
    kind = _get(exp, "kind", "experiment", str)
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError("experiment.kind", f"must be one of {', '.join(EXPERIMENT_KINDS)}")

    seeds_raw = _get(exp, "seeds", "experiment", list)
    if not seeds_raw:
        raise ConfigError("experiment.seeds", "must not be empty")
    if not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds_raw):
        raise ConfigError("experiment.seeds", "seeds must be integers")
    try:
        seeds = tuple(check_seed(s) for s in seeds_raw)
    except OrdinalFeedbackError as e:
        raise ConfigError("experiment.seeds", str(e)) from None

    output_dir = Path(_get(exp, "output_dir", "experiment", str, f"runs/{name}"))
    if not output_dir.is_absolute():
        output_dir = base_dir / output_dir

    w = _section(data, "world")
    world = WorldConfig(
        dimension=_positive(_get(w, "dimension", "world", int, DEFAULT_DIMENSION),
                            "world.dimension"),
        temperature=_positive(_number(w, "temperature", "world", DEFAULT_TEMPERATURE),
                              "world.temperature"),
        seed=_get(w, "seed", "world", int, 0),
    )

    t = _section(data, "train")
    train = TrainSection(
        n=_positive(_get(t, "n", "train", int, 500), "train.n"),
        holdout_size=_positive(_get(t, "holdout_size", "train", int, DEFAULT_HOLDOUT_SIZE),
                               "train.holdout_size"),
        loss=_get(t, "loss", "train", str, "ce"),
        learning_rate=_positive(float(_get(t, "learning_rate", "train", (int, float), 0.5)),
                                "train.learning_rate"),
        epochs=_get(t, "epochs", "train", int, 200),
        batch_size=_positive(_get(t, "batch_size", "train", int, None), "train.batch_size"),
        l2=float(_get(t, "l2", "train", (int, float), 0.0)),
        momentum=float(_get(t, "momentum", "train", (int, float), 0.0)),
        eval_every=_positive(_get(t, "eval_every", "train", int, 10), "train.eval_every"),
        hinge_margin=_positive(_number(t, "hinge_margin", "train", DEFAULT_HINGE_MARGIN),
                               "train.hinge_margin"),
        dpo_beta=_positive(float(_get(t, "dpo_beta", "train", (int, float), DEFAULT_DPO_BETA)),
                           "train.dpo_beta"),
    )
    if train.loss not in {k.value for k in LossKind}:
        raise ConfigError("train.loss", f"unknown loss {train.loss!r}")
    if train.epochs < 0 or train.l2 < 0 or not 0.0 <= train.momentum < 1.0:
        raise ConfigError("train", "epochs and l2 must be >= 0, momentum in [0, 1)")

    config = ExperimentConfig(name=name, kind=kind, seeds=seeds, output_dir=output_dir,
                              world=world, train=train)

    if kind == "granularity":
        g = _section(data, "granularity")
        section = GranularitySection(scales=_systems(g.get("scales"), "granularity.scales"))
        return replace(config, granularity=section)

    if kind == "tied_ratio":
        r = _section(data, "tied_ratio")
        ratios = _get(r, "ratios", "tied_ratio", list)
        if not ratios or not all(isinstance(x, (int, float)) and 0.0 <= x <= 1.0 for x in ratios):
            raise ConfigError("tied_ratio.ratios", "expected a nonempty list of numbers in [0, 1]")
        return replace(config, tied_ratio=TiedRatioSection(tuple(float(x) for x in ratios)))

    if kind == "rademacher":
        r = _section(data, "rademacher")
        section = RademacherSection(
            systems=_systems(r.get("systems"), "rademacher.systems"),
            n=_positive(_get(r, "n", "rademacher", int, 4), "rademacher.n"),
            n_datasets=_positive(_get(r, "n_datasets", "rademacher", int, 5000),
                                 "rademacher.n_datasets"),
            mode=_get(r, "mode", "rademacher", str, "exact"),
            loss=_get(r, "loss", "rademacher", str, "ce"),
            hypotheses=_get(r, "hypotheses", "rademacher", str, "tiny"),
        )
        _check_mode(section.mode, "rademacher.mode")
        if section.loss not in {k.value for k in LossKind}:
            raise ConfigError("rademacher.loss", f"unknown loss {section.loss!r}")
        if section.hypotheses != "tiny":
            raise ConfigError("rademacher.hypotheses",
                              "only the builtin 'tiny' class is available")
        return replace(config, rademacher=section)

    s = _section(data, "softlabel")
    section = SoftLabelSection(
        k=_get(s, "k", "softlabel", int, DEFAULT_CLASSES),
        dimension=_positive(_get(s, "dimension", "softlabel", int, 2), "softlabel.dimension"),
        n=_positive(_get(s, "n", "softlabel", int, 6), "softlabel.n"),
        n_datasets=_positive(_get(s, "n_datasets", "softlabel", int, 500), "softlabel.n_datasets"),
        mode=_get(s, "mode", "softlabel", str, "exact"),
        ensemble_size=_positive(_get(s, "ensemble_size", "softlabel", int, DEFAULT_ENSEMBLE_SIZE),
                                "softlabel.ensemble_size"),
        teacher_pool=_positive(_get(s, "teacher_pool", "softlabel", int, DEFAULT_TEACHER_POOL),
                               "softlabel.teacher_pool"),
        hypotheses=_positive(_get(s, "hypotheses", "softlabel", int, 8), "softlabel.hypotheses"),
        radius=_positive(_number(s, "radius", "softlabel", 1.5), "softlabel.radius"),
    )
    if section.k < 2:
        raise ConfigError("softlabel.k", "need at least 2 classes")
    _check_mode(section.mode, "softlabel.mode")
    return replace(config, softlabel=section)


def _check_mode(mode: str, name: str) -> None:
    if mode == "exact":
        return
    if mode.startswith("mc:") and mode[3:].isdigit() and int(mode[3:]) >= 2:
        return
    raise ConfigError(name, "expected 'exact' or 'mc:<count>' with count >= 2")


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate a TOML experiment file."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(str(path), f"invalid TOML: {e}") from None
    config = parse_config(data)
    logger.info("Loaded %s experiment %r from %s", config.kind, config.name, path)
    return config
