"""Hierarchical experiment configuration with environment overrides.

The YAML file mirrors :class:`ExperimentConfig`; every leaf can be overridden
with ``PIPELINE_<SECTION>_<KEY>=<yaml value>``, e.g.
``PIPELINE_TRAINING_EPOCHS=5`` or ``PIPELINE_MODEL_CORES='[BAE1, VAE1]'``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from planktonad.autoencoder import TrainingConfig
from planktonad.autoencoder.architectures import ConvPair, Core
from planktonad.dataset import ALL, AugmentationPolicy
from planktonad.errors import DomainError
from planktonad.features import Extractor
from planktonad.oneclass import classifier_kind

ENV_PREFIX = "PIPELINE_"
SOURCES = ("coco", "yolo", "synthetic")
THRESHOLD_SOURCES = ("validation", "test")

DEFAULTS: dict[str, dict[str, Any]] = {
    "dataset": {
        "source": "synthetic",
        "path": None,
        "image_root": None,
        "species": ALL,
        "image_size": None,
        "aspect_ratios": None,
        "synthetic": {"n_ok": 500, "n_nok": 100, "size": [128, 128], "seed": 0},
    },
    "split": {"train_frac": 0.7, "val_count": None, "test_count": None, "seed": 0},
    "model": {"cores": ["BAE1"], "conv_pairs": ["ConvM3"], "latent": {}},
    "training": {
        "epochs": 200, "batch_size": 32, "learning_rate": 1e-4, "betas": [0.9, 0.999],
        "weight_decay": 0.0, "patience": 20, "seed": 0, "restore_best": True,
        "augmentation": {},
    },
    "features": {"extractors": ["ErrMetrics"], "descriptor_weights": None, "hardnet1_source": "difference"},
    "classifier": {"kinds": ["RobustCovariance"], "contamination": 0.01, "n_neighbors": 20, "n_trees": 100},
    "threshold": {"source": "validation"},
    "output": {"dir": "out", "grid_id": None, "parallel": 1},
}


def _merge(base: dict, update: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def apply_env_overrides(doc: dict, environ: Mapping[str, str] | None = None) -> dict:
    """Apply ``PIPELINE_<SECTION>_<KEY>`` variables; values are parsed as YAML.

    Section and key are matched case-insensitively against the known
    structure; a key may itself contain underscores.
    """
    environ = os.environ if environ is None else environ
    out = copy.deepcopy(doc)
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section = next((s for s in out if rest.startswith(s + "_")), None)
        if section is None:
            raise DomainError(f"environment override {name}: unknown section")
        key = rest[len(section) + 1:]
        if key not in out[section]:
            raise DomainError(f"environment override {name}: unknown key {key!r} in section {section!r}")
        out[section][key] = yaml.safe_load(raw)
    return out


@dataclass
class ExperimentConfig:
    """Validated experiment settings; ``raw`` keeps the merged document."""

    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    # section accessors ---------------------------------------------------

    @property
    def dataset(self) -> dict:
        return self.raw["dataset"]

    @property
    def species(self) -> str:
        return str(self.raw["dataset"]["species"])

    @property
    def cores(self) -> list[Core]:
        return [Core(c) for c in _as_list(self.raw["model"]["cores"])]

    @property
    def conv_pairs(self) -> list[ConvPair]:
        return [ConvPair(p) for p in _as_list(self.raw["model"]["conv_pairs"])]

    @property
    def extractors(self) -> list[Extractor]:
        return [Extractor(e) for e in _as_list(self.raw["features"]["extractors"])]

    @property
    def classifiers(self) -> list:
        return [classifier_kind(c) for c in _as_list(self.raw["classifier"]["kinds"])]

    @property
    def latent(self) -> dict:
        return dict(self.raw["model"].get("latent") or {})

    @property
    def threshold_source(self) -> str:
        return self.raw["threshold"]["source"]

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["output"]["dir"])

    @property
    def parallel(self) -> int:
        return int(self.raw["output"]["parallel"])

    def training_config(self) -> TrainingConfig:
        doc = dict(self.raw["training"])
        aug = dict(doc.pop("augmentation", None) or {})
        aug.setdefault("seed", doc.get("seed", 0))
        return TrainingConfig.from_dict({**doc, "augmentation": AugmentationPolicy(**aug)})

    @property
    def grid_id(self) -> str:
        """Explicit ``output.grid_id`` or a hash of everything except the ranges,
        so that widening a grid resumes into the same directory."""
        explicit = self.raw["output"].get("grid_id")
        if explicit:
            return str(explicit)
        doc = copy.deepcopy(self.raw)
        for section, key in (("model", "cores"), ("model", "conv_pairs"), ("features", "extractors"),
                             ("classifier", "kinds"), ("output", "parallel"), ("output", "dir")):
            doc[section].pop(key, None)
        digest = hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()
        return f"{self.species.replace(' ', '_')}-{digest[:10]}"

    # validation ----------------------------------------------------------

    def validate(self, check_paths: bool = True) -> ExperimentConfig:
        """Raise DomainError on any invalid setting; returns self."""
        unknown = set(self.raw) - set(DEFAULTS)
        if unknown:
            raise DomainError(f"unknown config sections: {sorted(unknown)}")
        ds = self.dataset
        if ds["source"] not in SOURCES:
            raise DomainError(f"dataset.source must be one of {SOURCES}, got {ds['source']!r}")
        if ds["source"] != "synthetic":
            if not ds.get("path"):
                raise DomainError(f"dataset.path is required for source {ds['source']!r}")
            if check_paths and not Path(ds["path"]).exists():
                raise DomainError(f"dataset.path does not exist: {ds['path']}")
        if ds.get("image_size") is not None:
            size = _as_list(ds["image_size"])
            if len(size) != 2 or any(int(v) < 32 or int(v) % 32 for v in size):
                raise DomainError(f"dataset.image_size must be [height, width] in multiples of 32, got {size}")
        ranges = {
            "model.cores": (Core, self.raw["model"]["cores"]),
            "model.conv_pairs": (ConvPair, self.raw["model"]["conv_pairs"]),
            "features.extractors": (Extractor, self.raw["features"]["extractors"]),
        }
        for name, (enum_cls, values) in ranges.items():
            values = _as_list(values)
            if not values:
                raise DomainError(f"{name} must not be empty")
            for v in values:
                try:
                    enum_cls(v)
                except ValueError:
                    raise DomainError(f"unknown value {v!r} in {name}; expected one of "
                                      f"{[m.value for m in enum_cls]}") from None
            if len(set(values)) != len(values):
                raise DomainError(f"{name} contains duplicates: {values}")
        kinds = _as_list(self.raw["classifier"]["kinds"])
        if not kinds:
            raise DomainError("classifier.kinds must not be empty")
        resolved = [classifier_kind(k) for k in kinds]
        if len(set(resolved)) != len(resolved):
            raise DomainError(f"classifier.kinds contains duplicates: {kinds}")
        if self.threshold_source not in THRESHOLD_SOURCES:
            raise DomainError(f"threshold.source must be one of {THRESHOLD_SOURCES}")
        if self.raw["features"]["hardnet1_source"] not in ("difference", "original"):
            raise DomainError("features.hardnet1_source must be 'difference' or 'original'")
        weights = self.raw["features"].get("descriptor_weights")
        if check_paths and weights and not Path(weights).exists():
            raise DomainError(f"features.descriptor_weights does not exist: {weights}")
        if self.parallel < 1:
            raise DomainError("output.parallel must be >= 1")
        try:
            self.training_config()
        except (TypeError, ValueError) as exc:
            raise DomainError(f"invalid training section: {exc}") from exc
        return self

    # persistence ---------------------------------------------------------

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=False)

    def with_overrides(self, **sections: Mapping) -> ExperimentConfig:
        return ExperimentConfig(_merge(self.raw, sections))


def load_config(path: str | Path | None = None, overrides: Mapping | None = None,
                environ: Mapping[str, str] | None = None, check_paths: bool = True) -> ExperimentConfig:
    """Defaults <- YAML file <- environment <- ``overrides`` (nested mapping)."""
    doc = copy.deepcopy(DEFAULTS)
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(loaded, Mapping):
            raise DomainError(f"{path}: top level of the config must be a mapping")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise DomainError(f"{path}: unknown config sections {sorted(unknown)}")
        doc = _merge(doc, loaded)
    doc = apply_env_overrides(doc, environ)
    if overrides:
        doc = _merge(doc, overrides)
    return ExperimentConfig(doc).validate(check_paths=check_paths)
