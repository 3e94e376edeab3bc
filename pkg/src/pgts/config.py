"""Experiment configuration files.

A config is one JSON document::

    {
      "schema_version": 1,
      "preset": "hetero",
      "bandit": {"K": 5, "T": 50, "prior_mean": 0.0, "prior_var": 1.0, "noise_var": [...]},
      "training": {"iterations": 1000, "batch_size": 1000, "step_size": 0.05,
                   "metric": "mean", "baseline": "self", "seed": 0},
      "evaluation": {"n_instances": 10000, "seed": 1},
      "output_dir": "runs/hetero"
    }

When ``preset`` is given every other field is optional and overrides the
preset field by field; without it the ``bandit`` section must be complete.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .bandit import PRESETS, BanditConfig
from .estimators import BaselineKind, MetricKind, check_pair

SCHEMA_VERSION = 1

TRAINING_DEFAULTS = {
    "standard": {"iterations": 1000, "batch_size": 5000, "step_size": 0.01},
    "hetero": {"iterations": 1000, "batch_size": 1000, "step_size": 0.05},
    "many_arms": {"iterations": 1000, "batch_size": 1000, "step_size": 0.05},
}
EVAL_DEFAULTS = {"standard": 20000, "hetero": 10000, "many_arms": 10000}

_number_or_list = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 1}]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "preset": {"enum": sorted(PRESETS)},
        "bandit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "K": {"type": "integer", "minimum": 1},
                "T": {"type": "integer", "minimum": 1},
                "prior_mean": _number_or_list,
                "prior_var": _number_or_list,
                "noise_var": _number_or_list,
            },
        },
        "training": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "iterations": {"type": "integer", "minimum": 0},
                "batch_size": {"type": "integer", "minimum": 1},
                "step_size": {"type": "number", "exclusiveMinimum": 0},
                "metric": {"enum": [m.value for m in MetricKind]},
                "baseline": {"enum": [b.value for b in BaselineKind]},
                "seed": {"type": "integer", "minimum": 0},
                "checkpoint_every": {"type": "integer", "minimum": 0},
                "max_grad_norm": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
        },
        "evaluation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_instances": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "output_dir": {"type": "string"},
    },
}

_BANDIT_FIELDS = ("K", "T", "prior_mean", "prior_var", "noise_var")


class ConfigError(ValueError):
    """Schema or value error, anchored to a line of the source document."""

    def __init__(self, message: str, line: int = 1, source: str = "<config>"):
        super().__init__(f"{source}:{line}: {message}")
        self.line = line


def _line_of(text: str, path) -> int:
    """Best-effort line number of the innermost key of ``path`` in ``text``."""
    line, pos = 1, 0
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.start()
        line = text.count("\n", 0, pos) + 1
    return line


@dataclass
class TrainingSection:
    iterations: int = 1000
    batch_size: int = 1000
    step_size: float = 0.05
    metric: str = "mean"
    baseline: str = "self"
    seed: int = 0
    checkpoint_every: int = 0
    max_grad_norm: float | None = None


@dataclass
class EvaluationSection:
    n_instances: int = 10000
    seed: int = 1


@dataclass
class ExperimentConfig:
    bandit: BanditConfig
    training: TrainingSection = field(default_factory=TrainingSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    output_dir: str = "."
    preset: str | None = None

    def to_dict(self) -> dict:
        d = {"schema_version": SCHEMA_VERSION}
        if self.preset is not None:
            d["preset"] = self.preset
        d["bandit"] = self.bandit.to_dict()
        d["training"] = dict(vars(self.training))
        d["evaluation"] = dict(vars(self.evaluation))
        d["output_dir"] = self.output_dir
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def preset_config(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig(
        bandit=PRESETS[name],
        training=TrainingSection(**TRAINING_DEFAULTS[name]),
        evaluation=EvaluationSection(n_instances=EVAL_DEFAULTS[name]),
        preset=name,
    )


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "document"
        raise ConfigError(f"{where}: {err.message}", _line_of(text, err.absolute_path), source)

    base = preset_config(doc["preset"]) if "preset" in doc else None
    bandit_doc = doc.get("bandit", {})
    if base is not None:
        merged = base.bandit.to_dict()
        merged.update(bandit_doc)
    else:
        missing = [f for f in _BANDIT_FIELDS if f not in bandit_doc]
        if missing:
            line = _line_of(text, ["bandit"]) if "bandit" in doc else 1
            raise ConfigError(f"bandit: missing field(s) {', '.join(missing)} (no preset given)", line, source)
        merged = bandit_doc
    try:
        bandit = BanditConfig.from_dict(merged)
    except ValueError as exc:
        raise ConfigError(f"bandit: {exc}", _line_of(text, ["bandit"]), source) from None

    training = dict(vars(base.training)) if base else {}
    training.update(doc.get("training", {}))
    try:
        check_pair(training.get("metric", "mean"), training.get("baseline", "self"))
    except ValueError as exc:
        raise ConfigError(f"training: {exc}", _line_of(text, ["training", "baseline"]), source) from None
    evaluation = dict(vars(base.evaluation)) if base else {}
    evaluation.update(doc.get("evaluation", {}))
    return ExperimentConfig(
        bandit=bandit,
        training=TrainingSection(**training),
        evaluation=EvaluationSection(**evaluation),
        output_dir=doc.get("output_dir", "."),
        preset=doc.get("preset"),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", 1, str(path)) from None
    return parse_config(text, str(path))
