"""Experiment configuration: a JSON document validated before any computation.

Unknown keys are rejected at every level. ``apply_overrides`` edits the raw
document with dotted ``key=value`` pairs before validation.
"""
import hashlib
import json
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetSpec(_Strict):
    kind: Optional[str] = "blobs"
    params: dict = Field(default_factory=dict)
    path: Optional[str] = None
    test_path: Optional[str] = None
    test_fraction: float = Field(0.25, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _source(self):
        if self.path is None and self.kind is None:
            raise ValueError("dataset needs a generator kind or a CSV path")
        return self


class OODSetSpec(_Strict):
    name: str
    tag: Literal["near", "far"]
    kind: Optional[str] = None
    params: dict = Field(default_factory=dict)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _source(self):
        if (self.kind is None) == (self.path is None):
            raise ValueError(f"OOD set {self.name!r} needs exactly one of kind / path")
        return self


class OODSpec(_Strict):
    sets: list[OODSetSpec] = Field(default_factory=list)


class ModelSpec(_Strict):
    hidden: list[int] = Field(default_factory=lambda: [64, 32], min_length=1)
    capture: Optional[list[int]] = None

    @model_validator(mode="after")
    def _layout(self):
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden widths must be >= 1")
        if self.capture is None:
            self.capture = list(range(len(self.hidden)))
        if not self.capture:
            raise ValueError("capture set is empty")
        if any(not 0 <= c < len(self.hidden) for c in self.capture):
            raise ValueError(f"capture layers {self.capture} outside [0, {len(self.hidden)})")
        if any(b <= a for a, b in zip(self.capture, self.capture[1:])):
            raise ValueError("capture layers must be strictly increasing")
        return self


class TrainSpec(_Strict):
    lr: float = Field(0.05, gt=0)
    epochs: int = Field(50, ge=0)
    batch_size: int = Field(32, ge=1)


class SteepnessSpec(_Strict):
    alpha: Optional[list[float]] = None
    search: Optional[list[list[float]]] = None
    monotone: bool = False

    @model_validator(mode="after")
    def _positive(self):
        if self.alpha is not None and any(a <= 0 for a in self.alpha):
            raise ValueError("steepness values must be positive")
        if self.search is not None:
            if any(not layer for layer in self.search):
                raise ValueError("every search layer needs a candidate")
            if any(a <= 0 for layer in self.search for a in layer):
                raise ValueError("steepness candidates must be positive")
        return self


class SubsetSpec(_Strict):
    enabled: bool = False
    fraction: float = Field(0.10, gt=0.0, le=1.0)
    radius: Union[float, Literal["auto-median-nn"]] = "auto-median-nn"

    @model_validator(mode="after")
    def _radius(self):
        if not isinstance(self.radius, str) and self.radius <= 0:
            raise ValueError("radius must be positive")
        return self


class ScorerSpec(_Strict):
    mode: Literal["sisom", "sisome", "energy"] = "sisom"
    r_avg_override: Optional[float] = Field(None, ge=0.0)
    class_source: Literal["true", "pseudo"] = "true"
    standardize: bool = False


class ALSpec(_Strict):
    initial_size: int = Field(20, ge=1)
    query_size: int = Field(20, ge=1)
    cycles: int = Field(5, ge=1)
    strategy: Literal["sisom", "sisome", "random", "energy", "coreset"] = "sisom"


class ExperimentConfig(_Strict):
    seed: int = 0
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    ood: OODSpec = Field(default_factory=OODSpec)
    model: ModelSpec = Field(default_factory=ModelSpec)
    train: TrainSpec = Field(default_factory=TrainSpec)
    steepness: SteepnessSpec = Field(default_factory=SteepnessSpec)
    subset: SubsetSpec = Field(default_factory=SubsetSpec)
    scorer: ScorerSpec = Field(default_factory=ScorerSpec)
    al: ALSpec = Field(default_factory=ALSpec)

    @model_validator(mode="after")
    def _cross(self):
        n_cap = len(self.model.capture)
        if self.steepness.alpha is not None and len(self.steepness.alpha) != n_cap:
            raise ValueError(f"steepness.alpha has {len(self.steepness.alpha)} values, model captures {n_cap}")
        if self.steepness.search is not None and len(self.steepness.search) != n_cap:
            raise ValueError(f"steepness.search has {len(self.steepness.search)} layers, model captures {n_cap}")
        return self

    def canonical_json(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc, overrides):
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = doc
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r}: {p!r} is not a section")
        node[parts[-1]] = _parse_value(value)
    return doc


def validate(doc):
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"invalid config:\n{exc}") from None


def load(path=None, overrides=None, seed=None):
    doc = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    doc = apply_overrides(doc, overrides)
    if seed is not None:
        doc["seed"] = seed
    return validate(doc)
