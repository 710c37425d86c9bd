"""Experiment configuration: plain-text key/value files with sections.

Parsed with :mod:`configparser`; unknown sections or keys are rejected so
typos fail before any work starts.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

MODELS = ("qosdiff", "upcc", "ipcc", "uipcc", "pmf", "biasmf")


@dataclass(frozen=True)
class DatasetConfig:
    name: str = "dataset"
    format: str = "csv"             # "wsdream" | "csv"
    matrix: str = ""
    user_list: str = ""
    service_list: str = ""
    path: str = ""
    user_fields: tuple = ("Country", "AS")
    service_fields: tuple = ("Country", "AS", "Provider")

    def validate(self):
        if self.format not in ("wsdream", "csv"):
            raise ValueError(f"unknown dataset format {self.format!r}")
        if self.format == "wsdream" and not (
            self.matrix and self.user_list and self.service_list
        ):
            raise ValueError("wsdream format needs matrix, user_list, service_list")
        if self.format == "csv" and not self.path:
            raise ValueError("csv format needs path")


@dataclass(frozen=True)
class ExperimentSection:
    model: str = "qosdiff"
    densities: tuple = (0.05,)
    seeds: tuple = (1, 2, 3)
    noise_levels: tuple = (0.0,)
    output_dir: str = "runs"

    def validate(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {MODELS}")
        for d in self.densities:
            if not 0.0 < d <= 1.0:
                raise ValueError(f"density {d} outside (0, 1]")
        for p in self.noise_levels:
            if not 0.0 <= p <= 100.0:
                raise ValueError(f"noise level {p} outside [0, 100]")
        if not self.seeds:
            raise ValueError("at least one seed required")


@dataclass(frozen=True)
class QoSDiffSection:
    dim: int = 256
    heads: int = 1
    lam: float = 0.2
    batch_size: int = 256
    max_epochs: int = 150
    patience: int = 15
    lr: float = 1e-3
    weight_decay: float = 1e-2
    tau: float = 0.5
    gamma: float = 1.0
    d_h: int = 128
    d_g: int = 128
    d_o: int = 64
    d_d: int = 64
    dropout_keep: float = 0.7
    leaky_slope: float = 0.2
    eval_batch_size: int = 8192

    def validate(self):
        if self.dim <= 2:
            raise ValueError("embedding dimension must exceed 2")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")


@dataclass(frozen=True)
class BaselineSection:
    top_k: int = 10
    factors: int = 10
    reg: float = 0.01
    lr: float = 0.01
    epochs: int = 100
    mix_weight: float = 0.5

    def validate(self):
        if self.top_k < 1 or self.factors < 1:
            raise ValueError("top_k and factors must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    qosdiff: QoSDiffSection = field(default_factory=QoSDiffSection)
    baseline: BaselineSection = field(default_factory=BaselineSection)

    def validate(self):
        self.dataset.validate()
        self.experiment.validate()
        self.qosdiff.validate()
        self.baseline.validate()
        return self


_SCHEMA = {
    "dataset": {
        "name": str, "format": str, "matrix": str, "user_list": str,
        "service_list": str, "path": str,
        "user_fields": "strtuple", "service_fields": "strtuple",
    },
    "experiment": {
        "model": str, "densities": "floattuple", "seeds": "inttuple",
        "noise_levels": "floattuple", "output_dir": str,
    },
    "qosdiff": {
        "dim": int, "heads": int, "lambda": float, "batch_size": int,
        "max_epochs": int, "patience": int, "lr": float,
        "weight_decay": float, "tau": float, "gamma": float,
        "d_h": int, "d_g": int, "d_o": int, "d_d": int,
        "dropout_keep": float, "leaky_slope": float, "eval_batch_size": int,
    },
    "baseline": {
        "top_k": int, "factors": int, "reg": float, "lr": float,
        "epochs": int, "mix_weight": float,
    },
}

_KEY_RENAMES = {"lambda": "lam"}
_SECTION_TYPES = {
    "dataset": DatasetConfig,
    "experiment": ExperimentSection,
    "qosdiff": QoSDiffSection,
    "baseline": BaselineSection,
}


def _convert(value, kind):
    if kind is str:
        return value.strip()
    if kind is int:
        return int(value)
    if kind is float:
        return float(value)
    parts = [v.strip() for v in value.split(",") if v.strip()]
    if kind == "strtuple":
        return tuple(parts)
    if kind == "inttuple":
        return tuple(int(v) for v in parts)
    if kind == "floattuple":
        return tuple(float(v) for v in parts)
    raise AssertionError(kind)


def parse_config_text(text):
    """Parse config file contents into a validated ExperimentConfig."""
    parser = configparser.ConfigParser()
    parser.read_string(text)
    kwargs = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ValueError(f"unknown config section [{section}]")
        schema = _SCHEMA[section]
        values = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ValueError(f"unknown key {key!r} in section [{section}]")
            values[_KEY_RENAMES.get(key, key)] = _convert(raw, schema[key])
        kwargs[section] = _SECTION_TYPES[section](**values)
    return ExperimentConfig(**kwargs).validate()


def parse_config_file(path):
    with open(path) as f:
        return parse_config_text(f.read())
