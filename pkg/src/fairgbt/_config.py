from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Mapping, Optional, Tuple

from ._bayes_opt import SearchSpace
from ._errors import DataError
from ._fair_training import FairnessConfig
from ._gbt import TrainConfig

_TRUE = {"1", "yes", "true", "on"}
_FALSE = {"0", "no", "false", "off"}


@dataclass(frozen=True)
class RunSettings:
    """
    Pipeline settings outside the model configs

    Attributes
    ----------
    seed : int
        split seed, fold seed and generator seed
    test_fraction : float
    folds : int
    threads : int
    """

    seed: int = 0
    test_fraction: float = 0.2
    folds: int = 5
    threads: int = 1

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError("test_fraction must be in (0, 1)")
        if self.folds < 2:
            raise DataError(f"folds must be >= 2, got {self.folds}")
        if self.threads < 1:
            raise DataError(f"threads must be >= 1, got {self.threads}")


@dataclass(frozen=True)
class RunConfig:
    """
    Merged configuration of one CLI run, echoed into report provenance

    Attributes
    ----------
    train : TrainConfig
    fairness : FairnessConfig
    search : SearchSpace
    run : RunSettings
    fixed_theta : tuple of 4 floats, optional
        theta set in the [fairness] section of a config file; mitigate
        trains with it instead of searching
    """

    train: TrainConfig = field(default_factory=TrainConfig)
    fairness: FairnessConfig = field(default_factory=FairnessConfig)
    search: SearchSpace = field(default_factory=SearchSpace)
    run: RunSettings = field(default_factory=RunSettings)
    fixed_theta: Optional[Tuple[float, float, float, float]] = None

    def to_dict(self):
        return {
            "train": asdict(self.train),
            "fairness": self.fairness.to_dict(),
            "search": self.search.to_dict(),
            "run": asdict(self.run),
            "fixed_theta": (
                None if self.fixed_theta is None else list(self.fixed_theta)
            ),
        }


_SECTIONS = {
    "train": TrainConfig,
    "fairness": FairnessConfig,
    "search": SearchSpace,
    "run": RunSettings,
}
# key spelled as in the report -> dataclass field
_ALIASES = {"fairness": {"lambda": "lam"}}
# [fairness] keys that pin theta
_THETA_KEYS = ("lambda", "w1", "w2", "w3")


def _coerce(raw: Any, default: Any, key: str):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(f"not a boolean: '{text}'")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(v) for v in text.split(","))
    except ValueError as err:
        raise DataError(f"invalid value for '{key}': {err}") from err
    return text


def _changes(defaults, section: str, values: Mapping[str, Any]):
    known = {f.name for f in fields(defaults)}
    aliases = _ALIASES.get(section, {})
    changes = {}
    for key, raw in values.items():
        name = aliases.get(key, key)
        if name not in known:
            raise DataError(f"unknown option '{key}' in section [{section}]")
        if raw is None:
            continue
        changes[name] = _coerce(
            raw, getattr(defaults, name), f"{section}.{key}"
        )
    return changes


def read_run_config(path) -> Dict[str, Dict[str, str]]:
    """
    Reads a run configuration INI file

    Parameters
    ----------
    path : str
        file with any of the sections [train], [fairness], [search], [run]

    Returns
    -------
    dict
        section -> option -> raw string
    """

    if not os.path.isfile(path):
        raise FileNotFoundError(f"The file {path} does not exist")
    config = configparser.ConfigParser()
    config.optionxform = str
    try:
        config.read(path, encoding="utf-8")
    except configparser.Error as err:
        raise DataError(f"invalid config file {path}: {err}") from err
    unknown = set(config.sections()) - set(_SECTIONS)
    if unknown:
        raise DataError(f"unknown sections {sorted(unknown)} in {path}")
    return {name: dict(config[name]) for name in config.sections()}


def build_run_config(
    flags: Optional[Mapping[str, Mapping[str, Any]]] = None,
    config_path: Optional[str] = None,
) -> RunConfig:
    """
    Merge defaults, command line flags and a config file

    The config file wins over flags, flags win over the defaults. Flags
    that were not given are passed as None. A [fairness] section that sets
    any of lambda, w1, w2, w3 fixes theta for mitigate; unset components
    keep their defaults.

    Parameters
    ----------
    flags : mapping, optional
        section -> option -> value or None
    config_path : str, optional

    Returns
    -------
    RunConfig
    """

    from_file = read_run_config(config_path) if config_path else {}
    merged = {}
    for section, cls in _SECTIONS.items():
        defaults = cls()
        changes = {}
        for layer in ((flags or {}).get(section, {}),
                      from_file.get(section, {})):
            changes.update(_changes(defaults, section, layer))
        merged[section] = replace(defaults, **changes)
    fairness = from_file.get("fairness", {})
    if any(key in fairness for key in _THETA_KEYS):
        merged["fixed_theta"] = merged["fairness"].theta
    return RunConfig(**merged)
