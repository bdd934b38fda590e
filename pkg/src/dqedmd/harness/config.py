"""Experiment configuration: YAML files with strict key checking.

Schema (all sections optional except ``system``; defaults in brackets)::

    system: pendulum | vanderpol | linear
    sim:
      dt: float [0.01]
      steps_per_trajectory: int [1000]
      n_trajectories: int [50]
      init_box: [[lo, hi], ...] [[-1, 1], [-1, 1]]
      seed: int [0]
    dictionary:
      n_centers: int [50]            # 0 = identity observables (DMD)
      box: [[lo, hi], ...] [sim.init_box]
      seed: int [1]
    quantizer:
      word_lengths: [int, ...] [2..12]
      range_policy: auto | explicit [auto]
      ranges: [[u_min, u_max], ...]  # required when explicit
      margin: float [0.05]
    trials: int [20]
    eval:
      holdout_fraction: float in [0, 1) [0.2]
      on_training: bool [false]
    master_seed: int [0]
    output_path: str [results.csv]
    threads: int [1]
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from ..dynamics import SimConfig, known_system_names

__all__ = [
    "ConfigError",
    "DictionaryConfig",
    "QuantizerConfig",
    "EvalConfig",
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "bundled_config",
    "BUNDLED_CONFIGS",
]

BUNDLED_CONFIGS = ("pendulum", "pendulum_desk", "vanderpol", "vanderpol_desk",
                   "linear_recovery")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class DictionaryConfig:
    n_centers: int = 50
    box: Optional[tuple] = None
    seed: int = 1


@dataclass(frozen=True)
class QuantizerConfig:
    word_lengths: tuple = tuple(range(2, 13))
    range_policy: str = "auto"
    ranges: Optional[tuple] = None
    margin: float = 0.05


@dataclass(frozen=True)
class EvalConfig:
    holdout_fraction: float = 0.2
    on_training: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    system: str
    sim: SimConfig = field(default_factory=lambda: SimConfig(n_trajectories=50))
    dictionary: DictionaryConfig = field(default_factory=DictionaryConfig)
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    trials: int = 20
    eval: EvalConfig = field(default_factory=EvalConfig)
    master_seed: int = 0
    output_path: str = "results.csv"
    threads: int = 1

    @property
    def dictionary_box(self):
        return self.dictionary.box if self.dictionary.box is not None else self.sim.init_box

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (output path and threads excluded)."""
        d = self.to_dict()
        d.pop("output_path")
        d.pop("threads")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, *, word_lengths=None, master_seed=None,
                       output_path=None, threads=None) -> "ExperimentConfig":
        cfg = self
        if word_lengths is not None:
            cfg = replace(cfg, quantizer=replace(
                cfg.quantizer, word_lengths=_word_lengths(list(word_lengths))))
        if master_seed is not None:
            cfg = replace(cfg, master_seed=_int(master_seed, "master_seed"))
        if output_path is not None:
            cfg = replace(cfg, output_path=str(output_path))
        if threads is not None:
            cfg = replace(cfg, threads=_int(threads, "threads", 1))
        return cfg


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


# -- field parsers ------------------------------------------------------------

def _section(raw, name, allowed):
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        where = f"{name}." if name else ""
        raise ConfigError(
            f"unknown key(s) {', '.join(where + k for k in unknown)}; "
            f"allowed: {', '.join(sorted(allowed))}")
    return raw


def _int(v, name, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}, got {v}")
    return v


def _float(v, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    return float(v)


def _box(v, name):
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{name}: expected a list of [lo, hi] pairs")
    out = []
    for i, pair in enumerate(v):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"{name}[{i}]: expected [lo, hi]")
        lo, hi = _float(pair[0], f"{name}[{i}]"), _float(pair[1], f"{name}[{i}]")
        if not hi > lo:
            raise ConfigError(f"{name}[{i}]: need lo < hi, got [{lo}, {hi}]")
        out.append((lo, hi))
    return tuple(out)


def _word_lengths(v):
    name = "quantizer.word_lengths"
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{name}: expected a list of integers")
    if not v:
        raise ConfigError(f"{name}: must not be empty")
    return tuple(_int(b, name, 1) for b in v)


def config_from_dict(raw: dict) -> ExperimentConfig:
    top = _section(raw, "", {f for f in ExperimentConfig.__dataclass_fields__})
    if "system" not in top:
        raise ConfigError("system: required")
    system = top["system"]
    if system not in known_system_names():
        raise ConfigError(
            f"system: unknown {system!r}; choose from {known_system_names()}")

    s = _section(top.get("sim"), "sim", SimConfig.__dataclass_fields__)
    defaults = SimConfig(n_trajectories=50)
    try:
        sim = SimConfig(
            dt=_float(s.get("dt", defaults.dt), "sim.dt"),
            steps_per_trajectory=_int(s.get("steps_per_trajectory",
                                            defaults.steps_per_trajectory),
                                      "sim.steps_per_trajectory", 1),
            n_trajectories=_int(s.get("n_trajectories", defaults.n_trajectories),
                                "sim.n_trajectories", 1),
            init_box=_box(s.get("init_box", defaults.init_box), "sim.init_box"),
            seed=_int(s.get("seed", defaults.seed), "sim.seed"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from exc

    d = _section(top.get("dictionary"), "dictionary",
                 DictionaryConfig.__dataclass_fields__)
    dictionary = DictionaryConfig(
        n_centers=_int(d.get("n_centers", 50), "dictionary.n_centers", 0),
        box=_box(d["box"], "dictionary.box") if d.get("box") is not None else None,
        seed=_int(d.get("seed", 1), "dictionary.seed"),
    )
    if dictionary.box is not None and len(dictionary.box) != len(sim.init_box):
        raise ConfigError("dictionary.box: dimension differs from sim.init_box")

    q = _section(top.get("quantizer"), "quantizer",
                 QuantizerConfig.__dataclass_fields__)
    policy = q.get("range_policy", "auto")
    if policy not in ("auto", "explicit"):
        raise ConfigError(f"quantizer.range_policy: expected auto or explicit, got {policy!r}")
    ranges = q.get("ranges")
    if policy == "explicit":
        if ranges is None:
            raise ConfigError("quantizer.ranges: required when range_policy is explicit")
        ranges = _box(ranges, "quantizer.ranges")
        if len(ranges) != len(sim.init_box):
            raise ConfigError("quantizer.ranges: need one [u_min, u_max] per state component")
    elif ranges is not None:
        raise ConfigError("quantizer.ranges: only allowed with range_policy explicit")
    margin = _float(q.get("margin", 0.05), "quantizer.margin")
    if margin < 0:
        raise ConfigError("quantizer.margin: must be >= 0")
    quantizer = QuantizerConfig(
        word_lengths=_word_lengths(q.get("word_lengths", list(range(2, 13)))),
        range_policy=policy, ranges=ranges, margin=margin)

    e = _section(top.get("eval"), "eval", EvalConfig.__dataclass_fields__)
    holdout = _float(e.get("holdout_fraction", 0.2), "eval.holdout_fraction")
    if not 0 <= holdout < 1:
        raise ConfigError(f"eval.holdout_fraction: must lie in [0, 1), got {holdout}")
    on_training = e.get("on_training", False)
    if not isinstance(on_training, bool):
        raise ConfigError("eval.on_training: expected true or false")

    return ExperimentConfig(
        system=system,
        sim=sim,
        dictionary=dictionary,
        quantizer=quantizer,
        trials=_int(top.get("trials", 20), "trials", 1),
        eval=EvalConfig(holdout, on_training),
        master_seed=_int(top.get("master_seed", 0), "master_seed"),
        output_path=str(top.get("output_path", "results.csv")),
        threads=_int(top.get("threads", 1), "threads", 1),
    )


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (e.g. ``"pendulum_desk"``)."""
    if name not in BUNDLED_CONFIGS:
        raise ConfigError(f"no bundled config {name!r}; have {list(BUNDLED_CONFIGS)}")
    return Path(str(resources.files("dqedmd") / "configs" / f"{name}.yaml"))


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML config. Bare bundled names are accepted too."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED_CONFIGS:
        p = bundled_config(str(path))
    try:
        raw = yaml.safe_load(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw)
