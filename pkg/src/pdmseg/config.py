"""Line-oriented ``key = value`` configuration with dotted section prefixes.

Grammar: one ``key = value`` pair per line; ``#`` starts a comment; blank
lines ignored.  Keys are dotted paths (``window.stride``).  Values are parsed
as int, then float, then bare string; comma-separated values become lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .changefinder import ChangeFinderConfig, PRESETS
from .prep import PrepConfig
from .trees import BoostParams, ForestParams


class ConfigError(ValueError):
    pass


def _parse_scalar(text: str) -> Any:
    t = text.strip()
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    if t.lower() in ("true", "false"):
        return t.lower() == "true"
    return t


def parse_kv(text: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if "," in val:
            out[key] = [_parse_scalar(v) for v in val.split(",")]
        else:
            out[key] = _parse_scalar(val)
    return out


def format_kv(d: dict[str, Any]) -> str:
    lines = []
    for k in sorted(d):
        v = d[k]
        if isinstance(v, list):
            lines.append(f"{k} = {', '.join(repr(x) if isinstance(x, float) else str(x) for x in v)}")
        elif isinstance(v, float):
            lines.append(f"{k} = {repr(v)}")
        else:
            lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


@dataclass
class PipelineConfig:
    data_path: str = ""
    noc_path: str = ""
    output_dir: str = "out"
    seed: int = 0
    split_fraction: float = 0.6
    threads: int = 1

    prep: PrepConfig = field(default_factory=PrepConfig)

    cf_preset: Optional[str] = "f1_optimal"
    cf: ChangeFinderConfig = field(default_factory=ChangeFinderConfig)

    window_minutes: float = 30.0
    window_stride: Optional[int] = None
    window_horizon: Optional[int] = None

    rf: ForestParams = field(default_factory=ForestParams)
    gbt: BoostParams = field(default_factory=BoostParams)
    ensemble_members: list[str] = field(default_factory=lambda: ["random_forest", "gbt"])

    health_window: int = 60
    raw_items: dict[str, Any] = field(default_factory=dict)

    def changefinder_config(self) -> ChangeFinderConfig:
        if self.cf_preset:
            if self.cf_preset not in PRESETS:
                raise ConfigError(f"unknown preset {self.cf_preset!r}")
            return PRESETS[self.cf_preset]
        return self.cf

    @staticmethod
    def from_items(items: dict[str, Any]) -> "PipelineConfig":
        cfg = PipelineConfig(raw_items=dict(items))
        simple = {
            "data.path": "data_path",
            "data.noc_path": "noc_path",
            "output.dir": "output_dir",
            "seed": "seed",
            "split.fraction": "split_fraction",
            "threads": "threads",
            "window.minutes": "window_minutes",
            "window.stride": "window_stride",
            "window.horizon": "window_horizon",
            "health.window": "health_window",
        }
        prep_kwargs, cf_kwargs, rf_kwargs, gbt_kwargs = {}, {}, {}, {}
        for key, val in items.items():
            if key in simple:
                setattr(cfg, simple[key], val)
            elif key == "cf.preset":
                cfg.cf_preset = None if val in ("", "none") else str(val)
            elif key.startswith("cf."):
                cf_kwargs[key[3:]] = val
                cfg.cf_preset = None
            elif key.startswith("prep."):
                prep_kwargs[key[5:]] = val
            elif key.startswith("rf."):
                rf_kwargs[key[3:]] = val
            elif key.startswith("gbt."):
                gbt_kwargs[key[4:]] = val
            elif key == "ensemble.members":
                cfg.ensemble_members = val if isinstance(val, list) else [val]
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            if prep_kwargs:
                cfg.prep = PrepConfig(**prep_kwargs)
            if cf_kwargs:
                cfg.cf = ChangeFinderConfig(**cf_kwargs)
            if rf_kwargs:
                cfg.rf = ForestParams(**rf_kwargs)
            if gbt_kwargs:
                cfg.gbt = BoostParams(**gbt_kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @staticmethod
    def from_file(path: str) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return PipelineConfig.from_items(parse_kv(fh.read()))

    def provenance(self) -> str:
        """Canonical text form of the raw config for artifact headers."""
        return format_kv(self.raw_items)
