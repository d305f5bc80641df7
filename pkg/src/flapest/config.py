"""Flat key = value configuration files covering every tunable.

Keys are namespaced with a dotted section prefix (sim.*, pipeline.*, aero.*,
attitude.*, internal.*); unknown keys are rejected; ``dump_config`` writes
every key with its current value, so a dumped file documents all defaults
and round-trips losslessly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .attitude import AttitudeNoise
from .internal import AeroConfig, InternalNoise
from .logio import DataError
from .pipeline import PipelineConfig
from .simulator import GustEvent, SimConfig


@dataclass
class FullConfig:
    """Complete run configuration; the aero block is shared by sim and pipeline."""

    sim: SimConfig = field(default_factory=SimConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        self.pipeline.aero = self.sim.aero
        self.pipeline.mag_inclination_deg = self.sim.mag_inclination_deg
        self.pipeline.mag_declination_deg = self.sim.mag_declination_deg
        self.pipeline.gps_rate = self.sim.rate_gps


_SKIP = {
    ("sim", "aero"),
    ("pipeline", "aero"),
    ("pipeline", "attitude_noise"),
    ("pipeline", "internal_noise"),
    ("pipeline", "mag_inclination_deg"),
    ("pipeline", "mag_declination_deg"),
    ("pipeline", "gps_rate"),
}


def _sections(config: FullConfig):
    return {
        "sim": config.sim,
        "pipeline": config.pipeline,
        "aero": config.sim.aero,
        "attitude": config.pipeline.attitude_noise,
        "internal": config.pipeline.internal_noise,
    }


def _encode(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, GustEvent):
        return ",".join(format(float(x), ".17g")
                        for x in (value.t_start, value.duration, *value.vector))
    if isinstance(value, (tuple, list)):
        if value and isinstance(value[0], GustEvent):
            return ";".join(_encode(ev) for ev in value)
        return ",".join(format(float(x), ".17g") for x in value)
    raise TypeError(f"unencodable config value {value!r}")


def _decode(text: str, template):
    text = text.strip()
    if isinstance(template, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean {text!r}")
    if isinstance(template, float):
        return float(text)
    if isinstance(template, int):
        return int(text)
    if isinstance(template, (tuple, list)):
        if template and isinstance(template[0], GustEvent):
            if not text:
                return ()
            events = []
            for part in text.split(";"):
                nums = [float(x) for x in part.split(",")]
                if len(nums) != 5:
                    raise ValueError("gust events need t0,duration,wx,wy,wz")
                events.append(GustEvent(nums[0], nums[1], tuple(nums[2:])))
            return tuple(events)
        return tuple(float(x) for x in text.split(",")) if text else ()
    raise TypeError(f"undecodable config field type {type(template)}")


def flatten(config: FullConfig) -> dict:
    """All configuration keys and encoded values, sorted."""
    out = {}
    for prefix, obj in _sections(config).items():
        for f in fields(obj):
            if (prefix, f.name) in _SKIP:
                continue
            out[f"{prefix}.{f.name}"] = _encode(getattr(obj, f.name))
    return dict(sorted(out.items()))


def dump_config(config: FullConfig) -> str:
    lines = ["# flapest configuration (every key at its current value)"]
    lines += [f"{k} = {v}" for k, v in flatten(config).items()]
    return "\n".join(lines) + "\n"


def parse_config(text: str, path: str = "<config>") -> FullConfig:
    """Parse key = value lines into a FullConfig; unknown keys are rejected."""
    config = FullConfig()
    sections = _sections(config)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if "." not in key:
            raise DataError(f"{path}:{lineno}: key {key!r} has no section prefix")
        prefix, _, name = key.partition(".")
        obj = sections.get(prefix)
        if obj is None or (prefix, name) in _SKIP or not any(
                f.name == name for f in fields(obj)):
            raise DataError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            decoded = _decode(value, getattr(obj, name))
        except (ValueError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        setattr(obj, name, decoded)
    # re-validate derived invariants after mutation
    config.sim.__post_init__()
    config.pipeline.__post_init__()
    config.__post_init__()
    return config


def load_config(path) -> FullConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def save_config(config: FullConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(config))
