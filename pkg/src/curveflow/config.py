"""Flat ``key = value`` configuration files with ``#`` comments."""

from pathlib import Path

from .errors import ConfigError
from .pinch import PinchingConfig
from .symfun import SpeedFunction

__all__ = ["SCHEMA", "parse_config", "load_config", "pinching_config", "dump_config"]


def _optional(kind):
    def convert(text):
        return None if text.lower() in ("none", "auto", "") else kind(text)
    return convert


# key -> (converter, default)
SCHEMA = {
    "n": (int, 4),
    "m": (int, 1),
    "f": (str, "mean"),
    "p": (_optional(float), None),
    "eps": (float, 0.05),
    "sigma": (float, 0.5),
    "delta": (float, 0.1),
    "beta": (float, 0.1),
    "eta": (float, 0.1),
    "M": (_optional(float), None),
    "C_delta": (float, 1.0),
    "samples": (int, 10_000),
    "seed": (int, 42),
    "preset": (str, "dumbbell"),
    "N": (_optional(int), None),
    "width": (float, 2.0),
    "amp": (float, 0.8),
    "t_max": (_optional(float), None),
    "F_stop": (float, 50.0),
    "record_every": (_optional(int), None),
    "refine": (int, 0),
    "snapshots": (int, 0),
}


def parse_config(text, source="<string>"):
    """Parse config text into a dict with every schema key filled in."""
    out = {k: default for k, (_, default) in SCHEMA.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            out[key] = SCHEMA[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    if out["samples"] < 0:
        raise ConfigError("samples must be >= 0")
    if out["seed"] < 0 or out["seed"] >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return out


def load_config(path):
    if path is None:
        return parse_config("")
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def speed_function(cfg):
    try:
        return SpeedFunction.parse(cfg["f"], cfg["p"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def pinching_config(cfg, **overrides):
    """PinchingConfig from a parsed config; ValueErrors become ConfigError."""
    params = {k: cfg[k] for k in ("n", "m", "eps", "sigma", "delta", "beta", "eta", "M")}
    params.update(overrides)
    try:
        return PinchingConfig(f=speed_function(cfg), **params)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def dump_config(cfg):
    """Canonical text form (sorted keys) used as a header in output files."""
    return "\n".join(f"{k} = {cfg[k]}" for k in sorted(cfg))
