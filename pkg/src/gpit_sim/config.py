"""Run configuration and the ``key = value`` config file format.

Keys are dotted: the prefix picks the section (``world``, ``prices``,
``scenario``, ``sim``, ``run``) and the rest names a field.  Lines starting
with ``#`` and blank lines are ignored; anything after a ``#`` on a value
line is a comment too.  Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field, replace
from pathlib import Path

from .market import SimConfig
from .scenario import ScenarioConfig
from .world import PriceParams, WorldConfig

__all__ = ["RunConfig", "ConfigError", "parse_config", "load_config", "format_config", "DEFAULT_OFFERS"]

DEFAULT_OFFERS = tuple(i * 0.5 for i in range(15))  # 0.00 .. 7.00


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    prices: PriceParams = field(default_factory=PriceParams)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    n_clients: int = 300
    horizon_days: int = 365
    replications: int = 10
    offers: tuple[float, ...] = DEFAULT_OFFERS
    base_curve_csv: str | None = None

    def __post_init__(self) -> None:
        if self.n_clients < 1:
            raise ConfigError("run.n_clients must be >= 1")
        if self.horizon_days < 1:
            raise ConfigError("run.horizon_days must be >= 1")
        if self.replications < 1:
            raise ConfigError("run.replications must be >= 1")
        if any(o < 0 for o in self.offers):
            raise ConfigError("run.offers must be >= 0")


_SECTIONS = ("world", "prices", "scenario", "sim")
_RUN_KEYS = ("n_clients", "horizon_days", "replications", "offers", "base_curve_csv")


def _convert(raw: str, hint, key: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if raw.lower() == "none":
            return None
        inner = [a for a in args if a is not type(None)]
        return _convert(raw, inner[0], key)
    if origin is tuple:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        elem = args[0] if args else float
        return tuple(_convert(p, elem, key) for p in parts)
    try:
        if hint is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        if hint is str:
            return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(hint, '__name__', hint)}") from None
    raise ConfigError(f"{key}: unsupported field type {hint}")


def _hints(cls) -> dict:
    return typing.get_type_hints(cls)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    updates: dict[str, dict] = {s: {} for s in _SECTIONS}
    run: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in body.split("=", 1))
        section, _, name = key.partition(".")
        if section == "run" and name in _RUN_KEYS:
            run[name] = _convert(value, _hints(RunConfig)[name], key)
            continue
        if section == "sim" and name == "pricing":
            # convenience: `sim.pricing = dynamic` or a fixed amount
            updates["sim"]["fixed_offer"] = None if value.lower() == "dynamic" else _convert(value, float, key)
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        target = getattr(cfg, section)
        names = {f.name for f in dataclasses.fields(target)}
        if name not in names:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        updates[section][name] = _convert(value, _hints(type(target))[name], key)
    try:
        parts = {s: replace(getattr(cfg, s), **updates[s]) for s in _SECTIONS}
        return replace(cfg, **parts, **run)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text)
    if cfg.base_curve_csv is not None and not Path(cfg.base_curve_csv).is_absolute():
        cfg = replace(cfg, base_curve_csv=str(Path(path).parent / cfg.base_curve_csv))
    return cfg


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for s in _SECTIONS:
        obj = getattr(cfg, s)
        for f in dataclasses.fields(obj):
            if s == "prices" and f.name == "base_curve":
                continue
            lines.append(f"{s}.{f.name} = {_fmt(getattr(obj, f.name))}")
    for k in _RUN_KEYS:
        lines.append(f"run.{k} = {_fmt(getattr(cfg, k))}")
    return "\n".join(lines) + "\n"
