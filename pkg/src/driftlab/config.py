"""Scenario configuration: flat ``key = value`` text with ``[section]`` headers.

Keys before the first header belong to ``[scenario]``. Every key is checked
against :data:`SCHEMA` or against the parameter table of the named op, and
errors carry the key path, e.g. ``grid.n``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .results import DomainError

DEFAULT_SEED = 0x4B4F4C4D


class ConfigError(DomainError):
    """Invalid scenario configuration; the message starts with the key path."""


def parse_int(text: str) -> int:
    return int(str(text).strip(), 0)


def parse_list(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def parse_floats(text: str) -> list[float]:
    return [float(t) for t in parse_list(text)]


SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "scenario": {"id": str, "ops": parse_list, "seed": parse_int, "out": str},
    "grid": {"dim": int, "n": int, "box": float, "boundary": str},
    "generator": {"drift": str, "matrix": str},
}

@dataclass
class ScenarioConfig:
    id: str = "scenario"
    dim: int = 3
    n: int = 32
    box: float = 4.0
    boundary: str = "periodic"
    drift: str = "zero"
    matrix: str = "identity"
    ops: list[str] = field(default_factory=list)
    params: dict[str, dict[str, Any]] = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    tolerances: dict[str, float] = field(default_factory=dict)
    out: str | None = None


def _convert(path: str, conv: Callable[[str], Any], text: str) -> Any:
    try:
        return conv(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: cannot parse {text!r} ({exc})") from None


def parse_tol(items: Mapping[str, str], path: str = "tol") -> dict[str, float]:
    return {k: _convert(f"{path}.{k}", float, v) for k, v in items.items()}


def build_config(sections: Mapping[str, Mapping[str, str]],
                 op_params: Mapping[str, Mapping[str, tuple[Callable[[str], Any], Any]]]
                 ) -> ScenarioConfig:
    """Validate raw string sections against the schema and the op tables."""
    cfg = ScenarioConfig()
    for name, items in sections.items():
        if name in SCHEMA:
            table = SCHEMA[name]
            for k, v in items.items():
                if k not in table:
                    raise ConfigError(f"{name}.{k}: unknown key")
                setattr(cfg, k, _convert(f"{name}.{k}", table[k], v))
        elif name == "tol":
            cfg.tolerances.update(parse_tol(items))
        elif name in op_params:
            table = op_params[name]
            out = {}
            for k, v in items.items():
                if k not in table:
                    raise ConfigError(f"{name}.{k}: unknown key")
                out[k] = _convert(f"{name}.{k}", table[k][0], v)
            cfg.params[name] = out
        else:
            raise ConfigError(f"{name}: unknown section")
    for op_name in cfg.ops:
        if op_name not in op_params:
            raise ConfigError(f"scenario.ops: unknown op {op_name!r}")
    for name in cfg.params:
        if name not in cfg.ops:
            raise ConfigError(f"{name}: section given but op not listed in scenario.ops")
    if cfg.boundary not in ("periodic", "dirichlet"):
        raise ConfigError(f"grid.boundary: expected periodic or dirichlet, got {cfg.boundary!r}")
    return cfg


_TOP = "__top__"


def read_sections(text: str) -> dict[str, dict[str, str]]:
    """Split config text into sections; keys before any header go to ``scenario``."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                       strict=True, empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(f"[{_TOP}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax: {exc}") from None
    out = {s: dict(parser.items(s)) for s in parser.sections()}
    top = out.pop(_TOP)
    if top:
        scen = out.setdefault("scenario", {})
        for k, v in top.items():
            if k in scen:
                raise ConfigError(f"scenario.{k}: given twice")
            scen[k] = v
    return out


def load_config(text: str, op_params) -> ScenarioConfig:
    return build_config(read_sections(text), op_params)
