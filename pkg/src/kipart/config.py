"""Loading :class:`SimConfig` from JSON with dotted-path overrides."""

from __future__ import annotations

import json
import typing
from pathlib import Path
from typing import Any, Iterable, Optional

from pydantic import BaseModel, ValidationError

from .errors import ConfigError
from .sim import SimConfig


def _submodel(annotation) -> Optional[type[BaseModel]]:
    if isinstance(annotation, type) and issubclass(annotation, BaseModel):
        return annotation
    for arg in typing.get_args(annotation):
        found = _submodel(arg)
        if found is not None:
            return found
    return None


def _field_name(model: type[BaseModel], part: str) -> Optional[str]:
    for name, info in model.model_fields.items():
        if part == (info.alias or name):
            return info.alias or name
    return None


def check_path(path: str, model: type[BaseModel] = SimConfig) -> None:
    """Raise :class:`ConfigError` unless ``path`` names a config field."""
    parts = path.split(".")
    for i, part in enumerate(parts):
        if model is None or _field_name(model, part) is None:
            raise ConfigError(f"unknown config path {path!r}")
        info = next(f for n, f in model.model_fields.items() if (f.alias or n) == part)
        model = _submodel(info.annotation)
        if model is None and i < len(parts) - 1:
            raise ConfigError(f"unknown config path {path!r}")


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides: Iterable[str]) -> dict:
    """Apply ``a.b.c=value`` overrides in place; values are parsed as JSON when possible."""
    for item in overrides:
        path, sep, raw = item.partition("=")
        if not sep or not path:
            raise ConfigError(f"override {item!r} is not of the form path=value")
        check_path(path)
        *parents, leaf = path.split(".")
        node = doc
        for part in parents:
            child = node.get(part)
            if not isinstance(child, dict):
                child = node[part] = {}
            node = child
        node[leaf] = _parse_value(raw)
    return doc


def build_config(doc: dict) -> SimConfig:
    try:
        return SimConfig.model_validate(doc)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise ConfigError(f"invalid config at {where}: {first['msg']}") from None


def load_config(path=None, overrides: Iterable[str] = ()) -> SimConfig:
    doc: dict = {}
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
    return build_config(apply_overrides(doc, overrides))


def config_to_json(cfg: SimConfig) -> dict:
    return cfg.model_dump(mode="json", by_alias=True)


def config_schema() -> dict:
    return SimConfig.model_json_schema(by_alias=True)
