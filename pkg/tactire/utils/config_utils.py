"""Merging JSON experiment files onto ConfigDict defaults."""
from copy import deepcopy
import json
from typing import Any, Iterable, Optional

from ml_collections import ConfigDict

# subtrees whose keys are free-form (ModuleSpec arguments)
OPEN_KEYS = ("kwargs",)


class ConfigSchemaError(ValueError):
    def __init__(
        self,
        message: str,
        field: Optional[str] = None,
        line: Optional[int] = None,
    ):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


def key_line(text: str, path: Iterable[str]) -> Optional[int]:
    """Line of the last key of `path` in a JSON document, found by walking the
    keys in document order."""
    pos = 0
    for key in path:
        found = text.find(json.dumps(key), pos)
        if found < 0:
            return None
        pos = found + 1
    return text.count("\n", 0, pos) + 1


def _merge(config: ConfigDict, updates: dict, text: str, prefix: tuple):
    for key, value in updates.items():
        path = prefix + (key,)
        field = ".".join(path)
        line = key_line(text, path)
        if key not in config:
            if prefix and prefix[-1] in OPEN_KEYS:
                config[key] = value
                continue
            raise ConfigSchemaError("unknown field", field, line)
        current = config[key]
        if isinstance(current, ConfigDict):
            if not isinstance(value, dict):
                raise ConfigSchemaError(
                    f"expected an object, got {type(value).__name__}", field, line
                )
            _merge(current, value, text, path)
            continue
        if isinstance(current, (tuple, list)) and isinstance(value, list):
            value = tuple(value)
        try:
            config[key] = value
        except (TypeError, ValueError) as e:
            raise ConfigSchemaError(f"bad value {value!r}: {e}", field, line) from e


def apply_json_overrides(config: ConfigDict, text: str) -> ConfigDict:
    """Returns a copy of `config` updated from the JSON object in `text`.

    Unknown fields, type mismatches and malformed JSON raise ConfigSchemaError
    naming the dotted field path and the line in `text`.
    """
    try:
        updates = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigSchemaError(f"malformed JSON: {e.msg}", None, e.lineno) from e
    if not isinstance(updates, dict):
        raise ConfigSchemaError("experiment file must hold a JSON object", None, 1)
    new_config = deepcopy(config)
    _merge(new_config, updates, text, ())
    return new_config


def load_experiment_file(config: ConfigDict, path: str) -> ConfigDict:
    with open(path, "r") as f:
        return apply_json_overrides(config, f.read())


def require(config: ConfigDict, field: str, allowed: Iterable[Any]):
    value = config
    for part in field.split("."):
        value = value[part]
    allowed = tuple(allowed)
    if value not in allowed:
        raise ConfigSchemaError(f"{value!r} is not one of {allowed}", field)
