"""
Flat, commented ``key = value`` config files.

Blank lines and ``#`` comments are ignored. Keys may repeat; repeated keys
are collected in order by :func:`parse_kv`. ``dataclass_from_kv`` coerces
string values to the annotated field types of a dataclass.
"""

import dataclasses
import enum
import hashlib
import typing
from pathlib import Path

from .errors import InvalidConfig

__all__ = ["parse_kv", "load_kv", "dataclass_from_kv", "dataclass_to_kv",
           "config_hash", "parse_enum"]


def parse_kv(text):
    """Return ``[(key, value), ...]`` in file order."""
    items = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        items.append((key.strip(), value.strip()))
    return items


def load_kv(path):
    try:
        return parse_kv(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc


def _coerce(value, tp, key):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value.lower() in ("", "none"):
            return None
        return _coerce(value, args[0], key)
    if origin is tuple:
        parts = [p for p in value.replace("(", "").replace(")", "").split(",")
                 if p.strip()]
        args = typing.get_args(tp)
        return tuple(_coerce(p.strip(), args[0], key) for p in parts)
    try:
        if tp is bool:
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(tp, type) and issubclass(tp, enum.Enum):
            return _enum_lookup(tp, value)
        if tp is int:
            f = float(value)
            if not f.is_integer():
                raise ValueError(value)
            return int(f)
        if tp in (float, str):
            return tp(value)
    except ValueError as exc:
        raise InvalidConfig(f"{key}: cannot parse {value!r}") from exc
    return value


def parse_enum(tp, value):
    """Enum member from its value or name, ignoring case, '_' and '-'."""
    try:
        return _enum_lookup(tp, value)
    except ValueError as exc:
        raise InvalidConfig(f"{value!r} is not a valid {tp.__name__}") from exc


def _enum_lookup(tp, value):
    norm = value.replace("_", "").replace("-", "").lower()
    for member in tp:
        if norm in (member.name.replace("_", "").lower(),
                    str(member.value).replace("_", "").replace("-", "").lower()):
            return member
    raise ValueError(value)


def dataclass_from_kv(cls, mapping, prefix=""):
    """Build ``cls`` from string values; unknown keys raise InvalidConfig."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in mapping.items():
        if prefix:
            if not key.startswith(prefix):
                continue
            key = key[len(prefix):]
        if key not in names:
            raise InvalidConfig(f"unknown key {prefix}{key!r} for {cls.__name__}")
        kwargs[key] = _coerce(value, hints[key], prefix + key)
    return cls(**kwargs)


def _format(value):
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dataclass_to_kv(obj, prefix=""):
    return "".join(f"{prefix}{f.name} = {_format(getattr(obj, f.name))}\n"
                   for f in dataclasses.fields(obj))


def config_hash(*parts):
    """Short stable digest of the given strings."""
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()[:16]
