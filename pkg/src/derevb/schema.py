"""Structuring plain documents into attrs classes.

structure() validates a JSON/YAML document against a pydantic model derived
from the attrs class, then builds the attrs instance from the validated
values. Unknown keys, type mismatches and validator failures all raise
ConfigError naming the dotted path of the offending field, e.g.
"training.spec_augment.max_width". Missing keys fall back to field defaults.
"""

from __future__ import annotations

import functools
import typing
from collections.abc import Mapping
from typing import Any, Optional, TypeVar

import attr
import pydantic
from pydantic import ConfigDict, StrictBool, StrictFloat, StrictInt, StrictStr

from derevb.errors import ConfigError, DerevbError

T = TypeVar("T")

_SCALARS: dict[Any, Any] = {bool: StrictBool, int: StrictInt, float: StrictFloat, str: StrictStr}


def _join(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


def _loc_path(path: str, loc: tuple[Any, ...]) -> Optional[str]:
    """("training", "kernel", 1) -> "training.kernel[1]", prefixed by path."""
    out = path
    for part in loc:
        out = f"{out}[{part}]" if isinstance(part, int) else _join(out, str(part))
    return out or None


def _annotation(tp: Any) -> Any:
    if attr.has(tp):
        return _model_for(tp)
    if tp in _SCALARS:
        return _SCALARS[tp]
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        return typing.Union[tuple(_annotation(a) for a in args)]
    if origin is tuple:
        return tuple[tuple(a if a is Ellipsis else _annotation(a) for a in args)]  # type: ignore[misc]
    return tp


@functools.lru_cache(maxsize=None)
def _model_for(cls: type) -> type[pydantic.BaseModel]:
    """Pydantic model mirroring the init fields of an attrs class.

    Every field is optional; structure() only passes on the keys a document
    sets, so attrs keeps ownership of defaults.
    """
    attr.resolve_types(cls)
    fields = {f.name: (_annotation(f.type), None) for f in attr.fields(cls) if f.init}
    return pydantic.create_model(  # type: ignore[call-overload, no-any-return]
        cls.__name__,
        __config__=ConfigDict(extra="forbid", protected_namespaces=()),
        **fields,
    )


def _build(cls: type[T], values: dict[str, Any], path: str) -> T:
    kwargs = {}
    for f in attr.fields(cls):  # type: ignore[arg-type]
        if f.name not in values:
            continue
        value = values[f.name]
        if attr.has(f.type) and isinstance(value, Mapping):
            value = _build(f.type, dict(value), _join(path, f.name))
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except DerevbError as e:
        field = _join(path, e.field) if e.field else (path or None)
        raise ConfigError(e.message, field=field) from e
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), field=path or None) from e


def structure(cls: type[T], data: Any, path: str = "") -> T:
    """Build an attrs instance of cls from a mapping.

    Raises:
        ConfigError: On unknown keys, wrong types or failed validation.
    """
    if not isinstance(data, Mapping):
        raise ConfigError(
            f"expected a mapping for {getattr(cls, '__name__', cls)}, got {type(data).__name__}",
            field=path or None,
        )
    try:
        validated = _model_for(cls).model_validate(dict(data))
    except pydantic.ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], field=_loc_path(path, tuple(first["loc"]))) from e
    return _build(cls, validated.model_dump(exclude_unset=True), path)


def unstructure(instance: Any) -> dict[str, Any]:
    """attrs instance -> JSON-compatible dict (tuples become lists)."""
    return attr.asdict(instance, retain_collection_types=False)
