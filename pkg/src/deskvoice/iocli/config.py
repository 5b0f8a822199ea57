"""Flat key-value configuration files with dotted keys.

Example::

    audio.sample_rate = 8000
    tokenizer.downsample_factors = [4, 4, 4, 5]
    synth.prompt.1 = prompts/speaker1.wav

Values are ints, floats, booleans, bare or quoted strings, or bracketed
lists of numbers. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

from pathlib import Path

from deskvoice.errors import ConfigError

Value = int | float | bool | str | list


def _parse_scalar(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        return text[1:-1]
    return text


def parse_config(text: str) -> dict[str, Value]:
    out: dict[str, Value] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if value.startswith("["):
            if not value.endswith("]"):
                raise ConfigError(f"line {lineno}: unterminated list")
            inner = value[1:-1].strip()
            items = [v.strip() for v in inner.split(",")] if inner else []
            out[key] = [_parse_scalar(v) for v in items]
        else:
            out[key] = _parse_scalar(value)
    return out


def _format_value(value: Value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    if isinstance(value, str):
        stripped = value.strip()
        if stripped != value or "=" in value or value in ("true", "false") or value == "":
            return f'"{value}"'
        return value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config: dict[str, Value]) -> str:
    lines = [f"{key} = {_format_value(config[key])}" for key in sorted(config)]
    return "\n".join(lines) + "\n"


def read_config(path: str | Path) -> dict[str, Value]:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def write_config(config: dict[str, Value], path: str | Path) -> None:
    Path(path).write_text(format_config(config), encoding="utf-8")
