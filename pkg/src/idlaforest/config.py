"""Flat key = value configuration files (a strict TOML-compatible subset).

Supported values: integers, floats, booleans, double-quoted strings, and
one-level arrays of those.  Duplicate keys are errors; callers validate the
key set against an explicit schema, so a typoed key never silently changes
an experiment.
"""

from __future__ import annotations

import re

from .errors import ConfigError

_KEY_RE = re.compile(r"^[A-Za-z0-9_-]+$")
_INT_RE = re.compile(r"^[+-]?[0-9]+$")
_FLOAT_RE = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+\.?\d*[eE][+-]?\d+|\d+\.\d*[eE][+-]?\d+)$")
_HEX_RE = re.compile(r"^0[xX][0-9a-fA-F]+$")


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out)


def _parse_scalar(tok: str, where: str):
    tok = tok.strip()
    if not tok:
        raise ConfigError(f"{where}: empty value")
    if tok.startswith('"'):
        if not (tok.endswith('"') and len(tok) >= 2):
            raise ConfigError(f"{where}: unterminated string")
        return tok[1:-1]
    if tok in ("true", "false"):
        return tok == "true"
    if _HEX_RE.match(tok):
        return int(tok, 16)
    if _INT_RE.match(tok):
        return int(tok)
    if _FLOAT_RE.match(tok):
        return float(tok)
    raise ConfigError(f"{where}: cannot parse value {tok!r}")


def _split_items(body: str, where: str) -> list:
    items = []
    depth = 0
    in_str = False
    cur = []
    for ch in body:
        if ch == '"':
            in_str = not in_str
        if not in_str:
            if ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
            elif ch == "," and depth == 0:
                items.append("".join(cur))
                cur = []
                continue
        cur.append(ch)
    if in_str or depth != 0:
        raise ConfigError(f"{where}: unbalanced brackets or quotes")
    tail = "".join(cur).strip()
    if tail:
        items.append(tail)
    return items


def parse_config_text(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        if key in cfg:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        where = f"line {lineno}"
        if value.startswith("["):
            if not value.endswith("]"):
                raise ConfigError(f"{where}: unterminated array")
            body = value[1:-1].strip()
            items = _split_items(body, where) if body else []
            parsed = []
            for item in items:
                item = item.strip()
                if item.startswith("["):
                    if not item.endswith("]"):
                        raise ConfigError(f"{where}: unterminated inner array")
                    inner = _split_items(item[1:-1], where)
                    parsed.append([_parse_scalar(x, where) for x in inner])
                else:
                    parsed.append(_parse_scalar(item, where))
            cfg[key] = parsed
        else:
            cfg[key] = _parse_scalar(value, where)
    return cfg


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def require_keys(cfg: dict, allowed, required=()) -> None:
    unknown = sorted(set(cfg) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)} "
                          f"(allowed: {', '.join(sorted(allowed))})")
    missing = sorted(set(required) - set(cfg))
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
