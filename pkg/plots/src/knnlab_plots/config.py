"""Key-value figure-spec files (same format as knnlab config files).

Lines of `key = value`; blank lines and `#` comments ignored.  Keys may use
dashes or underscores.  Repeated `input` keys accumulate.
"""

from __future__ import annotations

from .figures import FigureSpec


class ConfigError(Exception):
    pass


_BOOL = {"true": True, "yes": True, "1": True,
         "false": False, "no": False, "0": False}


def parse_figure_spec(path) -> FigureSpec:
    fields = {"inputs": []}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_").lower()
            if not key or not value:
                raise ConfigError(f"{path}:{lineno}: empty key or value")
            if key in ("input", "inputs"):
                fields["inputs"].append(value)
            elif key in ("kind", "output", "baseline", "title"):
                fields[key] = value
            elif key in ("logx", "logy"):
                if value.lower() not in _BOOL:
                    raise ConfigError(f"{path}:{lineno}: bad boolean {value!r}")
                fields[key] = _BOOL[value.lower()]
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    for req in ("kind", "output"):
        if req not in fields:
            raise ConfigError(f"{path}: missing required key {req!r}")
    if not fields["inputs"]:
        raise ConfigError(f"{path}: missing required key 'input'")
    fields["inputs"] = tuple(fields["inputs"])
    try:
        return FigureSpec(**fields)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
