"""Plain key=value config files.

Lines are `key = value`; blank lines and `#` comments are ignored.  Keys use
the same names as the CLI flags (dashes or underscores both accepted); any
value given on the command line overrides the file.
"""

from __future__ import annotations


class ConfigError(ValueError):
    pass


def parse_config(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key = key.strip().replace("-", "_")
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            out[key] = value.strip()
    return out
