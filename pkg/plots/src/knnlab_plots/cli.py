"""knnlab-plots: render figures from knnlab summary CSVs.

    knnlab-plots render --spec figure.cfg

The spec file uses the same `key = value` format as knnlab configs.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_figure_spec
from .figures import SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="knnlab-plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from a spec file")
    p.add_argument("--spec", required=True, help="figure spec file")
    args = parser.parse_args(argv)

    try:
        spec = parse_figure_spec(args.spec)
        out = render(spec)
    except (ConfigError, SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
