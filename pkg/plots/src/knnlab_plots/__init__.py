"""Figure rendering for knnlab summary CSVs."""

from .config import ConfigError, parse_figure_spec
from .figures import (KINDS, FigureSpec, SchemaError, read_summary, render,
                      render_standard)

__version__ = "0.1.0"
