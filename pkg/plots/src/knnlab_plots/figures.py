"""Deterministic figure rendering from knnlab summary CSVs.

The plotting layer computes no statistics: every plotted value is a field
of the summary table (the only arithmetic is the display ratio between two
summary means and the log2 axis transform).  Rendering is a pure function
of (CSV bytes, FigureSpec): fixed style, fixed dpi, no timestamps.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

SUMMARY_COLUMNS = ("experiment_id", "variant", "metric", "d", "n", "k",
                   "omega", "corruption_mode", "reps", "mean", "se")
KINDS = ("regret_vs_n", "ratio_vs_n", "regret_vs_omega")

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
    "lines.markersize": 5,
}
_LINESTYLES = ("-", "--", "-.", ":")
_MARKERS = ("o", "s", "^", "d", "v", "*")
_METADATA = {"Software": "knnlab-plots"}  # fixed: no version, no timestamp


class SchemaError(Exception):
    """The input CSV does not match the knnlab summary schema."""


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple  # summary CSV paths
    kind: str  # regret_vs_n | ratio_vs_n | regret_vs_omega
    output: str  # image file path
    logx: bool = True  # log2 on the x axis
    logy: bool = True  # log2 on the y axis
    baseline: str = "knn"  # denominator variant for ratio_vs_n
    title: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {', '.join(KINDS)}")
        if not self.inputs:
            raise ValueError("figure spec needs at least one input CSV")


@dataclass(frozen=True)
class SummaryRow:
    variant: str
    metric: str
    n: int
    omega: float
    mean: float
    se: float


def read_summary(path) -> list:
    """Parse one summary CSV; schema violations raise SchemaError."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in SUMMARY_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for i, rec in enumerate(reader, start=2):
            try:
                rows.append(SummaryRow(rec["variant"], rec["metric"],
                                       int(rec["n"]), float(rec["omega"]),
                                       float(rec["mean"]), float(rec["se"])))
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: line {i}: {exc}") from None
    if not rows:
        raise SchemaError(f"{path}: summary contains no data rows")
    return rows


def _load(spec: FigureSpec) -> list:
    rows = []
    for path in spec.inputs:
        rows.extend(read_summary(path))
    return rows


def _tx(values, log):
    return [math.log2(v) for v in values] if log else list(values)


def _style(i):
    return dict(linestyle=_LINESTYLES[i % len(_LINESTYLES)],
                marker=_MARKERS[i % len(_MARKERS)])


def _axis_label(base, log):
    return f"log2 {base}" if log else base


def _series_regret_vs_n(rows, spec):
    out = {}
    for r in rows:
        out.setdefault((r.variant, r.omega), []).append((r.n, r.mean))
    series = []
    for (variant, omega), pts in sorted(out.items()):
        label = variant if len({k[1] for k in out}) == 1 else f"{variant}, omega={omega:g}"
        series.append((label, sorted(pts)))
    return series, "n", rows[0].metric


def _series_ratio_vs_n(rows, spec):
    base = {(r.n, r.omega): r.mean for r in rows if r.variant == spec.baseline}
    if not base:
        raise SchemaError(f"no rows for baseline variant {spec.baseline!r}")
    out = {}
    for r in rows:
        if r.variant == spec.baseline:
            continue
        denom = base.get((r.n, r.omega))
        if denom is None or denom == 0:
            continue
        out.setdefault((r.variant, r.omega), []).append((r.n, r.mean / denom))
    if not out:
        raise SchemaError("no non-baseline variants to plot")
    series = []
    for (variant, omega), pts in sorted(out.items()):
        label = (f"{variant}/{spec.baseline}"
                 if len({k[1] for k in out}) == 1
                 else f"{variant}/{spec.baseline}, omega={omega:g}")
        series.append((label, sorted(pts)))
    return series, "n", f"{rows[0].metric} ratio"


def _series_regret_vs_omega(rows, spec):
    out = {}
    for r in rows:
        if spec.logx and r.omega <= 0:
            continue  # omega=0 baseline has no place on a log axis
        out.setdefault((r.variant, r.n), []).append((r.omega, r.mean))
    if not out:
        raise SchemaError("no positive-omega rows to plot")
    series = []
    for (variant, n), pts in sorted(out.items()):
        label = variant if len({k[1] for k in out}) == 1 else f"{variant}, n={n}"
        series.append((label, sorted(pts)))
    return series, "omega", rows[0].metric


_SERIES = {"regret_vs_n": _series_regret_vs_n,
           "ratio_vs_n": _series_ratio_vs_n,
           "regret_vs_omega": _series_regret_vs_omega}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    rows = _load(spec)
    series, xname, yname = _SERIES[spec.kind](rows, spec)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for i, (label, pts) in enumerate(series):
            pts = [(x, y) for x, y in pts if not (spec.logy and y <= 0)]
            if not pts:
                continue
            xs = _tx([p[0] for p in pts], spec.logx)
            ys = _tx([p[1] for p in pts], spec.logy)
            ax.plot(xs, ys, label=label, **_style(i))
        ax.set_xlabel(_axis_label(xname, spec.logx))
        ax.set_ylabel(_axis_label(yname, spec.logy))
        if spec.title:
            ax.set_title(spec.title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(spec.output, format="png", metadata=dict(_METADATA))
        plt.close(fig)
    return spec.output


def render_standard(summary_csv, outdir) -> list:
    """The report bundle: every figure kind the summary supports.

    Called by the knnlab CLI's --figures path; returns the written paths.
    """
    rows = read_summary(summary_csv)
    os.makedirs(outdir, exist_ok=True)
    variants = sorted({r.variant for r in rows})
    omegas = sorted({r.omega for r in rows})
    ns = sorted({r.n for r in rows})
    written = []

    def emit(kind, name, **kw):
        spec = FigureSpec(inputs=(summary_csv,), kind=kind,
                          output=os.path.join(outdir, name), **kw)
        written.append(render(spec))

    if len(ns) > 1:
        emit("regret_vs_n", "regret_vs_n.png")
    if len(ns) > 1 and len(variants) > 1 and "knn" in variants:
        emit("ratio_vs_n", "ratio_vs_n.png")
    if len([o for o in omegas if o > 0]) > 1:
        emit("regret_vs_omega", "regret_vs_omega.png")
    return written
