"""Plot scripts for the CSV tables written by the runner.

Nothing is rendered here.  :func:`emit_plot_script` writes a standalone
matplotlib script that reads the CSVs and saves one PNG per table.
"""
from __future__ import annotations

import csv
from pathlib import Path

from .errors import MissingColumn, ValidationError

KINDS = ("loglog", "semilogy", "linear")

# preferred abscissa per table; the first matching header column wins
_X_COLUMNS = ("tau", "t", "h", "k", "lambda", "x")

_TEMPLATE = '''"""Regenerate figures from boundary-lab CSV tables (requires matplotlib)."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
KIND = {kind!r}
TABLES = {tables!r}


def read(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {{key: [float(r[key]) for r in rows] for key in rows[0]}}


for path, xcol, ycols in TABLES:
    path = Path(path)
    if not path.is_absolute():
        path = HERE / path
    data = read(path)
    fig, ax = plt.subplots()
    plot = {{"loglog": ax.loglog, "semilogy": ax.semilogy, "linear": ax.plot}}[KIND]
    for col in ycols:
        xs, ys = data[xcol], data[col]
        if KIND != "linear":
            pts = [(x, abs(y)) for x, y in zip(xs, ys) if abs(y) > 0 and (KIND == "semilogy" or x > 0)]
            xs, ys = [p[0] for p in pts], [p[1] for p in pts]
        plot(xs, ys, marker="o", label=col)
    ax.set_xlabel(xcol)
    ax.legend()
    ax.set_title(path.stem)
    fig.savefig(path.with_suffix(".png"), dpi=120)
    plt.close(fig)
'''


def _columns(path: Path) -> list[str]:
    if not path.is_file():
        raise MissingColumn(f"{path} does not exist")
    with path.open(newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header or len(header) < 2:
        raise MissingColumn(f"{path} needs a header with at least two columns")
    return header


def _mapping(header: list[str]) -> tuple[str, list[str]]:
    x = next((c for c in _X_COLUMNS if c in header), header[0])
    return x, [c for c in header if c != x]


def emit_plot_script(csv_paths, kind: str = "linear", out_path=None) -> Path:
    """Write a plot script for ``csv_paths`` and return its path.

    The script lands next to the first CSV unless ``out_path`` is given; table
    paths are stored relative to it when possible.
    """
    if kind not in KINDS:
        raise ValidationError(f"kind must be one of {KINDS}, got {kind!r}")
    paths = [Path(p) for p in csv_paths]
    if not paths:
        raise MissingColumn("no CSV tables given")
    out = Path(out_path) if out_path is not None else paths[0].parent / f"plot_{kind}.py"
    tables = []
    for p in paths:
        x, ys = _mapping(_columns(p))
        try:
            ref = str(p.resolve().relative_to(out.resolve().parent))
        except ValueError:
            ref = str(p.resolve())
        tables.append((ref, x, ys))
    out.write_text(_TEMPLATE.format(kind=kind, tables=tables))
    return out
