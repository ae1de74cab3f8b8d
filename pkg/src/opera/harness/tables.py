"""Result tables in CSV, JSON and Markdown.

All three formats render numbers through :func:`format_number`, so they
carry identical values.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

COLUMNS = ("env", "policy", "n", "method", "mse", "rmse", "stderr", "trials", "failures", "truth_stderr")
FORMATS = ("csv", "json", "markdown")


def format_number(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _cells(row: dict, columns) -> list[str]:
    return [format_number(row.get(c, "")) for c in columns]


def render_table(rows: Sequence[dict], fmt: str = "csv", columns: Sequence[str] = COLUMNS) -> str:
    if not rows:
        raise ValueError("no rows to render")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(_cells(row, columns))
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
        lines += ["| " + " | ".join(_cells(row, columns)) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        out = []
        for row in rows:
            rec = {}
            for c in columns:
                v = row.get(c)
                rec[c] = float(format_number(v)) if isinstance(v, float) and math.isfinite(v) else v
            out.append(rec)
        return json.dumps(out, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def emit_table(rows: Sequence[dict], fmt: str = "csv", path: str | Path | None = None,
               columns: Sequence[str] = COLUMNS) -> str:
    """Render ``rows`` and write them to ``path`` when given.

    Raises
    ------
    OSError
        If ``path`` cannot be written; the message names the path.
    """
    text = render_table(rows, fmt, columns)
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from None
    return text
