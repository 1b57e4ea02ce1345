"""Delimited report tables and atomic file output."""

from __future__ import annotations

import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

STATS_COLUMNS = ("stock", "side", "N_C", "N_A", "r", "gamma", "mean_d")
FIT_COLUMNS = ("stock", "side", "method", "family", "p_scale", "p_shape", "chi", "converged")
HURST_COLUMNS = ("stock", "side", "method", "H", "H_SFL")
MULTIFRACTAL_COLUMNS = ("stock", "side", "delta_alpha", "delta_alpha_sfl", "sfl_std", "R")
SHUFFLE_COLUMNS = ("stock", "side", "estimator", "n_replicates", "base_seed", "original", "mean", "std", "residual")
SCALING_COLUMNS = ("stock", "side", "method", "H", "stderr", "r2", "s_min", "s_max", "reliable")


def format_value(v: Any) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "NA"
        return format(v, ".10g")
    return str(v)


def json_value(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if hasattr(v, "item"):  # numpy scalar
        return json_value(v.item())
    return v


def render_table(columns: Sequence[str], rows: Iterable[Sequence[Any]], fmt: str = "tsv") -> str:
    rows = list(rows)
    if fmt == "tsv":
        out = io.StringIO()
        out.write("\t".join(columns) + "\n")
        for row in rows:
            out.write("\t".join(format_value(v) for v in row) + "\n")
        return out.getvalue()
    if fmt == "json":
        payload = {"columns": list(columns), "rows": [[json_value(v) for v in row] for row in rows]}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_table(directory: str | os.PathLike, name: str, columns, rows, fmt: str = "tsv") -> Path:
    return atomic_write(Path(directory) / f"{name}.{fmt}", render_table(columns, rows, fmt))


def write_json(path: str | os.PathLike, payload: Any) -> Path:
    return atomic_write(path, json.dumps(payload, indent=2, sort_keys=True, default=json_value) + "\n")


def columns_text(header: Sequence[str], columns: Sequence[Sequence[Any]]) -> str:
    """Tab-separated plot data, one column per sequence."""
    out = io.StringIO()
    out.write("\t".join(header) + "\n")
    for row in zip(*columns):
        out.write("\t".join(format_value(float(v)) for v in row) + "\n")
    return out.getvalue()
