"""Serialization of analysis results to JSON and CSV.

JSON documents always carry the top-level keys ``command``, ``config``,
``points`` (or ``checkpoints`` for index-set densities) and ``overall``.
Densities appear both as exact ``"count/n"`` strings and as decimals.
Non-finite numbers are written as the strings ``"inf"``, ``"-inf"``, ``"nan"``
because JSON has no literal for them.
"""

from __future__ import annotations

import csv
import io
import json
import math

from .density import DensityReport


def number(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if value != value else ("inf" if value > 0 else "-inf")
    return value


def checkpoint_rows(report: DensityReport) -> list[dict]:
    return [
        {
            "n": rec.n,
            "count": rec.count,
            "density": rec.density_text,
            "density_decimal": float(rec.density),
        }
        for rec in report.checkpoints
    ]


def to_json(document: dict) -> str:
    return json.dumps(document, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


_DENSITY_COLUMNS = ["n", "count", "density", "density_decimal"]


def to_csv(document: dict) -> str:
    """One row per (x, checkpoint); RFC 4180 quoting and CRLF line ends."""
    command = document["command"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    if command == "eval":
        writer.writerow(["x", "k", "value"])
        for point in document["points"]:
            writer.writerow([point["x"], point["k"], point["value"]])
    elif command == "density":
        writer.writerow(["x"] + _DENSITY_COLUMNS + ["verdict"])
        for row in document["checkpoints"]:
            writer.writerow([""] + [row[c] for c in _DENSITY_COLUMNS] + [document["overall"]])
    elif command == "roughness":
        writer.writerow(["x", "n", "quantile"] + _DENSITY_COLUMNS[1:] + ["r_hat", "verdict"])
        for point in document["points"]:
            for row in point["checkpoints"]:
                writer.writerow(
                    [point["x"], row["n"], row["quantile"]]
                    + [row.get(c, "") for c in _DENSITY_COLUMNS[1:]]
                    + [point["r_hat"], point["verdict"]]
                )
    else:
        writer.writerow(["x"] + _DENSITY_COLUMNS + ["verdict"])
        for point in document["points"]:
            for row in point["checkpoints"]:
                writer.writerow([point["x"]] + [row[c] for c in _DENSITY_COLUMNS] + [point["verdict"]])
    return buf.getvalue()


def emit_report(document: dict, fmt: str = "json") -> str:
    if fmt == "json":
        return to_json(document)
    if fmt == "csv":
        return to_csv(document)
    raise ValueError(f"unknown format {fmt!r}")
