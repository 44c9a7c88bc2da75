"""Files written for a run: delimited tables, the JSON report and optional figures."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

ERRORS_HEADER = ("t", "method", "relative_l2", "absolute_l2")
LEDGER_HEADER = (
    "t", "eps_space", "eps_lift", "eps_proj", "eps_floor", "eps_sample", "total_bound", "observed_total",
)


def fmt(x: float) -> str:
    # '%' formatting ignores the locale, and 11 digits after the point give 12 significant
    return "%.11e" % float(x)


def errors_rows(report) -> list[tuple]:
    led = report.ledger
    if led is None:
        return []
    rows = []
    for method in report.methods:
        rel, absl = led.relative_errors[method], led.absolute_errors[method]
        for i, t in enumerate(led.times):
            rows.append((fmt(t), method, fmt(rel[i]), fmt(absl[i])))
    return rows


def ledger_rows(report) -> list[tuple]:
    led = report.ledger
    if led is None:
        return []
    cols = led.columns
    return [
        (fmt(t), *(fmt(cols[name][i]) for name in LEDGER_HEADER[1:]))
        for i, t in enumerate(led.times)
    ]


def _csv(header, rows) -> str:
    return "".join(",".join(r) + "\n" for r in [header, *rows])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _atomic_write(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def emit_outputs(report, directory, emit_svg: bool | None = None) -> list[Path]:
    """Write ``errors.csv``, ``ledger.csv``, ``report.json`` and, if enabled, two SVG figures."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {directory}: {exc}") from exc
    if emit_svg is None:
        emit_svg = bool(report.config.get("output", {}).get("emit_svg", False))

    files = {
        "errors.csv": _csv(ERRORS_HEADER, errors_rows(report)).encode(),
        "ledger.csv": _csv(LEDGER_HEADER, ledger_rows(report)).encode(),
        "report.json": (json.dumps(report.to_dict(), indent=2, default=_json_default) + "\n").encode(),
    }
    if emit_svg and report.ledger is not None:
        from .plotting import end_state_svg, error_lanes_svg

        files["fig2.svg"] = error_lanes_svg(report)
        files["endstate.svg"] = end_state_svg(report)

    written = []
    for name, data in files.items():
        path = directory / name
        try:
            _atomic_write(path, data)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return written
