"""
Utility functions for reading and writing path panels, result files and plots.
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from h1_errors import DataError  # noqa: E402
from h1_process import PathPanel, SamplePath  # noqa: E402

logger = logging.getLogger(__name__)

PANEL_FORMATS = ("wide", "long")
LONG_COLUMNS = ["path_id", "t", "value"]

# fixed salt and no date stamp keep SVG output byte-stable
plt.rcParams["svg.hashsalt"] = "h1flow"


def atomic_write_text(path, text: str) -> Path:
    """
    Write text through a temporary file in the target directory, then rename.

    Args:
        path: Destination file
        text: Content

    Returns:
        Path: The destination
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_json(path, payload: Dict) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


def write_frame(path, frame: pd.DataFrame, index: bool = False) -> Path:
    return atomic_write_text(path, frame.to_csv(index=index, lineterminator="\n"))


def _read_csv(path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Panel file not found: {path}")
    try:
        return pd.read_csv(path, encoding="utf-8", sep=",", dtype=str, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: malformed CSV ({e})") from e
    except UnicodeDecodeError as e:
        raise DataError(f"{path}: not UTF-8 ({e})") from e


def _numeric_column(frame: pd.DataFrame, column: str, path) -> np.ndarray:
    """Parse a string column to floats; rows are numbered as in the file (header is row 1)."""
    values = np.empty(len(frame))
    for k, raw in enumerate(frame[column]):
        if not isinstance(raw, str) or raw.strip() == "":
            raise DataError(f"{path}, row {k + 2}: missing value in column '{column}'")
        text = raw.strip()
        try:
            values[k] = float(text)
        except ValueError as e:
            raise DataError(f"{path}, row {k + 2}: '{text}' in column '{column}' is not a number") from e
        if not np.isfinite(values[k]):
            raise DataError(f"{path}, row {k + 2}: nonfinite value in column '{column}'")
    return values


def _check_times(times: np.ndarray, rows: Sequence[int], path, label: str):
    for k in range(1, len(times)):
        if times[k] <= times[k - 1]:
            raise DataError(f"{path}, row {rows[k]}: times of {label} are not strictly increasing")


def _check_values(values: np.ndarray, rows: Sequence[int], path, label: str):
    for k, v in enumerate(values):
        if v <= 0:
            raise DataError(f"{path}, row {rows[k]}: non-positive value {v} in {label}")


def _ingest_wide(path) -> PathPanel:
    frame = _read_csv(path)
    columns = list(frame.columns)
    if len(columns) < 2 or columns[0] != "t":
        raise DataError(f"{path}: wide panels need a header 't,path_1,...,path_d'")
    rows = list(range(2, len(frame) + 2))
    times = _numeric_column(frame, "t", path)
    _check_times(times, rows, path, "the shared grid")
    paths = []
    for column in columns[1:]:
        values = _numeric_column(frame, column, path)
        _check_values(values, rows, path, f"column '{column}'")
        paths.append(SamplePath(times=times.copy(), values=values))
    return PathPanel(paths)


def _ingest_long(path) -> PathPanel:
    frame = _read_csv(path)
    if list(frame.columns) != LONG_COLUMNS:
        raise DataError(f"{path}: long panels need the header 'path_id,t,value'")
    times = _numeric_column(frame, "t", path)
    values = _numeric_column(frame, "value", path)
    ids = [str(v).strip() for v in frame["path_id"]]

    seen = {}
    order = []
    for k, (pid, t) in enumerate(zip(ids, times)):
        key = (pid, t)
        if key in seen:
            raise DataError(f"{path}, row {k + 2}: duplicate (path_id, t) = ({pid}, {t}), first at row {seen[key]}")
        seen[key] = k + 2
        if pid not in order:
            order.append(pid)

    ids_arr = np.array(ids)
    paths = []
    for pid in order:
        mask = ids_arr == pid
        rows = [k + 2 for k in np.flatnonzero(mask)]
        _check_times(times[mask], rows, path, f"path '{pid}'")
        _check_values(values[mask], rows, path, f"path '{pid}'")
        paths.append(SamplePath(times=times[mask], values=values[mask]))
    return PathPanel(paths)


def ingest_panel(path, fmt: str = "wide") -> PathPanel:
    """
    Read a panel from CSV.

    Args:
        path: CSV file (UTF-8, ',' separator, '.' decimal)
        fmt: 'wide' (t,path_1,...,path_d on a shared grid) or 'long'
            (path_id,t,value; paths may have their own grids)

    Returns:
        PathPanel: Validated panel

    Raises:
        DataError: With the offending row for any malformed input
    """
    if fmt not in PANEL_FORMATS:
        raise DataError(f"Unknown panel format '{fmt}', expected one of {PANEL_FORMATS}")
    panel = _ingest_wide(path) if fmt == "wide" else _ingest_long(path)
    logger.info(f"Loaded {panel.d} path(s), N={panel.n_obs} observations from {path}")
    return panel


def panel_to_wide_frame(panel: PathPanel) -> pd.DataFrame:
    grid = panel.shared_grid()
    if grid is None:
        raise DataError("Wide CSV needs paths on a shared grid; use the long format")
    data = {"t": grid}
    for i, path in enumerate(panel.paths, 1):
        data[f"path_{i}"] = path.values
    return pd.DataFrame(data)


def panel_to_long_frame(panel: PathPanel) -> pd.DataFrame:
    frames = [
        pd.DataFrame({"path_id": f"path_{i}", "t": path.times, "value": path.values})
        for i, path in enumerate(panel.paths, 1)
    ]
    return pd.concat(frames, ignore_index=True)


def write_panel(panel: PathPanel, path, fmt: str = "wide") -> Path:
    """Write a panel with shortest round-trip float formatting."""
    frame = panel_to_wide_frame(panel) if fmt == "wide" else panel_to_long_frame(panel)
    out = write_frame(path, frame)
    logger.info(f"Panel saved to: {out}")
    return out


def plot_series(output_path,
                times: np.ndarray,
                series: Dict[str, np.ndarray],
                title: str,
                ylabel: str = "value",
                background: Optional[np.ndarray] = None) -> str:
    """
    Line plot of one or more series against time, saved as SVG or PNG by suffix.

    Args:
        output_path: Destination image
        times: Shared time axis
        series: Label -> values
        title: Plot title
        ylabel: Y-axis label
        background: Optional (d, n) array of sample paths drawn in light grey

    Returns:
        str: Path to the saved plot image
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        plt.figure(figsize=(12, 6))
        if background is not None:
            for row in np.atleast_2d(background):
                plt.plot(times, row, color="grey", alpha=0.3, linewidth=0.8)
        colors = ["red", "green", "blue", "black"]
        for k, (label, values) in enumerate(series.items()):
            plt.plot(times, values, color=colors[k % len(colors)], label=label)
        plt.title(title)
        plt.xlabel("t")
        plt.ylabel(ylabel)
        if series:
            plt.legend()
        plt.grid(True, alpha=0.3)
        plt.tight_layout()
        fmt = output_path.suffix.lower().lstrip(".") or "svg"
        metadata = {"Date": None} if fmt in ("svg", "pdf") else None
        tmp = output_path.with_name(f".{output_path.name}.tmp")
        plt.savefig(tmp, format=fmt, dpi=150, bbox_inches="tight", metadata=metadata)
        plt.close()
        os.replace(tmp, output_path)
        logger.info(f"Plot saved to: {output_path}")
        return str(output_path)
    except Exception as e:
        plt.close("all")
        logger.error(f"Error creating plot {output_path}: {str(e)}")
        raise
