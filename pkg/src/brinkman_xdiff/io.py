"""CSV and JSON output.  Floats are written with 17 significant digits."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .entropy import diagnostics_header, diagnostics_row


def fmt(x):
    """Round-trip exact text for a number (``%.17g``; ints stay ints)."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_table(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_table(path):
    """Header and float array of a CSV written by :func:`write_table`."""
    with Path(path).open(encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def states_header(n):
    return ["t", "x"] + [f"u{i + 1}" for i in range(n)]


def write_states_csv(trajectory, path, grid=None, n=None):
    """One row per (output time, cell).  An empty trajectory gives just the header.

    ``grid`` supplies the cell centres and is required unless there are no states.
    """
    states = list(trajectory.states) if trajectory is not None else []
    if n is None:
        n = states[0].n if states else 1
    if states and grid is None:
        raise ValueError("writing states needs the grid for the cell centres")
    rows = []
    for s in states:
        for j, x in enumerate(grid.centers):
            rows.append([s.t, x, *s.u[:, j]])
    return write_table(path, states_header(n), rows)


def read_states_csv(path):
    """Inverse of :func:`write_states_csv`: ``(times, x, u)`` with ``u`` of shape (T, n, M)."""
    header, data = read_table(path)
    n = len(header) - 2
    if data.size == 0:
        return np.empty(0), np.empty(0), np.empty((0, n, 0))
    # rows are grouped by time in output order; keep that order
    t_col = data[:, 0]
    order = [t_col[0]]
    for t in t_col[1:]:
        if t != order[-1]:
            order.append(t)
    times = np.array(order)
    M = data.shape[0] // len(times)
    blocks = data.reshape(len(times), M, n + 2)
    return times, blocks[0, :, 1].copy(), np.transpose(blocks[:, :, 2:], (0, 2, 1)).copy()


def write_diagnostics_csv(trajectory, path, n):
    rows = [diagnostics_row(r) for r in trajectory.diagnostics] if trajectory is not None else []
    return write_table(path, diagnostics_header(n), rows)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_manifest(path, manifest):
    """Deterministic JSON: sorted keys, fixed indentation, non-finite floats as strings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_plain(manifest), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path
