"""Deterministic writers for CSV, JSON, gnuplot data and plot scripts.

Floats are written with ``repr`` (shortest round-trip form), JSON with sorted
keys, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION, _nan_to_none


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_json(path, obj):
    path = Path(path)
    text = json.dumps(_nan_to_none(_plain(obj)), sort_keys=True, indent=2) + "\n"
    path.write_text(text, encoding="utf-8")
    return path


def write_csv(path, columns, rows):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row[c]) for c in columns])
    return path


def write_dat(path, blocks, header):
    """gnuplot data: one blank-line separated block per entry of ``blocks``."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for i, (label, columns) in enumerate(blocks):
            if i:
                fh.write("\n\n")
            fh.write(f"# {label}\n")
            for values in zip(*columns):
                fh.write(" ".join(fmt(v) for v in values) + "\n")
    return path


def snapshot_plot_script(dat_name, labels, title):
    lines = ["set terminal pngcairo size 900,600", "set output 'snapshots.png'",
             f"set title '{title}'", "set xlabel 'x'", "set ylabel 'density'", "plot \\"]
    entries = [f"  '{dat_name}' index {i} using 1:2 with lines title '{lab}'" for i, lab in enumerate(labels)]
    return "\n".join(lines) + "\n" + ", \\\n".join(entries) + "\n"


def table_plot_script(dat_name, x_label, y_label, png, logscale=True):
    lines = ["set terminal pngcairo size 900,600", f"set output '{png}'",
             f"set xlabel '{x_label}'", f"set ylabel '{y_label}'"]
    if logscale:
        lines.append("set logscale xy")
    lines.append(f"plot '{dat_name}' using 1:2 with linespoints notitle")
    return "\n".join(lines) + "\n"


def sidecar(kind, config_dict, config_hash, extra=None):
    out = {"schema_version": SCHEMA_VERSION, "kind": kind, "config": config_dict,
           "config_hash": config_hash, "run_id": config_hash[:12]}
    out.update(extra or {})
    return out


def ensure_dir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
