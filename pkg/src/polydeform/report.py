"""Run reports: a versioned JSON tree with deterministic content and a separate timing section."""

from __future__ import annotations

import hashlib
import json
import math
import os

import numpy as np

from . import __version__

SCHEMA_VERSION = 1
TIMING_KEY = "nondeterministic"


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def describe_input(path):
    return {"file": os.path.basename(str(path)), "sha256": file_digest(path)}


def _plain(obj):
    """Convert numpy scalars / arrays to JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def build_report(command, inputs, config=None, validity=None, trace=None, quality=None, timing=None):
    """Assemble the report tree. Stages that did not run are present as ``null``.

    ``timing`` (a dict of wall-clock figures) lands under ``nondeterministic``;
    pass ``None`` to leave that section out entirely.
    """
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "polydeform", "version": __version__},
        "command": command,
        "inputs": {k: describe_input(p) for k, p in inputs.items()},
        "config": config,
        "validity": validity.to_dict() if validity is not None else None,
        "trace": trace.to_dict(timing=False) if trace is not None else None,
        "quality": quality.to_dict() if quality is not None else None,
    }
    if timing is not None:
        report[TIMING_KEY] = timing
    return _plain(report)


def trace_timing(trace):
    times = trace.wall_times()
    return {"total_seconds": float(sum(times)), "iteration_seconds": times}


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(report))


def deterministic_part(report):
    return {k: v for k, v in report.items() if k != TIMING_KEY}
