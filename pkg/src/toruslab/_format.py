"""Deterministic serialization helpers.

All JSON and CSV emitted by the library goes through these functions so
that identical inputs produce byte-identical files: keys are sorted,
floats are printed with a fixed 17-significant-digit format, and no
timestamps or environment data are embedded.
"""

import json
import math
import os
import tempfile

FORMAT_VERSION = 1


def fmt_float(x):
    """Render a float with 17 significant digits (round-trip exact)."""
    if isinstance(x, bool):  # bool is an int subclass; keep JSON literals
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        return '"%s"' % repr(x)
    return format(float(x), ".17g")


def to_canonical_json(obj, indent=0):
    """Serialize nested dict/list/scalar data to canonical JSON text."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = []
        for key in sorted(obj):
            items.append(
                '%s  %s: %s'
                % (pad, json.dumps(str(key)), to_canonical_json(obj[key], indent + 2))
            )
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        items = [pad + "  " + to_canonical_json(v, indent + 2) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, float)):
        return fmt_float(obj)
    if isinstance(obj, complex):
        return to_canonical_json({"re": obj.real, "im": obj.imag}, indent)
    return json.dumps(str(obj))


def write_json(path, obj):
    """Atomically write a canonical JSON document (with format_version)."""
    if isinstance(obj, dict) and "format_version" not in obj:
        obj = dict(obj, format_version=FORMAT_VERSION)
    _atomic_write(path, to_canonical_json(obj) + "\n")


def write_csv(path, header, rows):
    """Atomically write CSV with deterministic float formatting."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _csv_cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
