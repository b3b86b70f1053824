"""Serialization helpers and convergence tables."""

from __future__ import annotations

import csv
import io
import json
import math


def fmt(value) -> str:
    """Decimal string with 17 significant digits (round-trips a float64)."""
    return f"{float(value):.16e}"


def encode(obj):
    """Recursively turn floats into 17-digit strings for JSON output."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        return fmt(obj)
    if hasattr(obj, "item") and getattr(obj, "ndim", None) == 0:
        return encode(obj.item())
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if hasattr(obj, "tolist"):
        return encode(obj.tolist())
    if hasattr(obj, "as_dict"):
        return encode(obj.as_dict())
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(encode(obj), indent=2, sort_keys=True) + "\n"


def observed_orders(errors, hs):
    """Orders log(e_k / e_{k+1}) / log(h_k / h_{k+1}) between successive levels."""
    out = []
    for k in range(len(errors) - 1):
        e0, e1 = abs(errors[k]), abs(errors[k + 1])
        if e0 == 0 or e1 == 0:
            out.append(float("nan"))
        else:
            out.append(math.log(e0 / e1) / math.log(hs[k] / hs[k + 1]))
    return out


def emit_convergence_table(reports, path=None):
    """CSV of identity reports across resolutions plus the observed orders.

    Returns ``(csv_text, orders)``; the order column is empty on the first
    row.  Needs at least two reports.
    """
    if len(reports) < 2:
        raise ValueError("a convergence table needs at least two resolutions")
    hs = [1.0 / r.resolution[0] for r in reports]
    orders = observed_orders([r.residual_abs for r in reports], hs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(reports[0].csv_header()) + ["observed_order"]
    w.writerow(header)
    for k, r in enumerate(reports):
        w.writerow(list(r.csv_row()) + ["" if k == 0 else fmt(orders[k - 1])])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text, orders
