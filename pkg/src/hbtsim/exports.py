"""Plot-ready CSV exports and the fit JSON report.

All CSV files use LF line endings, '.' decimals and full double precision
(shortest round-tripping representation), so re-imported numbers equal
the exported ones.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .correlate import G2Curve, Histogram, PeakSeries
from .fitting import FitResult

__all__ = ["export_csv", "read_histogram_csv", "write_fit_json"]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(destination, header: str, rows) -> None:
    text = header + "\n" + "".join(",".join(_fmt(v) for v in row) + "\n"
                                   for row in rows)
    Path(destination).write_text(text, encoding="utf-8", newline="\n")


def export_csv(obj, destination) -> None:
    """Export a histogram, g2 curve, peak series or fit result as CSV.

    Columns: histogram ``tau_ps,counts``; g2 curve ``tau_ps,value,sigma``;
    peak series ``m,c_m,C_N``; fit result
    ``parameter,value,unit,std_error``.
    """
    if isinstance(obj, Histogram):
        tau = obj.centers() * obj.resolution_ps
        _write_rows(destination, "tau_ps,counts", zip(tau, obj.counts))
    elif isinstance(obj, G2Curve):
        _write_rows(destination, "tau_ps,value,sigma",
                    zip(obj.tau_ps, obj.values, obj.statistical_sigma))
    elif isinstance(obj, PeakSeries):
        norm = obj.normalized
        if norm is None:
            norm = np.full(obj.indices.size, np.nan)
        _write_rows(destination, "m,c_m,C_N",
                    zip(obj.indices, obj.raw_counts, norm))
    elif isinstance(obj, FitResult):
        rows = [(name, obj.parameters[name], obj.units.get(name, ""),
                 obj.standard_errors.get(name, float("nan")))
                for name in obj.parameters]
        text = "parameter,value,unit,std_error\n" + "".join(
            f"{n},{_fmt(v)},{u},{_fmt(se)}\n" for n, v, u, se in rows)
        Path(destination).write_text(text, encoding="utf-8", newline="\n")
    else:
        raise TypeError(f"no CSV export for {type(obj).__name__}")


def read_histogram_csv(source) -> Histogram:
    """Re-import an exported histogram CSV.

    The bin grid is reconstructed from the (uniform) center spacing;
    ``total_pairs`` is set to the count sum, which is all the CSV holds.
    """
    lines = Path(source).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "tau_ps,counts":
        raise ValueError("not a histogram CSV (expected 'tau_ps,counts')")
    tau = []
    counts = []
    for line in lines[1:]:
        a, b = line.split(",")
        tau.append(float(a))
        counts.append(int(b))
    tau = np.asarray(tau)
    counts = np.asarray(counts, dtype=np.int64)
    if tau.size == 1:
        width = 1
    else:
        width = int(round(float(np.mean(np.diff(tau)))))
    origin = int(round(tau[0] - width / 2.0))
    return Histogram(bin_width=width, origin=origin, counts=counts,
                     total_pairs=int(counts.sum()))


def write_fit_json(fit: FitResult, destination) -> None:
    """Write the documented JSON report of one fit."""
    Path(destination).write_text(
        json.dumps(fit.to_dict(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8", newline="\n")
