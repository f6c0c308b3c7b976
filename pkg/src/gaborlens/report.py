"""JSON and CSV reports of per-slice fits and per-layer statistics.

JSON schema: ``{model_id, layers: [...], slices: [...], histogram: {...}}``
with layers carrying the five-number summaries and slices the provenance,
RMS, parameters and degeneracy flag of every fit, in provenance order.
Floats are emitted with shortest round-trip precision, so re-parsing
reproduces them bit-exactly.

CSV column order (one row per slice):
layer,layer_index,filter,channel,rms,degenerate,amplitude,phase,u1,u2,sigma,iterations,init_rank
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .fitting import FitResult
from .ingestion import KernelSlice
from .stats import HistogramResult, LayerSummary

__all__ = ["CSV_COLUMNS", "report_document", "emit_report"]

CSV_COLUMNS = [
    "layer",
    "layer_index",
    "filter",
    "channel",
    "rms",
    "degenerate",
    "amplitude",
    "phase",
    "u1",
    "u2",
    "sigma",
    "iterations",
    "init_rank",
]


def _layer_dict(summary: LayerSummary) -> dict:
    return {
        "layer_name": summary.layer_name,
        "count": summary.count,
        "degenerate_count": summary.degenerate_count,
        "median": summary.median,
        "q1": summary.q1,
        "q3": summary.q3,
        "p5": summary.p5,
        "p95": summary.p95,
    }


def _slice_dict(kslice: KernelSlice, fit: FitResult) -> dict:
    return {
        "layer": kslice.layer_name,
        "layer_index": kslice.layer_index,
        "filter": kslice.filter_index,
        "channel": kslice.channel_index,
        "rms": fit.rms,
        "params": {
            "amplitude": fit.params.amplitude,
            "phase": fit.params.phase,
            "u1": fit.params.u1,
            "u2": fit.params.u2,
            "sigma": fit.params.sigma,
        },
        "degenerate": fit.degenerate,
    }


def report_document(model_id, slice_fits, summaries, hist: HistogramResult | None = None) -> dict:
    document = {
        "model_id": model_id,
        "layers": [_layer_dict(s) for s in summaries],
        "slices": [_slice_dict(ks, fit) for ks, fit in slice_fits],
    }
    if hist is not None:
        document["histogram"] = {
            "edges": list(hist.edges),
            "counts": list(hist.counts),
            "underflow": hist.underflow,
            "overflow": hist.overflow,
        }
    return document


def emit_report(model_id, slice_fits, summaries, hist, fmt: str, path) -> None:
    """Write the report as JSON or RFC-4180 CSV.

    ``slice_fits`` pairs each KernelSlice with its FitResult, already in
    provenance order.
    """
    path = Path(path)
    if fmt == "json":
        document = report_document(model_id, slice_fits, summaries, hist)
        path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    elif fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(CSV_COLUMNS)
            for kslice, fit in slice_fits:
                writer.writerow(
                    [
                        kslice.layer_name,
                        kslice.layer_index,
                        kslice.filter_index,
                        kslice.channel_index,
                        repr(fit.rms),
                        "true" if fit.degenerate else "false",
                        repr(fit.params.amplitude),
                        repr(fit.params.phase),
                        repr(fit.params.u1),
                        repr(fit.params.u2),
                        repr(fit.params.sigma),
                        fit.iterations,
                        fit.init_rank,
                    ]
                )
    else:
        raise ValueError(f"unknown report format {fmt!r}")
