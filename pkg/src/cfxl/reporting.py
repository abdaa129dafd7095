"""Metric serialization: CSV emission, JSON summaries, run manifests.

Floats are written with ``repr`` so values survive a round trip exactly
and identical runs produce byte-identical files.  All writes go through
a temp-file rename so partial output never lands under a final name.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from .combining import EpisodeMetrics
from .tasks.results import ExperimentResult, MetricRecord

SCHEMA_VERSION = 1

_FIXED_COLUMNS = [
    "config_hash",
    "method",
    "entity",
    "seed",
    "drop",
    "sum_se",
    "total_power_w",
    "ee",
    "active_antennas",
    "infeasible",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def metrics_columns(num_streams: int, num_ue: int) -> list[str]:
    cols = list(_FIXED_COLUMNS)
    cols += [f"se_stream_{u}" for u in range(num_streams)]
    cols += [f"ee_ue_{k}" for k in range(num_ue)]
    return cols


def rows_to_csv_text(rows: list[dict], columns: list[str] | None = None) -> str:
    """Generic table writer with the same float-repr determinism as results."""
    if columns is None:
        if not rows:
            raise ValueError("cannot infer columns from an empty table")
        columns = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(
            [_fmt(v) if isinstance(v, float) else str(v) for v in (row[c] for c in columns)]
        )
    return buf.getvalue()


def write_rows_csv(path, rows: list[dict], columns: list[str] | None = None) -> None:
    atomic_write_text(path, rows_to_csv_text(rows, columns))


def _per_ue_ee(metrics: EpisodeMetrics, num_ue: int) -> list[float]:
    """Each UE's share of network EE, split by its streams' SE."""
    se = metrics.se_per_stream
    n_s = len(se) // num_ue
    out = []
    for k in range(num_ue):
        se_k = float(se[k * n_s : (k + 1) * n_s].sum())
        out.append(metrics.ee * se_k / metrics.sum_se if metrics.sum_se > 0 else 0.0)
    return out


def result_to_csv_text(result: ExperimentResult) -> str:
    if not result.records:
        raise ValueError("cannot serialize an empty result")
    num_streams = len(result.records[0].metrics.se_per_stream)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(metrics_columns(num_streams, result.num_ue))
    for r in result.records:
        m = r.metrics
        row = [
            result.config_hash,
            r.method,
            r.entity,
            str(r.seed),
            str(r.drop),
            _fmt(m.sum_se),
            _fmt(m.total_power_w),
            _fmt(m.ee),
            str(m.active_antennas),
            str(int(m.infeasible)),
        ]
        row += [_fmt(v) for v in m.se_per_stream]
        row += [_fmt(v) for v in _per_ue_ee(m, result.num_ue)]
        writer.writerow(row)
    return buf.getvalue()


def write_result_csv(path, result: ExperimentResult) -> None:
    atomic_write_text(path, result_to_csv_text(result))


def read_result_csv(path) -> ExperimentResult:
    """Rebuild an ExperimentResult from its CSV emission."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        se_cols = [i for i, c in enumerate(header) if c.startswith("se_stream_")]
        ue_cols = [c for c in header if c.startswith("ee_ue_")]
        col = {c: i for i, c in enumerate(header)}
        records, config_hash = [], None
        for row in reader:
            config_hash = row[col["config_hash"]]
            se = np.array([float(row[i]) for i in se_cols])
            metrics = EpisodeMetrics(
                se_per_stream=se,
                sum_se=float(row[col["sum_se"]]),
                total_power_w=float(row[col["total_power_w"]]),
                ee=float(row[col["ee"]]),
                active_antennas=int(row[col["active_antennas"]]),
                infeasible=bool(int(row[col["infeasible"]])),
            )
            records.append(
                MetricRecord(
                    method=row[col["method"]],
                    entity=row[col["entity"]],
                    seed=int(row[col["seed"]]),
                    drop=int(row[col["drop"]]),
                    metrics=metrics,
                )
            )
    if config_hash is None:
        raise ValueError(f"{path} holds no records")
    return ExperimentResult(config_hash=config_hash, num_ue=len(ue_cols), records=records)


def boxplot_stats(values) -> dict:
    """Five-number summary plus 1.5-IQR whiskers, as plain floats."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("boxplot_stats needs at least one value")
    q1, median, q3 = (float(q) for q in np.percentile(v, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return {
        "min": float(v.min()),
        "q1": q1,
        "median": median,
        "q3": q3,
        "max": float(v.max()),
        "whisker_lo": float(inside.min()),
        "whisker_hi": float(inside.max()),
        "n": int(v.size),
    }


def summary_from_result(result: ExperimentResult) -> dict:
    """Per-method distribution summary used for boxplot-style reporting."""
    methods: dict[str, dict] = {}
    for method in sorted({r.method for r in result.records}):
        rows = result.by_method(method)
        methods[method] = {
            "entity": rows[0].entity,
            "n_records": len(rows),
            "n_infeasible": sum(r.metrics.infeasible for r in rows),
            "sum_se": boxplot_stats([r.metrics.sum_se for r in rows]),
            "ee": boxplot_stats([r.metrics.ee for r in rows]),
            "active_antennas_median": float(
                np.median([r.metrics.active_antennas for r in rows])
            ),
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "config_hash": result.config_hash,
        "methods": methods,
    }


def write_json(path, obj: dict) -> None:
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    code_version: str
    started_unix: float
    seeds: tuple[int, ...]
    outputs: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "started_unix": self.started_unix,
            "seeds": list(self.seeds),
            "outputs": list(self.outputs),
        }


def write_manifest(path, config_hash: str, seeds, outputs) -> RunManifest:
    from . import __version__

    manifest = RunManifest(
        config_hash=config_hash,
        code_version=__version__,
        started_unix=time.time(),
        seeds=tuple(int(s) for s in seeds),
        outputs=tuple(str(o) for o in outputs),
    )
    write_json(path, manifest.to_dict())
    return manifest
