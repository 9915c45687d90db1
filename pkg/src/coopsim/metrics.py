"""Trace post-processing and file export.

Time averages skip the first ``floor(warmup_fraction * horizon)`` slots.
Per-family queue means pool across devices (or ordered pairs) and then
across time, so ``lambda_avg`` is the average of the per-device time
averages.

CSV schema (one row per slot): ``slot``, ``rate_<k>`` (admitted rate of
device k), ``goodput_<k>`` (content delivered to device k), the per-family
backlog totals ``lambda_total, eta_total, q_total, mu_total, nu_total``,
``delivered_cellular_total``, ``delivered_local_total``,
``control_bytes_uplink`` and ``data_bytes_down``.

JSON schema: the fields of ``RunSummary``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional

from .engine import Trace, TraceRecord
from .errors import MetricError
from .model import Scheme, SimConfig

QUEUE_FAMILIES = ("lambda", "eta", "q", "mu", "nu")


@dataclass
class RunSummary:
    mean_rate_per_device: List[float]
    mean_goodput_per_device: List[float]
    mean_queue: Dict[str, float]
    mean_real_backlog: float
    delay_estimate: Optional[float]
    overhead_percent: float
    utility: float
    slots_averaged: int

    @property
    def mean_rate(self) -> float:
        return sum(self.mean_rate_per_device) / len(self.mean_rate_per_device)

    @property
    def mean_goodput(self) -> float:
        return sum(self.mean_goodput_per_device) / len(self.mean_goodput_per_device)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunSummary":
        return cls(
            mean_rate_per_device=[float(v) for v in data["mean_rate_per_device"]],
            mean_goodput_per_device=[float(v) for v in data["mean_goodput_per_device"]],
            mean_queue={k: float(v) for k, v in data["mean_queue"].items()},
            mean_real_backlog=float(data["mean_real_backlog"]),
            delay_estimate=None if data["delay_estimate"] is None else float(data["delay_estimate"]),
            overhead_percent=float(data["overhead_percent"]),
            utility=float(data["utility"]),
            slots_averaged=int(data["slots_averaged"]),
        )


def warmup_slots(config: SimConfig) -> int:
    return int(math.floor(config.warmup_fraction * config.horizon))


def overhead_percent(scheme: Scheme, n_devices: int, control_msg_bytes: int,
                     data_packet_bytes: int) -> float:
    """Uplink control bytes per device per slot relative to one data packet."""
    if control_msg_bytes <= 0 or data_packet_bytes <= 0:
        raise ValueError("byte sizes must be positive")
    per_device = control_msg_bytes * n_devices if scheme is Scheme.SCC else control_msg_bytes
    return 100.0 * per_device / data_packet_bytes


def _family_totals(record: TraceRecord) -> Dict[str, float]:
    q = record.queues_after
    return {
        "lambda": sum(q.lam),
        "eta": sum(map(sum, q.eta)),
        "q": sum(map(sum, q.q_real)),
        "mu": sum(q.mu),
        "nu": sum(map(sum, q.nu)),
    }


def real_backlog(scheme: Scheme, totals: Dict[str, float]) -> float:
    """Stored content only: virtual DcC counters hold no packets."""
    if scheme is Scheme.DCC:
        return totals["q"]
    return totals["mu"] + totals["nu"]


class SummaryAccumulator:
    """Online version of ``summarize`` for runs too long to keep in memory."""

    def __init__(self, config: SimConfig, warmup: Optional[int] = None):
        self.config = config
        self.warmup = warmup_slots(config) if warmup is None else warmup
        n = config.n_devices
        self.count = 0
        self.rate = [0.0] * n
        self.goodput = [0.0] * n
        self.family = dict.fromkeys(QUEUE_FAMILIES, 0.0)
        self.backlog = 0.0
        self.control_bytes = 0

    def add(self, record: TraceRecord) -> None:
        if record.slot < self.warmup:
            return
        self.count += 1
        for k, v in enumerate(record.admitted(self.config.scheme)):
            self.rate[k] += v
        for k, v in enumerate(record.goodput()):
            self.goodput[k] += v
        totals = _family_totals(record)
        for name, v in totals.items():
            self.family[name] += v
        self.backlog += real_backlog(self.config.scheme, totals)
        self.control_bytes += record.control_bytes_uplink

    def result(self) -> RunSummary:
        if self.count == 0:
            raise MetricError(
                f"no slots after the warm-up window of {self.warmup} slots; "
                f"horizon too short"
            )
        c, n = self.count, self.config.n_devices
        pairs = n * (n - 1)
        rate = [v / c for v in self.rate]
        goodput = [v / c for v in self.goodput]
        sizes = {"lambda": n, "eta": pairs, "q": pairs, "mu": n, "nu": pairs}
        mean_queue = {name: (self.family[name] / c / sizes[name] if sizes[name] else 0.0)
                      for name in QUEUE_FAMILIES}
        backlog = self.backlog / c
        delay = _delay(backlog, sum(goodput))
        overhead = 100.0 * self.control_bytes / (c * n * self.config.data_packet_bytes)
        return RunSummary(
            mean_rate_per_device=rate,
            mean_goodput_per_device=goodput,
            mean_queue=mean_queue,
            mean_real_backlog=backlog,
            delay_estimate=delay,
            overhead_percent=overhead,
            utility=sum(math.log1p(r) for r in rate),
            slots_averaged=c,
        )


def _delay(backlog: float, throughput: float) -> Optional[float]:
    if backlog == 0.0:
        return 0.0
    if throughput <= 0.0:
        return None
    return backlog / throughput


def summarize_records(config: SimConfig, records: Iterable[TraceRecord],
                      warmup: Optional[int] = None) -> RunSummary:
    acc = SummaryAccumulator(config, warmup)
    for record in records:
        acc.add(record)
    return acc.result()


def summarize(trace: Trace, warmup: Optional[int] = None) -> RunSummary:
    """Warm-up-excluded time averages of ``trace``.

    ``warmup`` overrides the configured warm-up length in slots.
    """
    return summarize_records(trace.config, trace.records, warmup)


def littles_law_delay(trace: Trace, warmup: Optional[int] = None) -> float:
    """Mean real backlog divided by mean delivered rate, in slots."""
    s = summarize(trace, warmup)
    if s.delay_estimate is None:
        raise MetricError("delay undefined: zero throughput with a nonzero backlog")
    return s.delay_estimate


# --------------------------------------------------------------------------
# Export
# --------------------------------------------------------------------------

def csv_columns(n_devices: int) -> List[str]:
    return (["slot"]
            + [f"rate_{k}" for k in range(n_devices)]
            + [f"goodput_{k}" for k in range(n_devices)]
            + [f"{name}_total" for name in QUEUE_FAMILIES]
            + ["delivered_cellular_total", "delivered_local_total",
               "control_bytes_uplink", "data_bytes_down"])


def trace_rows(trace: Trace) -> Iterable[list]:
    scheme = trace.config.scheme
    for rec in trace.records:
        totals = _family_totals(rec)
        yield ([rec.slot]
               + [repr(float(v)) for v in rec.admitted(scheme)]
               + [repr(float(v)) for v in rec.goodput()]
               + [repr(float(totals[name])) for name in QUEUE_FAMILIES]
               + [repr(float(sum(map(sum, rec.delivered_cellular)))),
                  repr(float(sum(map(sum, rec.delivered_local)))),
                  rec.control_bytes_uplink, rec.data_bytes_down])


def trace_csv_text(trace: Trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_columns(trace.config.n_devices))
    writer.writerows(trace_rows(trace))
    return buf.getvalue()


def summary_json_text(summary: RunSummary) -> str:
    return json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export(obj, path, fmt: str) -> Path:
    """Write a ``Trace`` (csv, or its summary as json) or ``RunSummary`` (json)."""
    path = Path(path)
    if fmt == "csv":
        if not isinstance(obj, Trace):
            raise TypeError("csv export takes a Trace")
        _write(path, trace_csv_text(obj))
    elif fmt == "json":
        summary = summarize(obj) if isinstance(obj, Trace) else obj
        _write(path, summary_json_text(summary))
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return path


def read_summary_json(path) -> RunSummary:
    path = Path(path)
    try:
        return RunSummary.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
