"""Named sweeps reproducing the evaluation figures.

Each preset expands into sweep points; every point is replicated over
consecutive seeds and reduced to the mean and sample standard deviation of
each metric.  Runs are independent, so they may execute in a process pool;
results are gathered in submission order, which keeps the output identical
for any ``jobs`` value.
"""
from __future__ import annotations

import csv
import io
import json
import statistics
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .engine import iter_records
from .metrics import RunSummary, overhead_percent, summarize_records
from .model import ChannelConfig, LocalMode, Scheme, SimConfig
from .oracle import FluidInstance, solve_fluid, utility_gap

DEFAULT_REPLICATIONS = 10
N_GRID = (2, 5, 10, 20, 50)
LOSS_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
M_GRID = (5.0, 50.0, 500.0)
OVERHEAD_N = tuple(range(1, 51))

UNIT = SimConfig(cellular=ChannelConfig.constant(1.0), local=ChannelConfig.constant(1.0))


def run_summary(config: SimConfig) -> RunSummary:
    """Simulate ``config`` and summarize it without keeping the trace."""
    return summarize_records(config, iter_records(config))


def run_many(configs: Sequence[SimConfig], jobs: int = 1) -> List[RunSummary]:
    if jobs <= 1 or len(configs) <= 1:
        return [run_summary(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_summary, configs))


@dataclass(frozen=True)
class SweepPoint:
    labels: Tuple[Tuple[str, object], ...]
    config: SimConfig


def _metrics(summary: RunSummary) -> Dict[str, float]:
    row = OrderedDict()
    row["mean_rate"] = summary.mean_rate
    row["mean_goodput"] = summary.mean_goodput
    row["utility"] = summary.utility
    for name, value in summary.mean_queue.items():
        row[f"{name}_avg"] = value
    row["real_backlog"] = summary.mean_real_backlog
    row["delay"] = summary.delay_estimate if summary.delay_estimate is not None else float("nan")
    row["overhead_percent"] = summary.overhead_percent
    return row


def _std(values: List[float]) -> float:
    return statistics.stdev(values) if len(values) > 1 else 0.0


def aggregate(labels: Sequence[Tuple[str, object]], summaries: Sequence[RunSummary],
              extra: Optional[Callable[[RunSummary], Dict[str, float]]] = None
              ) -> Dict[str, object]:
    per_run = []
    for s in summaries:
        m = _metrics(s)
        if extra is not None:
            m.update(extra(s))
        per_run.append(m)
    row: Dict[str, object] = OrderedDict(labels)
    row["replications"] = len(summaries)
    for key in per_run[0]:
        values = [m[key] for m in per_run]
        row[f"{key}_mean"] = statistics.fmean(values)
        row[f"{key}_std"] = _std(values)
    return row


# --------------------------------------------------------------------------
# Preset definitions
# --------------------------------------------------------------------------

def _modes():
    for scheme in (Scheme.DCC, Scheme.SCC):
        for mode in (LocalMode.UNICAST, LocalMode.BROADCAST):
            yield scheme, mode


def _points_rate_vs_n(base: SimConfig) -> List[SweepPoint]:
    return [SweepPoint((("N", n), ("scheme", s.value), ("mode", m.value)),
                       base.replace(n_devices=n, scheme=s, local_mode=m))
            for n in N_GRID for s, m in _modes()]


def _points_queues(base: SimConfig) -> List[SweepPoint]:
    return [SweepPoint((("N", base.n_devices), ("scheme", s.value), ("mode", m.value)),
                       base.replace(scheme=s, local_mode=m))
            for s, m in _modes()]


def _points_loss(base: SimConfig) -> List[SweepPoint]:
    return [SweepPoint((("loss_prob", p), ("scheme", s.value), ("mode", m.value)),
                       base.replace(cellular_loss_prob=p, scheme=s, local_mode=m))
            for p in LOSS_GRID for s, m in _modes()]


def _points_oracle_gap(base: SimConfig) -> List[SweepPoint]:
    return [SweepPoint((("M", m_const), ("mode", m.value)),
                       base.replace(m_const=m_const, scheme=Scheme.DCC, local_mode=m))
            for m in (LocalMode.UNICAST, LocalMode.BROADCAST) for m_const in M_GRID]


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    description: str
    axes: Tuple[str, ...]
    points: Optional[Callable[[SimConfig], List[SweepPoint]]]
    base: SimConfig = UNIT
    simulated: bool = True


PRESETS: Dict[str, ExperimentPreset] = OrderedDict(
    (p.name, p) for p in (
        ExperimentPreset("fig3-rate-vs-n", "per-device rate versus group size",
                         ("N", "scheme", "mode"), _points_rate_vs_n),
        ExperimentPreset("fig3c-overhead", "uplink control overhead versus group size",
                         ("N", "scheme"), None, simulated=False),
        ExperimentPreset("fig4-queues", "lossless queue sizes, N=3",
                         ("N", "scheme", "mode"), _points_queues),
        ExperimentPreset("fig5-rate-vs-loss", "per-device rate versus cellular loss",
                         ("loss_prob", "scheme", "mode"), _points_loss),
        ExperimentPreset("fig6-queues-vs-loss", "queue sizes versus cellular loss",
                         ("loss_prob", "scheme", "mode"), _points_loss),
        ExperimentPreset("oracle-gap", "DcC utility gap to the fluid optimum versus M",
                         ("M", "mode"), _points_oracle_gap),
    )
)


class UnknownPresetError(KeyError):
    pass


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(PRESETS)
        raise UnknownPresetError(f"unknown preset {name!r}; known presets: {known}") from None


def overhead_rows(base: SimConfig = UNIT) -> List[Dict[str, object]]:
    return [OrderedDict((("N", n), ("scheme", s.value),
                         ("overhead_percent", overhead_percent(
                             s, n, base.control_msg_bytes, base.data_packet_bytes))))
            for n in OVERHEAD_N for s in (Scheme.DCC, Scheme.SCC)]


def run_preset(name: str, seed: int = 0, replications: int = DEFAULT_REPLICATIONS,
               horizon: Optional[int] = None, jobs: int = 1) -> List[Dict[str, object]]:
    """Rows of the aggregated table for preset ``name``.

    Replication r of every point uses seed ``seed + r``.
    """
    preset = get_preset(name)
    if not preset.simulated:
        return overhead_rows(preset.base)
    if replications < 1:
        raise ValueError("replications must be at least 1")
    base = preset.base if horizon is None else preset.base.replace(horizon=horizon)
    points = preset.points(base)
    configs = [p.config.replace(seed=seed + r) for p in points for r in range(replications)]
    summaries = run_many(configs, jobs)

    rows = []
    for i, point in enumerate(points):
        chunk = summaries[i * replications:(i + 1) * replications]
        extra = None
        if name == "oracle-gap":
            solution = solve_fluid(FluidInstance.from_config(point.config))
            extra = (lambda sol: lambda s: {"utility_gap": utility_gap(s, sol),
                                            "y_star": sol.y_star[0]})(solution)
        rows.append(aggregate(point.labels, chunk, extra))
    return rows


def _cell(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def rows_csv_text(rows: Sequence[Dict[str, object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(rows[0]))
    for row in rows:
        writer.writerow([_cell(v) for v in row.values()])
    return buf.getvalue()


def rows_json_text(rows: Sequence[Dict[str, object]]) -> str:
    return json.dumps(list(rows), indent=2) + "\n"
