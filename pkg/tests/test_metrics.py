import csv
import math

import pytest
from hypothesis import given, strategies as st

from coopsim.engine import Trace, TraceRecord, iter_records, run
from coopsim.errors import MetricError
from coopsim.metrics import (RunSummary, csv_columns, export, littles_law_delay,
                             overhead_percent, read_summary_json, summarize,
                             summarize_records, trace_csv_text, warmup_slots)
from coopsim.model import (LocalMode, QueueBank, Scheme, SimConfig, SlotDecision,
                           zero_matrix)


def synthetic(n_slots, n=2, y=0.0, q_total=0.0, direct=0.0, warmup_fraction=0.0):
    """DcC trace with constant admissions, relay backlog and direct deliveries."""
    cfg = SimConfig(n_devices=n, horizon=n_slots, warmup_fraction=warmup_fraction)
    records = []
    for t in range(n_slots):
        d = SlotDecision.empty(n)
        d.y = [y] * n
        q = zero_matrix(n)
        q[0][1] = q_total
        cell = zero_matrix(n)
        cell[0][0] = direct
        bank = QueueBank([0.0] * n, zero_matrix(n), q, [0.0] * n, zero_matrix(n))
        records.append(TraceRecord(t, d, bank, cell, zero_matrix(n), 0, 0))
    return Trace(cfg, tuple(records))


def test_all_zero_trace_gives_zero_summary():
    s = summarize(synthetic(10))
    assert s.mean_rate_per_device == [0.0, 0.0]
    assert s.mean_goodput_per_device == [0.0, 0.0]
    assert all(v == 0.0 for v in s.mean_queue.values())
    assert s.mean_real_backlog == 0.0 and s.delay_estimate == 0.0 and s.utility == 0.0


def test_constant_rate_is_exact():
    s = summarize(synthetic(37, y=1.0))
    assert s.mean_rate_per_device == [1.0, 1.0]
    assert s.utility == 2 * math.log(2.0)


def test_warmup_is_excluded():
    cfg = SimConfig(horizon=100, warmup_fraction=0.25)
    assert warmup_slots(cfg) == 25
    trace = run(cfg)
    assert summarize(trace).slots_averaged == 75


def test_explicit_zero_warmup_matches_zero_fraction():
    trace = synthetic(20, y=0.5, q_total=1.0)
    assert summarize(trace, warmup=0) == summarize(trace)


def test_everything_in_warmup_is_an_error():
    with pytest.raises(MetricError, match="warm-up"):
        summarize(synthetic(10), warmup=10)


def test_streaming_summary_equals_trace_summary():
    cfg = SimConfig(horizon=400, scheme=Scheme.SCC, cellular_loss_prob=0.2)
    assert summarize_records(cfg, iter_records(cfg)) == summarize(run(cfg))


def test_queue_means_pool_over_pairs():
    s = summarize(synthetic(5, n=3, q_total=6.0))
    assert s.mean_queue["q"] == pytest.approx(1.0)
    assert s.mean_real_backlog == 6.0


def test_broadcast_rate_near_optimum():
    s = summarize(run(SimConfig(local_mode=LocalMode.BROADCAST, horizon=20_000)))
    assert all(r == pytest.approx(5 / 3, rel=0.05) for r in s.mean_rate_per_device)


def test_overhead_examples():
    assert overhead_percent(Scheme.SCC, 50, 4, 1000) == pytest.approx(20.0)
    assert overhead_percent(Scheme.DCC, 50, 4, 1000) == pytest.approx(0.4)
    assert overhead_percent(Scheme.SCC, 1, 4, 1000) == overhead_percent(Scheme.DCC, 1, 4, 1000)


@given(st.integers(1, 200), st.integers(1, 64), st.integers(1, 10_000))
def test_overhead_growth(n, cbytes, dbytes):
    step = overhead_percent(Scheme.SCC, n + 1, cbytes, dbytes) - overhead_percent(
        Scheme.SCC, n, cbytes, dbytes)
    assert step == pytest.approx(100.0 * cbytes / dbytes)
    assert overhead_percent(Scheme.DCC, n, cbytes, dbytes) == overhead_percent(
        Scheme.DCC, n + 1, cbytes, dbytes)


def test_overhead_rejects_nonpositive_sizes():
    with pytest.raises(ValueError):
        overhead_percent(Scheme.DCC, 3, 0, 1000)


def test_measured_overhead_matches_formula():
    for scheme in Scheme:
        s = summarize(run(SimConfig(n_devices=4, scheme=scheme, horizon=50)))
        assert s.overhead_percent == pytest.approx(overhead_percent(scheme, 4, 4, 1000))


def test_littles_law_examples():
    assert littles_law_delay(synthetic(10, q_total=2.0, direct=1.0)) == pytest.approx(2.0)
    assert littles_law_delay(synthetic(10, direct=1.0)) == 0.0
    with pytest.raises(MetricError, match="delay undefined"):
        littles_law_delay(synthetic(10, q_total=2.0))


def test_dcc_delay_below_scc_delay():
    for seed in range(3):
        base = SimConfig(horizon=5_000, seed=seed)
        dcc = littles_law_delay(run(base))
        scc = littles_law_delay(run(base.replace(scheme=Scheme.SCC)))
        assert dcc < scc


def test_summary_json_round_trip(tmp_path):
    s = summarize(run(SimConfig(horizon=300, cellular_loss_prob=0.1)))
    path = export(s, tmp_path / "s.json", "json")
    assert read_summary_json(path) == s


def test_summary_dict_round_trip_with_undefined_delay():
    s = RunSummary([0.0], [0.0], {"q": 1.0}, 1.0, None, 0.4, 0.0, 5)
    assert RunSummary.from_dict(s.to_dict()) == s


def test_csv_rows_and_header(tmp_path):
    trace = run(SimConfig(horizon=123))
    path = export(trace, tmp_path / "t.csv", "csv")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == csv_columns(3)
    assert rows[0] == ["slot", "rate_0", "rate_1", "rate_2", "goodput_0", "goodput_1",
                       "goodput_2", "lambda_total", "eta_total", "q_total", "mu_total",
                       "nu_total", "delivered_cellular_total", "delivered_local_total",
                       "control_bytes_uplink", "data_bytes_down"]
    assert len(rows) - 1 == 123
    assert [int(r[0]) for r in rows[1:4]] == [0, 1, 2]


def test_csv_floats_are_exact():
    trace = run(SimConfig(horizon=30))
    line = trace_csv_text(trace).splitlines()[25].split(",")
    assert float(line[1]) == trace.records[24].decision.y[0]


def test_export_trace_as_json_writes_its_summary(tmp_path):
    trace = run(SimConfig(horizon=50))
    assert read_summary_json(export(trace, tmp_path / "x.json", "json")) == summarize(trace)


def test_export_errors_carry_the_path(tmp_path):
    trace = run(SimConfig(horizon=5))
    bad = tmp_path / "missing-dir" / "t.csv"
    with pytest.raises(OSError, match="missing-dir"):
        export(trace, bad, "csv")
    with pytest.raises(ValueError, match="format"):
        export(trace, tmp_path / "t.xml", "xml")
    with pytest.raises(OSError, match="nothere"):
        read_summary_json(tmp_path / "nothere.json")
