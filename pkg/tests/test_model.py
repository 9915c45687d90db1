import dataclasses

import pytest
from hypothesis import given, strategies as st

from coopsim.errors import ConfigError
from coopsim.model import (CONFIG_KEYS, ChannelConfig, LocalMode, QueueBank, Scheme, SimConfig,
                           SlotDecision, dump_config, fresh_queue_bank, load_config,
                           parse_config, save_config, validate_config)


def test_defaults_are_valid():
    assert validate_config(SimConfig()) == []


def test_beta_above_capacity_is_one_violation():
    problems = validate_config(SimConfig(beta=2.0, cellular=ChannelConfig.constant(1.0)))
    assert len(problems) == 1
    assert problems[0].startswith("beta exceeds capacity")


def test_zero_horizon_is_one_violation():
    problems = validate_config(SimConfig(horizon=0))
    assert len(problems) == 1 and "horizon" in problems[0]


@pytest.mark.parametrize("changes, needle", [
    ({"n_devices": 0}, "n_devices"),
    ({"m_const": 0.0}, "m_const"),
    ({"r_max": -1.0}, "r_max"),
    ({"beta": -0.1}, "beta"),
    ({"cellular_loss_prob": 1.5}, "cellular_loss_prob"),
    ({"local_loss_prob": -0.1}, "local_loss_prob"),
    ({"control_msg_bytes": 0}, "control_msg_bytes"),
    ({"data_packet_bytes": 0}, "data_packet_bytes"),
    ({"seed": -1}, "seed"),
    ({"warmup_fraction": 1.0}, "warmup_fraction"),
    ({"broadcast_search": "fast"}, "broadcast_search"),
    ({"scc_stale_csi": "zero"}, "scc_stale_csi"),
    ({"local": ChannelConfig.bernoulli(1.0, 1.2)}, "local"),
    ({"cellular": ChannelConfig.constant(-1.0)}, "cellular"),
])
def test_each_bound_is_reported(changes, needle):
    problems = validate_config(SimConfig(**changes))
    assert problems and any(needle in p for p in problems)


def test_exact_broadcast_is_limited_to_twelve_devices():
    cfg = SimConfig(n_devices=13, local_mode=LocalMode.BROADCAST, broadcast_search="exact")
    assert any("exact" in p for p in validate_config(cfg))
    assert validate_config(cfg.replace(broadcast_search="greedy")) == []


def test_default_admission_cap_is_twice_the_cellular_rate():
    assert SimConfig(cellular=ChannelConfig.constant(1.5)).admission_cap == 3.0
    assert SimConfig(r_max=0.7).admission_cap == 0.7


def test_constant_is_bernoulli_with_certain_on():
    assert ChannelConfig.constant(2.0).on_probability == 1.0
    assert ChannelConfig.bernoulli(2.0, 0.25).mean == 0.5


@pytest.mark.parametrize("text", ["Constant(1.0)", "BernoulliOnOff(2.5, 0.3)"])
def test_channel_text_round_trip(text):
    assert ChannelConfig.parse(text).encode() == text


def test_channel_parse_rejects_garbage():
    with pytest.raises(ValueError):
        ChannelConfig.parse("Rayleigh(1)")


def test_fresh_bank_two_devices():
    bank = fresh_queue_bank(SimConfig(n_devices=2))
    assert bank.lam == [0.0, 0.0] and bank.mu == [0.0, 0.0]
    for mat in (bank.eta, bank.q_real, bank.nu):
        assert mat == [[0.0, 0.0], [0.0, 0.0]]


def test_fresh_bank_single_device_has_no_pairs():
    bank = fresh_queue_bank(SimConfig(n_devices=1))
    assert bank.lam == [0.0]
    assert all(v == 0.0 for mat in (bank.eta, bank.q_real, bank.nu) for row in mat for v in row)


def test_fresh_bank_ignores_seed_and_scheme():
    a = fresh_queue_bank(SimConfig(seed=1, scheme=Scheme.SCC))
    b = fresh_queue_bank(SimConfig(seed=99))
    assert a == b
    assert a.mu == [0.0, 0.0, 0.0]


def test_empty_decision_shapes():
    d = SlotDecision.empty(3)
    assert d.y == [0.0] * 3 and d.f_bcast == {} and len(d.h_local) == 3


configs = st.builds(
    SimConfig,
    n_devices=st.integers(1, 20),
    scheme=st.sampled_from(list(Scheme)),
    local_mode=st.sampled_from(list(LocalMode)),
    m_const=st.floats(0.1, 1e4, allow_nan=False),
    r_max=st.one_of(st.none(), st.floats(0.01, 10)),
    beta=st.floats(0, 1e-2),
    cellular=st.builds(ChannelConfig.bernoulli, st.floats(0, 5), st.floats(0, 1)),
    local=st.builds(ChannelConfig.constant, st.floats(0, 5)),
    cellular_loss_prob=st.floats(0, 1),
    horizon=st.integers(1, 10**6),
    seed=st.integers(0, 2**64 - 1),
    warmup_fraction=st.floats(0, 0.99),
    broadcast_search=st.sampled_from(["auto", "exact", "greedy"]),
    fixed_admission=st.one_of(st.none(), st.floats(0, 3)),
    dcc_loss_feedback=st.booleans(),
    scc_stale_csi=st.sampled_from(["skip", "hold"]),
)


@given(configs)
def test_config_text_round_trip(cfg):
    assert parse_config(dump_config(cfg)) == cfg


def test_dump_lists_every_field_once():
    keys = [line.split("=")[0].strip() for line in dump_config(SimConfig()).splitlines()]
    assert keys == list(CONFIG_KEYS)
    assert set(keys) == {f.name for f in dataclasses.fields(SimConfig)}


def test_parse_keeps_unspecified_defaults_and_skips_comments():
    cfg = parse_config("# header\nn_devices = 5   # five\n\nscheme = ScC\n")
    assert cfg == SimConfig(n_devices=5, scheme=Scheme.SCC)


@pytest.mark.parametrize("text, needle", [
    ("colour = red", "line 1: unknown key"),
    ("n_devices = 3\nhorizon 10", "line 2: expected"),
    ("m_const = lots", "line 1: bad value for m_const"),
    ("scheme = P2P", "line 1: bad value for scheme"),
])
def test_parse_errors_name_the_line(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_load_and_save(tmp_path):
    cfg = SimConfig(n_devices=4, local_mode=LocalMode.BROADCAST, m_const=12.5)
    path = tmp_path / "run.conf"
    save_config(cfg, path)
    assert load_config(path) == cfg


def test_load_missing_file_mentions_path(tmp_path):
    missing = tmp_path / "nope.conf"
    with pytest.raises(ConfigError, match="cannot read config file .*nope.conf"):
        load_config(missing)


def test_queue_bank_reports_size():
    assert QueueBank([0.0] * 4, [], [], [], []).n_devices == 4
