import json

import numpy as np
import pytest

from mecgame.scenario import (
    SpecError,
    build_scenario,
    generate,
    load_spec,
    parse_spec,
    path_gain,
    scenario_to_spec,
    spec_hash,
)


def gen_spec(**generator):
    return parse_spec({"network": {"num_channels": 10, "sinr_threshold": 1.0},
                       "generator": {"num_users": 10, "seed": 4, **generator}})


def test_path_gain_reference():
    assert path_gain(100.0, 4.0) == pytest.approx(1e-8, rel=1e-15)


def test_round_robin_one_user_per_channel():
    sc = generate(gen_spec())
    assert sorted(u.channel for u in sc.users) == list(range(10))


def test_generation_is_deterministic():
    assert generate(gen_spec()) == generate(gen_spec())
    assert generate(gen_spec(), seed=1) != generate(gen_spec(), seed=2)


def test_users_inside_cell():
    sc = generate(gen_spec(num_users=64, cell_radius=150.0))
    d = np.array([u.channel_gain for u in sc.users]) ** (-1 / 4)
    assert np.all(d >= 10.0 - 1e-9) and np.all(d <= 150.0 + 1e-9)


def test_defaults():
    sc = generate(gen_spec())
    net = sc.network
    assert net.channel_bandwidth == 2e6 and net.p_max == 0.15 and net.noise_power == 1e-13
    assert net.server_cpu == 1e10
    u = sc.users[0]
    assert u.task.length_bits == 5e6 and u.task.workload == pytest.approx(1e9)
    assert u.kappa == 1e-27 and u.f_max == 1e9


def test_mixed_weights_use_presets():
    sc = generate(gen_spec(num_users=40, weight_time="mixed"))
    assert {u.weight_time for u in sc.users} <= {0.0, 0.5, 1.0}


def test_total_cycles_option():
    sc = generate(gen_spec(task_bits=1e7, total_cycles=1e9))
    assert sc.users[0].task.workload == pytest.approx(1e9)


def test_sinr_threshold_required():
    with pytest.raises(SpecError, match="network.sinr_threshold"):
        parse_spec({"network": {"num_channels": 2}, "generator": {"num_users": 3}})


def test_unknown_field_named():
    with pytest.raises(SpecError, match="generator.radius"):
        parse_spec({"network": {"sinr_threshold": 1}, "generator": {"num_users": 3, "radius": 5}})


def test_users_xor_generator():
    with pytest.raises(SpecError, match="exactly one"):
        parse_spec({"network": {"sinr_threshold": 1}})


def test_user_count_bounds():
    with pytest.raises(SpecError, match="generator.num_users"):
        parse_spec({"network": {"sinr_threshold": 1}, "generator": {"num_users": 65}})


def test_channel_out_of_range():
    users = [{"channel": 3, "channel_gain": 1e-8, "task": {"length_bits": 1e6, "cycles_per_bit": 100}}]
    with pytest.raises(SpecError, match="channel"):
        parse_spec({"network": {"num_channels": 2, "sinr_threshold": 1}, "users": users})


def test_bad_json_reports_position(tmp_path):
    path = tmp_path / "s.json"
    path.write_text('{"network": {\n  "sinr_threshold": 1,\n}}')
    with pytest.raises(SpecError, match="line 3"):
        load_spec(path)


def test_missing_file(tmp_path):
    with pytest.raises(SpecError):
        load_spec(tmp_path / "nope.json")


def test_explicit_round_trip():
    sc = generate(gen_spec(weight_time="mixed"))
    spec = scenario_to_spec(sc)
    assert build_scenario(spec) == sc
    again = parse_spec(json.loads(spec.model_dump_json()))
    assert build_scenario(again) == sc


def test_hash_is_canonical():
    a = parse_spec({"network": {"sinr_threshold": 1.0, "num_channels": 10},
                    "generator": {"seed": 4, "num_users": 10}})
    assert spec_hash(a) == spec_hash(gen_spec())
    assert spec_hash(gen_spec(seed=5)) != spec_hash(gen_spec())
