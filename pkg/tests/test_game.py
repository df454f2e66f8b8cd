import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mecgame.best_response import best_response
from mecgame.game import all_utilities, altruistic_utility, exact_potential_residual, is_nash, potential
from mecgame.model import Strategy, StrategyProfile, local_overhead, total_overhead
from mecgame.checks import random_profile, random_scenario, random_strategy

from conftest import make_scenario

OFF = Strategy(1.0, 0.1, 0.0)


def test_single_user_utility_is_overhead():
    sc = make_scenario([0])
    prof = StrategyProfile((OFF,))
    assert altruistic_utility(sc, prof, 0) == total_overhead(sc, prof, 0)


def test_co_channel_pair_shares_utility():
    sc = make_scenario([0, 0], [1e-8, 2e-8])
    prof = StrategyProfile((OFF, Strategy(1.0, 0.05)))
    u0, u1 = all_utilities(sc, prof)
    assert u0 == u1 == pytest.approx(total_overhead(sc, prof, 0) + total_overhead(sc, prof, 1))


def test_isolated_user_in_three_user_instance():
    sc = make_scenario([0, 0, 1])
    prof = StrategyProfile((OFF, OFF, OFF))
    o = [total_overhead(sc, prof, n) for n in range(3)]
    u = all_utilities(sc, prof)
    assert u[2] == o[2]
    assert u[0] == pytest.approx(o[0] + o[1])
    assert u[1] == pytest.approx(o[0] + o[1])


def test_all_local_potential():
    sc = make_scenario([0, 0, 0, 0])
    prof = StrategyProfile((Strategy(0.0, 0.0, 5e8),) * 4)
    assert potential(sc, prof) == pytest.approx(4 * local_overhead(sc.users[0], 5e8), rel=1e-15)


def test_potential_recomputed_independently(rng):
    sc = random_scenario(rng, 4, 2)
    prof = random_profile(rng, sc)
    expected = 0.0
    for n, (u, s) in enumerate(zip(sc.users, prof)):
        gamma = sum(prof[i].power * sc.users[i].channel_gain for i in range(4)
                    if i != n and sc.users[i].channel == u.channel and prof[i].lam > 0)
        o_time = o_energy = 0.0
        if s.lam > 0:
            r = sc.network.channel_bandwidth * math.log2(1 + s.power * u.channel_gain /
                                                         (sc.network.noise_power + gamma))
            t = u.task.length_bits / r
            o_time += s.lam * (t + u.task.workload / sc.network.server_cpu)
            o_energy += s.lam * s.power * t
        if s.lam < 1:
            o_time += (1 - s.lam) * u.task.workload / s.cpu
            o_energy += (1 - s.lam) * u.kappa * u.task.workload * s.cpu ** 2
        expected += u.weight_time * o_time + u.weight_energy * o_energy
    assert potential(sc, prof) == pytest.approx(expected, rel=1e-12)


def test_residual_zero_without_change(rng):
    sc = random_scenario(rng, 5, 2)
    prof = random_profile(rng, sc)
    assert exact_potential_residual(sc, prof, 2, prof[2]) == 0.0


def test_residual_power_only_change():
    sc = make_scenario([0, 0, 0], [1e-8, 3e-9, 5e-8])
    prof = StrategyProfile((OFF, OFF, Strategy(1.0, 0.02)))
    d = exact_potential_residual(sc, prof, 0, Strategy(1.0, 0.13))
    assert abs(d) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_exact_potential_identity(seed):
    import numpy as np
    rng = np.random.default_rng(seed)
    sc = random_scenario(rng, 5, int(rng.integers(1, 3)))
    prof = random_profile(rng, sc)
    n = int(rng.integers(5))
    dev = random_strategy(rng, sc.users[n], sc.network)
    d_phi = potential(sc, prof.replace(n, dev)) - potential(sc, prof)
    assert abs(exact_potential_residual(sc, prof, n, dev)) <= 1e-9 * max(1.0, abs(d_phi))


class TestIsNash:
    def test_single_user_current_only(self):
        sc = make_scenario([0])
        prof = StrategyProfile((OFF,))
        assert is_nash(sc, prof, [[OFF]], 0.0)

    def test_witness_from_best_response(self):
        sc = make_scenario([0])
        prof = StrategyProfile((Strategy(0.0, 0.0, 1e6),))
        br = best_response(sc, prof, 0).strategy
        cert = is_nash(sc, prof, [[prof[0], br]], 1e-9)
        assert not cert
        assert cert.user == 0 and cert.deviation == br
        assert cert.improvement > 1e-9

    def test_negative_eps_rejected(self):
        sc = make_scenario([0])
        with pytest.raises(ValueError):
            is_nash(sc, StrategyProfile((OFF,)), [[OFF]], -1.0)
