import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mecgame.best_response import (
    InfeasibleOffloadError,
    SolverConfig,
    TransmissionObjective,
    best_cpu,
    best_power,
    best_response,
    min_power,
    safeguarded_newton,
    transmission_utility,
)
from mecgame.checks import golden_section, random_profile, random_scenario
from mecgame.game import altruistic_utility
from mecgame.model import (
    DomainError,
    NetworkParams,
    Scenario,
    Strategy,
    StrategyProfile,
    Task,
    UserParams,
    local_overhead,
    total_overhead,
    transmission_rate,
)

from conftest import make_network, make_scenario, make_user

OFF = Strategy(1.0, 0.15, 0.0)


class TestBestCpu:
    def test_balanced_weights(self):
        assert best_cpu(make_user(0), 1e6) == pytest.approx(7.937e8, rel=1e-4)

    def test_pure_latency_runs_flat_out(self):
        assert best_cpu(make_user(0, wt=1.0), 1e6) == 1e9

    def test_pure_energy_goes_to_floor(self):
        assert best_cpu(make_user(0, wt=0.0), 1e6) == 1e6

    @settings(max_examples=200, deadline=None)
    @given(wt=st.floats(0.0, 1.0), log_kappa=st.floats(-29, -25), log_fmax=st.floats(7, 10))
    def test_matches_golden_section(self, wt, log_kappa, log_fmax):
        u = UserParams(0, 0, 1e-8, 10 ** log_kappa, 10 ** log_fmax, wt, 1 - wt, Task(5e6, 200))
        f = best_cpu(u, 1e6)
        g = golden_section(lambda x: local_overhead(u, x), 1e6, u.f_max)
        assert local_overhead(u, f) <= local_overhead(u, g) * (1 + 1e-9)


class TestMinPower:
    def test_reference(self):
        sc = make_scenario([0])
        assert min_power(sc, StrategyProfile((OFF,)), 0) == pytest.approx(1e-5, rel=1e-12)

    def test_linear_in_interference(self):
        sc = make_scenario([0, 0], [1e-8, 1.0], noise=1e-30)
        a = min_power(sc, StrategyProfile((OFF, Strategy(1.0, 1e-3))), 0)
        b = min_power(sc, StrategyProfile((OFF, Strategy(1.0, 2e-3))), 0)
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_vanishes_with_threshold(self):
        sc = make_scenario([0], theta=1e-300)
        assert min_power(sc, StrategyProfile((OFF,)), 0) < 1e-290


class TestTransmissionObjective:
    def test_no_interferers_is_own_term(self):
        sc = make_scenario([0])
        obj = TransmissionObjective(sc, StrategyProfile((OFF,)), 0)
        u = sc.users[0]
        a = u.task.length_bits * math.log(2) / sc.network.channel_bandwidth
        p = 0.07
        assert obj.value(p) == pytest.approx(a * (0.5 + 0.5 * p) / math.log1p(p * 1e-8 / 1e-13), rel=1e-14)

    def test_pure_latency_matches_rate(self):
        sc = make_scenario([0], wts=[1.0])
        p = 0.03
        prof = StrategyProfile((Strategy(1.0, p),))
        expected = sc.users[0].task.length_bits / transmission_rate(sc, prof, 0)
        assert transmission_utility(sc, prof, 0, p) == pytest.approx(expected, rel=1e-13)

    def test_differs_from_utility_by_constant(self, rng):
        sc = random_scenario(rng, 6, 2)
        prof = random_profile(rng, sc)
        n = 0
        obj = TransmissionObjective(sc, prof, n)
        diffs = [altruistic_utility(sc, prof.replace(n, Strategy(1.0, p)), n) - obj.value(p)
                 for p in (0.01, 0.05, 0.12)]
        assert np.ptp(diffs) <= 1e-12 * max(1.0, abs(diffs[0]))

    def test_neighbour_term_increases_with_power(self):
        sc = make_scenario([0, 0], [1e-8, 1e-8], wts=[1.0, 0.5])
        prof = StrategyProfile((OFF, OFF))
        obj = TransmissionObjective(sc, prof, 0)
        assert obj.nb_b.size == 1
        m = lambda p: obj.nb_b[0] / math.log1p(obj.nb_c[0] / (obj.nb_e[0] + p * obj.gain))
        assert m(0.02) < m(0.05) < m(0.1)

    def test_rejects_nonpositive_power(self):
        sc = make_scenario([0])
        with pytest.raises(DomainError):
            transmission_utility(sc, StrategyProfile((OFF,)), 0, 0.0)

    def test_derivatives_match_finite_differences(self, rng):
        sc = random_scenario(rng, 6, 1)
        prof = random_profile(rng, sc)
        obj = TransmissionObjective(sc, prof, 2)
        for p in (0.01, 0.04, 0.11):
            h = 1e-6 * p
            d1, d2 = obj.derivatives(p)
            fd1 = (obj.value(p + h) - obj.value(p - h)) / (2 * h)
            fd2 = (obj.derivatives(p + h)[0] - obj.derivatives(p - h)[0]) / (2 * h)
            assert d1 == pytest.approx(fd1, rel=1e-5, abs=1e-9)
            assert d2 == pytest.approx(fd2, rel=1e-5, abs=1e-9)

    def test_vectorized_matches_scalar(self, rng):
        sc = random_scenario(rng, 5, 1)
        obj = TransmissionObjective(sc, random_profile(rng, sc), 1)
        grid = np.linspace(1e-3, 0.15, 9)
        np.testing.assert_allclose(obj.value(grid), [obj.value(float(p)) for p in grid], rtol=1e-15)


def test_safeguarded_newton_root():
    root = safeguarded_newton(lambda x: (x ** 3 - 2, 3 * x ** 2), 0.0, 2.0, 1e-14, 100)
    assert root == pytest.approx(2 ** (1 / 3), rel=1e-13)


def test_safeguarded_newton_requires_bracket():
    with pytest.raises(ValueError):
        safeguarded_newton(lambda x: (x * x + 1, 2 * x), -1.0, 1.0, 1e-12, 50)


class TestBestPower:
    def test_pure_latency_uses_max(self):
        sc = make_scenario([0], wts=[1.0])
        assert best_power(sc, StrategyProfile((OFF,)), 0)[0] == 0.15

    def test_pure_energy_uses_min(self):
        sc = make_scenario([0], wts=[0.0])
        prof = StrategyProfile((OFF,))
        grid = np.linspace(1e-5, 0.15, 1000)
        vals = TransmissionObjective(sc, prof, 0).value(grid)
        assert np.all(np.diff(vals) > 0)
        assert best_power(sc, prof, 0)[0] == pytest.approx(min_power(sc, prof, 0), rel=1e-15)

    def test_infeasible_raises(self):
        sc = make_scenario([0], [1e-14])
        with pytest.raises(InfeasibleOffloadError):
            best_power(sc, StrategyProfile((OFF,)), 0)

    def test_stationary_points_are_roots(self, rng):
        cfg = SolverConfig()
        for _ in range(30):
            sc = random_scenario(rng, 4, 1)
            prof = random_profile(rng, sc)
            try:
                _, stationary = best_power(sc, prof, 0, cfg)
            except InfeasibleOffloadError:
                continue
            obj = TransmissionObjective(sc, prof, 0)
            for p in stationary:
                d1, d2 = obj.derivatives(p)
                # |U'| <= tol, or the bracket collapsed to adjacent floats
                assert abs(d1) <= cfg.newton_tol or abs(d1) <= 1e-6 * abs(d2) * p

    def test_two_users_mixed_weights_grid_oracle(self):
        sc = make_scenario([0, 0], [2e-9, 5e-8], wts=[0.3, 0.8], theta=1e-2)
        prof = StrategyProfile((OFF, Strategy(1.0, 0.01)))
        obj = TransmissionObjective(sc, prof, 0)
        p_bar, _ = best_power(sc, prof, 0)
        grid = np.linspace(min_power(sc, prof, 0), 0.15, 100_001)
        assert obj.value(p_bar) <= obj.value(grid).min() * (1 + 1e-6)


class TestBestResponse:
    def test_fast_server_tiny_task_offloads(self):
        users = (make_user(0, bits=1e3),)
        sc = Scenario(users, make_network(server_cpu=1e15))
        br = best_response(sc, StrategyProfile((OFF,)), 0)
        assert br.strategy.lam == 1.0 and br.utility_offload < br.utility_local

    def test_hopeless_channel_stays_local(self):
        sc = make_scenario([0], [1e-14])
        br = best_response(sc, StrategyProfile((OFF,)), 0)
        assert br.strategy == Strategy(0.0, 0.0, best_cpu(sc.users[0], 1e6))
        assert not br.feasible_offload

    def test_altruism_can_keep_user_local(self):
        users = (UserParams(0, 0, 1e-6, 1e-27, 1e9, 0.5, 0.5, Task(5e6, 200)),
                 UserParams(1, 0, 1e-11, 1e-27, 1e9, 0.5, 0.5, Task(5e6, 200)))
        sc = Scenario(users, NetworkParams(1, 2e6, 1e-13, 1e10, 0.15, 1e-3))
        prof = StrategyProfile((OFF, Strategy(1.0, 1e-3)))
        br = best_response(sc, prof, 0)
        selfish = min(total_overhead(sc, prof.replace(0, Strategy(1.0, p)), 0)
                      for p in np.linspace(1e-6, 0.15, 2000))
        assert selfish < local_overhead(users[0], br.f_star)
        assert br.utility_offload > br.utility_local
        assert br.strategy.lam == 0.0

    def test_tie_break(self, monkeypatch):
        import mecgame.best_response as mod
        sc = make_scenario([0])
        monkeypatch.setattr(mod, "altruistic_utility", lambda *a: 1.0)
        prof = StrategyProfile((OFF,))
        assert best_response(sc, prof, 0).strategy.lam == 0.0
        assert best_response(sc, prof, 0, SolverConfig(tie_break_local=False)).strategy.lam == 1.0

    def test_beats_grid_candidates(self, rng):
        for _ in range(10):
            sc = random_scenario(rng, 4, 1)
            prof = random_profile(rng, sc)
            n = int(rng.integers(4))
            br = best_response(sc, prof, n)
            got = altruistic_utility(sc, prof.replace(n, br.strategy), n)
            u = sc.users[n]
            fs = np.linspace(1e6, u.f_max, 1000)
            best_local = min(altruistic_utility(sc, prof.replace(n, Strategy(0.0, 0.0, f)), n) for f in fs)
            assert got <= best_local + 1e-9 * max(1.0, abs(got))
            lo = min_power(sc, prof, n)
            if lo <= 0.15:
                obj = TransmissionObjective(sc, prof, n)
                grid = np.linspace(lo, 0.15, 100_001)
                k = int(np.argmin(obj.value(grid)))
                cand = altruistic_utility(sc, prof.replace(n, Strategy(1.0, grid[k])), n)
                assert got <= cand + 1e-9 * max(1.0, abs(got))


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(multistart_count=2)
    with pytest.raises(ValueError):
        SolverConfig(newton_tol=0)
