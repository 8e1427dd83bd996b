import math

import numpy as np
import pytest

from sisvax.graph import Graph, complete_graph, path_graph, star_graph
from sisvax.sis import (
    ABSORBING, RESTART, SisParams, SisState, Trajectory, detect_metastability, extinction_time,
    seed_initial, simulate, step, theoretical_infection_bound, write_trajectory_csv,
    write_vaccination_csv,
)


def sd_of_mean(p, k):
    return math.sqrt(p * (1 - p) / k)


def test_params_validated():
    with pytest.raises(ValueError, match="p_inf"):
        SisParams(0.1, 1.5, 0.2)
    with pytest.raises(ValueError, match="alpha"):
        SisParams(0.1, 0.5, 0.2, alpha=-0.1)


class TestSeed:
    def test_extremes(self):
        rng = np.random.default_rng(0)
        assert seed_initial(SisParams(1, 0, 0), 5, rng).bits.tolist() == [1] * 5
        assert seed_initial(SisParams(0, 0, 0), 5, rng).infected == 0

    def test_mean(self):
        rng = np.random.default_rng(1)
        params = SisParams(0.3, 0, 0)
        counts = [seed_initial(params, 40, rng).infected for _ in range(10000)]
        sd = math.sqrt(40 * 0.3 * 0.7 / 10000)
        assert abs(np.mean(counts) - 12) < 3 * sd


class TestStep:
    def test_full_recovery_no_infection(self):
        g = complete_graph(4)
        s = step(g, SisParams(0.5, 0.0, 1.0), SisState(np.ones(4, np.uint8)), rng=np.random.default_rng(0))
        assert s.infected == 0 and s.round == 1

    def test_star_center_infects_all(self):
        bits = np.zeros(6, np.uint8)
        bits[0] = 1
        s = step(star_graph(5), SisParams(0.5, 1.0, 0.0), SisState(bits), rng=np.random.default_rng(0))
        assert s.bits.tolist() == [1] * 6

    def test_full_efficacy_blocks_infection(self):
        bits = np.array([1, 0, 1], np.uint8)
        params = SisParams(0.5, 1.0, 0.0, alpha=0.0)
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert step(path_graph(3), params, SisState(bits), {1}, rng).bits[1] == 0

    def test_path_marginals(self):
        params = SisParams(0.5, 0.3, 0.5)
        rng = np.random.default_rng(2)
        start = SisState(np.array([0, 1, 0], np.uint8))
        k = 100_000
        out = np.array([step(path_graph(3), params, start, rng=rng).bits for _ in range(k)])
        assert abs(out[:, 0].mean() - 0.3) < 3 * sd_of_mean(0.3, k)
        assert abs(out[:, 1].mean() - 0.5) < 3 * sd_of_mean(0.5, k)

    def test_multiple_infected_neighbors(self):
        params = SisParams(0.5, 0.4, 0.0)
        rng = np.random.default_rng(3)
        start = SisState(np.array([0, 1, 1, 1], np.uint8))
        k = 50_000
        hits = np.mean([step(star_graph(3), params, start, rng=rng).bits[0] for _ in range(k)])
        p = 1 - 0.6 ** 3
        assert abs(hits - p) < 3 * sd_of_mean(p, k)

    def test_length_checked(self):
        with pytest.raises(ValueError):
            step(path_graph(3), SisParams(0.5, 0.5, 0.5), SisState(np.zeros(4, np.uint8)))


class TestSimulate:
    def test_restart_alternates(self):
        traj = simulate(path_graph(4), SisParams(1, 0, 1), 4, RESTART, rng=np.random.default_rng(0))
        assert traj.infected_counts.tolist() == [4, 0, 4, 0, 4]
        assert traj.restart_rounds == [2, 4]

    def test_absorbing_all_zero(self):
        traj = simulate(path_graph(4), SisParams(0, 0.5, 0.5), 10, ABSORBING, rng=np.random.default_rng(0))
        assert traj.infected_counts.sum() == 0
        assert extinction_time(traj) == 0

    def test_absorbing_stays_extinct(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            traj = simulate(star_graph(5), SisParams(0.5, 0.2, 0.7), 60, ABSORBING, rng=rng)
            z = traj.infected_counts
            tau = extinction_time(traj)
            if tau is not None:
                assert (z[tau:] == 0).all()
                assert (z[:tau] > 0).all()

    def test_same_seed_same_trajectory(self):
        g = star_graph(6)
        params = SisParams(0.3, 0.3, 0.4)
        a = simulate(g, params, 50, RESTART, rng=np.random.default_rng(9))
        b = simulate(g, params, 50, RESTART, rng=np.random.default_rng(9))
        assert np.array_equal(a.states, b.states)

    def test_thinning(self):
        traj = simulate(star_graph(3), SisParams(1, 0, 1), 6, RESTART, rng=np.random.default_rng(0), thin=3)
        assert traj.rounds.tolist() == [0, 3, 6]

    @pytest.mark.parametrize(
        "schedule",
        [{-1: [0]}, {11: [0]}, {1: [0], 2: [0]}, {1: [9]}],
    )
    def test_bad_schedule(self, schedule):
        with pytest.raises(ValueError):
            simulate(path_graph(4), SisParams(0.5, 0.5, 0.5), 10, schedule=schedule)

    def test_vaccination_takes_effect_after_round(self):
        # vertex 1 vaccinated at round 2 with full efficacy; infections keep
        # coming before then
        params = SisParams(1.0, 1.0, 1.0, alpha=0.0)
        g = path_graph(3)
        traj = simulate(g, params, 6, RESTART, schedule={2: [1]}, rng=np.random.default_rng(0))
        assert traj.vaccination_log == {2: frozenset({1})}
        assert traj.states[3, 1] == 0

    def test_vaccination_reduces_hub_infection(self):
        params = SisParams(0.5, 0.4, 0.5, alpha=0.2)
        g = star_graph(8)
        rng = np.random.default_rng(5)
        plain = vacc = 0
        runs = 300
        for _ in range(runs):
            plain += simulate(g, params, 40, RESTART, rng=rng).states[20:, 0].mean()
            vacc += simulate(g, params, 40, RESTART, schedule={0: [0]}, rng=rng).states[20:, 0].mean()
        assert vacc / runs < plain / runs - 0.1

    def test_restart_from_zero_state(self):
        traj = simulate(path_graph(3), SisParams(1.0, 0.0, 1.0), 2, RESTART,
                        rng=np.random.default_rng(0), initial=np.zeros(3, np.uint8))
        assert traj.restart_rounds == [1]

    def test_extinction_rejects_restart(self):
        traj = simulate(path_graph(3), SisParams(1, 0, 1), 3, RESTART, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            extinction_time(traj)

    def test_extinction_never(self):
        traj = simulate(complete_graph(4), SisParams(1, 1, 0), 5, ABSORBING, rng=np.random.default_rng(0))
        assert extinction_time(traj) is None

    def test_extinction_at_three(self):
        states = np.array([[1, 0], [1, 1], [0, 1], [0, 0], [0, 0]], np.uint8)
        assert extinction_time(Trajectory(states, ABSORBING)) == 3


class TestMetastability:
    def test_constant(self):
        assert detect_metastability(np.full(200, 0.4)) == 50

    def test_extinct(self):
        assert detect_metastability(np.zeros(200)) is None

    def test_alternating(self):
        series = np.where(np.arange(300) % 2, 0.8, 0.2)
        assert detect_metastability(series, window=50, tol=0.01) is None

    def test_rising_then_flat(self):
        series = np.r_[np.linspace(0.05, 0.5, 100), np.full(200, 0.5)]
        r = detect_metastability(series)
        assert r is not None and 100 <= r <= 160

    def test_window_validated(self):
        with pytest.raises(ValueError):
            detect_metastability(np.ones(10), window=1)


class TestBound:
    def test_closed_form(self):
        p = SisParams(0.3, 0.1, 0.8)
        assert theoretical_infection_bound(p, 3.9, 40, 0) == pytest.approx(12.0)
        assert theoretical_infection_bound(p, 3.9, 40, 5) == pytest.approx(12 * 0.59 ** 5)
        assert theoretical_infection_bound(p, 3.9, 40, 5) == pytest.approx(0.8578, abs=2e-4)

    def test_negative_rho(self):
        with pytest.raises(ValueError):
            theoretical_infection_bound(SisParams(0.3, 0.1, 0.8), -1, 4, 1)


def test_csv_export(tmp_path):
    traj = simulate(path_graph(3), SisParams(1, 0, 1), 4, RESTART, schedule={1: [2, 0]},
                    rng=np.random.default_rng(0))
    write_trajectory_csv(traj, tmp_path / "t.csv")
    write_vaccination_csv(traj, tmp_path / "v.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "round,infected_count,proportion,restart_flag"
    assert lines[3] == "2,3,1.000000,1"
    assert (tmp_path / "v.csv").read_text().splitlines() == ["round,vertex", "1,0", "1,2"]


def test_update_is_order_independent():
    # the same uniforms drive each vertex no matter how vertices are labeled
    g = Graph(4, [(0, 1), (1, 2), (2, 3)])
    perm = [3, 2, 1, 0]
    h = Graph(4, [(perm[u], perm[v]) for u, v in g.edges])
    params = SisParams(0.5, 0.5, 0.5)
    rng = np.random.default_rng(7)
    k = 40_000
    start = np.array([1, 0, 0, 1], np.uint8)
    a = np.array([step(g, params, SisState(start), rng=rng).bits for _ in range(k)]).mean(0)
    b = np.array([step(h, params, SisState(start[perm]), rng=rng).bits for _ in range(k)]).mean(0)
    assert np.allclose(a, b[perm], atol=4 * sd_of_mean(0.5, k))
