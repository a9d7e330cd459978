import math
import random
from collections import Counter, deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morphin.envs import Gridworld, GridworldConfig, Phase, TrafficConfig, TrafficIntersection
from morphin.envs.gridworld import grid_step, move, shortest_path_length
from morphin.envs.traffic import ArrivalChange, poisson, traffic_step
from morphin.qcore import ContractViolation

GRID = GridworldConfig()
STEP_COST = GridworldConfig(step_reward=-1.0)


def bfs_oracle(start, goal, size, jumps):
    """Shortest path on the open grid, written from scratch without the env's move()."""
    deltas = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if jumps:
        deltas += [(-2, 0), (2, 0), (0, -2), (0, 2)]
    seen = {start: 0}
    todo = deque([start])
    while todo:
        r, c = todo.popleft()
        for dr, dc in deltas:
            nr = min(max(r + dr, 0), size - 1)
            nc = min(max(c + dc, 0), size - 1)
            if (nr, nc) not in seen:
                seen[(nr, nc)] = seen[(r, c)] + 1
                todo.append((nr, nc))
    return seen[goal]


def test_step_into_goal():
    cell, reward, done = grid_step(GRID, (0, 1), 2, goal=(0, 0))
    assert (cell, reward, done) == ((0, 0), 100.0, True)


def test_wall_clamps():
    cell, reward, done = grid_step(STEP_COST, (0, 3), 0, goal=(0, 0))
    assert (cell, reward, done) == ((0, 3), -1.0, False)
    assert grid_step(GRID, (0, 3), 0, goal=(0, 0)) == ((0, 3), 0.0, False)
    assert move(GRID, (1, 4), 4) == (0, 4)  # jump clamps at the wall too


def test_hazard_cells_pay_penalty_without_ending():
    cfg = GridworldConfig(hazards=[(3, 4)])
    assert grid_step(cfg, (4, 4), 0, goal=(0, 0)) == ((3, 4), -1.0, False)
    assert grid_step(cfg, (4, 4), 1, goal=(0, 0)) == ((5, 4), 0.0, False)
    with pytest.raises(ContractViolation):
        GridworldConfig(hazards=[(0, 0)])


@pytest.mark.parametrize("goal", [(0, 0), (8, 8)])
def test_optimal_path_lengths(goal):
    assert shortest_path_length(GRID, goal, 4) == bfs_oracle((4, 4), goal, 9, False) == 8
    assert shortest_path_length(GRID, goal, 8) == bfs_oracle((4, 4), goal, 9, True) == 4


def test_obstacles_block_moves_but_not_jumps():
    cfg = GridworldConfig(obstacles=((3, 4),))
    assert move(cfg, (4, 4), 0) == (4, 4)
    assert move(cfg, (4, 4), 4) == (2, 4)


def test_obstacle_validation():
    with pytest.raises(ContractViolation):
        GridworldConfig(obstacles=((4, 4),))
    with pytest.raises(ContractViolation):
        GridworldConfig(start=(0, 0))


def test_goal_schedule():
    env = Gridworld(GRID)
    expected = {0: (0, 0), 299: (0, 0), 300: (8, 8), 599: (8, 8), 600: (0, 0), 900: (8, 8), 1200: (0, 0)}
    for ep, goal in expected.items():
        env.on_episode_start(ep)
        assert env.goal == goal
    assert env.drift_episodes(1500) == [300, 600, 900, 1200]


def test_jump_introduction():
    env = Gridworld(GridworldConfig(goal_swap_period=None, jump_introduction_episode=300))
    counts, events = [], []
    for ep in range(400):
        grown = env.on_episode_start(ep)
        if grown is not None:
            events.append((ep, grown))
        counts.append(env.action_count)
    assert set(counts[:300]) == {4} and set(counts[300:]) == {8}
    assert events == [(300, 8)]
    assert env.drift_episodes(400) == []


def test_jump_unavailable_before_introduction():
    env = Gridworld(GridworldConfig(jump_introduction_episode=300))
    env.on_episode_start(0)
    env.reset()
    with pytest.raises(ContractViolation):
        env.step(4)


def test_step_requires_reset():
    env = Gridworld(GRID)
    with pytest.raises(ContractViolation):
        env.step(0)


def test_episode_terminates_on_goal_or_budget():
    env = Gridworld(GridworldConfig(step_reward=-1.0, max_steps_per_episode=5))
    env.reset()
    ts = [env.step(0) for _ in range(5)]
    assert [t.terminal for t in ts] == [False] * 4 + [True]
    assert all(t.reward == -1.0 for t in ts)
    with pytest.raises(ContractViolation):
        env.step(0)

    env = Gridworld(STEP_COST)
    env.reset()
    path = [0] * 4 + [2] * 4
    ts = [env.step(a) for a in path]
    assert ts[-1].terminal and ts[-1].reward == 100.0
    assert sum(t.reward for t in ts) == 93.0


def test_grid_state_bijection():
    cells = [(r, c) for r in range(9) for c in range(9)]
    states = [GRID.to_state(c) for c in cells]
    assert sorted(states) == list(range(81))
    assert all(GRID.to_cell(GRID.to_state(c)) == c for c in cells)
    assert GRID.to_state((2, 7)) == 2 * 9 + 7


# --- traffic -----------------------------------------------------------------

ZERO = TrafficConfig(lambda_1=0.0, lambda_2=0.0, drift_schedule=())


def test_empty_green_penalty():
    _, reward = traffic_step(ZERO, (0, 5), Phase(0, 2), (0.0, 0.0), random.Random(0))
    assert reward == -ZERO.empty_green_penalty


def test_no_congestion_at_threshold():
    theta = ZERO.congestion_threshold
    for phase in (Phase(0, 2), Phase(1, 2)):
        q, reward = traffic_step(ZERO, (theta + 2, theta), phase, (0.0, 0.0), random.Random(0))
        assert reward == -max(0, max(q) - theta)
    q, reward = traffic_step(ZERO, (theta, theta), Phase(0, 0 + 1), (0.0, 0.0), random.Random(0))
    assert q == (theta - 1, theta) and reward == 0.0


def test_congestion_penalty_counts_both_lanes():
    q, reward = traffic_step(ZERO, (12, 9), Phase(1, 4), (0.0, 0.0), random.Random(0))
    assert q == (12, 5)
    assert reward == -(12 - 5)


def test_post_step_queue_distribution_matches_monte_carlo():
    cfg = TrafficConfig(drift_schedule=())
    rng = random.Random(2024)
    n = 100_000
    ours = Counter(traffic_step(cfg, (3, 0), Phase(0, 2), (1.0, 0.0), rng)[0][0] for _ in range(n))
    oracle = Counter((1 + np.random.default_rng(7).poisson(1.0, size=n)).tolist())
    for k in range(1, 8):
        p = math.exp(-1.0) / math.factorial(k - 1)
        sigma = math.sqrt(2 * n * p * (1 - p))  # std of the difference of two binomial counts
        assert abs(ours[k] - oracle[k]) < 3 * sigma, k
    assert abs(sum(k * v for k, v in ours.items()) / n - 2.0) < 3 * math.sqrt(1.0 / n)


def test_poisson_zero_rate():
    assert poisson(random.Random(0), 0.0) == 0


def test_arrival_schedule_and_expansion():
    env = TrafficIntersection(TrafficConfig(), seed=1)
    env.on_episode_start(0)
    assert env.rates == (0.5, 0.5)
    env.on_episode_start(2999)
    assert env.rates == (0.5, 0.5)
    assert env.on_episode_start(3000) is None  # schedule alone never expands
    assert env.rates == (1.5, 1.5) and env.action_count == 2
    assert env.on_episode_start(3005, drift_detected=True) == 4
    assert env.action_count == 4
    assert env.phases[2:] == [Phase(0, 4), Phase(1, 4)]
    assert env.on_episode_start(3100, drift_detected=True) is None
    assert env.action_count == 4
    env.on_episode_start(8000)
    assert env.rates == (0.3, 0.3)
    assert env.drift_episodes(10_000) == [3000, 8000]
    assert env.drift_episodes(5000) == [3000]


def test_traffic_config_validation():
    with pytest.raises(ContractViolation):
        TrafficConfig(drift_schedule=(ArrivalChange(10, 1, 1), ArrivalChange(10, 2, 2)))
    with pytest.raises(ContractViolation):
        TrafficConfig(base_phases=((0, 0),))
    with pytest.raises(ContractViolation):
        TrafficConfig(base_phases=((2, 1),))


def test_traffic_state_bijection():
    cfg = TrafficConfig()
    pairs = [(a, b) for a in range(21) for b in range(21)]
    assert sorted(cfg.to_state(*p) for p in pairs) == list(range(441))
    assert all(cfg.to_queues(cfg.to_state(*p)) == p for p in pairs)


def test_traffic_episode_length():
    env = TrafficIntersection(TrafficConfig(steps_per_episode=7), seed=3)
    env.reset()
    flags = [env.step(0).terminal for _ in range(7)]
    assert flags == [False] * 6 + [True]


@settings(max_examples=30)
@given(st.integers(0, 2**32), st.floats(0, 6), st.floats(0, 6), st.lists(st.integers(0, 3), min_size=1, max_size=200))
def test_queues_stay_in_bounds(seed, l1, l2, actions):
    cfg = TrafficConfig(lambda_1=l1, lambda_2=l2, drift_schedule=(), steps_per_episode=1000)
    env = TrafficIntersection(cfg, seed=seed)
    env.on_episode_start(0, drift_detected=True)
    env.reset()
    for a in actions:
        t = env.step(a)
        c1, c2 = cfg.to_queues(t.next_state)
        assert 0 <= c1 <= cfg.queue_cap and 0 <= c2 <= cfg.queue_cap
        assert math.isfinite(t.reward)
