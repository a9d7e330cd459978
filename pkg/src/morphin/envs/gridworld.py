"""Gridworld with a goal that swaps corners and an optional late "jump" action set.

Cells are ``(row, col)`` with ``(0, 0)`` top-left; the state index is
``row * width + col``. Actions 0-3 move one cell up/down/left/right, actions
4-7 move two cells in the same directions once jumps are introduced.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from morphin.envs.base import Environment
from morphin.qcore import ContractViolation, Transition

Cell = tuple[int, int]

MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
ACTION_NAMES = ("up", "down", "left", "right", "jump-up", "jump-down", "jump-left", "jump-right")
BASIC_ACTIONS = 4
JUMP_ACTIONS = 8


@dataclass(frozen=True)
class GridworldConfig:
    width: int = 9
    height: int = 9
    start: Cell = (4, 4)
    goal_a: Cell = (0, 0)
    goal_b: Cell = (8, 8)
    goal_reward: float = 100.0
    step_reward: float = 0.0
    goal_swap_period: int | None = 300
    max_steps_per_episode: int = 500
    jump_introduction_episode: int | None = None
    obstacles: tuple[Cell, ...] = ()
    hazards: tuple[Cell, ...] = ()
    hazard_reward: float = -1.0

    def __post_init__(self):
        for name in ("start", "goal_a", "goal_b"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "obstacles", tuple(tuple(c) for c in self.obstacles))
        object.__setattr__(self, "hazards", tuple(tuple(c) for c in self.hazards))
        if self.width < 1 or self.height < 1:
            raise ContractViolation("width and height must be positive")
        for name in ("start", "goal_a", "goal_b"):
            if not self.in_bounds(getattr(self, name)):
                raise ContractViolation(f"{name} {getattr(self, name)} is outside the grid")
        for c in self.obstacles:
            if not self.in_bounds(c):
                raise ContractViolation(f"obstacle {c} is outside the grid")
            if c in (self.start, self.goal_a, self.goal_b):
                raise ContractViolation(f"obstacle {c} overlaps start or a goal")
        for c in self.hazards:
            if not self.in_bounds(c):
                raise ContractViolation(f"hazard {c} is outside the grid")
            if c in (self.goal_a, self.goal_b) or c in self.obstacles:
                raise ContractViolation(f"hazard {c} overlaps a goal or an obstacle")
        if self.start in (self.goal_a, self.goal_b):
            raise ContractViolation("start must differ from both goals")
        if self.goal_swap_period is not None and self.goal_swap_period < 1:
            raise ContractViolation("goal_swap_period must be positive")
        if self.max_steps_per_episode < 1:
            raise ContractViolation("max_steps_per_episode must be positive")

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    @property
    def state_count(self) -> int:
        return self.width * self.height

    def to_state(self, cell: Cell) -> int:
        if not self.in_bounds(cell):
            raise ContractViolation(f"cell {cell} is outside the grid")
        return cell[0] * self.width + cell[1]

    def to_cell(self, state: int) -> Cell:
        if not 0 <= state < self.state_count:
            raise ContractViolation(f"state {state} out of range")
        return divmod(state, self.width)

    def goal_for_episode(self, episode: int) -> Cell:
        if self.goal_swap_period is None:
            return self.goal_a
        return self.goal_a if (episode // self.goal_swap_period) % 2 == 0 else self.goal_b

    def action_count_for_episode(self, episode: int) -> int:
        jump = self.jump_introduction_episode
        return JUMP_ACTIONS if jump is not None and episode >= jump else BASIC_ACTIONS


def move(cfg: GridworldConfig, cell: Cell, action: int) -> Cell:
    """Deterministic successor cell.

    Moves are clamped to the grid. A move whose landing cell is an obstacle
    leaves the agent in place; jumps pass over obstacles.
    """
    if not 0 <= action < JUMP_ACTIONS:
        raise ContractViolation(f"unknown action {action}")
    dr, dc = MOVES[action % 4]
    dist = 2 if action >= BASIC_ACTIONS else 1
    r = min(max(cell[0] + dr * dist, 0), cfg.height - 1)
    c = min(max(cell[1] + dc * dist, 0), cfg.width - 1)
    if (r, c) in cfg.obstacles:
        return cell
    return (r, c)


def grid_step(cfg: GridworldConfig, cell: Cell, action: int, goal: Cell) -> tuple[Cell, float, bool]:
    """One move: ``(next_cell, reward, reached_goal)``.

    Landing on a hazard cell pays ``hazard_reward`` instead of ``step_reward``
    and does not end the episode.
    """
    nxt = move(cfg, cell, action)
    if nxt == goal:
        return nxt, cfg.goal_reward, True
    if nxt in cfg.hazards:
        return nxt, cfg.hazard_reward, False
    return nxt, cfg.step_reward, False


def shortest_path_length(cfg: GridworldConfig, goal: Cell, action_count: int) -> int | None:
    """Breadth-first search from the start cell; None when the goal is unreachable."""
    dist = {cfg.start: 0}
    frontier = deque([cfg.start])
    while frontier:
        cell = frontier.popleft()
        if cell == goal:
            return dist[cell]
        for a in range(action_count):
            nxt = move(cfg, cell, a)
            if nxt not in dist:
                dist[nxt] = dist[cell] + 1
                frontier.append(nxt)
    return None


class Gridworld(Environment):
    def __init__(self, config: GridworldConfig | None = None):
        super().__init__()
        self.config = config or GridworldConfig()
        self.state_count = self.config.state_count
        self.action_count = self.config.action_count_for_episode(0)
        self.goal = self.config.goal_for_episode(0)
        self.cell = self.config.start
        self.steps = 0
        cfg = self.config
        # successor state for every (state, action), so a step is a lookup
        self._successor = [
            [cfg.to_state(move(cfg, cfg.to_cell(st), a)) for a in range(JUMP_ACTIONS)]
            for st in range(cfg.state_count)
        ]
        self._hazard_states = frozenset(cfg.to_state(c) for c in cfg.hazards)
        self._goal_state = cfg.to_state(self.goal)

    def on_episode_start(self, episode: int, drift_detected: bool = False) -> int | None:
        self.goal = self.config.goal_for_episode(episode)
        self._goal_state = self.config.to_state(self.goal)
        wanted = self.config.action_count_for_episode(episode)
        if wanted > self.action_count:
            self.action_count = wanted
            return wanted
        return None

    def drift_episodes(self, episodes: int) -> list[int]:
        period = self.config.goal_swap_period
        if period is None:
            return []
        return list(range(period, episodes, period))

    def optimal_steps(self) -> int | None:
        return shortest_path_length(self.config, self.goal, self.action_count)

    def _reset(self) -> int:
        self.cell = self.config.start
        self.steps = 0
        return self._state

    def _step(self, action: int) -> Transition:
        cfg = self.config
        s = self._state
        nxt = self._successor[s][action]
        reached = nxt == self._goal_state
        if reached:
            reward = cfg.goal_reward
        elif nxt in self._hazard_states:
            reward = cfg.hazard_reward
        else:
            reward = cfg.step_reward
        self._state = nxt
        self.steps += 1
        terminal = reached or self.steps >= cfg.max_steps_per_episode
        return Transition(s, action, reward, nxt, terminal)

    @property
    def cell(self) -> Cell:
        return self.config.to_cell(self._state)

    @cell.setter
    def cell(self, value: Cell) -> None:
        self._state = self.config.to_state(value)
