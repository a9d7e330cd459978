"""MORPHIN adaptive Q-learning agent and the fixed-schedule Q-learning baseline.

Both agents share one update skeleton::

    td     = r + gamma * max_a Q(s', a) - Q(s, a)      (bootstrap is 0 on terminal)
    Q(s,a) += rate * td

The baseline uses ``rate = alpha_base`` and a single exploration schedule
that never restarts. MORPHIN scales the rate with the TD-error magnitude
and restarts exploration whenever its Page-Hinkley detector fires on the
episode-return stream, or when new actions appear.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from morphin.drift import PageHinkleyConfig, PageHinkleyDetector
from morphin.qcore import ContractViolation, QTable, Transition


@dataclass(frozen=True)
class AgentConfig:
    alpha_base: float = 0.1
    alpha_max: float = 0.9
    gamma: float = 0.9
    k: float = 5.0
    epsilon_min: float = 0.01
    decay_rate: float = 0.05
    ph: PageHinkleyConfig = field(default_factory=PageHinkleyConfig)

    def __post_init__(self):
        if isinstance(self.ph, dict):
            object.__setattr__(self, "ph", PageHinkleyConfig(**self.ph))
        if not 0 < self.alpha_base <= 1:
            raise ContractViolation(f"alpha_base must be in (0, 1], got {self.alpha_base}")
        if not self.alpha_base < self.alpha_max <= 1:
            raise ContractViolation(
                f"alpha_max must be in (alpha_base, 1], got {self.alpha_max} "
                f"with alpha_base={self.alpha_base}"
            )
        if not 0 <= self.gamma < 1:
            raise ContractViolation(f"gamma must be in [0, 1), got {self.gamma}")
        if not self.k > 0:
            raise ContractViolation(f"k must be > 0, got {self.k}")
        if not 0 <= self.epsilon_min < 1:
            raise ContractViolation(f"epsilon_min must be in [0, 1), got {self.epsilon_min}")
        if not self.decay_rate > 0:
            raise ContractViolation(f"decay_rate must be > 0, got {self.decay_rate}")


def current_epsilon(cfg: AgentConfig, e: int) -> float:
    return cfg.epsilon_min + (1.0 - cfg.epsilon_min) * math.exp(-cfg.decay_rate * e)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def dynamic_alpha(cfg: AgentConfig, td: float) -> float:
    """Learning rate between ``alpha_base`` and ``alpha_max``, centred on ``|td| == k``."""
    return cfg.alpha_base + (cfg.alpha_max - cfg.alpha_base) * _sigmoid(abs(td) - cfg.k)


def td_error(cfg: AgentConfig, q: QTable, t: Transition) -> float:
    bootstrap = 0.0 if t.terminal else cfg.gamma * q.max_over_actions(t.next_state)[0]
    return t.reward + bootstrap - q.lookup(t.state, t.action)


@dataclass(frozen=True)
class StepOutcome:
    transition: Transition
    epsilon_used: float
    alpha_used: float
    td_error: float
    explored: bool
    q_value: float  # Q(s, a) after the update


class BaselineAgent:
    """Standard Q-learning: fixed learning rate, one decaying exploration schedule."""

    kind = "baseline"

    def __init__(self, cfg: AgentConfig, action_count: int, state_count: int, seed: int = 0):
        self.cfg = cfg
        self.q = QTable(action_count, state_count)
        self.decay_counter = 0
        self.detector = PageHinkleyDetector(cfg.ph)
        self.rng_seed = seed
        self.rng = random.Random(seed)
        self._last_epsilon = 1.0
        self._last_explored = False

    @property
    def epsilon(self) -> float:
        return current_epsilon(self.cfg, self.decay_counter)

    def select_action(self, s: int, epsilon: float | None = None) -> tuple[int, bool]:
        """Epsilon-greedy choice; returns ``(action, explored)``."""
        if epsilon is None:
            epsilon = self.epsilon
        if not 0.0 <= epsilon <= 1.0:
            raise ContractViolation(f"epsilon must be in [0, 1], got {epsilon}")
        self._last_epsilon = epsilon
        n = self.q.action_count
        if self.rng.random() < epsilon:
            a = min(int(self.rng.random() * n), n - 1)
            self._last_explored = True
        else:
            a = self.q.max_over_actions(s)[1]
            self._last_explored = False
        return a, self._last_explored

    def learning_rate(self, td: float) -> float:
        return self.cfg.alpha_base

    def step(self, t: Transition) -> StepOutcome:
        """Apply the one-entry Bellman update for ``t``."""
        td = td_error(self.cfg, self.q, t)
        alpha = self.learning_rate(td)
        new_q = self.q.values[t.action, t.state] + alpha * td
        self.q.set(t.state, t.action, new_q)
        return StepOutcome(t, self._last_epsilon, alpha, td, self._last_explored, float(new_q))

    def end_episode(self, episode_reward: float) -> bool:
        self.decay_counter += 1
        return False

    def on_actions_expanded(self, new_action_count: int) -> None:
        self.q = self.q.expanded(new_action_count)


class MorphinAgent(BaselineAgent):
    """Drift-aware Q-learning that keeps its table across changes."""

    kind = "morphin"

    def learning_rate(self, td: float) -> float:
        return dynamic_alpha(self.cfg, td)

    def end_episode(self, episode_reward: float) -> bool:
        if self.detector.update(episode_reward):
            self.decay_counter = 0
            self.detector.reset()
            return True
        self.decay_counter += 1
        return False

    def on_actions_expanded(self, new_action_count: int) -> None:
        super().on_actions_expanded(new_action_count)
        self.decay_counter = 0
        self.detector.reset()


AGENTS = {cls.kind: cls for cls in (MorphinAgent, BaselineAgent)}


def make_agent(kind: str, cfg: AgentConfig, action_count: int, state_count: int, seed: int):
    try:
        cls = AGENTS[kind]
    except KeyError:
        raise ContractViolation(f"unknown agent kind {kind!r}") from None
    return cls(cfg, action_count, state_count, seed)
