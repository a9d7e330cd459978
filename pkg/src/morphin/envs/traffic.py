"""Two-lane signalised intersection with Poisson arrivals.

State is the queue pair ``(c1, c2)``, each in ``[0, queue_cap]``. An action
is a signal phase that discharges up to ``capacity`` vehicles from one
lane. Each step serves first, then adds arrivals. The reward penalises
queue length above the congestion threshold and green time given to a
lane that was already empty.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from morphin.envs.base import Environment
from morphin.qcore import ContractViolation, Transition


@dataclass(frozen=True)
class Phase:
    lane: int
    capacity: int


@dataclass(frozen=True)
class ArrivalChange:
    episode: int
    lambda_1: float
    lambda_2: float


def _phases(items) -> tuple[Phase, ...]:
    out = []
    for p in items:
        if isinstance(p, Phase):
            out.append(p)
        elif isinstance(p, dict):
            out.append(Phase(**p))
        else:
            out.append(Phase(*p))
    return tuple(out)


def _schedule(items) -> tuple[ArrivalChange, ...]:
    out = []
    for d in items:
        if isinstance(d, ArrivalChange):
            out.append(d)
        elif isinstance(d, dict):
            out.append(ArrivalChange(**d))
        else:
            out.append(ArrivalChange(*d))
    return tuple(out)


@dataclass(frozen=True)
class TrafficConfig:
    lambda_1: float = 0.5
    lambda_2: float = 0.5
    queue_cap: int = 20
    congestion_threshold: int = 5
    empty_green_penalty: float = 1.0
    base_phases: tuple[Phase, ...] = (Phase(0, 2), Phase(1, 2))
    aggressive_phases: tuple[Phase, ...] = (Phase(0, 4), Phase(1, 4))
    drift_schedule: tuple[ArrivalChange, ...] = (
        ArrivalChange(3000, 1.5, 1.5),
        ArrivalChange(8000, 0.3, 0.3),
    )
    steps_per_episode: int = 60

    def __post_init__(self):
        object.__setattr__(self, "base_phases", _phases(self.base_phases))
        object.__setattr__(self, "aggressive_phases", _phases(self.aggressive_phases))
        object.__setattr__(self, "drift_schedule", _schedule(self.drift_schedule))
        if self.lambda_1 < 0 or self.lambda_2 < 0:
            raise ContractViolation("arrival rates must be >= 0")
        if self.queue_cap < 1:
            raise ContractViolation("queue_cap must be positive")
        if self.congestion_threshold < 1:
            raise ContractViolation("congestion_threshold must be positive")
        if not self.empty_green_penalty > 0:
            raise ContractViolation("empty_green_penalty must be > 0")
        if not self.base_phases:
            raise ContractViolation("base_phases must not be empty")
        for p in self.base_phases + self.aggressive_phases:
            if p.capacity <= 0:
                raise ContractViolation(f"phase capacity must be > 0, got {p.capacity}")
            if p.lane not in (0, 1):
                raise ContractViolation(f"phase lane must be 0 or 1, got {p.lane}")
        eps = [d.episode for d in self.drift_schedule]
        if any(b <= a for a, b in zip(eps, eps[1:])):
            raise ContractViolation("drift_schedule episodes must be strictly increasing")
        for d in self.drift_schedule:
            if d.lambda_1 < 0 or d.lambda_2 < 0:
                raise ContractViolation("arrival rates must be >= 0")
        if self.steps_per_episode < 1:
            raise ContractViolation("steps_per_episode must be positive")

    @property
    def state_count(self) -> int:
        return (self.queue_cap + 1) ** 2

    def to_state(self, c1: int, c2: int) -> int:
        n = self.queue_cap + 1
        if not (0 <= c1 < n and 0 <= c2 < n):
            raise ContractViolation(f"queues ({c1}, {c2}) outside [0, {self.queue_cap}]")
        return c1 * n + c2

    def to_queues(self, state: int) -> tuple[int, int]:
        if not 0 <= state < self.state_count:
            raise ContractViolation(f"state {state} out of range")
        return divmod(state, self.queue_cap + 1)

    def rates_for_episode(self, episode: int) -> tuple[float, float]:
        rates = (self.lambda_1, self.lambda_2)
        for d in self.drift_schedule:
            if episode >= d.episode:
                rates = (d.lambda_1, d.lambda_2)
        return rates


def poisson(rng: random.Random, lam: float) -> int:
    """Poisson draw by sequential inversion of the CDF from one uniform."""
    if lam <= 0:
        return 0
    u = rng.random()
    p = math.exp(-lam)
    cdf = p
    k = 0
    while u > cdf:
        k += 1
        p *= lam / k
        cdf += p
        if p == 0.0:  # tail underflow
            break
    return k


def traffic_step(
    cfg: TrafficConfig,
    queues: tuple[int, int],
    phase: Phase,
    rates: tuple[float, float],
    rng: random.Random,
) -> tuple[tuple[int, int], float]:
    """Serve the phase's lane, then add arrivals. Returns ``(new_queues, reward)``."""
    q = list(queues)
    empty_green = q[phase.lane] == 0
    q[phase.lane] -= min(q[phase.lane], phase.capacity)
    for lane in (0, 1):
        q[lane] = min(q[lane] + poisson(rng, rates[lane]), cfg.queue_cap)
    theta = cfg.congestion_threshold
    reward = -(max(0, q[0] - theta) + max(0, q[1] - theta))
    if empty_green:
        reward -= cfg.empty_green_penalty
    return (q[0], q[1]), float(reward)


class TrafficIntersection(Environment):
    def __init__(self, config: TrafficConfig | None = None, seed: int = 0):
        super().__init__()
        self.config = config or TrafficConfig()
        self.rng = random.Random(seed)
        self.state_count = self.config.state_count
        self.phases = list(self.config.base_phases)
        self.action_count = len(self.phases)
        self.expanded = False
        self.rates = (self.config.lambda_1, self.config.lambda_2)
        self.queues = (0, 0)
        self.steps = 0

    def on_episode_start(self, episode: int, drift_detected: bool = False) -> int | None:
        self.rates = self.config.rates_for_episode(episode)
        if drift_detected and not self.expanded and self.config.aggressive_phases:
            self.expanded = True
            self.phases.extend(self.config.aggressive_phases)
            self.action_count = len(self.phases)
            return self.action_count
        return None

    def drift_episodes(self, episodes: int) -> list[int]:
        return [d.episode for d in self.config.drift_schedule if d.episode < episodes]

    def _reset(self) -> int:
        self.queues = (0, 0)
        self.steps = 0
        return self.config.to_state(*self.queues)

    def _step(self, action: int) -> Transition:
        s = self.config.to_state(*self.queues)
        self.queues, reward = traffic_step(
            self.config, self.queues, self.phases[action], self.rates, self.rng
        )
        self.steps += 1
        terminal = self.steps >= self.config.steps_per_episode
        return Transition(s, action, reward, self.config.to_state(*self.queues), terminal)
