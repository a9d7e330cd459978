"""Seeded multi-trial experiment runner and convergence analysis."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Iterable, Union

import numpy as np

from morphin.agents import AgentConfig, make_agent
from morphin.envs import Gridworld, GridworldConfig, TrafficConfig, TrafficIntersection
from morphin.envs.base import Environment
from morphin.qcore import ContractViolation
from morphin.stats import mean_and_half_spread, welch_ttest

log = logging.getLogger(__name__)

SCENARIOS = ("gridworld_goals", "gridworld_actions", "traffic")
AGENT_KINDS = ("morphin", "baseline")
STEP_TRACE_COLUMNS = (
    "step", "episode", "state", "action", "reward", "q_value", "epsilon", "alpha", "td_error", "explored",
)
SERIES_COLUMNS = ("episode", "reward", "steps", "epsilon", "drift")


class TrialAborted(RuntimeError):
    """Raised when the environment schedule and the agent's table disagree."""


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str
    episodes: int
    trials: int
    base_seed: int
    morphin: AgentConfig
    baseline: AgentConfig
    env: Union[GridworldConfig, TrafficConfig]
    convergence_window: int = 30
    convergence_tolerance: float = 0.25

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ContractViolation(f"unknown scenario {self.scenario!r}")
        if self.episodes < 1:
            raise ContractViolation("episodes must be positive")
        if self.trials < 1:
            raise ContractViolation("trials must be >= 1")
        if not 0 <= self.base_seed < 2**64:
            raise ContractViolation("base_seed must be an unsigned 64-bit integer")
        if self.convergence_window < 1:
            raise ContractViolation("convergence_window must be positive")
        if not self.convergence_tolerance > 0:
            raise ContractViolation("convergence_tolerance must be > 0")
        wants_traffic = self.scenario == "traffic"
        if wants_traffic != isinstance(self.env, TrafficConfig):
            raise ContractViolation(f"env config type does not match scenario {self.scenario!r}")
        if self.scenario == "gridworld_goals":
            period = self.env.goal_swap_period
            if period is None or period >= self.episodes:
                raise ContractViolation("episodes must extend past the first goal swap (env.goal_swap_period)")
        elif self.scenario == "gridworld_actions":
            jump = self.env.jump_introduction_episode
            if jump is None or jump >= self.episodes:
                raise ContractViolation(
                    "episodes must extend past env.jump_introduction_episode for gridworld_actions"
                )
        else:
            late = [d.episode for d in self.env.drift_schedule if d.episode >= self.episodes]
            if late:
                raise ContractViolation(f"env.drift_schedule episodes {late} fall outside {self.episodes} episodes")

    def agent_config(self, kind: str) -> AgentConfig:
        return {"morphin": self.morphin, "baseline": self.baseline}[kind]

    @property
    def is_gridworld(self) -> bool:
        return self.scenario != "traffic"


@dataclass
class TrialRecord:
    agent: str
    trial: int
    seed: int
    episode_reward: list[float] = field(default_factory=list)
    steps_taken: list[int] = field(default_factory=list)
    epsilon_at_start: list[float] = field(default_factory=list)
    drift_flags: list[bool] = field(default_factory=list)
    optimal_steps: list[int] | None = None
    expansions: list[int] = field(default_factory=list)
    drift_episodes: list[int] = field(default_factory=list)
    convergence: list[int | None] = field(default_factory=list)

    @property
    def total_steps(self) -> int:
        return int(sum(self.steps_taken))

    @property
    def detections(self) -> list[int]:
        return [i for i, f in enumerate(self.drift_flags) if f]


def trial_seeds(base_seed: int, trial_index: int, kind: str) -> tuple[int, int]:
    """Independent 64-bit seeds for the agent and the environment of one trial."""
    ss = np.random.SeedSequence([base_seed, trial_index, AGENT_KINDS.index(kind)])
    agent_seed, env_seed = (int(v) for v in ss.generate_state(2, dtype=np.uint64))
    return agent_seed, env_seed


def make_env(spec: ExperimentSpec, seed: int) -> Environment:
    if isinstance(spec.env, TrafficConfig):
        return TrafficIntersection(spec.env, seed=seed)
    return Gridworld(spec.env)


def run_trial(
    spec: ExperimentSpec,
    agent_kind: str,
    trial_index: int,
    step_trace: IO[str] | None = None,
):
    """Run one agent through the full episode schedule.

    Returns the :class:`TrialRecord`; the trained agent is available as the
    second element when called through :func:`run_trial_with_agent`.
    """
    return run_trial_with_agent(spec, agent_kind, trial_index, step_trace)[0]


def run_trial_with_agent(spec, agent_kind, trial_index, step_trace=None):
    agent_seed, env_seed = trial_seeds(spec.base_seed, trial_index, agent_kind)
    env = make_env(spec, env_seed)
    agent = make_agent(agent_kind, spec.agent_config(agent_kind), env.action_count, env.state_count, agent_seed)
    rec = TrialRecord(agent=agent_kind, trial=trial_index, seed=agent_seed)
    rec.drift_episodes = env.drift_episodes(spec.episodes)
    if spec.is_gridworld:
        rec.optimal_steps = []
    optimal_cache: dict = {}
    writer = csv.writer(step_trace) if step_trace is not None else None
    if writer:
        writer.writerow(STEP_TRACE_COLUMNS)

    drift = False
    global_step = 0
    for ep in range(spec.episodes):
        grown = env.on_episode_start(ep, drift)
        if grown is not None:
            agent.on_actions_expanded(grown)
            rec.expansions.append(ep)
        if agent.q.action_count != env.action_count:
            raise TrialAborted(
                f"trial {trial_index} ({agent_kind}) episode {ep}: Q-table has "
                f"{agent.q.action_count} actions, environment offers {env.action_count}"
            )
        if rec.optimal_steps is not None:
            key = (env.goal, env.action_count)
            if key not in optimal_cache:
                optimal_cache[key] = env.optimal_steps()
            rec.optimal_steps.append(optimal_cache[key])

        epsilon = agent.epsilon
        s = env.reset()
        ep_reward = 0.0
        steps = 0
        while True:
            a, _ = agent.select_action(s, epsilon)
            t = env.step(a)
            out = agent.step(t)
            ep_reward += t.reward
            steps += 1
            if writer:
                writer.writerow([
                    global_step, ep, t.state, t.action, t.reward, f"{out.q_value:.6f}",
                    f"{out.epsilon_used:.6f}", f"{out.alpha_used:.6f}", f"{out.td_error:.6f}",
                    int(out.explored),
                ])
            global_step += 1
            s = t.next_state
            if t.terminal:
                break
        drift = agent.end_episode(ep_reward)

        rec.episode_reward.append(ep_reward)
        rec.steps_taken.append(steps)
        rec.epsilon_at_start.append(epsilon)
        rec.drift_flags.append(drift)

    rec.convergence = [
        detect_convergence(rec, d, spec.convergence_window, spec.convergence_tolerance)
        for d in rec.drift_episodes
    ]
    return rec, agent


def _interval_end(record: TrialRecord, drift_episode: int) -> int:
    later = [d for d in record.drift_episodes if d > drift_episode]
    return later[0] if later else len(record.steps_taken)


def detect_convergence(
    record: TrialRecord, drift_episode: int, window: int, tolerance: float, end: int | None = None
) -> int | None:
    """Episodes after ``drift_episode`` until performance enters and holds a near-optimal band.

    Gridworld: every episode of a ``window``-long run must take at most
    ``(1 + tolerance)`` times the shortest-path length for the goal active
    at that episode. Traffic: the mean reward of the window must be within
    ``tolerance * |best|`` of the best window mean seen in the interval.
    The window must fit before the next scheduled drift (or ``end``).
    """
    n_eps = len(record.steps_taken)
    if not 0 <= drift_episode < n_eps:
        raise ContractViolation(f"drift episode {drift_episode} outside the run")
    stop = _interval_end(record, drift_episode) if end is None else end
    span = stop - drift_episode
    if span < window:
        return None

    if record.optimal_steps is not None:
        steps = np.asarray(record.steps_taken[drift_episode:stop], dtype=float)
        limit = (1.0 + tolerance) * np.asarray(record.optimal_steps[drift_episode:stop], dtype=float)
        ok = steps <= limit
        run = 0
        for i, good in enumerate(ok):
            run = run + 1 if good else 0
            if run == window:
                return i - window + 1
        return None

    rewards = np.asarray(record.episode_reward[drift_episode:stop], dtype=float)
    means = np.convolve(rewards, np.ones(window) / window, mode="valid")
    best = means.max()
    hits = np.nonzero(means >= best - tolerance * abs(best))[0]
    return int(hits[0]) if hits.size else None


def _run_one(args):
    spec, kind, trial = args
    return run_trial(spec, kind, trial)


def run_experiment(
    spec: ExperimentSpec, parallelism: int = 1, kinds: Iterable[str] = AGENT_KINDS
) -> dict[str, list[TrialRecord]]:
    """Run every (agent, trial) pair; results are ordered by trial index."""
    jobs = [(spec, kind, i) for kind in kinds for i in range(spec.trials)]
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * parallelism))))
    else:
        results = [_run_one(j) for j in jobs]
    out: dict[str, list[TrialRecord]] = {k: [] for k in kinds}
    for rec in results:
        out[rec.agent].append(rec)
    for recs in out.values():
        recs.sort(key=lambda r: r.trial)
    return out


def _agent_summary(records: list[TrialRecord]) -> dict:
    n_drifts = max((len(r.drift_episodes) for r in records), default=0)
    drifts = []
    for j in range(n_drifts):
        vals = [r.convergence[j] for r in records if r.convergence[j] is not None]
        mean, spread = mean_and_half_spread(vals)
        d = records[0].drift_episodes[j]
        # a failure counts as the whole interval, so the mean stays defined
        span = _interval_end(records[0], d) - d
        censored = [span if r.convergence[j] is None else r.convergence[j] for r in records]
        drifts.append({
            "drift_episode": d,
            "mean": mean,
            "spread_pct": spread,
            "censored_mean": float(np.mean(censored)),
            "converged": len(vals),
            "failures": len(records) - len(vals),
        })
    totals = [r.total_steps for r in records]
    mean, spread = mean_and_half_spread(totals)
    return {
        "trials": len(records),
        "drifts": drifts,
        "total_steps": {"mean": mean, "spread_pct": spread},
        "detections_mean": float(np.mean([len(r.detections) for r in records])) if records else 0.0,
    }


def summarize(records_morphin: list[TrialRecord], records_baseline: list[TrialRecord]) -> dict:
    """Cross-agent summary: per-agent convergence and totals plus a Welch test on total steps."""
    if len(records_morphin) != len(records_baseline):
        raise ContractViolation("both agents must have the same number of trials")
    m_tot = [r.total_steps for r in records_morphin]
    b_tot = [r.total_steps for r in records_baseline]
    welch = welch_ttest(b_tot, m_tot)
    m_mean = float(np.mean(m_tot)) if m_tot else None
    b_mean = float(np.mean(b_tot)) if b_tot else None
    return {
        "agents": {
            "morphin": _agent_summary(records_morphin),
            "baseline": _agent_summary(records_baseline),
        },
        "welch": None if welch is None else asdict(welch),
        "efficiency_ratio": (b_mean / m_mean) if m_mean else None,
    }
