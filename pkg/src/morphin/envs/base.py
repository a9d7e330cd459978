from __future__ import annotations

from morphin.qcore import ContractViolation, Transition


class Environment:
    """Episodic tabular environment with a schedule of changes.

    Subclasses implement ``_reset`` and ``_step``. ``on_episode_start`` is
    called by the runner before every ``reset`` and returns the new action
    count when the action set grew, else ``None``.
    """

    state_count: int
    action_count: int

    def __init__(self):
        self._active = False

    def on_episode_start(self, episode: int, drift_detected: bool = False) -> int | None:
        return None

    def drift_episodes(self, episodes: int) -> list[int]:
        """Episodes at which the reward/arrival process is changed by the schedule."""
        return []

    def reset(self) -> int:
        self._active = True
        return self._reset()

    def step(self, action: int) -> Transition:
        if not self._active:
            raise ContractViolation("step() called outside an active episode; call reset() first")
        if not 0 <= action < self.action_count:
            raise ContractViolation(f"action {action} not available (action_count={self.action_count})")
        t = self._step(action)
        if t.terminal:
            self._active = False
        return t

    def _reset(self) -> int:
        raise NotImplementedError

    def _step(self, action: int) -> Transition:
        raise NotImplementedError
