"""Dense action-value table and the transition record shared by agents and environments."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Union

import numpy as np


class ContractViolation(ValueError):
    """Raised when a caller breaks a documented precondition."""


@dataclass(frozen=True)
class Transition:
    state: int
    action: int
    reward: float
    next_state: int
    terminal: bool


class QTable:
    """Action-value matrix of shape ``(action_count, state_count)``.

    Rows are actions so that new actions are appended as rows. The table
    starts at zero and the action dimension can only grow.
    """

    def __init__(self, action_count: int, state_count: int):
        if action_count < 1 or state_count < 1:
            raise ContractViolation(
                f"table shape must be positive, got {action_count}x{state_count}"
            )
        self.values = np.zeros((action_count, state_count), dtype=np.float64)
        # plain ints for the hot-path bounds checks
        self._actions = action_count
        self._states = state_count

    @classmethod
    def from_array(cls, values) -> "QTable":
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ContractViolation(f"expected a 2-D array, got shape {arr.shape}")
        table = cls(*arr.shape)
        table.values[...] = arr
        return table

    @property
    def action_count(self) -> int:
        return self._actions

    @property
    def state_count(self) -> int:
        return self._states

    def _check(self, s: int, a: int | None = None) -> None:
        if not 0 <= s < self._states:
            raise ContractViolation(f"state {s} out of range [0, {self._states})")
        if a is not None and not 0 <= a < self._actions:
            raise ContractViolation(f"action {a} out of range [0, {self._actions})")

    def lookup(self, s: int, a: int) -> float:
        self._check(s, a)
        return float(self.values[a, s])

    def set(self, s: int, a: int, value: float) -> None:
        self._check(s, a)
        if not math.isfinite(value):
            raise ContractViolation(f"refusing to store non-finite value {value!r}")
        self.values[a, s] = value

    def max_over_actions(self, s: int) -> tuple[float, int]:
        """Best value in state ``s`` and the lowest action index achieving it."""
        self._check(s)
        column = self.values[:, s]
        a = int(column.argmax())  # argmax returns the first maximiser
        return float(column[a]), a

    def expanded(self, new_action_count: int) -> "QTable":
        """Return a copy with zero rows appended up to ``new_action_count`` actions."""
        if new_action_count <= self.action_count:
            raise ContractViolation(
                f"action count must strictly grow: {self.action_count} -> {new_action_count}"
            )
        grown = QTable(new_action_count, self.state_count)
        grown.values[: self.action_count] = self.values
        return grown

    def copy(self) -> "QTable":
        return QTable.from_array(self.values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QTable):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"QTable(actions={self.action_count}, states={self.state_count})"

    def to_csv(self, dest: Union[str, Path, IO[str]]) -> None:
        """Write one row per action, one column per state, six decimals."""
        if isinstance(dest, (str, Path)):
            with open(dest, "w", newline="") as fh:
                self._write_csv(fh)
        else:
            self._write_csv(dest)

    def _write_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh)
        writer.writerow([f"state_{i}" for i in range(self.state_count)])
        for row in self.values:
            writer.writerow([f"{v:.6f}" for v in row])


def expand_actions(table: QTable, new_action_count: int) -> QTable:
    return table.expanded(new_action_count)
