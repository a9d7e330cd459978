"""Streaming Page-Hinkley change detector over per-episode returns.

Two clamped one-sided cumulants are tracked against the running mean of
all samples seen since the last reset::

    cum_dec <- max(0, cum_dec + (mean - x - delta))   # mean went down
    cum_inc <- max(0, cum_inc + (x - mean - delta))   # mean went up

An alarm is raised once more than ``min_samples`` observations have been
seen and the cumulant(s) selected by ``direction`` exceed ``threshold_h``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable

from morphin.qcore import ContractViolation


class Direction(str, Enum):
    DECREASE_ONLY = "decrease_only"
    INCREASE_ONLY = "increase_only"
    TWO_SIDED = "two_sided"


@dataclass(frozen=True)
class PageHinkleyConfig:
    delta: float = 0.5
    threshold_h: float = 300.0
    direction: Direction = Direction.TWO_SIDED
    min_samples: int = 30

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if not self.threshold_h > 0:
            raise ContractViolation(f"threshold_h must be > 0, got {self.threshold_h}")
        if not self.delta >= 0:
            raise ContractViolation(f"delta must be >= 0, got {self.delta}")
        if self.min_samples < 0:
            raise ContractViolation(f"min_samples must be >= 0, got {self.min_samples}")


@dataclass(frozen=True)
class PageHinkleyState:
    sample_count: int = 0
    running_mean: float = 0.0
    cum_dec: float = 0.0
    cum_inc: float = 0.0


class PageHinkleyDetector:
    def __init__(self, config: PageHinkleyConfig | None = None):
        self.config = config or PageHinkleyConfig()
        self.reset()

    def reset(self) -> None:
        self.sample_count = 0
        self.running_mean = 0.0
        self.cum_dec = 0.0
        self.cum_inc = 0.0

    @property
    def state(self) -> PageHinkleyState:
        return PageHinkleyState(self.sample_count, self.running_mean, self.cum_dec, self.cum_inc)

    def update(self, x: float) -> bool:
        """Feed one observation; return True if it raises an alarm.

        The detector does not reset itself on an alarm, callers decide.
        """
        if not math.isfinite(x):
            raise ContractViolation(f"observation must be finite, got {x!r}")
        cfg = self.config
        self.sample_count += 1
        self.running_mean += (x - self.running_mean) / self.sample_count
        self.cum_dec = max(0.0, self.cum_dec + (self.running_mean - x - cfg.delta))
        self.cum_inc = max(0.0, self.cum_inc + (x - self.running_mean - cfg.delta))
        if self.sample_count <= cfg.min_samples:
            return False
        if cfg.direction is Direction.DECREASE_ONLY:
            return self.cum_dec > cfg.threshold_h
        if cfg.direction is Direction.INCREASE_ONLY:
            return self.cum_inc > cfg.threshold_h
        return self.cum_dec > cfg.threshold_h or self.cum_inc > cfg.threshold_h


def ph_update(
    state: PageHinkleyState, cfg: PageHinkleyConfig, x: float
) -> tuple[PageHinkleyState, bool]:
    """Functional form of :meth:`PageHinkleyDetector.update`."""
    det = PageHinkleyDetector(cfg)
    det.sample_count, det.running_mean, det.cum_dec, det.cum_inc = (
        state.sample_count,
        state.running_mean,
        state.cum_dec,
        state.cum_inc,
    )
    fired = det.update(x)
    return det.state, fired


def ph_reset(state: PageHinkleyState | None = None) -> PageHinkleyState:
    return PageHinkleyState()


TRACE_COLUMNS = ("episode", "x", "running_mean", "cum_dec", "cum_inc", "drift_flag")


def write_trace(
    values: Iterable[float],
    cfg: PageHinkleyConfig,
    fh: IO[str],
    *,
    reset_on_drift: bool = True,
    header_comment: bool = False,
) -> list[int]:
    """Run a detector over ``values`` and write one trace row per sample.

    Returns the indices at which alarms were raised.
    """
    det = PageHinkleyDetector(cfg)
    if header_comment:
        fh.write(
            f"# delta={cfg.delta:g} threshold_h={cfg.threshold_h:g} "
            f"direction={cfg.direction.value} min_samples={cfg.min_samples}\n"
        )
    writer = csv.writer(fh)
    writer.writerow(TRACE_COLUMNS)
    alarms = []
    for i, x in enumerate(values):
        fired = det.update(x)
        writer.writerow(
            [i, repr(float(x)), repr(det.running_mean), repr(det.cum_dec), repr(det.cum_inc), int(fired)]
        )
        if fired:
            alarms.append(i)
            if reset_on_drift:
                det.reset()
    return alarms
