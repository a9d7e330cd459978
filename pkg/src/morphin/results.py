"""Persist experiment results and render the comparison table."""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path

from morphin import __version__
from morphin.config import spec_to_dict
from morphin.harness import SERIES_COLUMNS, ExperimentSpec, TrialRecord, summarize, trial_seeds

TIMESTAMP_KEY = "created_at"


def _finite(obj):
    """Replace non-finite floats with None so the JSON stays standard."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def build_summary(spec: ExperimentSpec, records: dict[str, list[TrialRecord]], timestamp: str | None = None) -> dict:
    """Run summary plus provenance: the resolved ExperimentSpec, every trial seed, and the tool version."""
    seeds = []
    for kind in sorted(records):
        for r in records[kind]:
            agent_seed, env_seed = trial_seeds(spec.base_seed, r.trial, kind)
            seeds.append({"agent": kind, "trial": r.trial, "agent_seed": agent_seed, "env_seed": env_seed})
    doc = {
        "tool": "morphin",
        "version": __version__,
        TIMESTAMP_KEY: timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "spec": spec_to_dict(spec),
        "seeds": seeds,
        "summary": summarize(records["morphin"], records["baseline"]),
    }
    return _finite(doc)


def write_summary(path: Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_trials_csv(path: Path, records: dict[str, list[TrialRecord]]) -> None:
    """One row per (trial, agent) with totals and per-drift convergence (blank = none)."""
    drifts = max((r.drift_episodes for rs in records.values() for r in rs), key=len, default=[])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["trial", "agent", "seed", "total_steps", "detections", "expansions"]
            + [f"convergence_after_{d}" for d in drifts]
        )
        rows = sorted((r for rs in records.values() for r in rs), key=lambda r: (r.trial, r.agent))
        for r in rows:
            conv = ["" if c is None else c for c in r.convergence]
            w.writerow(
                [r.trial, r.agent, r.seed, r.total_steps, len(r.detections), " ".join(map(str, r.expansions))]
                + conv
            )


def write_series(directory: Path, record: TrialRecord) -> Path:
    path = Path(directory) / f"{record.agent}_{record.trial}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        for i, (rew, steps, eps, flag) in enumerate(
            zip(record.episode_reward, record.steps_taken, record.epsilon_at_start, record.drift_flags)
        ):
            w.writerow([i, repr(float(rew)), steps, f"{eps:.6f}", int(flag)])
    return path


def write_results(out_dir: Path, spec: ExperimentSpec, records: dict[str, list[TrialRecord]], doc: dict) -> None:
    """summary.json, trials.csv and series/<agent>_<trial>.csv under ``out_dir``."""
    out = Path(out_dir)
    (out / "series").mkdir(parents=True, exist_ok=True)
    write_summary(out / "summary.json", doc)
    write_trials_csv(out / "trials.csv", records)
    for recs in records.values():
        for r in recs:
            write_series(out / "series", r)


def _cell(mean, spread, failures=0, trials=None) -> str:
    if mean is None:
        return "--"
    text = f"{mean:,.2f}"
    if spread is not None:
        text += f" ± {spread:.1f}%"
    if failures and trials:
        text += f" ({failures}/{trials} --)"
    return text


def format_table(summary: dict) -> str:
    """Plain-text table: convergence per drift, total steps, Welch p-value, ratio."""
    agents = summary["agents"]
    m, b = agents["morphin"], agents["baseline"]
    rows = []
    for j, (dm, db) in enumerate(zip(m["drifts"], b["drifts"])):
        rows.append((
            f"Drift {j + 1} (ep {dm['drift_episode']})",
            _cell(dm["mean"], dm["spread_pct"], dm["failures"], m["trials"]),
            _cell(db["mean"], db["spread_pct"], db["failures"], b["trials"]),
        ))
    rows.append((
        "Total steps",
        _cell(m["total_steps"]["mean"], m["total_steps"]["spread_pct"]),
        _cell(b["total_steps"]["mean"], b["total_steps"]["spread_pct"]),
    ))
    rows.append(("Detections / trial", f"{m['detections_mean']:.2f}", f"{b['detections_mean']:.2f}"))
    header = ("", "MORPHIN", "Q-learning")
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(3)]
    line = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
    out = [line(header), line(tuple("-" * w for w in widths))] + [line(r) for r in rows]
    welch = summary.get("welch")
    if welch is None:
        out.append("Welch t-test: undefined (fewer than 2 trials)")
    else:
        p, t = welch["p_value"], welch["t_statistic"]
        t_text = "inf" if t is None else f"{t:.3f}"
        out.append(f"Welch t-test on total steps: t = {t_text}, p = {p:.3g}")
    ratio = summary.get("efficiency_ratio")
    out.append("Efficiency ratio (baseline / MORPHIN): " + ("--" if ratio is None else f"{ratio:.2f}"))
    return "\n".join(out)
