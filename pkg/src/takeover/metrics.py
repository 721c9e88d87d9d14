"""Supervisor-burden accounting: context switches, supervisor actions, and
the latency-weighted combination of the two.

A context switch is any transfer of control. Episodes implicitly start
autonomous, so an episode that opens under supervisor control pays an entry
switch, and one that ends under supervisor control pays the exit switch the
operator would need to disengage. Hence switches = 2 x (number of maximal
supervisor-control segments).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .meta import EpisodeLog, Mode

SCHEMA_VERSION = 1


def count_switches(modes: list[Mode]) -> int:
    """Control transfers over one episode's mode sequence."""
    switches = 0
    prev = Mode.AUTONOMOUS
    for mode in modes:
        if mode is not prev:
            switches += 1
            prev = mode
    if prev is Mode.SUPERVISOR:
        switches += 1
    return switches


def count_supervisor_actions(modes: list[Mode]) -> int:
    return sum(1 for m in modes if m is Mode.SUPERVISOR)


def intervention_lengths(modes: list[Mode]) -> list[int]:
    """Lengths of maximal supervisor-control segments, in order."""
    lengths: list[int] = []
    run = 0
    for mode in modes:
        if mode is Mode.SUPERVISOR:
            run += 1
        elif run:
            lengths.append(run)
            run = 0
    if run:
        lengths.append(run)
    return lengths


def burden(switches: int, supervisor_actions: int, latency: float) -> float:
    """Supervisor time consumed when every switch costs ``latency`` units and
    every supervised step costs one."""
    if latency < 0:
        raise ValueError(f"latency must be nonnegative, got {latency}")
    return latency * switches + supervisor_actions


@dataclass
class BurdenReport:
    """Totals and per-epoch series for one run's episode logs."""

    switches: int
    supervisor_actions: int
    interventions: int
    intervention_lengths: list[int]
    episodes: int
    successes: int
    mean_switches_per_episode: float
    mean_supervisor_actions_per_episode: float
    per_epoch: list[dict] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return self.successes / self.episodes if self.episodes else 0.0

    @property
    def mean_intervention_length(self) -> float:
        if not self.intervention_lengths:
            return 0.0
        return sum(self.intervention_lengths) / len(self.intervention_lengths)

    def burden_at(self, latency: float) -> float:
        return burden(self.switches, self.supervisor_actions, latency)

    def to_json(self, latency_grid: list[float] | None = None) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "totals": {
                "switches": self.switches,
                "supervisor_actions": self.supervisor_actions,
                "interventions": self.interventions,
                "episodes": self.episodes,
                "successes": self.successes,
                "success_rate": self.success_rate,
            },
            "per_episode_means": {
                "switches": self.mean_switches_per_episode,
                "supervisor_actions": self.mean_supervisor_actions_per_episode,
            },
            "intervention_lengths": list(self.intervention_lengths),
            "mean_intervention_length": self.mean_intervention_length,
            "per_epoch": list(self.per_epoch),
        }
        if latency_grid is not None:
            out["burden"] = {_fmt_latency(l): self.burden_at(l) for l in latency_grid}
        return out


def _validate_log(log: EpisodeLog, index: int) -> None:
    name = f"episode {index} (epoch {log.epoch}, episode {log.episode})"
    prev_t = None
    for r in log.records:
        if prev_t is not None and r.t <= prev_t:
            raise ValueError(f"{name}: timestamps not strictly increasing at t={r.t}")
        prev_t = r.t
        if r.mode is Mode.SUPERVISOR and r.supervisor_action is None:
            raise ValueError(f"{name}: supervisor step at t={r.t} lacks supervisor_action")
        if r.mode is Mode.AUTONOMOUS and r.supervisor_action is not None:
            raise ValueError(f"{name}: autonomous step at t={r.t} carries supervisor_action")
        if r.executed_action is None:
            raise ValueError(f"{name}: step at t={r.t} lacks executed_action")


def summarize(logs: list[EpisodeLog]) -> BurdenReport:
    """Aggregate burden metrics over episode logs; malformed logs raise."""
    switches = 0
    actions = 0
    lengths: list[int] = []
    successes = 0
    per_epoch: dict[int, dict] = {}
    for i, log in enumerate(logs):
        _validate_log(log, i)
        modes = log.modes
        ep_switches = count_switches(modes)
        ep_actions = count_supervisor_actions(modes)
        ep_lengths = intervention_lengths(modes)
        switches += ep_switches
        actions += ep_actions
        lengths.extend(ep_lengths)
        successes += bool(log.success)
        bucket = per_epoch.setdefault(
            log.epoch,
            {"epoch": log.epoch, "switches": 0, "supervisor_actions": 0,
             "interventions": 0, "episodes": 0, "successes": 0},
        )
        bucket["switches"] += ep_switches
        bucket["supervisor_actions"] += ep_actions
        bucket["interventions"] += len(ep_lengths)
        bucket["episodes"] += 1
        bucket["successes"] += bool(log.success)
    n = len(logs)
    return BurdenReport(
        switches=switches,
        supervisor_actions=actions,
        interventions=len(lengths),
        intervention_lengths=lengths,
        episodes=n,
        successes=successes,
        mean_switches_per_episode=switches / n if n else 0.0,
        mean_supervisor_actions_per_episode=actions / n if n else 0.0,
        per_epoch=[per_epoch[k] for k in sorted(per_epoch)],
    )


@dataclass
class CutoffLatency:
    """Latency above which the fewer-switches run is the cheaper one."""

    value: float | None
    defined: bool
    reason: str | None = None


def cutoff_latency(lazy, safe) -> CutoffLatency:
    """Crossing point of the two burden lines B(L) = L*C + D.

    ``lazy`` plays the fewer-switches role. When it also uses no more
    supervisor actions it dominates everywhere and the cutoff clamps to 0.
    When it saves nothing on switches the lines never cross in its favor:
    cutoff 0 if it at least saves actions, otherwise undefined.
    """
    c_lazy, d_lazy = lazy.switches, lazy.supervisor_actions
    c_safe, d_safe = safe.switches, safe.supervisor_actions
    if c_safe > c_lazy:
        return CutoffLatency(max(0.0, (d_lazy - d_safe) / (c_safe - c_lazy)), True)
    if d_lazy < d_safe:
        return CutoffLatency(0.0, True)
    return CutoffLatency(
        None,
        False,
        "no latency makes the first run cheaper: it saves neither switches nor actions",
    )


# -- artifact writers -------------------------------------------------------
#
# epochs.csv: one row per training epoch with cumulative burden totals.
#   columns: epoch, test_success_rate, mean_test_return, C_total, D_total,
#            then one B_at_L<l> column per configured latency.
# summary.json: BurdenReport.to_json plus run metadata under "run".
# Both carry schema_version 1. Floats are written with repr so identical
# runs produce identical bytes.


def _fmt_latency(latency: float) -> str:
    return f"{latency:g}"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_epochs_csv(path: str | Path, rows: list[dict], latency_grid: list[float]) -> Path:
    """``rows`` carry epoch, test_success_rate, mean_test_return, C_total,
    D_total; burden columns are derived here from the cumulative totals."""
    path = Path(path)
    cols = ["epoch", "test_success_rate", "mean_test_return", "C_total", "D_total"]
    cols += [f"B_at_L{_fmt_latency(l)}" for l in latency_grid]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            out = [row["epoch"], _fmt(row["test_success_rate"]), _fmt(row["mean_test_return"]),
                   row["C_total"], row["D_total"]]
            out += [_fmt(burden(row["C_total"], row["D_total"], l)) for l in latency_grid]
            writer.writerow(out)
    return path


def write_summary_json(
    path: str | Path,
    report: BurdenReport,
    latency_grid: list[float],
    run_info: dict | None = None,
) -> Path:
    path = Path(path)
    payload = report.to_json(latency_grid)
    if run_info:
        payload["run"] = run_info
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def load_summary(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported summary schema {payload.get('schema_version')}")
    return payload
