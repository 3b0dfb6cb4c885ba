"""Per-step chain records, running aggregates, and trace export."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import IoFailure

CSV_COLUMNS = ["chain_id", "epoch", "step", "burn_in", "accepted", "novel",
               "acceptance_prob", "energy_raw", "energy_norm", "target_temp"]


@dataclass(frozen=True)
class StepOutcome:
    """What one sampling step did.

    ``novel`` means the step was accepted *and* actually changed the state;
    an accepted self-proposal is not novel.
    """

    accepted: bool
    novel: bool
    acceptance_prob: float
    energy_old: float
    energy_new: float
    log_q_fwd: float
    log_q_rev: float


@dataclass(frozen=True)
class StepRecord:
    chain_id: int
    epoch: int
    step: int
    burn_in: bool
    accepted: bool
    novel: bool
    acceptance_prob: float
    energy_raw: float | None
    energy_norm: float | None
    target_temp: float


class Trace:
    """Ordered step records plus running acceptance/novelty aggregates.

    The acceptance rate is taken over every recorded step; the novel
    transition rate only counts post-burn-in steps.
    """

    def __init__(self, config_hash: str = ""):
        self.config_hash = config_hash
        self.steps: list[StepRecord] = []
        self._accepted = 0
        self._post_steps = 0
        self._novel_post = 0

    def record(self, outcome: StepOutcome, *, chain_id: int, epoch: int, step: int,
               burn_in: bool, target_temp: float,
               energy_raw: float | None, energy_norm: float | None) -> None:
        self.steps.append(StepRecord(chain_id, epoch, step, burn_in,
                                     outcome.accepted, outcome.novel,
                                     outcome.acceptance_prob,
                                     energy_raw, energy_norm, target_temp))
        self._accepted += outcome.accepted
        if not burn_in:
            self._post_steps += 1
            self._novel_post += outcome.novel

    @property
    def acceptance_rate(self) -> float:
        return self._accepted / len(self.steps) if self.steps else 0.0

    @property
    def novel_rate(self) -> float:
        return self._novel_post / self._post_steps if self._post_steps else 0.0

    def epoch_mean_energies(self, field: str = "energy_raw") -> dict[int, float]:
        """Mean recorded energy per epoch, skipping untracked (None) values."""
        sums: dict[int, list[float]] = {}
        for rec in self.steps:
            value = getattr(rec, field)
            if value is not None:
                sums.setdefault(rec.epoch, []).append(value)
        return {e: sum(v) / len(v) for e, v in sorted(sums.items())}


def record_step(trace: Trace, outcome: StepOutcome, context: dict) -> Trace:
    """Append ``outcome`` under the bookkeeping fields in ``context``."""
    trace.record(outcome, **context)
    return trace


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        # plain-float repr: shortest round-trip decimal, even for numpy scalars
        return repr(float(value))
    return str(value)


def export_trace(trace: Trace, path, format: str = "csv") -> Path:
    """Write the trace to ``path`` as CSV or JSONL.

    Both formats start with a metadata line carrying the config hash;
    untracked energies become empty CSV fields / JSON nulls.  Output bytes
    depend only on the recorded steps and the hash, so identical runs
    export identical files.
    """
    path = Path(path)
    try:
        if format == "csv":
            with path.open("w", newline="") as fh:
                fh.write(f"# config_hash={trace.config_hash}\n")
                writer = csv.writer(fh)
                writer.writerow(CSV_COLUMNS)
                for rec in trace.steps:
                    writer.writerow([_csv_cell(getattr(rec, col)) for col in CSV_COLUMNS])
        elif format == "jsonl":
            with path.open("w") as fh:
                fh.write(json.dumps({"config_hash": trace.config_hash}) + "\n")
                for rec in trace.steps:
                    fh.write(json.dumps(asdict(rec)) + "\n")
        else:
            raise ValueError(f"unknown trace format {format!r}")
    except OSError as exc:
        raise IoFailure(f"cannot write trace to {path}: {exc}") from exc
    return path


def read_trace_jsonl(path) -> tuple[str, list[StepRecord]]:
    """Parse a JSONL trace back into records (inverse of ``export_trace``)."""
    lines = Path(path).read_text().splitlines()
    meta = json.loads(lines[0])
    records = [StepRecord(**json.loads(line)) for line in lines[1:]]
    return meta.get("config_hash", ""), records
