"""Trial records and their JSONL log format."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Iterable


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of sending one probe to one endpoint.

    ``credit`` equals ``correct`` for single-answer probes and is the fraction
    of items matched for multi-entity probes. ``raw_response`` is kept verbatim
    so trials can be re-scored under another extraction mode.
    """

    endpoint: str
    probe_id: str
    wrapper: str
    raw_response: str
    extracted: Any
    correct: bool
    credit: float
    latency_ms: float = 0.0
    timestamp: str = ""
    attempts: int = 1
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def stable_dict(self) -> dict:
        """The record without its timing fields."""
        d = asdict(self)
        d.pop("latency_ms")
        d.pop("timestamp")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(**d)


def write_trials(path, trials: Iterable[TrialRecord], header: dict | None = None, append: bool = False) -> Path:
    path = Path(path)
    with path.open("a" if append else "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for t in trials:
            fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")
    return path


def read_trials(path) -> tuple[dict, list[TrialRecord]]:
    """Read a trial log. Raises ``ValueError`` naming the first bad line."""
    header, trials = {}, []
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if "header" in record:
                    header = record["header"]
                else:
                    trials.append(TrialRecord.from_dict(record))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed trial record ({exc})") from exc
    return header, trials
