"""Answer extraction, exact-match scoring and per-model aggregation."""
from __future__ import annotations

import csv
import json
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import templates as T
from .errors import UnknownProbeRef
from .probes import ProbeInstance, ProbeKind, ParaphraseTemplate
from .records import TrialRecord


class ExtractionMode(str, Enum):
    STRICT_LAST_NUMBER = "strict_last_number"
    CONTAINS_CORRECT = "contains_correct"


# An integer token: optional minus bound to the digits, optional thousands
# separators; digits glued to letters or decimal points are not tokens.
_INT_RE = re.compile(r"(?<![\w.,])([-−]?)(\d{1,3}(?:,\d{3})+|\d+)(?!\w|[.,]\d)")

_ALL_LABELS = tuple(v for values in T.ASSIGNMENT_VALUES.values() for v in values)


def integer_tokens(text: str) -> list[int]:
    """All standalone integers in ``text``, in order of appearance."""
    out = []
    for sign, digits in _INT_RE.findall(text or ""):
        value = int(digits.replace(",", ""))
        out.append(-value if sign else value)
    return out


def _label_tokens(text: str, vocabulary: Sequence[str]) -> list[str]:
    if not text:
        return []
    canon = {v.lower(): v for v in vocabulary}
    pattern = r"\b(" + "|".join(re.escape(v) for v in sorted(canon, key=len, reverse=True)) + r")\b"
    return [canon[m.lower()] for m in re.findall(pattern, text, flags=re.IGNORECASE)]


def _entity_matches(text: str, item: str) -> list[int]:
    name = re.escape(item)
    hits = []
    for m in re.finditer(rf"\b{name}s?\b[^\d\n]{{0,15}}?([-−]?\d+)(?![\w.]\d)", text, re.IGNORECASE):
        hits.append((m.end(1), m.group(1)))
    for m in re.finditer(rf"(?<![\w.])([-−]?\d+)\s+{name}s?\b", text, re.IGNORECASE):
        hits.append((m.end(), m.group(1)))
    hits.sort()
    return [int(v.replace("−", "-")) for _, v in hits]


def extract_answer(raw: str, mode: ExtractionMode | str = ExtractionMode.STRICT_LAST_NUMBER,
                   ground_truth: Any = None, vocabulary: Sequence[str] | None = None):
    """Return ``(extracted, correct)`` for one response.

    Integer truths use integer tokens; string truths (assignment probes) use
    the label vocabulary; dict truths (multi-entity probes) are matched item
    by item and are correct only if every item matches. Never raises:
    anything unparseable is ``(None, False)``.
    """
    extracted, correct, _ = _score(raw, ExtractionMode(mode), ground_truth, vocabulary)
    return extracted, correct


def _score(raw, mode, truth, vocabulary):
    raw = raw if isinstance(raw, str) else ""
    strict = mode is ExtractionMode.STRICT_LAST_NUMBER
    if isinstance(truth, dict):
        found, hits = {}, 0
        for item, value in truth.items():
            values = _entity_matches(raw, item)
            if strict:
                found[item] = values[-1] if values else None
                hits += found[item] == value
            else:
                found[item] = value if value in values else (values[-1] if values else None)
                hits += value in values
        credit = hits / len(truth) if truth else 0.0
        if all(v is None for v in found.values()):
            return None, False, 0.0
        return found, hits == len(truth), credit
    if isinstance(truth, str):
        labels = _label_tokens(raw, vocabulary or _ALL_LABELS)
        if not labels:
            return None, False, 0.0
        if strict:
            ok = labels[-1].lower() == truth.lower()
            return labels[-1], ok, float(ok)
        ok = any(lab.lower() == truth.lower() for lab in labels)
        return (truth if ok else labels[-1]), ok, float(ok)
    numbers = integer_tokens(raw)
    if not numbers:
        return None, False, 0.0
    if strict:
        ok = truth is not None and numbers[-1] == truth
        return numbers[-1], ok, float(ok)
    ok = truth is not None and truth in numbers
    return (truth if ok else numbers[-1]), ok, float(ok)


def score_response(raw: str, probe: ProbeInstance,
                   mode: ExtractionMode | str = ExtractionMode.STRICT_LAST_NUMBER):
    """``(extracted, correct, credit)`` for a response to ``probe``."""
    vocab = None
    if probe.spec.kind is ProbeKind.NON_ARITHMETIC:
        vocab = T.ASSIGNMENT_VALUES[probe.spec.surface.value]
    return _score(raw, ExtractionMode(mode), probe.ground_truth, vocab)


@dataclass(frozen=True)
class MeasureScore:
    endpoint: str
    measure: str
    value: float
    n_trials: int
    per_seed_sd: float | None = None


def _bucket_keys(probe: ProbeInstance, wrapper: str, primary: str | None) -> list[str]:
    spec = probe.spec
    primary_ok = primary is None or wrapper == primary
    original = spec.template is ParaphraseTemplate.ORIGINAL
    keys = []
    if spec.multi_entity:
        if primary_ok:
            keys.append("wmf_am_multi")
        return keys
    kind = spec.kind.value
    if spec.kind is ProbeKind.WMF_AM:
        if original:
            keys.append(f"wmf_am_wrapper_{wrapper}")
        if primary_ok:
            keys.append(f"wmf_am_template_{spec.template.value}")
            if original:
                keys += ["wmf_am", f"wmf_am_k{spec.depth}", f"wmf_am_seed_{spec.seed}",
                         f"wmf_am_surface_{spec.surface.value}"]
    elif primary_ok and original:
        keys.append(kind)
        if spec.kind is not ProbeKind.SINGLE_STEP:
            keys.append(f"{kind}_k{spec.depth}")
    return keys


def score_trials(trials: Iterable[TrialRecord], probes: Mapping[str, ProbeInstance] | Sequence[ProbeInstance],
                 mode: ExtractionMode | str = ExtractionMode.STRICT_LAST_NUMBER,
                 primary_wrapper: str | None = "chat") -> list[MeasureScore]:
    """Aggregate trials into per-endpoint measure scores.

    Composite and per-K measures use the primary wrapper and the original
    paraphrase; ``wmf_am_wrapper_*`` compares wrappers and
    ``wmf_am_template_*`` compares paraphrases. Pass ``primary_wrapper=None``
    to pool every wrapper.
    """
    if not isinstance(probes, Mapping):
        probes = {p.probe_id: p for p in probes}
    mode = ExtractionMode(mode)
    # endpoint -> measure -> list of credits; endpoint -> seed -> credits
    credits: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    by_seed: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    order: list[str] = []
    for trial in trials:
        probe = probes.get(trial.probe_id)
        if probe is None:
            raise UnknownProbeRef(trial.probe_id)
        if trial.endpoint not in credits:
            order.append(trial.endpoint)
        _, _, credit = score_response(trial.raw_response, probe, mode)
        keys = _bucket_keys(probe, trial.wrapper, primary_wrapper)
        for key in keys:
            credits[trial.endpoint][key].append(credit)
        if "wmf_am" in keys:
            by_seed[trial.endpoint][probe.spec.seed].append(credit)

    out = []
    for endpoint in order:
        measures = credits[endpoint]
        for name in sorted(measures):
            vals = measures[name]
            sd = None
            if name == "wmf_am":
                seed_means = [float(np.mean(v)) for _, v in sorted(by_seed[endpoint].items())]
                if len(seed_means) >= 2:
                    sd = float(np.std(seed_means, ddof=1))
            out.append(MeasureScore(endpoint, name, float(np.mean(vals)), len(vals), sd))
        if "wmf_am" in measures and "yoked" in measures:
            diff = float(np.mean(measures["wmf_am"]) - np.mean(measures["yoked"]))
            out.append(MeasureScore(endpoint, "wmf_minus_yoked", diff,
                                    len(measures["wmf_am"]) + len(measures["yoked"])))
    return out


@dataclass
class ScoreMatrix:
    """Endpoints x measures table with family and size metadata.

    Missing cells are ``None``.
    """

    endpoints: list[str]
    families: list[str]
    param_counts: list[float | None]
    measures: dict[str, list[float | None]] = field(default_factory=dict)
    n_trials: dict[str, list[int | None]] = field(default_factory=dict)
    per_seed_sd: dict[str, list[float | None]] = field(default_factory=dict)

    @classmethod
    def from_scores(cls, scores: Iterable[MeasureScore], roster) -> "ScoreMatrix":
        """``roster`` is a sequence of objects with ``name``, ``family`` and ``param_count``."""
        roster = list(roster)
        m = cls([e.name for e in roster], [e.family for e in roster],
                [getattr(e, "param_count", None) for e in roster])
        for s in scores:
            m.set(s.measure, s.endpoint, s.value, s.n_trials, s.per_seed_sd)
        return m

    def index(self, endpoint: str) -> int:
        return self.endpoints.index(endpoint)

    def set(self, measure: str, endpoint: str, value: float | None,
            n_trials: int | None = None, sd: float | None = None) -> None:
        n = len(self.endpoints)
        for table in (self.measures, self.n_trials, self.per_seed_sd):
            table.setdefault(measure, [None] * n)
        i = self.index(endpoint)
        self.measures[measure][i] = value
        self.n_trials[measure][i] = n_trials
        self.per_seed_sd[measure][i] = sd

    def add_measure(self, measure: str, values: Mapping[str, float]) -> None:
        for endpoint, value in values.items():
            if endpoint in self.endpoints:
                self.set(measure, endpoint, value)

    def has(self, measure: str) -> bool:
        if measure == "log_params":
            return any(p for p in self.param_counts)
        return measure in self.measures

    def column(self, measure: str) -> np.ndarray:
        """Measure values as floats with NaN for missing cells."""
        if measure == "log_params":
            vals = [math.log(p) if p else None for p in self.param_counts]
        else:
            vals = self.measures[measure]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def to_csv(self, path, manifest: str | None = None) -> Path:
        path = Path(path)
        names = sorted(self.measures)
        with path.open("w", newline="", encoding="utf-8") as fh:
            if manifest:
                fh.write(f"# manifest={manifest}\n")
            w = csv.writer(fh)
            w.writerow(["endpoint", "family", "param_count"] + names)
            for i, e in enumerate(self.endpoints):
                row = [e, self.families[i], _fmt(self.param_counts[i])]
                row += [_fmt(self.measures[n][i]) for n in names]
                w.writerow(row)
        return path

    def sidecar(self, manifest: str | None = None) -> dict:
        return {
            "manifest": manifest,
            "n_trials": {m: dict(zip(self.endpoints, v)) for m, v in sorted(self.n_trials.items())},
            "per_seed_sd": {m: dict(zip(self.endpoints, v)) for m, v in sorted(self.per_seed_sd.items())
                            if any(x is not None for x in v)},
        }

    def write(self, csv_path, manifest: str | None = None) -> tuple[Path, Path]:
        """Write the CSV and its JSON sidecar (same stem, ``.json``)."""
        csv_path = self.to_csv(csv_path, manifest)
        side = csv_path.with_suffix(".json")
        side.write_text(json.dumps(self.sidecar(manifest), indent=2, sort_keys=True) + "\n")
        return csv_path, side

    @classmethod
    def read_csv(cls, path) -> "ScoreMatrix":
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(line for line in fh if not line.startswith("#")))
        head, body = rows[0], rows[1:]
        m = cls([r[0] for r in body], [r[1] for r in body], [_parse(r[2]) for r in body])
        for j, name in enumerate(head[3:], start=3):
            for r in body:
                m.set(name, r[0], _parse(r[j]))
        side = path.with_suffix(".json")
        if side.exists():
            meta = json.loads(side.read_text())
            for name, per in meta.get("per_seed_sd", {}).items():
                if name in m.per_seed_sd:
                    m.per_seed_sd[name] = [per.get(e) for e in m.endpoints]
            for name, per in meta.get("n_trials", {}).items():
                if name in m.n_trials:
                    m.n_trials[name] = [per.get(e) for e in m.endpoints]
        return m

    def merge_csv(self, path) -> None:
        """Ingest externally produced measures (e.g. a completion score).

        The file needs an ``endpoint`` column; every other column except
        ``family`` and ``param_count`` becomes a measure.
        """
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            for row in reader:
                name = row.pop("endpoint")
                if name not in self.endpoints:
                    continue
                row.pop("family", None)
                pc = row.pop("param_count", None)
                if pc not in (None, ""):
                    self.param_counts[self.index(name)] = float(pc)
                for measure, value in row.items():
                    self.set(measure, name, _parse(value))


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _parse(s: str):
    return None if s in ("", None) else float(s)
