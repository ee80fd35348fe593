"""Deterministic multi-step agent tasks.

A task is a list of steps run in order against one endpoint. ``note`` steps
add context, ``tool`` steps apply a simulated tool and show its observation,
``prompt`` steps query the model and may carry a checkpoint scored by exact
match. A task's score is passed/total checkpoints; the Agent Battery Score
(ABS) is the mean task score.

Tool transitions are pure: ``apply(state, call) -> (new_state, observation,
result)``. Each task starts from fresh tool state.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .client import (DEFAULT_BACKOFF_S, DEFAULT_RETRIES, DEFAULT_TIMEOUT_S, ModelEndpoint, PromptWrapper,
                     make_transport, request_body, send_with_retries)
from .errors import EndpointUnreachable, MalformedResponse, MalformedTask
from .scoring import MeasureScore, integer_tokens
from .templates import CHAT_SYSTEM_MESSAGE, COT_INSTRUCTION

TASK_PREAMBLE = ("You are working through a multi-step task. Tool results are shown as they happen. "
                 "Answer each question with the final value only.")


class TaskCategory(str, Enum):
    TOOL_USE = "tool_use"
    MULTI_STEP_REASONING = "multi_step_reasoning"
    STATE_TRACKING = "state_tracking"


class MatchRule(str, Enum):
    NUMBER = "number"  # strict last integer in the response
    STRING = "string"  # normalized exact match


# --------------------------------------------------------------------------
# tools


def _as_number(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else float(v)
    return v


def calculator(state: dict, call: dict) -> tuple[dict, str, Any]:
    op, args = call["op"], [Fraction(a) for a in call["args"]]
    if op == "add":
        res = sum(args, Fraction(0))
    elif op == "sub":
        res = args[0] - sum(args[1:], Fraction(0))
    elif op == "mul":
        res = Fraction(1)
        for a in args:
            res *= a
    elif op == "div":
        if len(args) != 2 or args[1] == 0:
            raise MalformedTask(f"calculator div needs two args and a nonzero divisor: {call}")
        res = args[0] / args[1]
    else:
        raise MalformedTask(f"unknown calculator op {op!r}")
    sym = {"add": " + ", "sub": " - ", "mul": " * ", "div": " / "}[op]
    res = _as_number(res)
    shown = sym.join(str(_as_number(a)) for a in args)
    return state, f"calculator: {shown} = {res}", res


def kv_store(state: dict, call: dict) -> tuple[dict, str, Any]:
    op, key = call["op"], call["key"]
    new = dict(state)
    if op == "set":
        new[key] = call["value"]
        return new, f"kv.set({key}, {call['value']}) -> ok", None
    if op in ("incr", "decr"):
        if key not in new:
            raise MalformedTask(f"kv.{op} on missing key {key!r}")
        new[key] = new[key] + (call["by"] if op == "incr" else -call["by"])
        return new, f"kv.{op}({key}, {call['by']}) -> ok", None
    if op == "delete":
        new.pop(key, None)
        return new, f"kv.delete({key}) -> ok", None
    if op == "get":
        return new, f"kv.get({key}) -> {new.get(key)}", new.get(key)
    raise MalformedTask(f"unknown kv op {op!r}")


TOOLS = {"calculator": calculator, "kv": kv_store}


# --------------------------------------------------------------------------
# task format


@dataclass(frozen=True)
class Checkpoint:
    expected: Any = None
    expected_from: str | None = None  # "kv:<key>" or "var:<name>"
    match: MatchRule = MatchRule.NUMBER
    load: int = 1  # state updates that must be tracked to answer

    def resolve(self, kv: dict, variables: dict):
        if self.expected_from is None:
            return self.expected
        src, _, name = self.expected_from.partition(":")
        table = {"kv": kv, "var": variables}.get(src)
        if table is None or name not in table:
            raise MalformedTask(f"cannot resolve checkpoint source {self.expected_from!r}")
        return table[name]


@dataclass(frozen=True)
class Step:
    kind: str  # "note", "tool" or "prompt"
    text: str = ""
    tool: str | None = None
    call: dict | None = None
    store_as: str | None = None
    checkpoint: Checkpoint | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "Step":
        d = dict(d)
        if d.get("checkpoint") is not None:
            cp = dict(d["checkpoint"])
            cp["match"] = MatchRule(cp.get("match", "number"))
            d["checkpoint"] = Checkpoint(**cp)
        return cls(**d)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for k in ("text", "tool", "call", "store_as"):
            if getattr(self, k):
                d[k] = getattr(self, k)
        if self.checkpoint is not None:
            cp = self.checkpoint
            d["checkpoint"] = {"match": cp.match.value, "load": cp.load}
            if cp.expected_from is not None:
                d["checkpoint"]["expected_from"] = cp.expected_from
            else:
                d["checkpoint"]["expected"] = cp.expected
        return d


@dataclass(frozen=True)
class BatteryTask:
    id: str
    category: TaskCategory
    steps: tuple
    description: str = ""
    wmf_heavy: bool = False
    max_score: float = 1.0

    @property
    def checkpoints(self) -> list[Checkpoint]:
        return [s.checkpoint for s in self.steps if s.checkpoint is not None]

    def validate(self) -> None:
        if not self.steps:
            raise MalformedTask(f"task {self.id!r} has no steps")
        if not self.checkpoints:
            raise MalformedTask(f"task {self.id!r} has no checkpoint")
        for i, s in enumerate(self.steps):
            where = f"task {self.id!r} step {i}"
            if s.kind not in ("note", "tool", "prompt"):
                raise MalformedTask(f"{where}: unknown kind {s.kind!r}")
            if s.kind == "tool" and (s.tool not in TOOLS or not s.call):
                raise MalformedTask(f"{where}: tool step needs a known tool and a call")
            if s.kind in ("note", "prompt") and not s.text:
                raise MalformedTask(f"{where}: {s.kind} step needs text")
            if s.checkpoint is not None:
                if s.kind != "prompt":
                    raise MalformedTask(f"{where}: only prompt steps carry checkpoints")
                cp = s.checkpoint
                if (cp.expected is None) == (cp.expected_from is None):
                    raise MalformedTask(f"{where}: checkpoint needs exactly one of expected/expected_from")
                if cp.load < 1:
                    raise MalformedTask(f"{where}: checkpoint load must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "BatteryTask":
        try:
            task = cls(
                id=d["id"],
                category=TaskCategory(d["category"]),
                steps=tuple(Step.from_dict(s) for s in d["steps"]),
                description=d.get("description", ""),
                wmf_heavy=bool(d.get("wmf_heavy", False)),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedTask(f"bad task {d.get('id', '?')!r}: {exc}") from exc
        task.validate()
        return task

    def to_dict(self) -> dict:
        return {"id": self.id, "category": self.category.value, "description": self.description,
                "wmf_heavy": self.wmf_heavy, "steps": [s.to_dict() for s in self.steps]}


def load_pack(source="bundled") -> list[BatteryTask]:
    """Load a task pack: a path, a parsed dict, or ``"bundled"``."""
    if source == "bundled":
        data = json.loads(resources.files("wmfam.data").joinpath("battery_pack.json").read_text())
    elif isinstance(source, dict):
        data = source
    else:
        data = json.loads(Path(source).read_text())
    tasks = [BatteryTask.from_dict(t) for t in data["tasks"]]
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise MalformedTask("duplicate task ids in pack")
    return tasks


# --------------------------------------------------------------------------
# running


def _normalize(text) -> str:
    text = str(text).strip().lower()
    text = re.sub(r"\s+", " ", text)
    return text.strip(" .!\"'`*")


def match_checkpoint(response: str, expected, rule: MatchRule) -> tuple[Any, bool]:
    """(extracted, passed) for one checkpoint."""
    if rule is MatchRule.NUMBER:
        tokens = integer_tokens(response)
        got = tokens[-1] if tokens else None
        return got, got is not None and got == expected
    got = _normalize(response)
    return got, got == _normalize(expected)


@dataclass
class TaskResult:
    task_id: str
    category: str
    score: float
    passed: int
    total: int
    transcript: list = field(default_factory=list)
    error: str | None = None


def run_task(task: BatteryTask, endpoint: ModelEndpoint, wrapper: PromptWrapper | str = PromptWrapper.CHAT,
             *, transport=None, retries: int = DEFAULT_RETRIES, backoff_s: float = DEFAULT_BACKOFF_S,
             timeout_s: float = DEFAULT_TIMEOUT_S) -> TaskResult:
    """Run one task; raises :class:`EndpointUnreachable` if the endpoint is down."""
    task.validate()
    wrapper = PromptWrapper(wrapper)
    own = transport is None
    transport = transport or make_transport(endpoint, timeout_s)
    messages: list[dict] = []
    if wrapper is PromptWrapper.CHAT:
        messages.append({"role": "system", "content": CHAT_SYSTEM_MESSAGE})
    pending = [TASK_PREAMBLE]
    kv: dict = {}
    variables: dict = {}
    transcript = []
    passed = total = 0
    try:
        for i, step in enumerate(task.steps):
            if step.kind == "note":
                pending.append(step.text)
                transcript.append({"task": task.id, "step": i, "kind": "note", "text": step.text})
                continue
            if step.kind == "tool":
                call = {k: (variables[v[1:]] if isinstance(v, str) and v.startswith("$") else v)
                        for k, v in step.call.items()}
                if "args" in call:
                    call["args"] = [variables[a[1:]] if isinstance(a, str) and a.startswith("$") else a
                                    for a in call["args"]]
                if step.tool == "kv":
                    kv, obs, result = kv_store(kv, call)
                else:
                    _, obs, result = TOOLS[step.tool]({}, call)
                if step.store_as:
                    variables[step.store_as] = result
                pending.append(obs)
                transcript.append({"task": task.id, "step": i, "kind": "tool", "tool": step.tool,
                                   "call": call, "observation": obs})
                continue
            text = "\n".join(pending + [step.text])
            pending = []
            if wrapper is PromptWrapper.COT:
                text = f"{text}\n\n{COT_INSTRUCTION}"
            messages.append({"role": "user", "content": text})
            hint = None
            expected = None
            if step.checkpoint is not None:
                expected = step.checkpoint.resolve(kv, variables)
                hint = {"id": f"{task.id}/{i}", "expected": expected, "load": step.checkpoint.load}
            body = request_body(list(messages), endpoint.model_id or endpoint.name)
            try:
                reply, attempts = send_with_retries(transport, body, hint, retries, backoff_s)
            except MalformedResponse as exc:
                reply, attempts = "", 1
                transcript.append({"task": task.id, "step": i, "kind": "error", "error": str(exc)})
            messages.append({"role": "assistant", "content": reply})
            entry = {"task": task.id, "step": i, "kind": "prompt", "prompt": text, "response": reply,
                     "attempts": attempts}
            if step.checkpoint is not None:
                got, ok = match_checkpoint(reply, expected, step.checkpoint.match)
                total += 1
                passed += ok
                entry.update({"expected": expected, "extracted": got, "passed": ok,
                              "load": step.checkpoint.load})
            transcript.append(entry)
    finally:
        if own:
            transport.close()
    return TaskResult(task.id, task.category.value, passed / total, passed, total, transcript)


@dataclass
class BatteryResult:
    endpoint: str
    abs: float
    tasks: list
    errors: dict

    def measures(self, tasks: Sequence[BatteryTask]) -> list[MeasureScore]:
        """ABS plus per-category and WMF-heavy subset scores."""
        by_id = {t.id: t for t in tasks}
        out = [MeasureScore(self.endpoint, "abs", self.abs, len(self.tasks))]
        groups: dict[str, list[float]] = {}
        for r in self.tasks:
            groups.setdefault(f"abs_{r.category}", []).append(r.score)
            if any(t.wmf_heavy for t in tasks):
                key = "abs_wmf_heavy" if by_id[r.task_id].wmf_heavy else "abs_non_wmf"
                groups.setdefault(key, []).append(r.score)
        for name, vals in sorted(groups.items()):
            out.append(MeasureScore(self.endpoint, name, float(np.mean(vals)), len(vals)))
        return out


def run_battery(tasks: Sequence[BatteryTask], endpoint: ModelEndpoint,
                wrapper: PromptWrapper | str = PromptWrapper.CHAT, **kwargs) -> BatteryResult:
    """ABS = mean task score. A task that fails with an endpoint error
    scores 0 and its error is collected in ``errors``."""
    if not tasks:
        raise ValueError("a battery needs at least one task")
    results, errors = [], {}
    for task in tasks:
        try:
            results.append(run_task(task, endpoint, wrapper, **kwargs))
        except EndpointUnreachable as exc:
            errors[task.id] = str(exc)
            n = len(task.checkpoints)
            results.append(TaskResult(task.id, task.category.value, 0.0, 0, n, error=str(exc)))
    abs_score = float(np.mean([r.score for r in results]))
    return BatteryResult(endpoint.name, abs_score, results, errors)


def write_transcripts(path, results: Sequence[BatteryResult], header: dict | None = None) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        if header is not None:
            fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for br in results:
            for tr in br.tasks:
                for entry in tr.transcript:
                    fh.write(json.dumps({"endpoint": br.endpoint, **entry}, sort_keys=True) + "\n")
                fh.write(json.dumps({"endpoint": br.endpoint, "task": tr.task_id, "kind": "score",
                                     "score": tr.score, "passed": tr.passed, "total": tr.total,
                                     "error": tr.error}, sort_keys=True) + "\n")
    return path
