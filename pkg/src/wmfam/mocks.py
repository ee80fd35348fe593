"""Deterministic mock models.

Mocks answer probes from the probe's own fields, which makes end-to-end runs
reproducible without a model server. Each behavior models one way of failing
(or not failing) the task:

``perfect_tracker``   correct iff depth <= capacity
``last_op_only``      applies only the final update to the initial value
``random_plausible``  a seeded guess in a plausible range
``verbose_embedder``  the perfect-tracker answer buried in prose that ends on a distractor
``cancellation_blind`` tracks ordinary updates but applies only the first member of each cancelling pair
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

from .probes import ProbeInstance, ProbeKind
from .rng import SplitMix64
from . import templates as T


class MockKind(str, Enum):
    PERFECT_TRACKER = "perfect_tracker"
    LAST_OP_ONLY = "last_op_only"
    RANDOM_PLAUSIBLE = "random_plausible"
    VERBOSE_EMBEDDER = "verbose_embedder"
    CANCELLATION_BLIND = "cancellation_blind"


@dataclass(frozen=True)
class MockBehavior:
    kind: MockKind
    capacity: int | None = None
    seed: int = 0
    # under the chain-of-thought wrapper, answer everything correctly
    cot_ceiling: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", MockKind(self.kind))
        if self.kind in (MockKind.PERFECT_TRACKER, MockKind.VERBOSE_EMBEDDER) and self.capacity is None:
            raise ValueError(f"{self.kind.value} needs a capacity")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "capacity": self.capacity, "seed": self.seed,
                "cot_ceiling": self.cot_ceiling}

    @classmethod
    def from_dict(cls, d: dict) -> "MockBehavior":
        return cls(**d)


MOCK_DESCRIPTIONS = {
    MockKind.PERFECT_TRACKER: "correct iff probe depth <= capacity; wrong answers are off by one",
    MockKind.LAST_OP_ONLY: "answers initial state + last update",
    MockKind.RANDOM_PLAUSIBLE: "seeded random integer in [0, 2*initial + 20]",
    MockKind.VERBOSE_EMBEDDER: "perfect-tracker answer inside prose that ends on a distractor number",
    MockKind.CANCELLATION_BLIND: "correct on ordinary probes; applies only the first update of each yoked pair",
}


def _wrong_label(probe: ProbeInstance) -> str:
    # the value held just before the final assignment
    ops = probe.operations
    return ops[-2] if len(ops) >= 2 else probe.initial_state


def _tracked_answer(behavior: MockBehavior, probe: ProbeInstance):
    """The answer a capacity-limited tracker gives."""
    if probe.spec.depth <= behavior.capacity:
        return probe.ground_truth
    if isinstance(probe.ground_truth, dict):
        return {k: v + 1 for k, v in probe.ground_truth.items()}
    if isinstance(probe.ground_truth, str):
        return _wrong_label(probe)
    return probe.ground_truth + 1


def _format(answer) -> str:
    if isinstance(answer, dict):
        return ", ".join(f"{k}={v}" for k, v in answer.items())
    return str(answer)


def _probe_rng(behavior: MockBehavior, probe: ProbeInstance) -> SplitMix64:
    return SplitMix64.from_key(f"mock|{behavior.seed}|{probe.probe_id}")


def mock_answer(behavior: MockBehavior, probe: ProbeInstance, wrapper: str = "bare"):
    """The value a mock commits to (before formatting)."""
    if behavior.cot_ceiling and wrapper == "cot":
        return probe.ground_truth
    kind = behavior.kind
    truth = probe.ground_truth
    if kind in (MockKind.PERFECT_TRACKER, MockKind.VERBOSE_EMBEDDER):
        return _tracked_answer(behavior, probe)
    if kind is MockKind.LAST_OP_ONLY:
        if isinstance(truth, dict):
            item, delta = probe.operations[-1]
            out = dict(probe.initial_state)
            out[item] += delta
            return out
        if isinstance(truth, str):
            return probe.operations[-1]
        return probe.initial_state + probe.operations[-1]
    if kind is MockKind.RANDOM_PLAUSIBLE:
        rng = _probe_rng(behavior, probe)
        if isinstance(truth, dict):
            return {k: rng.randint(0, 2 * v + 20) for k, v in probe.initial_state.items()}
        if isinstance(truth, str):
            return rng.choice(T.ASSIGNMENT_VALUES[probe.spec.surface.value])
        return rng.randint(0, 2 * probe.initial_state + 20)
    if kind is MockKind.CANCELLATION_BLIND:
        if probe.spec.kind is ProbeKind.YOKED:
            return probe.initial_state + sum(probe.operations[::2])
        return truth
    raise ValueError(f"unknown mock kind {kind}")


def mock_respond(behavior: MockBehavior, probe: ProbeInstance, wrapper: str = "bare") -> str:
    """Deterministic response text for ``probe``."""
    answer = _format(mock_answer(behavior, probe, wrapper))
    if behavior.kind is MockKind.VERBOSE_EMBEDDER:
        start = _format(probe.initial_state)
        n_ops = len(probe.operations)
        return (
            f"Let me work through this carefully. We begin at {start} and then apply "
            f"{n_ops} updates one at a time, keeping a running tally. "
            f"After the last update the final value is {answer}. "
            f"For reference, the starting value was {start} and there were {n_ops} steps."
        )
    return f"The answer is {answer}."


def _checkpoint_wrong(expected):
    if isinstance(expected, (int, float)) and not isinstance(expected, bool):
        return int(expected) + 1
    return "unknown"


def mock_checkpoint_respond(behavior: MockBehavior, checkpoint: dict, wrapper: str = "bare") -> str:
    """Response to an agent-battery checkpoint.

    Checkpoints carry a ``load``: the number of state updates that must be
    tracked to answer them. Capacity-limited mocks pass iff load <= capacity.
    """
    expected = checkpoint["expected"]
    load = checkpoint.get("load", 1)
    kind = behavior.kind
    if behavior.cot_ceiling and wrapper == "cot":
        ok = True
    elif kind in (MockKind.PERFECT_TRACKER, MockKind.VERBOSE_EMBEDDER):
        ok = load <= behavior.capacity
    elif kind is MockKind.LAST_OP_ONLY:
        ok = load <= 1
    elif kind is MockKind.CANCELLATION_BLIND:
        ok = True
    else:
        digest = hashlib.sha256(f"{behavior.seed}|{checkpoint.get('id', '')}".encode()).digest()
        ok = digest[0] % 2 == 0
    answer = expected if ok else _checkpoint_wrong(expected)
    if kind is MockKind.VERBOSE_EMBEDDER and not isinstance(answer, str):
        return f"Working through it step by step, I get {answer}. That took {load} updates to track."
    return f"{answer}"
