"""Deterministic generation of cumulative state-tracking probes.

Four probe kinds share one generator:

* ``wmf_am``: an initial value followed by K signed updates; the answer is the
  running total.
* ``yoked``: K pairs of updates where each update is immediately undone, so
  the answer is the initial value.
* ``nonarith``: K direct assignments to one attribute (color, location,
  status); the answer is the last assigned value.
* ``k1_control``: a single update (K = 1).

Generation is a pure function of the :class:`ProbeSpec`. Paraphrase templates
only change the rendering, never the drawn operations.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from enum import Enum
from itertools import product
from pathlib import Path
from typing import Any, Iterable, Sequence

from . import templates as T
from .errors import InvalidDepth, InvalidEntityCount, InvalidSurface
from .rng import RNG_ALGORITHM, SplitMix64

GENERATOR_VERSION = "1.0"

INITIAL_RANGE = (10, 100)
MAGNITUDE_RANGE = (1, 20)


class ProbeKind(str, Enum):
    WMF_AM = "wmf_am"
    YOKED = "yoked"
    NON_ARITHMETIC = "nonarith"
    SINGLE_STEP = "k1_control"


class SurfaceForm(str, Enum):
    POINTS = "points"
    INVENTORY = "inventory"
    ACCOUNTS = "accounts"
    COLOR = "color"
    LOCATION = "location"
    STATUS = "status"


class ParaphraseTemplate(str, Enum):
    ORIGINAL = "original"
    FORMAL = "formal"
    CASUAL = "casual"
    MINIMAL = "minimal"
    VERBOSE = "verbose"


ARITHMETIC_SURFACES = (SurfaceForm.POINTS, SurfaceForm.INVENTORY, SurfaceForm.ACCOUNTS)
ASSIGNMENT_SURFACES = (SurfaceForm.COLOR, SurfaceForm.LOCATION, SurfaceForm.STATUS)

DEFAULT_DEPTHS = {
    ProbeKind.WMF_AM: (3, 5, 7),
    ProbeKind.YOKED: (2, 4, 6, 8, 12),
    ProbeKind.NON_ARITHMETIC: (3, 5, 7),
    ProbeKind.SINGLE_STEP: (1,),
}

# Battery defaults: trials per depth, seeds, surfaces. Surfaces rotate across
# trial indices so e.g. 15 WMF-AM trials per depth cover all three forms.
BATTERY_DEFAULTS = {
    ProbeKind.WMF_AM: (15, (0, 1, 2, 3), ARITHMETIC_SURFACES),
    ProbeKind.YOKED: (20, (0,), ARITHMETIC_SURFACES),
    ProbeKind.NON_ARITHMETIC: (15, (0,), ASSIGNMENT_SURFACES),
    ProbeKind.SINGLE_STEP: (15, (0,), ARITHMETIC_SURFACES),
}


@dataclass(frozen=True)
class ProbeSpec:
    """Everything that identifies one probe.

    ``depth`` counts operations, except for yoked probes where it counts
    cancelling pairs (a yoked probe of depth K has 2K operations).
    ``entity_count`` is only meaningful when ``multi_entity`` is set.
    """

    kind: ProbeKind
    depth: int
    surface: SurfaceForm
    template: ParaphraseTemplate = ParaphraseTemplate.ORIGINAL
    seed: int = 0
    index: int = 0
    multi_entity: bool = False
    entity_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProbeKind(self.kind))
        object.__setattr__(self, "surface", SurfaceForm(self.surface))
        object.__setattr__(self, "template", ParaphraseTemplate(self.template))
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def key(self) -> str:
        """Stable probe identifier used to join trials back to probes."""
        key = (
            f"{self.kind.value}/k{self.depth}/{self.surface.value}/"
            f"{self.template.value}/s{self.seed}/i{self.index}"
        )
        if self.multi_entity:
            key += f"/me{self.entity_count}"
        return key

    @property
    def stream_key(self) -> str:
        # the template is deliberately absent: paraphrases share operations
        return (
            f"wmfam-v1|{self.kind.value}|{self.depth}|{self.surface.value}|"
            f"{self.seed}|{self.index}|{int(self.multi_entity)}|{self.entity_count}"
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("kind", "surface", "template"):
            d[k] = d[k].value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeSpec":
        return cls(**d)


@dataclass(frozen=True)
class ProbeInstance:
    spec: ProbeSpec
    prompt: str
    initial_state: Any
    operations: tuple
    ground_truth: Any
    entity_name: str

    @property
    def probe_id(self) -> str:
        return self.spec.key

    @property
    def is_numeric(self) -> bool:
        return isinstance(self.ground_truth, int)

    def running_states(self) -> list[int]:
        """Cumulative values after each operation (numeric single-entity probes)."""
        states, value = [], self.initial_state
        for delta in self.operations:
            value += delta
            states.append(value)
        return states

    def to_dict(self) -> dict:
        ops = [list(op) if isinstance(op, tuple) else op for op in self.operations]
        return {
            "probe_id": self.probe_id,
            "spec": self.spec.to_dict(),
            "prompt": self.prompt,
            "initial_state": self.initial_state,
            "operations": ops,
            "ground_truth": self.ground_truth,
            "entity_name": self.entity_name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeInstance":
        spec = ProbeSpec.from_dict(d["spec"])
        ops = tuple(tuple(op) if isinstance(op, list) else op for op in d["operations"])
        return cls(
            spec=spec,
            prompt=d["prompt"],
            initial_state=d["initial_state"],
            operations=ops,
            ground_truth=d["ground_truth"],
            entity_name=d["entity_name"],
        )


def _check_spec(spec: ProbeSpec, sweep: bool) -> None:
    if not isinstance(spec.depth, int) or spec.depth < 1:
        raise InvalidDepth(f"depth must be a positive integer, got {spec.depth!r}")
    if spec.kind is ProbeKind.SINGLE_STEP and spec.depth != 1:
        raise InvalidDepth("k1_control probes always have depth 1")
    if not sweep and spec.depth not in DEFAULT_DEPTHS[spec.kind]:
        raise InvalidDepth(
            f"depth {spec.depth} not in {DEFAULT_DEPTHS[spec.kind]} for {spec.kind.value}; "
            "enable sweep mode for arbitrary depths"
        )
    allowed = ASSIGNMENT_SURFACES if spec.kind is ProbeKind.NON_ARITHMETIC else ARITHMETIC_SURFACES
    if spec.surface not in allowed:
        raise InvalidSurface(f"surface {spec.surface.value} cannot be used with {spec.kind.value}")


def _draw_delta(rng: SplitMix64, running: int) -> int:
    while True:
        m = rng.randint(*MAGNITUDE_RANGE)
        delta = m if rng.coin() else -m
        if running + delta >= 0:
            return delta


def _draw_pair(rng: SplitMix64, running: int) -> tuple[int, int]:
    while True:
        m = rng.randint(*MAGNITUDE_RANGE)
        if rng.coin():
            return m, -m
        if running - m >= 0:
            return -m, m


def generate_probe(spec: ProbeSpec, *, sweep: bool = False) -> ProbeInstance:
    """Generate the probe identified by ``spec``.

    ``sweep`` accepts any depth >= 1 (K-sweep mode); otherwise depths are
    restricted to the design depths of the probe kind.
    """
    if spec.multi_entity:
        return generate_multi_entity(spec, spec.entity_count, sweep=sweep)
    _check_spec(spec, sweep)
    rng = SplitMix64.from_key(spec.stream_key)
    entity = rng.choice(T.ENTITY_NAMES[spec.surface.value])

    if spec.kind is ProbeKind.NON_ARITHMETIC:
        values = T.ASSIGNMENT_VALUES[spec.surface.value]
        current = rng.choice(values)
        initial, ops = current, []
        for _ in range(spec.depth):
            current = rng.choice([v for v in values if v != current])
            ops.append(current)
        return build_instance(spec, initial, ops, entity)

    initial = rng.randint(*INITIAL_RANGE)
    ops = []
    if spec.kind is ProbeKind.YOKED:
        for _ in range(spec.depth):
            ops.extend(_draw_pair(rng, initial))
    else:
        running = initial
        for _ in range(spec.depth):
            delta = _draw_delta(rng, running)
            running += delta
            ops.append(delta)
    return build_instance(spec, initial, ops, entity)


def build_instance(spec: ProbeSpec, initial_state, operations: Sequence, entity_name: str) -> ProbeInstance:
    """Render a probe from explicit values and compute its ground truth.

    Used by the generator, and directly when a fixed worked example must be
    reproduced.
    """
    operations = tuple(tuple(op) if isinstance(op, list) else op for op in operations)
    if spec.multi_entity:
        truth = dict(initial_state)
        for item, delta in operations:
            truth[item] += delta
            if truth[item] < 0:
                raise ValueError(f"operations drive {item} below zero")
        prompt = _render_multi(spec, initial_state, operations)
        return ProbeInstance(spec, prompt, dict(initial_state), operations, truth, entity_name)

    if spec.kind is ProbeKind.NON_ARITHMETIC:
        truth = operations[-1] if operations else initial_state
        prompt = _render_assignments(spec, initial_state, operations, entity_name)
        return ProbeInstance(spec, prompt, initial_state, operations, truth, entity_name)

    expected_ops = 2 * spec.depth if spec.kind is ProbeKind.YOKED else spec.depth
    if len(operations) != expected_ops:
        raise ValueError(f"{spec.kind.value} depth {spec.depth} needs {expected_ops} operations")
    if spec.kind is ProbeKind.YOKED:
        for a, b in zip(operations[::2], operations[1::2]):
            if a + b != 0:
                raise ValueError(f"yoked pair ({a}, {b}) does not cancel")
    running = initial_state
    for delta in operations:
        running += delta
        if running < 0:
            raise ValueError("operations drive the state below zero")
    prompt = _render_arithmetic(spec, initial_state, operations, entity_name)
    return ProbeInstance(spec, prompt, initial_state, operations, running, entity_name)


def _join(phrases: dict, body: list[str]) -> str:
    parts = [phrases["preamble"]] if phrases.get("preamble") else []
    return " ".join(parts + body)


def _render_arithmetic(spec, initial, ops, name) -> str:
    p = T.ARITHMETIC_PHRASES[spec.template.value][spec.surface.value]
    body = [p["start"].format(name=name, x=initial)]
    for delta in ops:
        body.append(p["up" if delta > 0 else "down"].format(name=name, m=abs(delta)))
    body.append(p["question"].format(name=name))
    return _join(p, body)


def _render_assignments(spec, initial, ops, obj) -> str:
    p = T.ASSIGNMENT_PHRASES[spec.template.value][spec.surface.value]
    body = [p["start"].format(obj=obj, v=initial)]
    body += [p["assign"].format(obj=obj, v=v) for v in ops]
    body.append(p["question"].format(obj=obj))
    return _join(p, body)


def _render_multi(spec, initial: dict, ops) -> str:
    p = T.MULTI_ENTITY_PHRASES[spec.template.value]
    listing = ", ".join(f"{item}={x}" for item, x in initial.items())
    form = ", ".join(f"{item}=N" for item in initial)
    body = [p["start"].format(n=len(initial), listing=listing)]
    removals = 0
    for item, delta in ops:
        if delta > 0:
            verb = "up"
        else:
            # alternate the two removal phrasings
            verb = "ship" if removals % 2 == 0 else "transfer"
            removals += 1
        body.append(p[verb].format(item=item, m=abs(delta)))
    body.append(p["question"].format(form=form))
    return _join(p, body)


def generate_multi_entity(spec: ProbeSpec, entity_count: int, *, sweep: bool = False) -> ProbeInstance:
    """Warehouse probe tracking ``entity_count`` items at once.

    Each of the K operations targets one item; the answer is the final count
    of every item.
    """
    if not isinstance(entity_count, int) or entity_count < 2:
        raise InvalidEntityCount(f"entity_count must be >= 2, got {entity_count!r}")
    if entity_count > len(T.MULTI_ENTITY_ITEMS):
        raise InvalidEntityCount(f"at most {len(T.MULTI_ENTITY_ITEMS)} entities are supported")
    if spec.kind is not ProbeKind.WMF_AM:
        raise InvalidSurface("multi-entity mode requires the wmf_am kind")
    if spec.surface is not SurfaceForm.INVENTORY:
        raise InvalidSurface("multi-entity mode requires the inventory surface")
    spec = replace(spec, multi_entity=True, entity_count=entity_count)
    _check_spec(spec, sweep)

    rng = SplitMix64.from_key(spec.stream_key)
    items = T.MULTI_ENTITY_ITEMS[:entity_count]
    initial = {item: rng.randint(*INITIAL_RANGE) for item in items}
    state = dict(initial)
    ops = []
    for _ in range(spec.depth):
        item = rng.choice(items)
        delta = _draw_delta(rng, state[item])
        state[item] += delta
        ops.append((item, delta))
    return build_instance(spec, initial, ops, "warehouse")


def generate_battery(
    kind: ProbeKind | str,
    depths: Iterable[int] | None = None,
    trials_per_depth: int | None = None,
    surfaces: Iterable[SurfaceForm | str] | None = None,
    templates: Iterable[ParaphraseTemplate | str] | None = None,
    seeds: Iterable[int] | None = None,
    *,
    rotate_surfaces: bool = True,
    sweep: bool = False,
) -> list[ProbeInstance]:
    """Generate a full block of probes in seed, depth, surface, template, index order.

    With ``rotate_surfaces`` each trial index is assigned one surface
    (``surfaces[index % len(surfaces)]``), so ``trials_per_depth`` counts
    trials across all surfaces. Without it the block is the full Cartesian
    product and every surface gets ``trials_per_depth`` trials.
    """
    kind = ProbeKind(kind)
    d_trials, d_seeds, d_surfaces = BATTERY_DEFAULTS[kind]
    depths = tuple(DEFAULT_DEPTHS[kind] if depths is None else depths)
    trials = d_trials if trials_per_depth is None else trials_per_depth
    surfaces = tuple(SurfaceForm(s) for s in (d_surfaces if surfaces is None else surfaces))
    templates = tuple(ParaphraseTemplate(t) for t in (templates or (ParaphraseTemplate.ORIGINAL,)))
    seeds = tuple(d_seeds if seeds is None else seeds)
    if not depths or not surfaces or not templates or not seeds:
        raise ValueError("depths, surfaces, templates and seeds must be non-empty")
    if not isinstance(trials, int) or trials < 1:
        raise ValueError(f"trials_per_depth must be >= 1, got {trials!r}")

    surface_rank = {s: i for i, s in enumerate(surfaces)}
    template_rank = {t: i for i, t in enumerate(templates)}
    specs = []
    for seed, depth, template, index in product(seeds, depths, templates, range(trials)):
        if rotate_surfaces:
            chosen = [surfaces[index % len(surfaces)]]
        else:
            chosen = surfaces
        for surface in chosen:
            specs.append(ProbeSpec(kind, depth, surface, template, seed, index))
    specs.sort(key=lambda s: (
        seeds.index(s.seed), depths.index(s.depth),
        surface_rank[s.surface], template_rank[s.template], s.index,
    ))
    return [generate_probe(s, sweep=sweep) for s in specs]


def probe_header(params: dict | None = None, manifest: str | None = None) -> dict:
    return {
        "generator": "wmfam",
        "version": GENERATOR_VERSION,
        "rng": RNG_ALGORITHM,
        "params": params or {},
        "manifest": manifest,
    }


def write_probes(path, probes: Iterable[ProbeInstance], params: dict | None = None,
                 manifest: str | None = None) -> Path:
    """Write probes as JSONL: one header line, then one probe per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"header": probe_header(params, manifest)}, sort_keys=True) + "\n")
        for probe in probes:
            fh.write(json.dumps(probe.to_dict(), sort_keys=True) + "\n")
    return path


def read_probes(path) -> tuple[dict, list[ProbeInstance]]:
    header, probes = {}, []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if "header" in record:
                header = record["header"]
            else:
                probes.append(ProbeInstance.from_dict(record))
    return header, probes
