"""End-to-end orchestration: generate -> run -> battery -> score -> analyze.

A run is frozen by its manifest (generator version, RNG id, roster, plan,
pack, seeds, extraction mode, config). All artifacts go under
``<run root>/<manifest hash>/`` and embed that hash. Each stage writes a
stamp recording its input hashes; a stage whose stamp still matches is
skipped, so an unchanged re-run makes no endpoint calls.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable

from . import battery as B
from . import register as R
from .client import ModelEndpoint, PromptWrapper, load_roster, make_transport, run_trials
from .errors import ConfigInvalid, MalformedTask, StageFailed, UnknownProbeRef
from .probes import (BATTERY_DEFAULTS, DEFAULT_DEPTHS, GENERATOR_VERSION, ParaphraseTemplate, ProbeKind,
                     SurfaceForm, generate_battery, generate_multi_entity, ProbeSpec, read_probes, write_probes)
from .records import read_trials, write_trials
from .rng import RNG_ALGORITHM
from .scoring import ExtractionMode, ScoreMatrix, score_trials

log = logging.getLogger(__name__)

STAGES = ("generate", "run", "battery", "score", "analyze")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def canonical_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("wmfam.data").joinpath(name)))


def _resolve(base: Path, ref: str | None) -> Path | None:
    if ref is None:
        return None
    if ref.startswith("bundled:"):
        return bundled_path(ref.split(":", 1)[1])
    p = Path(ref)
    return p if p.is_absolute() else base / p


@dataclass
class PipelineConfig:
    roster: list
    probes: dict
    wrappers: tuple = ("chat",)
    primary_wrapper: str = "chat"
    extraction_mode: str = ExtractionMode.STRICT_LAST_NUMBER.value
    parallelism: int = 1
    retries: int = 3
    backoff_s: float = 0.5
    timeout_s: float = 120.0
    battery_pack: dict | None = None
    battery_wrapper: str = "chat"
    external_measures: list = field(default_factory=list)
    plan: dict = field(default_factory=R.default_plan_dict)
    stages: tuple = STAGES
    run_root: str = "runs"
    plot: bool = False
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base: Path = Path(".")) -> "PipelineConfig":
        unknown = set(raw) - {"roster", "probes", "wrappers", "primary_wrapper", "extraction_mode", "parallelism",
                              "retries", "backoff_s", "timeout_s", "battery", "external_measures", "plan",
                              "stages", "run_root", "plot", "name"}
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        if "roster" not in raw:
            raise ConfigInvalid("config needs a roster")
        roster_ref = raw["roster"]
        try:
            if isinstance(roster_ref, str):
                roster_path = _resolve(base, roster_ref)
                roster_data = json.loads(roster_path.read_text())
            else:
                roster_data = roster_ref
            endpoints = load_roster(roster_data)
        except (OSError, ValueError) as exc:
            raise ConfigInvalid(f"bad roster: {exc}") from exc
        if not endpoints:
            raise ConfigInvalid("roster is empty")

        probes = raw.get("probes", {"kinds": {"wmf_am": {}}})
        for kind, opts in probes.get("kinds", {}).items():
            try:
                ProbeKind(kind)
            except ValueError as exc:
                raise ConfigInvalid(f"unknown probe kind {kind!r}") from exc
            if not isinstance(opts, dict):
                raise ConfigInvalid(f"probe options for {kind!r} must be an object")

        wrappers = tuple(raw.get("wrappers", ("chat",)))
        primary = raw.get("primary_wrapper", "chat")
        try:
            for w in wrappers + (primary,):
                PromptWrapper(w)
            mode = ExtractionMode(raw.get("extraction_mode", "strict_last_number")).value
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        if primary not in wrappers:
            raise ConfigInvalid("primary_wrapper must be one of wrappers")

        pack = None
        battery = raw.get("battery")
        if battery:
            ref = battery.get("pack", "bundled")
            try:
                pack = (json.loads(bundled_path("battery_pack.json").read_text()) if ref == "bundled"
                        else json.loads(_resolve(base, ref).read_text()))
                B.load_pack(pack)
            except (OSError, ValueError, MalformedTask) as exc:
                raise ConfigInvalid(f"bad battery pack: {exc}") from exc

        externals = []
        for ref in raw.get("external_measures", []):
            p = _resolve(base, ref)
            if not p.exists():
                raise ConfigInvalid(f"external measure file not found: {p}")
            externals.append({"path": str(p), "sha256": sha256_file(p)})

        plan_ref = raw.get("plan", "default")
        try:
            if plan_ref == "default":
                plan = R.default_plan_dict()
            elif isinstance(plan_ref, dict):
                plan = plan_ref
            else:
                plan = json.loads(_resolve(base, plan_ref).read_text())
            R.load_plan(plan)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigInvalid(f"bad plan: {exc}") from exc

        stages = tuple(raw.get("stages", STAGES))
        if set(stages) - set(STAGES):
            raise ConfigInvalid(f"unknown stages: {sorted(set(stages) - set(STAGES))}")
        # a relative run_root is taken from the working directory, not the config's
        run_root = raw.get("run_root", "runs")
        return cls(
            roster=endpoints, probes=probes, wrappers=wrappers, primary_wrapper=primary,
            extraction_mode=mode, parallelism=int(raw.get("parallelism", 1)),
            retries=int(raw.get("retries", 3)), backoff_s=float(raw.get("backoff_s", 0.5)),
            timeout_s=float(raw.get("timeout_s", 120.0)), battery_pack=pack,
            battery_wrapper=(battery or {}).get("wrapper", "chat"), external_measures=externals,
            plan=plan, stages=stages, run_root=run_root, plot=bool(raw.get("plot", False)), raw=raw,
        )

    def manifest(self) -> dict:
        """Frozen run description; its hash keys the run directory."""
        seeds = sorted({s for opts in self.probes.get("kinds", {}).values()
                        for s in opts.get("seeds", [0])})
        return {
            "generator_version": GENERATOR_VERSION,
            "rng_algorithm": RNG_ALGORITHM,
            "roster_hash": canonical_hash([e.to_dict() for e in self.roster]),
            "plan_hash": R.load_plan(self.plan).hash,
            "pack_hash": canonical_hash(self.battery_pack) if self.battery_pack else None,
            "external_hashes": [e["sha256"] for e in self.external_measures],
            "probe_config": self.probes,
            "wrappers": list(self.wrappers),
            "primary_wrapper": self.primary_wrapper,
            "seeds": seeds,
            "extraction_mode": self.extraction_mode,
        }


def manifest_hash(manifest: dict) -> str:
    return canonical_hash(manifest)


def run_dir_for(config: PipelineConfig, mhash: str) -> Path:
    root = os.environ.get("RUN_DIR") or config.run_root
    return Path(root) / mhash[:16]


# --------------------------------------------------------------------------
# stages


def build_probes(probe_config: dict):
    """Probe list from the ``probes`` section of a config."""
    out = []
    sweep = bool(probe_config.get("sweep", False))
    for kind_name, opts in probe_config.get("kinds", {}).items():
        kind = ProbeKind(kind_name)
        trials, seeds, surfaces = BATTERY_DEFAULTS[kind]
        out += generate_battery(
            kind,
            depths=tuple(opts.get("depths", DEFAULT_DEPTHS[kind])),
            trials_per_depth=opts.get("trials", trials),
            surfaces=tuple(SurfaceForm(s) for s in opts.get("surfaces", [s.value for s in surfaces])),
            templates=tuple(ParaphraseTemplate(t) for t in opts.get("templates", ["original"])),
            seeds=tuple(opts.get("seeds", seeds)),
            rotate_surfaces=opts.get("rotate_surfaces", True),
            sweep=sweep,
        )
    multi = probe_config.get("multi_entity")
    if multi:
        for seed in multi.get("seeds", [0]):
            for depth in multi.get("depths", [5]):
                for i in range(multi.get("trials", 5)):
                    spec = ProbeSpec(ProbeKind.WMF_AM, depth, SurfaceForm.INVENTORY,
                                     ParaphraseTemplate.ORIGINAL, seed, i, True, multi.get("entities", 3))
                    out.append(generate_multi_entity(spec, multi.get("entities", 3), sweep=sweep))
    return out


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


@dataclass
class StageOutcome:
    stage: str
    skipped: bool
    outputs: list
    calls: int = 0


@dataclass
class PipelineResult:
    run_dir: Path
    manifest_hash: str
    stages: list
    exit_code: int = 0

    @property
    def calls(self) -> int:
        return sum(s.calls for s in self.stages)

    def artifact(self, name: str) -> Path:
        return self.run_dir / name


class Pipeline:
    def __init__(self, config: PipelineConfig, transport_factory: Callable[[ModelEndpoint], object] | None = None):
        self.config = config
        self.manifest = config.manifest()
        self.hash = manifest_hash(self.manifest)
        self.dir = run_dir_for(config, self.hash)
        self.transport_factory = transport_factory or (lambda e: make_transport(e, config.timeout_s))

    # -- stamps --

    def _stamp_path(self, stage: str) -> Path:
        return self.dir / "stamps" / f"{stage}.json"

    def _inputs_digest(self, inputs: list[Path]) -> dict:
        return {p.name: sha256_file(p) for p in inputs}

    def _fresh(self, stage: str, inputs: list[Path]) -> bool:
        sp = self._stamp_path(stage)
        if not sp.exists():
            return False
        stamp = json.loads(sp.read_text())
        if stamp.get("manifest") != self.hash:
            return False
        if any(not (self.dir / o).exists() for o in stamp.get("outputs", [])):
            return False
        try:
            return stamp.get("inputs") == self._inputs_digest(inputs)
        except OSError:
            return False

    def _stamp(self, stage: str, inputs: list[Path], outputs: list[str]) -> None:
        sp = self._stamp_path(stage)
        sp.parent.mkdir(parents=True, exist_ok=True)
        sp.write_text(json.dumps({"manifest": self.hash, "inputs": self._inputs_digest(inputs),
                                  "outputs": outputs}, indent=2, sort_keys=True) + "\n")

    # -- paths --

    @property
    def probes_path(self) -> Path:
        return self.dir / "probes.jsonl"

    def trial_paths(self) -> list[Path]:
        return [self.dir / "trials" / f"{_safe(e.name)}__{w}.jsonl"
                for e in self.config.roster for w in self.config.wrappers]

    # -- stages --

    def generate(self, force=False) -> StageOutcome:
        if not force and self._fresh("generate", []):
            return StageOutcome("generate", True, [self.probes_path.name])
        probes = build_probes(self.config.probes)
        write_probes(self.probes_path, probes, self.config.probes, self.hash)
        self._stamp("generate", [], [self.probes_path.name])
        return StageOutcome("generate", False, [self.probes_path.name])

    def _probes_for(self, probes, wrapper: str):
        if wrapper == self.config.primary_wrapper:
            return probes
        # secondary wrappers re-run only the main probe in its original wording
        return [p for p in probes if p.spec.kind is ProbeKind.WMF_AM and not p.spec.multi_entity
                and p.spec.template is ParaphraseTemplate.ORIGINAL]

    def run(self, force=False) -> StageOutcome:
        outputs = [str(p.relative_to(self.dir)) for p in self.trial_paths()]
        if not force and self._fresh("run", [self.probes_path]):
            return StageOutcome("run", True, outputs)
        _, probes = read_probes(self.probes_path)
        (self.dir / "trials").mkdir(parents=True, exist_ok=True)
        calls = 0
        paths = iter(self.trial_paths())
        for endpoint in self.config.roster:
            transport = self.transport_factory(endpoint)
            try:
                for wrapper in self.config.wrappers:
                    path = next(paths)
                    subset = self._probes_for(probes, wrapper)
                    trials = run_trials(subset, endpoint, wrapper, self.config.parallelism,
                                        retries=self.config.retries, backoff_s=self.config.backoff_s,
                                        timeout_s=self.config.timeout_s, mode=self.config.extraction_mode,
                                        transport=transport)
                    calls += sum(t.attempts for t in trials)
                    write_trials(path, trials, header={"manifest": self.hash, "endpoint": endpoint.name,
                                                       "wrapper": wrapper})
            finally:
                transport.close()
        self._stamp("run", [self.probes_path], outputs)
        return StageOutcome("run", False, outputs, calls)

    def battery(self, force=False) -> StageOutcome:
        outputs = ["transcripts.jsonl", "battery_scores.csv"]
        if self.config.battery_pack is None:
            return StageOutcome("battery", True, [])
        if not force and self._fresh("battery", []):
            return StageOutcome("battery", True, outputs)
        tasks = B.load_pack(self.config.battery_pack)
        results, calls = [], 0
        for endpoint in self.config.roster:
            transport = self.transport_factory(endpoint)
            try:
                res = B.run_battery(tasks, endpoint, self.config.battery_wrapper, transport=transport,
                                    retries=self.config.retries, backoff_s=self.config.backoff_s)
            finally:
                transport.close()
            calls += sum(e.get("attempts", 0) for t in res.tasks for e in t.transcript)
            results.append(res)
        B.write_transcripts(self.dir / "transcripts.jsonl", results, header={"manifest": self.hash})
        scores = [s for r in results for s in r.measures(tasks)]
        ScoreMatrix.from_scores(scores, self.config.roster).to_csv(self.dir / "battery_scores.csv", self.hash)
        self._stamp("battery", [], outputs)
        return StageOutcome("battery", False, outputs, calls)

    def score(self, force=False) -> StageOutcome:
        outputs = ["scores.csv", "scores.json"]
        inputs = [self.probes_path] + self.trial_paths()
        if (self.dir / "battery_scores.csv").exists():
            inputs.append(self.dir / "battery_scores.csv")
        inputs += [Path(e["path"]) for e in self.config.external_measures]
        if not force and self._fresh("score", inputs):
            return StageOutcome("score", True, outputs)
        try:
            _, probes = read_probes(self.probes_path)
        except (OSError, ValueError, KeyError) as exc:
            raise StageFailed("score", f"cannot read probes: {exc}") from exc
        trials = []
        for path in self.trial_paths():
            try:
                trials += read_trials(path)[1]
            except FileNotFoundError as exc:
                raise StageFailed("score", f"missing trial file {path}") from exc
            except ValueError as exc:
                raise StageFailed("score", str(exc)) from exc
        try:
            scores = score_trials(trials, probes, self.config.extraction_mode, self.config.primary_wrapper)
        except UnknownProbeRef as exc:
            raise StageFailed("score", str(exc)) from exc
        matrix = ScoreMatrix.from_scores(scores, self.config.roster)
        if (self.dir / "battery_scores.csv").exists():
            matrix.merge_csv(self.dir / "battery_scores.csv")
        for ext in self.config.external_measures:
            matrix.merge_csv(ext["path"])
        matrix.write(self.dir / "scores.csv", self.hash)
        self._stamp("score", inputs, outputs)
        return StageOutcome("score", False, outputs)

    def analyze(self, force=False) -> StageOutcome:
        outputs = ["report.json", "report.txt"] + (["scatter.svg"] if self.config.plot else [])
        inputs = [self.dir / "scores.csv"]
        if not force and self._fresh("analyze", inputs):
            return StageOutcome("analyze", True, outputs)
        matrix = ScoreMatrix.read_csv(self.dir / "scores.csv")
        try:
            report = R.run_register(matrix, R.load_plan(self.config.plan))
        except Exception as exc:
            raise StageFailed("analyze", f"{type(exc).__name__}: {exc}") from exc
        report["manifest"] = self.hash
        (self.dir / "report.json").write_text(R.report_json(report))
        (self.dir / "report.txt").write_text(f"# manifest={self.hash}\n" + R.render_text(report))
        if self.config.plot:
            R.plot_scatter(matrix, "wmf_am", "abs", self.dir / "scatter.svg")
        self._stamp("analyze", inputs, outputs)
        return StageOutcome("analyze", False, outputs)

    def execute(self, force: bool = False) -> PipelineResult:
        self.dir.mkdir(parents=True, exist_ok=True)
        mpath = self.dir / "manifest.json"
        if mpath.exists():
            stored = json.loads(mpath.read_text())
        else:
            stored = {"manifest": self.manifest, "hash": self.hash,
                      "created": datetime.now(timezone.utc).isoformat()}
        stored["last_run"] = datetime.now(timezone.utc).isoformat()
        mpath.write_text(json.dumps(stored, indent=2, sort_keys=True) + "\n")
        outcomes = []
        for stage in STAGES:
            if stage not in self.config.stages:
                continue
            outcome = getattr(self, stage)(force)
            log.info("stage %s: %s", stage, "skipped" if outcome.skipped else "done")
            outcomes.append(outcome)
        return PipelineResult(self.dir, self.hash, outcomes)


def pipeline(config_path, *, force: bool = False, transport_factory=None) -> PipelineResult:
    """Run the configured stages; raises ConfigInvalid or StageFailed."""
    config = PipelineConfig.load(config_path)
    return Pipeline(config, transport_factory).execute(force)
