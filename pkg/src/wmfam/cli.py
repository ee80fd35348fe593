"""Command-line entry point: ``wmfam <subcommand>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import battery as B
from . import register as R
from .client import PromptWrapper, load_roster, run_trials
from .errors import WmfamError
from .mocks import MOCK_DESCRIPTIONS
from .pipeline import bundled_path, canonical_hash, pipeline
from .probes import (BATTERY_DEFAULTS, DEFAULT_DEPTHS, ParaphraseTemplate, ProbeKind, ProbeSpec, SurfaceForm,
                     generate_battery, generate_multi_entity, read_probes, write_probes)
from .records import read_trials, write_trials
from .scoring import ExtractionMode, ScoreMatrix, score_trials


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _strs(text: str) -> list[str]:
    return [v for v in text.split(",") if v]


def _pick_endpoint(roster_path, name):
    roster = load_roster(roster_path)
    if name is None:
        return roster
    chosen = [e for e in roster if e.name == name]
    if not chosen:
        raise SystemExit(f"endpoint {name!r} not in roster")
    return chosen


def cmd_generate(a) -> int:
    kind = ProbeKind(a.kind)
    trials, seeds, surfaces = BATTERY_DEFAULTS[kind]
    params = {
        "kind": kind.value,
        "depths": _ints(a.depths) if a.depths else list(DEFAULT_DEPTHS[kind]),
        "trials": a.trials or trials,
        "surfaces": _strs(a.surfaces) if a.surfaces else [s.value for s in surfaces],
        "templates": _strs(a.templates),
        "seeds": _ints(a.seeds) if a.seeds else list(seeds),
        "sweep": a.sweep,
        "entities": a.entities,
    }
    if a.entities:
        probes = [generate_multi_entity(
            ProbeSpec(kind, d, SurfaceForm.INVENTORY, ParaphraseTemplate(t), s, i), a.entities, sweep=a.sweep)
            for s in params["seeds"] for d in params["depths"] for t in params["templates"]
            for i in range(params["trials"])]
    else:
        probes = generate_battery(kind, params["depths"], params["trials"],
                                  [SurfaceForm(s) for s in params["surfaces"]],
                                  [ParaphraseTemplate(t) for t in params["templates"]],
                                  params["seeds"], rotate_surfaces=not a.all_surfaces, sweep=a.sweep)
    write_probes(a.out, probes, params, canonical_hash(params))
    print(f"wrote {len(probes)} probes to {a.out}")
    return 0


def cmd_run(a) -> int:
    header, probes = read_probes(a.probes)
    for endpoint in _pick_endpoint(a.roster, a.endpoint):
        out = Path(a.out)
        if a.endpoint is None:
            out = out.with_name(f"{out.stem}.{endpoint.name.replace(':', '_')}{out.suffix}")
        trials = run_trials(probes, endpoint, a.wrapper, a.parallelism, retries=a.retries,
                            timeout_s=a.timeout, fail_fast=a.fail_fast, mode=a.mode)
        write_trials(out, trials, header={"manifest": header.get("manifest"), "endpoint": endpoint.name,
                                          "wrapper": a.wrapper})
        n_err = sum(t.error is not None for t in trials)
        acc = sum(t.correct for t in trials) / max(len(trials), 1)
        print(f"{endpoint.name}: {len(trials)} trials, accuracy {acc:.3f}, {n_err} errors -> {out}")
    return 0


def cmd_score(a) -> int:
    header, probes = read_probes(a.probes)
    trials = [t for path in a.trials for t in read_trials(path)[1]]
    scores = score_trials(trials, probes, a.mode, a.primary_wrapper)
    matrix = ScoreMatrix.from_scores(scores, load_roster(a.roster))
    for ext in a.external or []:
        matrix.merge_csv(ext)
    matrix.write(a.out, header.get("manifest"))
    print(f"wrote {len(matrix.measures)} measures x {len(matrix.endpoints)} endpoints to {a.out}")
    return 0


def cmd_analyze(a) -> int:
    matrix = ScoreMatrix.read_csv(a.scores)
    report = R.run_register(matrix, a.plan)
    text = R.render_text(report)
    if a.json:
        Path(a.json).write_text(R.report_json(report))
    if a.text:
        Path(a.text).write_text(text)
    if a.svg:
        R.plot_scatter(matrix, a.predictor, a.criterion, a.svg)
    sys.stdout.write(text)
    return 0


def cmd_battery_run(a) -> int:
    tasks = B.load_pack(a.pack)
    results = []
    for endpoint in _pick_endpoint(a.roster, a.endpoint):
        res = B.run_battery(tasks, endpoint, a.wrapper, retries=a.retries, timeout_s=a.timeout)
        results.append(res)
        print(f"{endpoint.name}: ABS {res.abs:.3f}" + (f" ({len(res.errors)} task errors)" if res.errors else ""))
    if a.transcripts:
        B.write_transcripts(a.transcripts, results)
    if a.matrix:
        path = Path(a.matrix)
        roster = load_roster(a.roster)
        matrix = ScoreMatrix.read_csv(path) if path.exists() else ScoreMatrix.from_scores([], roster)
        for res in results:
            for s in res.measures(tasks):
                matrix.set(s.measure, s.endpoint, s.value, s.n_trials)
        matrix.write(path)
    return 0


def cmd_mock_list(a) -> int:
    for kind, desc in MOCK_DESCRIPTIONS.items():
        print(f"{kind.value:<20} {desc}")
    roster = json.loads(bundled_path("mock_roster.json").read_text())["endpoints"]
    print("\nbundled mock roster:")
    for e in roster:
        cap = e["mock"].get("capacity")
        print(f"  {e['name']:<20} {e['mock']['kind']:<20} capacity={cap}")
    return 0


def cmd_pipeline(a) -> int:
    config = bundled_path("mock_pipeline.json") if a.config == "mock" else a.config
    result = pipeline(config, force=a.force)
    for s in result.stages:
        state = "skipped" if s.skipped else "done"
        shown = ", ".join(s.outputs) if len(s.outputs) <= 3 else f"{len(s.outputs)} files"
        print(f"{s.stage:<9} {state:<8} {shown}")
    print(f"run directory: {result.run_dir}  (calls: {result.calls})")
    return result.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wmfam", description="Working-memory probes, endpoint runs and rank statistics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a probe battery")
    g.add_argument("--kind", default="wmf_am", choices=[k.value for k in ProbeKind])
    g.add_argument("--depths", help="comma-separated K values")
    g.add_argument("--trials", type=int, help="trials per depth")
    g.add_argument("--surfaces", help="comma-separated surface forms")
    g.add_argument("--all-surfaces", action="store_true", help="every surface for every trial instead of rotating")
    g.add_argument("--templates", default="original", help="comma-separated paraphrase templates")
    g.add_argument("--seeds", help="comma-separated seeds")
    g.add_argument("--sweep", action="store_true", help="allow depths outside the default set")
    g.add_argument("--entities", type=int, help="multi-entity warehouse mode with this many items")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    r = sub.add_parser("run", help="send probes to endpoints")
    r.add_argument("--probes", required=True)
    r.add_argument("--roster", required=True)
    r.add_argument("--endpoint", help="one roster entry; default all")
    r.add_argument("--wrapper", default="chat", choices=[w.value for w in PromptWrapper])
    r.add_argument("--parallelism", type=int, default=1)
    r.add_argument("--retries", type=int, default=3)
    r.add_argument("--timeout", type=float, default=120.0)
    r.add_argument("--fail-fast", action="store_true")
    r.add_argument("--mode", default="strict_last_number", choices=[m.value for m in ExtractionMode])
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("score", help="aggregate trials into a score matrix")
    s.add_argument("--probes", required=True)
    s.add_argument("--trials", nargs="+", required=True)
    s.add_argument("--roster", required=True)
    s.add_argument("--mode", default="strict_last_number", choices=[m.value for m in ExtractionMode])
    s.add_argument("--primary-wrapper", default="chat")
    s.add_argument("--external", nargs="*", help="CSV files of extra measures (e.g. oc)")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_score)

    an = sub.add_parser("analyze", help="run the analysis register on a score matrix")
    an.add_argument("--scores", required=True)
    an.add_argument("--plan", default="default")
    an.add_argument("--json")
    an.add_argument("--text")
    an.add_argument("--svg", help="write a predictor vs. criterion scatter")
    an.add_argument("--predictor", default="wmf_am")
    an.add_argument("--criterion", default="abs")
    an.set_defaults(fn=cmd_analyze)

    b = sub.add_parser("battery", help="agent battery")
    bsub = b.add_subparsers(dest="battery_command", required=True)
    br = bsub.add_parser("run", help="run a task pack")
    br.add_argument("--pack", default="bundled")
    br.add_argument("--roster", required=True)
    br.add_argument("--endpoint")
    br.add_argument("--wrapper", default="chat", choices=[w.value for w in PromptWrapper])
    br.add_argument("--retries", type=int, default=3)
    br.add_argument("--timeout", type=float, default=120.0)
    br.add_argument("--transcripts")
    br.add_argument("--matrix", help="score matrix CSV to add ABS columns to")
    br.set_defaults(fn=cmd_battery_run)

    m = sub.add_parser("mock", help="mock models")
    msub = m.add_subparsers(dest="mock_command", required=True)
    ml = msub.add_parser("list", help="list mock behaviors and the bundled mock roster")
    ml.set_defaults(fn=cmd_mock_list)

    pp = sub.add_parser("pipeline", help="run the configured stages end to end")
    pp.add_argument("config", help="config JSON, or 'mock' for the bundled planted-capacity run")
    pp.add_argument("--force", action="store_true", help="re-run stages even when up to date")
    pp.set_defaults(fn=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except WmfamError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
