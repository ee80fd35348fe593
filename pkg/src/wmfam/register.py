"""The analysis register: every planned correlation over a score matrix.

A plan lists confirmatory and exploratory rows. Confirmatory rows form the
family for the multiple-comparison correction. Plans are frozen once loaded,
and every number in the report carries its method, seed and a hash of the
inputs it was computed from.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Mapping

import numpy as np

from . import rankstats as rs
from .errors import MissingMeasure, TooFewClusters
from .scoring import ScoreMatrix

CONFIRMATORY = "confirmatory"
EXPLORATORY = "exploratory"

_METHODS = ("tau_b", "spearman", "pearson", "partial_residual", "partial_formula", "partial_spearman")


@dataclass(frozen=True)
class PlanEntry:
    name: str
    predictor: str
    criterion: str
    controls: tuple = ()
    type: str = EXPLORATORY
    method: str = "tau_b"
    subset: tuple | None = None
    bootstrap: tuple = ()
    optional: bool = False

    @property
    def measures(self) -> tuple:
        return (self.predictor, self.criterion) + self.controls


@dataclass(frozen=True)
class DeltaSpec:
    name: str
    predictor: str
    comparator: str
    criterion: str
    subset: tuple | None = None
    clustering: str = "none"
    optional: bool = False

    @property
    def measures(self) -> tuple:
        return (self.predictor, self.comparator, self.criterion)


@dataclass(frozen=True)
class RegisterPlan:
    name: str
    entries: tuple
    delta_tests: tuple = ()
    alpha: float = 0.05
    correction: str = "bonferroni"
    resamples: int = 10_000
    seed: int = 0
    k_sweep: tuple | None = None  # (criterion, measure prefix)
    robustness: tuple | None = None  # (predictor, criterion, wrappers)
    source: str = field(default="", compare=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RegisterPlan":
        entries = []
        for e in d["entries"]:
            e = dict(e)
            e["controls"] = tuple(e.get("controls", ()))
            e["bootstrap"] = tuple(e.get("bootstrap", ()))
            if e.get("subset") is not None:
                e["subset"] = tuple(e["subset"])
            if e.get("method", "tau_b") not in _METHODS:
                raise ValueError(f"unknown method {e['method']!r} in entry {e['name']!r}")
            if e.get("type", EXPLORATORY) not in (CONFIRMATORY, EXPLORATORY):
                raise ValueError(f"entry {e['name']!r}: type must be confirmatory or exploratory")
            entries.append(PlanEntry(**e))
        deltas = []
        for t in d.get("delta_tests", ()):
            t = dict(t)
            if t.get("subset") is not None:
                t["subset"] = tuple(t["subset"])
            deltas.append(DeltaSpec(**t))
        ks = d.get("k_sweep")
        rob = d.get("robustness")
        return cls(
            name=d.get("name", "register"),
            entries=tuple(entries),
            delta_tests=tuple(deltas),
            alpha=d.get("alpha", 0.05),
            correction=d.get("correction", "bonferroni"),
            resamples=d.get("resamples", 10_000),
            seed=d.get("seed", 0),
            k_sweep=(ks["criterion"], ks.get("prefix", "wmf_am_k")) if ks else None,
            robustness=(rob["predictor"], rob["criterion"], tuple(rob.get("wrappers", ("bare", "chat", "cot"))))
            if rob else None,
            source=json.dumps(d, sort_keys=True),
        )

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.source.encode()).hexdigest()


def default_plan_dict() -> dict:
    text = resources.files("wmfam.data").joinpath("default_plan.json").read_text()
    return json.loads(text)


def load_plan(source="default") -> RegisterPlan:
    """Load a plan from a path, a dict, or ``"default"`` (the shipped plan)."""
    if isinstance(source, RegisterPlan):
        return source
    if isinstance(source, dict):
        return RegisterPlan.from_dict(source)
    if source == "default":
        return RegisterPlan.from_dict(default_plan_dict())
    return RegisterPlan.from_dict(json.loads(Path(source).read_text()))


# --------------------------------------------------------------------------


def _rows(matrix: ScoreMatrix, subset) -> np.ndarray:
    if subset is None:
        return np.arange(len(matrix.endpoints))
    missing = [s for s in subset if s not in matrix.endpoints]
    if missing:
        raise MissingMeasure(f"subset names unknown endpoints: {missing}")
    return np.array([matrix.index(s) for s in subset])


def _inputs(matrix: ScoreMatrix, measures, subset):
    rows = _rows(matrix, subset)
    cols = [matrix.column(m)[rows] for m in measures]
    keep = ~np.any([np.isnan(c) for c in cols], axis=0)
    names = [matrix.endpoints[i] for i in rows[keep]]
    fams = [matrix.families[i] for i in rows[keep]]
    return [c[keep] for c in cols], names, fams


def inputs_hash(names, measures, cols) -> str:
    payload = {"endpoints": list(names),
               "columns": {m: [repr(float(v)) for v in c] for m, c in zip(measures, cols)}}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _correlate(method: str, cols) -> tuple[rs.CorrelationResult, rs.CorrelationResult | None]:
    x, y, ctrl = cols[0], cols[1], cols[2:]
    if method == "tau_b":
        return rs.kendall_tau_b(x, y), None
    if method == "spearman":
        return rs.spearman_rho(x, y), None
    if method == "pearson":
        return rs.pearson_r(x, y), None
    if method == "partial_spearman":
        return rs.partial_spearman(x, y, ctrl[0]), None
    primary = rs.partial_tau(x, y, ctrl, method=method.split("_", 1)[1])
    alternate = None
    other = "formula" if method == "partial_residual" else "residual"
    if other == "residual" or len(ctrl) == 1:
        try:
            alternate = rs.partial_tau(x, y, ctrl, method=other)
        except rs.FormulaOutOfRange:
            alternate = None
    return primary, alternate


def _require(matrix: ScoreMatrix, measures) -> list[str]:
    return [m for m in measures if not matrix.has(m)]


def run_register(matrix: ScoreMatrix, plan="default") -> dict:
    """Compute every plan row; returns the report as a plain dict.

    Non-optional rows whose measures are absent raise
    :class:`MissingMeasure`; optional ones are listed under ``skipped``.
    """
    plan = load_plan(plan)
    missing = sorted({m for e in plan.entries + plan.delta_tests if not e.optional
                      for m in _require(matrix, e.measures)})
    if missing:
        raise MissingMeasure(f"plan {plan.name!r} references absent measures: {missing}")

    entries, skipped = [], []
    for i, e in enumerate(plan.entries):
        absent = _require(matrix, e.measures)
        if absent:
            skipped.append({"name": e.name, "missing": absent})
            continue
        cols, names, fams = _inputs(matrix, e.measures, e.subset)
        result, alternate = _correlate(e.method, cols)
        boots = {}
        for clustering in e.bootstrap:
            try:
                b = rs.bootstrap_ci(cols[0], cols[1], plan.resamples, clustering,
                                    seed=plan.seed + i, families=fams)
                boots[clustering] = b.to_dict()
            except TooFewClusters as exc:
                boots[clustering] = {"error": str(exc)}
        rec = {
            "name": e.name,
            "type": e.type,
            "predictor": e.predictor,
            "criterion": e.criterion,
            "controls": list(e.controls),
            "subset": list(e.subset) if e.subset else None,
            "method": result.method,
            "result": result.to_dict(),
            "alternate": alternate.to_dict() if alternate else None,
            "bootstrap": boots,
            "provenance": {"inputs_hash": inputs_hash(names, e.measures, cols),
                           "endpoints": names, "seed": plan.seed + i if e.bootstrap else None},
        }
        if "none" in boots and "ci_lo" in boots["none"]:
            rec["result"]["ci"] = [boots["none"]["ci_lo"], boots["none"]["ci_hi"]]
        entries.append(rec)

    confirm = {r["name"]: r["result"]["p"] for r in entries if r["type"] == CONFIRMATORY}
    decisions = rs.multiple_correction(confirm, plan.correction, plan.alpha) if confirm else {}
    for r in entries:
        if r["name"] in decisions:
            r["correction"] = decisions[r["name"]].__dict__

    deltas = []
    for j, t in enumerate(plan.delta_tests):
        absent = _require(matrix, t.measures)
        if absent:
            skipped.append({"name": t.name, "missing": absent})
            continue
        cols, names, fams = _inputs(matrix, t.measures, t.subset)
        seed = plan.seed + 1000 + j
        res = rs.delta_tau_test(cols[0], cols[1], cols[2], plan.resamples, seed,
                                clustering=t.clustering, families=fams)
        deltas.append({"name": t.name, "predictor": t.predictor, "comparator": t.comparator,
                       "criterion": t.criterion, "result": res.to_dict(),
                       "provenance": {"inputs_hash": inputs_hash(names, t.measures, cols),
                                      "endpoints": names, "seed": seed}})

    report = {
        "plan": plan.name,
        "plan_hash": plan.hash,
        "matrix_hash": matrix_hash(matrix),
        "alpha": plan.alpha,
        "correction": plan.correction,
        "confirmatory_m": len(confirm),
        "per_test_alpha": plan.alpha / len(confirm) if confirm and plan.correction == "bonferroni" else None,
        "entries": entries,
        "delta_tests": deltas,
        "skipped": skipped,
    }

    if plan.k_sweep:
        criterion, prefix = plan.k_sweep
        per_k = per_k_columns(matrix, prefix)
        if matrix.has(criterion) and len(per_k) >= 2:
            rows = k_sweep(per_k, matrix.column(criterion))
            report["k_sweep"] = [r.to_dict() for r in rows]
        else:
            skipped.append({"name": "k_sweep", "missing": [criterion] if not matrix.has(criterion) else [prefix + "*"]})

    if plan.robustness:
        predictor, criterion, wrappers = plan.robustness
        try:
            report["robustness"] = robustness_panel(matrix, predictor, criterion, wrappers)
        except MissingMeasure as exc:
            skipped.append({"name": "robustness", "missing": [str(exc)]})
    return report


def matrix_hash(matrix: ScoreMatrix) -> str:
    payload = {
        "endpoints": matrix.endpoints, "families": matrix.families,
        "params": [None if p is None else repr(float(p)) for p in matrix.param_counts],
        "measures": {k: [None if v is None else repr(float(v)) for v in vals]
                     for k, vals in sorted(matrix.measures.items())},
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def report_json(report: dict) -> str:
    """Canonical serialization: sorted keys, fixed indentation."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------------------
# K-sweep


@dataclass(frozen=True)
class KSweepRow:
    k: int
    n: int
    mean_acc: float | None
    acc_min: float | None
    acc_max: float | None
    tau: float | None
    p_value: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def per_k_columns(matrix: ScoreMatrix, prefix: str = "wmf_am_k") -> dict[int, np.ndarray]:
    out = {}
    for name in matrix.measures:
        tail = name[len(prefix):]
        if name.startswith(prefix) and tail.isdigit():
            out[int(tail)] = matrix.column(name)
    return dict(sorted(out.items()))


def k_sweep(per_k_scores: Mapping[int, np.ndarray], criterion) -> list[KSweepRow]:
    """Discriminability of the probe at each depth: accuracy spread and tau vs. the criterion."""
    if len(per_k_scores) < 2:
        raise ValueError("a K-sweep needs at least two depth levels")
    crit = np.asarray(criterion, dtype=float)
    rows = []
    for k in sorted(per_k_scores):
        acc = np.asarray(per_k_scores[k], dtype=float)
        keep = ~(np.isnan(acc) | np.isnan(crit))
        a = acc[keep]
        if len(a) == 0:
            rows.append(KSweepRow(k, 0, None, None, None, None, None))
            continue
        r = rs.kendall_tau_b(a, crit[keep])
        rows.append(KSweepRow(k, len(a), float(a.mean()), float(a.min()), float(a.max()), r.tau, r.p_value))
    return rows


def _num(v, digits=3) -> str:
    return "undef" if v is None else f"{v:.{digits}f}"


def _pval(p) -> str:
    if p is None:
        return "undef"
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def render_k_sweep(rows) -> str:
    lines = [f"{'K':>5}  {'N':>3}  {'Mean acc':>8}  {'Range':>15}  {'tau':>7}  {'p':>7}"]
    for r in rows:
        r = r if isinstance(r, dict) else r.to_dict()
        rng = "---" if r["acc_min"] is None else f"[{r['acc_min']:.3f}, {r['acc_max']:.3f}]"
        lines.append(f"{r['k']:>5}  {r['n']:>3}  {_num(r['mean_acc']):>8}  {rng:>15}  "
                     f"{_num(r['tau']):>7}  {_pval(r['p_value']):>7}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Robustness


def robustness_panel(matrix: ScoreMatrix, predictor: str = "wmf_am", criterion: str = "abs",
                     wrappers=("bare", "chat", "cot"), ceiling: float = 0.93) -> dict:
    """Cross-wrapper stability, seed variability and family sensitivity."""
    present = [w for w in wrappers if matrix.has(f"{predictor}_wrapper_{w}")]
    if len(present) < 2:
        raise MissingMeasure(f"need at least two {predictor}_wrapper_* measures, found {present}")
    if not matrix.has(predictor):
        raise MissingMeasure(predictor)
    out: dict = {"cross_template": [], "notes": []}
    for a, b in combinations(present, 2):
        ca, cb = matrix.column(f"{predictor}_wrapper_{a}"), matrix.column(f"{predictor}_wrapper_{b}")
        r = rs.kendall_tau_b(ca, cb)
        flags = list(r.flags)
        for w, c in ((a, ca), (b, cb)):
            vals = c[~np.isnan(c)]
            if len(vals) and vals.min() >= ceiling:
                flags.append(f"ceiling:{w}")
        out["cross_template"].append({"pair": [a, b], "tau": r.tau, "p": r.p_value, "n": r.n, "flags": flags})

    seed_cols = sorted(n for n in matrix.measures if n.startswith(f"{predictor}_seed_"))
    if len(seed_cols) >= 2:
        stack = np.column_stack([matrix.column(n) for n in seed_cols])
        sds = {}
        for i, e in enumerate(matrix.endpoints):
            row = stack[i][~np.isnan(stack[i])]
            sds[e] = float(np.std(row, ddof=1)) if len(row) >= 2 else None
        vals = [v for v in sds.values() if v is not None]
        out["seed_sd"] = {"per_model": sds, "mean": float(np.mean(vals)) if vals else None,
                          "min": min(vals) if vals else None, "max": max(vals) if vals else None,
                          "n_seeds": len(seed_cols)}
    else:
        out["notes"].append("single seed: per-model seed SDs absent")

    if matrix.has(criterion):
        x, y = matrix.column(predictor), matrix.column(criterion)
        try:
            out["lofo"] = rs.leave_one_family_out(x, y, matrix.families).to_dict()
        except TooFewClusters as exc:
            out["notes"].append(f"lofo skipped: {exc}")
        try:
            out["family_median"] = rs.family_median_tau(x, y, matrix.families).to_dict()
        except TooFewClusters as exc:
            out["notes"].append(f"family median skipped: {exc}")
    else:
        out["notes"].append(f"criterion {criterion!r} absent: lofo and family median skipped")
    return out


# --------------------------------------------------------------------------
# Rendering


def render_text(report: dict) -> str:
    """Plain-text register table plus the secondary panels."""
    head = f"{'Relation':<48} {'Subset':<10} {'tau':>7} {'N':>3} {'p':>7}  {'95% CI':<17} Type"
    lines = [f"Analysis register: {report['plan']} (plan {report['plan_hash'][:12]}, "
             f"matrix {report['matrix_hash']})", head, "-" * len(head)]
    for r in report["entries"]:
        res = r["result"]
        ci = "---" if not res.get("ci") or res["ci"][0] is None else f"[{res['ci'][0]:.3f}, {res['ci'][1]:.3f}]"
        subset = "All" if not r["subset"] else f"{len(r['subset'])} models"
        kind = "C" if r["type"] == CONFIRMATORY else "E"
        if "correction" in r:
            kind += " (reject)" if r["correction"]["reject"] else " (retain)"
        lines.append(f"{r['name'][:48]:<48} {subset:<10} {_num(res['tau']):>7} {res['n']:>3} "
                     f"{_pval(res['p']):>7}  {ci:<17} {kind}")
        if r.get("alternate"):
            alt = r["alternate"]
            lines.append(f"{'  alt: ' + alt['method']:<48} {'':<10} {_num(alt['tau']):>7} {alt['n']:>3} "
                         f"{_pval(alt['p']):>7}")
    if report.get("per_test_alpha") is not None:
        lines.append(f"Confirmatory family m={report['confirmatory_m']}, "
                     f"per-test alpha = {report['per_test_alpha']:.4f} ({report['correction']})")
    if report["delta_tests"]:
        lines += ["", "Delta-tau tests (paired bootstrap)"]
        for d in report["delta_tests"]:
            res = d["result"]
            ci = "---" if res["ci_lo"] is None else f"[{res['ci_lo']:.3f}, {res['ci_hi']:.3f}]"
            lines.append(f"  {d['name']:<46} dtau={_num(res['delta_tau'])} p={_pval(res['p_value'])} CI {ci}")
    if "k_sweep" in report:
        lines += ["", "K-sweep", render_k_sweep(report["k_sweep"])]
    if "robustness" in report:
        rob = report["robustness"]
        lines += ["", "Robustness"]
        for c in rob["cross_template"]:
            flags = f" [{', '.join(c['flags'])}]" if c["flags"] else ""
            lines.append(f"  tau({c['pair'][0]},{c['pair'][1]}) = {_num(c['tau'])} p={_pval(c['p'])}{flags}")
        if "seed_sd" in rob:
            s = rob["seed_sd"]
            lines.append(f"  seed SD mean {_num(s['mean'])} (range {_num(s['min'])}-{_num(s['max'])}, "
                         f"{s['n_seeds']} seeds)")
        if "lofo" in rob:
            lf = rob["lofo"]
            lines.append(f"  LOFO tau range {_num(lf['tau_min'])}-{_num(lf['tau_max'])} (mean {_num(lf['tau_mean'])})")
            for row in lf["rows"]:
                if row["influential"]:
                    lines.append(f"    influential family: {row['family']} (tau {_num(row['tau'])})")
        if "family_median" in rob:
            fm = rob["family_median"]
            lines.append(f"  family-median tau = {_num(fm['tau'])} p={_pval(fm['p'])} ({fm['n']} families)")
        for note in rob["notes"]:
            lines.append(f"  note: {note}")
    if report["skipped"]:
        lines += ["", "Skipped (measures absent): " + ", ".join(s["name"] for s in report["skipped"])]
    return "\n".join(lines) + "\n"


def plot_scatter(matrix: ScoreMatrix, predictor: str, criterion: str, path) -> Path:
    """Predictor vs. criterion scatter saved as SVG (needs matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "wmfam"
    x, y = matrix.column(predictor), matrix.column(criterion)
    keep = ~(np.isnan(x) | np.isnan(y))
    fig, ax = plt.subplots(figsize=(5, 4))
    fams = np.asarray(matrix.families)[keep]
    for fam in dict.fromkeys(fams):
        sel = fams == fam
        ax.scatter(x[keep][sel], y[keep][sel], label=fam, s=28)
    r = rs.kendall_tau_b(x, y)
    ax.set_xlabel(predictor)
    ax.set_ylabel(criterion)
    ax.set_title(f"tau-b = {_num(r.tau)} (n={r.n})")
    ax.legend(fontsize=6, frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
