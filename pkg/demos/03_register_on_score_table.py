"""Analysis register on a 20-model score table read from CSV.

The table (tests/fixtures/published_scores.csv) has WMF-AM, agent battery
score, a completion baseline (oc), a yoked-control score and parameter
counts. The register reports tau-b rows, both partial-tau methods,
bootstrap intervals, delta-tau tests and family sensitivity.

Run: python3 demos/03_register_on_score_table.py
"""
import csv
from pathlib import Path

from wmfam import rankstats as rs
from wmfam.register import render_text, run_register
from wmfam.scoring import ScoreMatrix

table = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "published_scores.csv"
rows = list(csv.DictReader(table.open()))
m = ScoreMatrix([r["endpoint"] for r in rows], [r["family"] for r in rows], [float(r["param_count"]) for r in rows])
for col in ("oc", "wmf_am", "abs", "yoked"):
    m.add_measure(col, {r["endpoint"]: float(r[col]) for r in rows if r[col]})

plan = {
    "name": "score-table",
    "resamples": 10_000,
    "entries": [
        {"name": "WMF-AM -> Agent overall", "predictor": "wmf_am", "criterion": "abs",
         "type": "confirmatory", "bootstrap": ["none", "family"]},
        {"name": "partial | OC (residual)", "predictor": "wmf_am", "criterion": "abs", "controls": ["oc"],
         "method": "partial_residual"},
        {"name": "partial | OC (formula)", "predictor": "wmf_am", "criterion": "abs", "controls": ["oc"],
         "method": "partial_formula"},
        {"name": "partial | log params (formula)", "predictor": "wmf_am", "criterion": "abs",
         "controls": ["log_params"], "method": "partial_formula"},
        {"name": "partial | OC + log params", "predictor": "wmf_am", "criterion": "abs",
         "controls": ["oc", "log_params"], "method": "partial_residual"},
        {"name": "OC -> Agent", "predictor": "oc", "criterion": "abs"},
        {"name": "log params -> Agent", "predictor": "log_params", "criterion": "abs"},
        {"name": "Yoked -> Agent", "predictor": "yoked", "criterion": "abs"},
    ],
    "delta_tests": [
        {"name": "WMF-AM vs OC", "predictor": "wmf_am", "comparator": "oc", "criterion": "abs"},
        {"name": "WMF-AM vs Yoked", "predictor": "wmf_am", "comparator": "yoked", "criterion": "abs"},
    ],
}
print(render_text(run_register(m, plan)))

lofo = rs.leave_one_family_out(m.column("wmf_am"), m.column("abs"), m.families)
print(f"leave-one-family-out tau: {lofo.tau_min:.3f} to {lofo.tau_max:.3f} (mean {lofo.tau_mean:.3f})")
fm = rs.family_median_tau(m.column("wmf_am"), m.column("abs"), m.families)
print(f"family-median tau = {fm.tau:.3f}, p = {fm.p_value:.3f}, {fm.n} families")
