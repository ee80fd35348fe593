"""Generate a few probes, answer them with mock models and score the replies.

Run: python3 demos/01_probes_and_scoring.py
"""
from wmfam.client import ModelEndpoint, run_trials
from wmfam.mocks import MockBehavior, MockKind
from wmfam.probes import ParaphraseTemplate, ProbeKind, ProbeSpec, SurfaceForm, generate_probe
from wmfam.scoring import ExtractionMode, score_trials

# One probe spec, five wordings: the operations are shared, only the text changes.
for template in ParaphraseTemplate:
    p = generate_probe(ProbeSpec(ProbeKind.WMF_AM, 3, SurfaceForm.POINTS, template, seed=7, index=0))
    print(f"[{template.value:>8}] {p.prompt}")
print(f"ground truth: {p.ground_truth}\n")

yoked = generate_probe(ProbeSpec(ProbeKind.YOKED, 2, SurfaceForm.ACCOUNTS, ParaphraseTemplate.ORIGINAL, 7, 0))
print("yoked:", yoked.prompt)
print("states:", yoked.running_states(), "-> answer", yoked.ground_truth, "\n")

# A perfect tracker with capacity 5 against probes of depth 3, 5 and 7.
probes = [generate_probe(ProbeSpec(ProbeKind.WMF_AM, k, SurfaceForm.POINTS, ParaphraseTemplate.ORIGINAL, 0, i))
          for k in (3, 5, 7) for i in range(4)]
tracker = ModelEndpoint("tracker", "demo", transport="mock", mock=MockBehavior(MockKind.PERFECT_TRACKER, 5))
verbose = ModelEndpoint("verbose", "demo", transport="mock", mock=MockBehavior(MockKind.VERBOSE_EMBEDDER, 9))

for ep in (tracker, verbose):
    trials = run_trials(probes, ep)
    print(f"{ep.name}: first reply {trials[0].raw_response!r}")
    for mode in ExtractionMode:
        scores = {s.measure: s.value for s in score_trials(trials, probes, mode)}
        per_k = ", ".join(f"K={k}: {scores[f'wmf_am_k{k}']:.2f}" for k in (3, 5, 7))
        print(f"  {mode.value:<20} composite {scores['wmf_am']:.3f}  ({per_k})")
