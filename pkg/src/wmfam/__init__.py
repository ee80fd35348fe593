"""Working-memory state-tracking probes, endpoint runs and rank statistics."""
from .probes import (GENERATOR_VERSION, ParaphraseTemplate, ProbeInstance, ProbeKind, ProbeSpec, SurfaceForm,
                     generate_battery, generate_multi_entity, generate_probe)
from .rankstats import (bootstrap_ci, delta_tau_test, family_median_tau, kendall_tau_b, leave_one_family_out,
                        multiple_correction, partial_tau)
from .scoring import ExtractionMode, ScoreMatrix, extract_answer, score_trials

__version__ = "0.1.0"

__all__ = [
    "GENERATOR_VERSION", "ParaphraseTemplate", "ProbeInstance", "ProbeKind", "ProbeSpec", "SurfaceForm",
    "generate_battery", "generate_multi_entity", "generate_probe",
    "bootstrap_ci", "delta_tau_test", "family_median_tau", "kendall_tau_b", "leave_one_family_out",
    "multiple_correction", "partial_tau",
    "ExtractionMode", "ScoreMatrix", "extract_answer", "score_trials",
]
