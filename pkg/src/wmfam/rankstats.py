"""Rank correlation statistics for small model rosters.

Kendall's tau-b is the workhorse. For n <= 10 its p-value comes from the exact
permutation distribution; above that, from the tie-corrected normal
approximation. A correlation is *undefined* (``tau is None``) whenever either
input has fewer than two distinct values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import special, stats

from .errors import DegenerateControl, FormulaOutOfRange, LengthMismatch, TooFewClusters

EXACT_MAX_N = 10


@dataclass(frozen=True)
class ScoreVector:
    """Values aligned to an endpoint roster, with family tags."""

    values: np.ndarray
    labels: tuple = ()
    families: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        n = len(self.values)
        if self.labels and len(self.labels) != n:
            raise LengthMismatch("labels and values differ in length")
        if self.families:
            if len(self.families) != n:
                raise LengthMismatch("families and values differ in length")
            if not all(self.families):
                raise ValueError("every entry needs a family tag")

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class CorrelationResult:
    tau: float | None
    p_value: float | None
    n: int
    method: str
    ci_lo: float | None = None
    ci_hi: float | None = None
    flags: tuple = ()
    n_controls: int = 0

    @property
    def defined(self) -> bool:
        return self.tau is not None

    def to_dict(self) -> dict:
        d = {"tau": self.tau, "p": self.p_value, "n": self.n, "method": self.method,
             "ci": None if self.ci_lo is None else [self.ci_lo, self.ci_hi],
             "flags": list(self.flags)}
        if self.n_controls:
            d["n_controls"] = self.n_controls
        return d


def _as_float(v) -> np.ndarray:
    return np.asarray(v, dtype=float).ravel()


def _paired(*vectors) -> list[np.ndarray]:
    """Convert to float arrays of equal length and drop rows with any NaN."""
    arrs = [_as_float(v) for v in vectors]
    n = len(arrs[0])
    if any(len(a) != n for a in arrs):
        raise LengthMismatch(f"vector lengths differ: {[len(a) for a in arrs]}")
    keep = ~np.any([np.isnan(a) for a in arrs], axis=0)
    return [a[keep] for a in arrs]


def _families_of(v, families):
    if families is not None:
        return list(families)
    fam = getattr(v, "families", ())
    return list(fam) if fam else None


# --------------------------------------------------------------------------
# Kendall tau-b


def _pair_stats(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int]:
    """``(S, untied_x, untied_y)`` with S = concordant - discordant."""
    i, j = np.triu_indices(len(x), 1)
    dx = np.sign(x[j] - x[i])
    dy = np.sign(y[j] - y[i])
    return int(np.sum(dx * dy)), int(np.count_nonzero(dx)), int(np.count_nonzero(dy))


def _tie_groups(a: np.ndarray) -> np.ndarray:
    _, counts = np.unique(a, return_counts=True)
    return counts[counts > 1].astype(float)


def _normal_p(s: int, x: np.ndarray, y: np.ndarray, continuity: bool = False) -> float:
    n = float(len(x))
    t, u = _tie_groups(x), _tie_groups(y)
    var = (n * (n - 1) * (2 * n + 5)
           - np.sum(t * (t - 1) * (2 * t + 5))
           - np.sum(u * (u - 1) * (2 * u + 5))) / 18.0
    var += np.sum(t * (t - 1)) * np.sum(u * (u - 1)) / (2 * n * (n - 1))
    if n > 2:
        var += np.sum(t * (t - 1) * (t - 2)) * np.sum(u * (u - 1) * (u - 2)) / (9 * n * (n - 1) * (n - 2))
    if var <= 0:
        return 1.0
    # S moves in steps of 2, so the continuity correction is 1
    z = (max(abs(s) - 1, 0) if continuity else abs(s)) / math.sqrt(var)
    return float(special.erfc(z / math.sqrt(2)))


@lru_cache(maxsize=None)
def _inversion_counts(n: int) -> tuple[int, ...]:
    """Number of permutations of n items with k inversions, k = 0..n(n-1)/2."""
    counts = [1]
    for m in range(2, n + 1):
        new = [0] * (len(counts) + m - 1)
        for k, c in enumerate(counts):
            for extra in range(m):
                new[k + extra] += c
        counts = new
    return tuple(counts)


@lru_cache(maxsize=2)
def _all_permutations(n: int) -> np.ndarray:
    perms = np.zeros((1, 0), dtype=np.int8)
    for k in range(n):
        m = perms.shape[0]
        grown = np.empty((m * (k + 1), k + 1), dtype=np.int8)
        for pos in range(k + 1):
            block = grown[pos * m:(pos + 1) * m]
            block[:, :pos] = perms[:, :pos]
            block[:, pos] = k
            block[:, pos + 1:] = perms[:, pos:]
        perms = grown
    return perms


def _dense(a: np.ndarray) -> np.ndarray:
    return np.unique(a, return_inverse=True)[1].astype(np.int8)


@lru_cache(maxsize=256)
def _tied_null(x_dense: tuple, y_dense: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Distribution of S over all n! re-orderings of y against fixed x."""
    n = len(x_dense)
    xs = np.array(x_dense)
    ys = np.array(y_dense, dtype=np.int8)[_all_permutations(n)]
    s = np.zeros(ys.shape[0], dtype=np.int16)
    for i in range(n):
        for j in range(i + 1, n):
            sx = int(np.sign(xs[j] - xs[i]))
            if sx:
                s += (sx * np.sign(ys[:, j] - ys[:, i])).astype(np.int16)
    values, counts = np.unique(s, return_counts=True)
    return values.astype(np.int64), counts.astype(np.int64)


def exact_tau_p(x, y) -> float:
    """Two-sided exact permutation p-value, P(|S*| >= |S|) over all orderings."""
    x, y = _paired(x, y)
    s, ux, uy = _pair_stats(x, y)
    n = len(x)
    if ux == 0 or uy == 0:
        raise ValueError("exact p-value is undefined for constant input")
    if len(np.unique(x)) == n and len(np.unique(y)) == n:
        total = n * (n - 1) // 2
        counts = _inversion_counts(n)
        hit = sum(c for k, c in enumerate(counts) if abs(total - 2 * k) >= abs(s))
        return float(Fraction(hit, math.factorial(n)))
    order = np.lexsort((y, x))
    values, counts = _tied_null(tuple(_dense(x[order]).tolist()), tuple(sorted(_dense(y).tolist())))
    hit = int(counts[np.abs(values) >= abs(s)].sum())
    return float(Fraction(hit, int(counts.sum())))


def kendall_tau_b(x, y, method: str = "auto", continuity: bool = False) -> CorrelationResult:
    """Kendall's tau-b with a tie-corrected p-value.

    ``method`` is ``"auto"`` (exact for n <= 10), ``"exact"`` or
    ``"asymptotic"``. ``continuity`` applies a continuity correction to the
    normal approximation; it is off by default to match the common
    uncorrected statistic. Rows with NaN in either input are dropped.
    """
    if method not in ("auto", "exact", "asymptotic"):
        raise ValueError(f"unknown method {method!r}")
    x, y = _paired(x, y)
    n = len(x)
    if n < 2:
        return CorrelationResult(None, None, n, "tau_b", flags=("too_few",))
    s, ux, uy = _pair_stats(x, y)
    if ux == 0 or uy == 0:
        return CorrelationResult(None, None, n, "tau_b", flags=("constant_input",))
    tau = s / math.sqrt(ux * uy)
    exact = method == "exact" or (method == "auto" and n <= EXACT_MAX_N)
    p = exact_tau_p(x, y) if exact else _normal_p(s, x, y, continuity)
    return CorrelationResult(tau, min(1.0, p), n, "tau_b",
                             flags=("exact_p",) if exact else ("normal_p",))


def tau_b_value(x: np.ndarray, y: np.ndarray) -> float | None:
    """Bare tau-b on already-clean arrays; ``None`` when undefined."""
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    ux, uy = np.count_nonzero(dx), np.count_nonzero(dy)
    if ux == 0 or uy == 0:
        return None
    return float(np.sum(dx * dy) / math.sqrt(ux * uy))


def _tau_b_batch(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise tau-b for stacked samples; NaN where undefined."""
    dx = np.sign(X[:, :, None] - X[:, None, :])
    dy = np.sign(Y[:, :, None] - Y[:, None, :])
    s = np.sum(dx * dy, axis=(1, 2))
    ux = np.count_nonzero(dx, axis=(1, 2))
    uy = np.count_nonzero(dy, axis=(1, 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = s / np.sqrt(ux.astype(float) * uy)
    out[(ux == 0) | (uy == 0)] = np.nan
    return out


# --------------------------------------------------------------------------
# Spearman / Pearson


def _t_p(r: float, df: int) -> float | None:
    if df < 1:
        return None
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt(df / (1.0 - r * r))
    return float(2 * stats.t.sf(abs(t), df))


def pearson_r(x, y) -> CorrelationResult:
    x, y = _paired(x, y)
    n = len(x)
    if n < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return CorrelationResult(None, None, n, "pearson", flags=("constant_input",))
    xc, yc = x - x.mean(), y - y.mean()
    r = float(np.dot(xc, yc) / math.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    r = max(-1.0, min(1.0, r))
    return CorrelationResult(r, _t_p(r, n - 2), n, "pearson")


def spearman_rho(x, y) -> CorrelationResult:
    """Spearman's rho: Pearson correlation of mid-ranks."""
    x, y = _paired(x, y)
    res = pearson_r(stats.rankdata(x), stats.rankdata(y)) if len(x) else pearson_r(x, y)
    return CorrelationResult(res.tau, res.p_value, res.n, "spearman", flags=res.flags)


# --------------------------------------------------------------------------
# Partial correlation


def _control_list(controls) -> list:
    if isinstance(controls, ScoreVector):
        return [controls]
    arr = np.asarray(controls, dtype=object)
    if arr.ndim == 1 and len(arr) and np.isscalar(arr[0]):
        return [controls]
    return list(controls)


def _null_tau_p(tau: float, n: int) -> float:
    """Normal-approximation p for a tau statistic under independence."""
    if n < 3:
        return 1.0
    se = math.sqrt(2.0 * (2 * n + 5) / (9.0 * n * (n - 1)))
    return float(special.erfc(abs(tau) / se / math.sqrt(2)))


def partial_tau(x, y, controls, method: str = "residual", df_adjust: bool = False) -> CorrelationResult:
    """Partial rank correlation of ``x`` and ``y`` given ``controls``.

    ``method="formula"`` is the classical single-control partial tau,
    (t_xy - t_xz t_yz) / sqrt((1 - t_xz^2)(1 - t_yz^2)), with a normal p-value.
    ``method="residual"`` (default; any number of controls) regresses the
    mid-ranks of x and y on the control mid-ranks plus an intercept and
    returns tau-b of the two residual vectors, with its usual p-value.
    ``df_adjust`` computes the p-value at n minus the number of controls.
    """
    ctrl = _control_list(controls)
    if not ctrl:
        raise ValueError("at least one control is required")
    cleaned = _paired(x, y, *ctrl)
    x, y, zs = cleaned[0], cleaned[1], cleaned[2:]
    n, k = len(x), len(zs)
    for z in zs:
        if len(np.unique(z)) < 2:
            raise DegenerateControl("control vector is constant")

    if method == "formula":
        if k != 1:
            raise ValueError("the formula method takes exactly one control")
        txy, txz, tyz = (kendall_tau_b(a, b, "asymptotic").tau for a, b in ((x, y), (x, zs[0]), (y, zs[0])))
        if txy is None:
            return CorrelationResult(None, None, n, "partial_formula", flags=("constant_input",), n_controls=1)
        if abs(txz) >= 1 - 1e-12 or abs(tyz) >= 1 - 1e-12:
            raise FormulaOutOfRange("a control correlates perfectly with an input")
        tau = (txy - txz * tyz) / math.sqrt((1 - txz ** 2) * (1 - tyz ** 2))
        m = n - k if df_adjust else n
        flags = ("df_adjusted",) if df_adjust else ()
        return CorrelationResult(tau, _null_tau_p(tau, m), n, "partial_formula", flags=flags, n_controls=1)

    if method != "residual":
        raise ValueError(f"unknown partial method {method!r}")
    design = np.column_stack([np.ones(n)] + [stats.rankdata(z) for z in zs])
    resid = []
    for v in (x, y):
        r = stats.rankdata(v)
        coef, *_ = np.linalg.lstsq(design, r, rcond=None)
        # rounding removes floating noise so exact fits become exact ties
        resid.append(np.round(r - design @ coef, 9) + 0.0)
    rx, ry = resid
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        return CorrelationResult(0.0, 1.0, n, "partial_residual", flags=("residual_constant",), n_controls=k)
    base = kendall_tau_b(rx, ry)
    flags = tuple(base.flags)
    p = base.p_value
    if df_adjust:
        p = _null_tau_p(base.tau, n - k)
        flags += ("df_adjusted",)
    return CorrelationResult(base.tau, p, n, "partial_residual", flags=flags, n_controls=k)


def partial_spearman(x, y, control) -> CorrelationResult:
    """Classical first-order partial Spearman correlation (t-test p, n - 3 df)."""
    x, y, z = _paired(x, y, control)
    if len(np.unique(z)) < 2:
        raise DegenerateControl("control vector is constant")
    rxy, rxz, ryz = (spearman_rho(a, b).tau for a, b in ((x, y), (x, z), (y, z)))
    n = len(x)
    if rxy is None:
        return CorrelationResult(None, None, n, "partial_spearman", flags=("constant_input",), n_controls=1)
    if abs(rxz) >= 1 - 1e-12 or abs(ryz) >= 1 - 1e-12:
        raise FormulaOutOfRange("a control correlates perfectly with an input")
    r = (rxy - rxz * ryz) / math.sqrt((1 - rxz ** 2) * (1 - ryz ** 2))
    return CorrelationResult(r, _t_p(r, n - 3), n, "partial_spearman", n_controls=1)


# --------------------------------------------------------------------------
# Bootstrap


@dataclass(frozen=True)
class BootstrapResult:
    ci_lo: float | None
    ci_hi: float | None
    resamples: int
    n_valid: int
    n_skipped: int
    mean: float | None
    sd: float | None
    median: float | None
    clustering: str
    mean_sample_size: float
    seed: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _family_resamples(resamples: int, clustering: str, families, rng):
    """Yield index arrays, one per family-clustered resample."""
    if clustering != "family":
        raise ValueError(f"unknown clustering {clustering!r}")
    if families is None:
        raise ValueError("family clustering needs family tags")
    tags = list(dict.fromkeys(families))
    if len(tags) < 2:
        raise TooFewClusters("family bootstrap needs at least two families")
    members = [np.flatnonzero(np.asarray(families) == t) for t in tags]
    draws = rng.integers(0, len(tags), size=(resamples, len(tags)))
    for row in draws:
        yield np.concatenate([members[d] for d in row])


def _bootstrap_taus(xs: Sequence[np.ndarray], y: np.ndarray, resamples: int, clustering: str,
                    families, seed: int):
    """tau-b of each x in ``xs`` against y on shared resamples; rows are resamples."""
    rng = np.random.default_rng(seed)
    n = len(y)
    if clustering == "none":
        idx = rng.integers(0, n, size=(resamples, n))
        out = np.empty((resamples, len(xs)))
        sizes = np.full(resamples, n)
        step = max(1, 200_000 // (n * n))
        for lo in range(0, resamples, step):
            rows = idx[lo:lo + step]
            for c, x in enumerate(xs):
                out[lo:lo + step, c] = _tau_b_batch(x[rows], y[rows])
        return out, sizes
    out = np.empty((resamples, len(xs)))
    sizes = np.empty(resamples)
    for b, rows in enumerate(_family_resamples(resamples, clustering, families, rng)):
        sizes[b] = len(rows)
        yb = y[rows]
        for c, x in enumerate(xs):
            t = tau_b_value(x[rows], yb)
            out[b, c] = np.nan if t is None else t
    return out, sizes


def _percentiles(values: np.ndarray, level: float):
    if len(values) == 0:
        return None, None
    lo, hi = np.percentile(values, [50 * (1 - level), 50 * (1 + level)])
    return float(lo), float(hi)


def bootstrap_ci(x, y, resamples: int = 10_000, clustering: str = "none", seed: int = 0,
                 families=None, level: float = 0.95) -> BootstrapResult:
    """Percentile bootstrap CI for tau-b.

    ``clustering="none"`` resamples endpoints; ``"family"`` resamples family
    tags and takes every member of each drawn family. Resamples where tau-b
    is undefined are skipped and counted.
    """
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    families = _families_of(x, families)
    if clustering == "family":
        if families is None:
            raise ValueError("family clustering needs family tags")
        x, y, fam = _paired_with_families(x, y, families)
        families = fam
    else:
        x, y = _paired(x, y)
    taus, sizes = _bootstrap_taus([x], y, resamples, clustering, families, seed)
    taus = taus[:, 0]
    valid = taus[~np.isnan(taus)]
    lo, hi = _percentiles(valid, level)
    has = len(valid) > 0
    return BootstrapResult(
        lo, hi, resamples, len(valid), resamples - len(valid),
        float(valid.mean()) if has else None,
        float(valid.std(ddof=1)) if len(valid) > 1 else None,
        float(np.median(valid)) if has else None,
        clustering, float(sizes.mean()), seed,
    )


def _paired_with_families(x, y, families):
    xa, ya = _as_float(x), _as_float(y)
    if not (len(xa) == len(ya) == len(families)):
        raise LengthMismatch("x, y and families differ in length")
    keep = ~(np.isnan(xa) | np.isnan(ya))
    return xa[keep], ya[keep], [f for f, k in zip(families, keep) if k]


@dataclass(frozen=True)
class DeltaTauResult:
    delta_tau: float | None
    p_value: float | None
    ci_lo: float | None
    ci_hi: float | None
    n: int
    n_valid: int
    n_skipped: int
    resamples: int
    seed: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def delta_tau_test(x1, x2, y, resamples: int = 10_000, seed: int = 0, clustering: str = "none",
                   families=None, level: float = 0.95) -> DeltaTauResult:
    """Paired bootstrap test of tau(x1, y) - tau(x2, y).

    Both predictors are evaluated on the same resamples. The two-sided
    p-value is 2 * min(P(delta <= 0), P(delta >= 0)), clamped to 1.
    """
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    families = _families_of(x1, families)
    a1, a2, b = _as_float(x1), _as_float(x2), _as_float(y)
    if not (len(a1) == len(a2) == len(b)):
        raise LengthMismatch("x1, x2 and y differ in length")
    keep = ~(np.isnan(a1) | np.isnan(a2) | np.isnan(b))
    a1, a2, b = a1[keep], a2[keep], b[keep]
    if families is not None:
        families = [f for f, k in zip(families, keep) if k]
    t1, t2 = tau_b_value(a1, b), tau_b_value(a2, b)
    point = None if t1 is None or t2 is None else t1 - t2
    taus, _ = _bootstrap_taus([a1, a2], b, resamples, clustering, families, seed)
    d = taus[:, 0] - taus[:, 1]
    d = d[~np.isnan(d)]
    if len(d) == 0:
        return DeltaTauResult(point, None, None, None, len(b), 0, resamples, resamples, seed)
    p = min(1.0, 2 * min(np.mean(d <= 0), np.mean(d >= 0)))
    lo, hi = _percentiles(d, level)
    return DeltaTauResult(point, float(p), lo, hi, len(b), len(d), resamples - len(d), resamples, seed)


# --------------------------------------------------------------------------
# Family-level sensitivity


@dataclass(frozen=True)
class LofoRow:
    family: str
    tau: float | None
    p_value: float | None
    n_remaining: int
    influential: bool


@dataclass(frozen=True)
class LofoResult:
    full: CorrelationResult
    rows: list = field(default_factory=list)
    tau_min: float | None = None
    tau_mean: float | None = None
    tau_max: float | None = None

    def to_dict(self) -> dict:
        return {
            "full": self.full.to_dict(),
            "rows": [r.__dict__ for r in self.rows],
            "tau_min": self.tau_min, "tau_mean": self.tau_mean, "tau_max": self.tau_max,
        }


def leave_one_family_out(x, y, families=None, influence_threshold: float = 0.25) -> LofoResult:
    """Recompute tau-b with each family removed in turn.

    A family is flagged ``influential`` when removing it moves tau by at
    least ``influence_threshold``.
    """
    families = _families_of(x, families)
    if families is None:
        raise ValueError("leave-one-family-out needs family tags")
    x, y, families = _paired_with_families(x, y, families)
    tags = list(dict.fromkeys(families))
    if len(tags) < 2:
        raise TooFewClusters("leave-one-family-out needs at least two families")
    full = kendall_tau_b(x, y)
    fam = np.asarray(families)
    rows = []
    for t in tags:
        keep = fam != t
        r = kendall_tau_b(x[keep], y[keep])
        moved = (r.tau is None) != (full.tau is None) or (
            r.tau is not None and full.tau is not None and abs(r.tau - full.tau) >= influence_threshold)
        rows.append(LofoRow(t, r.tau, r.p_value, int(keep.sum()), bool(moved)))
    taus = [r.tau for r in rows if r.tau is not None]
    if taus:
        return LofoResult(full, rows, min(taus), float(np.mean(taus)), max(taus))
    return LofoResult(full, rows)


def family_median_tau(x, y, families=None) -> CorrelationResult:
    """tau-b between per-family medians of x and y (n = number of families)."""
    families = _families_of(x, families)
    if families is None:
        raise ValueError("family aggregation needs family tags")
    x, y, families = _paired_with_families(x, y, families)
    tags = list(dict.fromkeys(families))
    if len(tags) < 3:
        raise TooFewClusters("family aggregation needs at least three families")
    fam = np.asarray(families)
    mx = [float(np.median(x[fam == t])) for t in tags]
    my = [float(np.median(y[fam == t])) for t in tags]
    r = kendall_tau_b(mx, my)
    return CorrelationResult(r.tau, r.p_value, r.n, "family_median_tau_b", flags=r.flags)


# --------------------------------------------------------------------------
# Multiple comparisons


@dataclass(frozen=True)
class Decision:
    p_value: float | None
    p_adjusted: float | None
    threshold: float
    reject: bool


def multiple_correction(p_values: Mapping[str, float | None], method: str = "bonferroni",
                        alpha: float = 0.05) -> dict[str, Decision]:
    """Family-wise error control over labelled p-values.

    ``bonferroni`` compares every p to alpha/m. ``holm`` walks the sorted
    p-values against alpha/m, alpha/(m-1), ... and stops at the first
    non-rejection. Undefined p-values count toward m but are never rejected.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    labels = list(p_values)
    m = len(labels)
    out: dict[str, Decision] = {}
    if method == "bonferroni":
        for lab in labels:
            p = p_values[lab]
            adj = None if p is None else min(1.0, p * m)
            out[lab] = Decision(p, adj, alpha / m, p is not None and p <= alpha / m)
        return out
    if method != "holm":
        raise ValueError(f"unknown correction {method!r}")
    order = sorted(labels, key=lambda lab: (p_values[lab] is None, p_values[lab] or 0.0))
    running, stopped = 0.0, False
    for i, lab in enumerate(order):
        p = p_values[lab]
        threshold = alpha / (m - i)
        if p is None:
            out[lab] = Decision(None, None, threshold, False)
            stopped = True
            continue
        running = max(running, min(1.0, (m - i) * p))
        reject = not stopped and p <= threshold
        stopped = stopped or not reject
        out[lab] = Decision(p, running, threshold, reject)
    return {lab: out[lab] for lab in labels}
