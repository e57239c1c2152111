"""Covariance estimation, confidence sets and tests on log-mapped samples.

A sample of trees is summarised by its Frechet mean, the log maps of the
trees at that mean, and their unstructured sample covariance ``S``. A
candidate tree ``T0`` belongs to the ``100(1 - alpha)%`` confidence set when

    (xbar - phi(T0))' S^-1 (xbar - phi(T0)) < m (n - 1) / (n (n - m)) F_{m, n-m}(1 - alpha)

with ``xbar`` the average log-mapped tree and ``m`` the number of retained
coordinates. Rank-deficient ``S`` is handled by keeping a full-rank subset of
coordinates chosen by pivoted QR; zero-variance coordinates are reported as
fixed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import linalg

from .core import CoordinateFrame, PhyloTree, Split, TreeError
from .distributions import f_ppf, f_sf, t_sf
from .frechet import MeanConfig, MeanResult, frechet_mean
from .logmap import log_map, log_map_matrix

__all__ = [
    "InferenceError",
    "InferenceSummary",
    "ConfidenceReport",
    "SplitTest",
    "LeveneResult",
    "summarize",
    "summarize_vectors",
    "confidence_statistic",
    "confidence_member",
    "confidence_threshold",
    "coordinate_intervals",
    "split_support_test",
    "pca",
    "levene_test",
    "coordinate_levene",
]

# Relative eigenvalue cutoff for the numerical rank of S.
RANK_RTOL = 1e-10
# Tolerance for matching a candidate against a zero-variance coordinate.
FIXED_ATOL = 1e-8


class InferenceError(ValueError):
    """The sample cannot support the requested inference."""


@dataclass(frozen=True, eq=False)
class InferenceSummary:
    """Everything the confidence-set and test functions need.

    ``precision`` is ``m x m`` with the inverse of ``S`` restricted to the
    retained coordinates in the retained block and zeros elsewhere.
    """

    frame: Optional[CoordinateFrame]
    n: int
    vectors: np.ndarray
    mean_vec: np.ndarray
    S: np.ndarray
    precision: np.ndarray
    rank: int
    retained: tuple
    dropped: tuple
    fixed: tuple
    mean_result: Optional[MeanResult] = None
    warnings: tuple = field(default=())

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    @property
    def reduced(self) -> bool:
        return bool(self.dropped) or bool(self.frame is not None and self.frame.reduced)

    def split_labels(self, indices=None) -> list:
        indices = range(self.m) if indices is None else indices
        if self.frame is None:
            return [f"x{j}" for j in indices]
        return [self.frame.order[j].format(self.frame.taxa) for j in indices]

    @property
    def retained_splits(self) -> list:
        return self.split_labels(self.retained)

    @property
    def dropped_splits(self) -> list:
        return self.split_labels(self.dropped)

    def coordinate(self, split) -> int:
        """Column index of ``split`` (a Split, or an int index)."""
        if isinstance(split, (int, np.integer)):
            if not 0 <= split < self.m:
                raise TreeError(f"coordinate index {split} out of range")
            return int(split)
        if self.frame is None:
            raise TreeError("summary has no frame; pass a coordinate index")
        return self.frame.index(split)


class ConfidenceReport(NamedTuple):
    statistic: float
    threshold: float
    alpha: float
    member: bool
    p_value: float
    flags: tuple = ()


class SplitTest(NamedTuple):
    p_value: float
    statistic: float
    mode: str
    raw_p_value: float
    degenerate: bool
    flags: tuple = ()


class LeveneResult(NamedTuple):
    statistic: float
    p_value: float


def summarize(
    trees: Sequence[PhyloTree],
    cfg: Optional[MeanConfig] = None,
    *,
    base: Optional[PhyloTree] = None,
) -> InferenceSummary:
    """Mean tree, log-mapped sample and covariance of a tree sample.

    Parameters
    ----------
    trees : sequence of PhyloTree
        At least two trees on a common taxon set.
    cfg : MeanConfig, optional
        Settings of the Frechet mean computation.
    base : PhyloTree, optional
        Use this tree as the mean estimate instead of computing the sample
        Frechet mean.
    """
    trees = list(trees)
    if len(trees) < 2:
        raise InferenceError("need at least two trees")
    notes = []
    result = None
    if base is None:
        result = frechet_mean(trees, cfg)
        base = result.mean
        if not result.converged:
            notes.append("Frechet mean iteration did not converge")
    try:
        frame = CoordinateFrame(base)
    except TreeError:
        frame = CoordinateFrame.reduced(base)
        notes.append(
            f"mean tree lies on an orthant boundary; frame reduced to {frame.dim} of "
            f"{max(base.ntaxa - 3, 0)} splits"
        )
    X = log_map_matrix(frame, trees)
    return summarize_vectors(X, frame, mean_result=result, notes=notes)


def summarize_vectors(X, frame: Optional[CoordinateFrame] = None, *, mean_result=None, notes=()) -> InferenceSummary:
    """Build a summary from an ``n x m`` array of log-mapped trees."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, m = X.shape
    if n < 2:
        raise InferenceError("need at least two observations")
    if frame is not None and frame.dim != m:
        raise InferenceError("vector length does not match frame dimension")
    notes = list(notes)
    mean_vec = X.mean(axis=0)
    centred = X - mean_vec
    S = centred.T @ centred / (n - 1)
    S = 0.5 * (S + S.T)

    eig = np.linalg.eigvalsh(S) if m else np.zeros(0)
    top = float(eig.max()) if m else 0.0
    cutoff = RANK_RTOL * top
    rank = int(np.sum(eig > cutoff)) if top > 0 else 0
    if rank == m:
        retained = tuple(range(m))
    elif rank == 0:
        retained = ()
    else:
        _, _, piv = linalg.qr(S, pivoting=True)
        retained = tuple(sorted(int(j) for j in piv[:rank]))
    dropped = tuple(j for j in range(m) if j not in retained)
    fixed = tuple(j for j in dropped if S[j, j] <= cutoff)
    if len(retained) >= n:
        raise InferenceError(
            f"sample size n={n} must exceed the retained dimension {len(retained)}"
        )
    precision = np.zeros((m, m))
    if retained:
        idx = np.array(retained)
        precision[np.ix_(idx, idx)] = np.linalg.inv(S[np.ix_(idx, idx)])

    summary = InferenceSummary(
        frame, n, X, mean_vec, S, precision, rank, retained, dropped, fixed, mean_result, ()
    )
    if dropped:
        notes.append(
            "covariance is rank deficient; dropped coordinates: "
            + ", ".join(summary.split_labels(dropped))
        )
    if fixed:
        notes.append(
            "zero-variance coordinates treated as fixed: " + ", ".join(summary.split_labels(fixed))
        )
    for note in notes:
        warnings.warn(note, stacklevel=2)
    return InferenceSummary(
        frame, n, X, mean_vec, S, precision, rank, retained, dropped, fixed, mean_result, tuple(notes)
    )


def _candidate_vector(s: InferenceSummary, candidate) -> np.ndarray:
    if isinstance(candidate, PhyloTree):
        if s.frame is None:
            raise TreeError("summary has no frame; pass a coordinate vector")
        return log_map(s.frame, candidate).coords
    v = np.asarray(candidate, dtype=float)
    if v.shape != (s.m,):
        raise TreeError(f"candidate vector must have length {s.m}")
    return v


def _quadratic(s: InferenceSummary, v: np.ndarray) -> float:
    if not s.retained:
        return 0.0
    idx = np.array(s.retained)
    diff = (s.mean_vec - v)[idx]
    P = s.precision[np.ix_(idx, idx)]
    return max(float(diff @ P @ diff), 0.0)


def confidence_statistic(s: InferenceSummary, candidate) -> float:
    """``(xbar - phi(T0))' S^-1 (xbar - phi(T0))`` over retained coordinates."""
    return _quadratic(s, _candidate_vector(s, candidate))


def confidence_threshold(s: InferenceSummary, alpha: float) -> float:
    """Right-hand side of the membership inequality at level ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    m, n = len(s.retained), s.n
    if m == 0:
        return 0.0
    return m * (n - 1) / (n * (n - m)) * f_ppf(1.0 - alpha, m, n - m)


def _p_value(s: InferenceSummary, statistic: float) -> float:
    m, n = len(s.retained), s.n
    if m == 0:
        return 1.0
    return f_sf(statistic * n * (n - m) / (m * (n - 1)), m, n - m)


def _fixed_mismatch(s: InferenceSummary, v: np.ndarray) -> list:
    bad = []
    for j in s.fixed:
        if abs(v[j] - s.mean_vec[j]) > FIXED_ATOL * max(1.0, abs(s.mean_vec[j])):
            bad.append(j)
    return bad


def confidence_member(s: InferenceSummary, candidate, alpha: float) -> ConfidenceReport:
    """Whether ``candidate`` lies in the ``100(1 - alpha)%`` confidence set.

    A candidate that disagrees with the sample on a zero-variance coordinate
    is excluded with p-value 0.
    """
    threshold = confidence_threshold(s, alpha)
    v = _candidate_vector(s, candidate)
    statistic = _quadratic(s, v)
    flags = []
    bad = _fixed_mismatch(s, v)
    if bad:
        flags.append("candidate differs on zero-variance coordinates: " + ", ".join(s.split_labels(bad)))
        return ConfidenceReport(statistic, threshold, alpha, False, 0.0, tuple(flags))
    if not s.retained:
        return ConfidenceReport(statistic, threshold, alpha, True, 1.0, tuple(flags))
    p = _p_value(s, statistic)
    return ConfidenceReport(statistic, threshold, alpha, statistic < threshold, p, tuple(flags))


def coordinate_intervals(s: InferenceSummary, alpha: float) -> dict:
    """Projections of the confidence ellipsoid onto each retained coordinate.

    Returns ``{index: (low, high)}``. With one retained coordinate this is the
    classical two-sided t interval.
    """
    c = confidence_threshold(s, alpha)
    out = {}
    for j in s.retained:
        half = math.sqrt(c * s.S[j, j])
        out[j] = (s.mean_vec[j] - half, s.mean_vec[j] + half)
    return out


def split_support_test(
    s: InferenceSummary,
    split,
    mode: str = "marginal",
    bonferroni: bool = False,
) -> SplitTest:
    """Test the null hypothesis that the true mean tree lacks ``split``.

    ``marginal`` is a one-sided t test of the split's coordinate mean against
    zero. ``joint`` refers the squared Mahalanobis distance from the mean
    vector to the half-space ``{x_split <= 0}`` to the confidence-set pivot,
    so it rejects exactly when no tree lacking the split is in the
    confidence set. With ``bonferroni`` the p-value is multiplied by the
    number of frame coordinates (capped at 1).
    """
    if mode not in ("marginal", "joint"):
        raise ValueError(f"mode must be 'marginal' or 'joint', got {mode!r}")
    j = s.coordinate(split)
    xbar = float(s.mean_vec[j])
    var = float(s.S[j, j])
    flags = []
    if j in s.fixed or var <= 0.0:
        p = 0.0 if xbar > 0 else 1.0
        flags.append("zero-variance coordinate: split " + ("present" if xbar > 0 else "absent") + " in every tree")
        stat = math.inf if xbar > 0 else 0.0
        return SplitTest(p, stat, mode, p, True, tuple(flags))
    if mode == "marginal":
        stat = xbar / math.sqrt(var / s.n)
        p = t_sf(stat, s.n - 1)
    else:
        stat = max(xbar, 0.0) ** 2 / var
        p = _p_value(s, stat) if s.retained else 1.0
    raw = p
    if bonferroni:
        p = min(1.0, p * s.m)
    return SplitTest(p, stat, mode, raw, False, tuple(flags))


def pca(s: InferenceSummary):
    """Eigen-decomposition of ``S``, eigenvalues in decreasing order.

    Eigenvector signs are fixed so that each column's largest-magnitude entry
    is positive.
    """
    w, V = np.linalg.eigh(s.S)
    order = np.argsort(w)[::-1]
    w = w[order]
    V = V[:, order]
    for c in range(V.shape[1]):
        k = np.argmax(np.abs(V[:, c]))
        if V[k, c] < 0:
            V[:, c] = -V[:, c]
    return w, V


def levene_test(groups) -> LeveneResult:
    """Brown-Forsythe test for equal variances across groups.

    Deviations from each group's median are compared with a one-way ANOVA.
    """
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    k = len(groups)
    if k < 2:
        raise ValueError("need at least two groups")
    if any(len(g) < 2 for g in groups):
        raise ValueError("every group needs at least two observations")
    z = [np.abs(g - np.median(g)) for g in groups]
    sizes = np.array([len(g) for g in groups], dtype=float)
    N = sizes.sum()
    means = np.array([zi.mean() for zi in z])
    grand = sum(zi.sum() for zi in z) / N
    between = float(np.sum(sizes * (means - grand) ** 2))
    within = float(sum(np.sum((zi - mi) ** 2) for zi, mi in zip(z, means)))
    d1, d2 = k - 1, N - k
    if within == 0.0:
        if between == 0.0:
            return LeveneResult(0.0, 1.0)
        return LeveneResult(math.inf, 0.0)
    stat = (d2 / d1) * between / within
    return LeveneResult(stat, f_sf(stat, d1, d2))


def coordinate_levene(s: InferenceSummary, splits) -> dict:
    """Pairwise Brown-Forsythe tests between log-map coordinates.

    Returns ``{(i, j): LeveneResult}`` over index pairs of ``splits``.
    """
    cols = [s.coordinate(sp) for sp in splits]
    out = {}
    for a in range(len(cols)):
        for b in range(a + 1, len(cols)):
            out[(cols[a], cols[b])] = levene_test([s.vectors[:, cols[a]], s.vectors[:, cols[b]]])
    return out
