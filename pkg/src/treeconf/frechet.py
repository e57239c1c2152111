"""Sample Frechet mean of trees by the proximal point algorithm.

Each step moves the current iterate along the geodesic towards one sample
tree, by a fraction given by the step schedule; the sample is visited in
passes (cyclic, or a fresh seeded permutation per pass). With the default
schedule ``1/(k+1)`` and ``k`` starting at 0, the first step lands on a sample
tree and, inside a single orthant, every full pass ends exactly on the
arithmetic mean.

The proximal point iterates approach the mean at a sublinear rate. When
``polish`` is on, each pass is followed by a bound-constrained quasi-Newton
minimisation of the Frechet function over the closed face of tree space
spanned by the iterate's splits; its gradient is minus twice the average of
the tangent vectors towards the sample.
The run is converged when two consecutive polished iterates are closer than
``tolerance``. Splits the polish drives to zero leave the face; the next
proximal pass can bring them (or their neighbours) back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from .core import PhyloTree, TreeError
from .geodesic import distance, geodesic, point_on_geodesic
from .logmap import tangent_components

__all__ = ["MeanConfig", "MeanResult", "frechet_mean", "frechet_function", "harmonic_step"]

_MAX_POLISH = 500


def harmonic_step(k: int) -> float:
    """Default step schedule ``1 / (k + 1)``."""
    return 1.0 / (k + 1)


@dataclass(frozen=True)
class MeanConfig:
    """Parameters of the Frechet mean iteration.

    Attributes
    ----------
    max_iterations : int
        Cap on the number of proximal steps (one step per visited tree).
    tolerance : float
        Convergence threshold on the distance moved between passes, in
        branch-length units. Internal lengths of the mean below it are
        treated as zero.
    step_schedule : callable
        ``k -> step`` with values in ``(0, 1]``; must be picklable for
        parallel coverage runs.
    order : {"random", "cyclic"}
        Pass order over the sample.
    seed : int
        Seed of the per-pass permutations.
    polish : bool
        Follow each pass with a quasi-Newton refinement on the current face.
    pendant : bool
        Include pendant lengths in the reported Frechet function.
    """

    max_iterations: int = 200_000
    tolerance: float = 1e-8
    step_schedule: Callable[[int], float] = harmonic_step
    order: str = "random"
    seed: int = 0
    polish: bool = True
    pendant: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.order not in ("random", "cyclic"):
            raise ValueError(f"order must be 'random' or 'cyclic', got {self.order!r}")


@dataclass(frozen=True, eq=False)
class MeanResult:
    mean: PhyloTree
    frechet_value: float
    iterations_used: int
    converged: bool
    boundary_flag: bool
    dropped: tuple = ()


def _check_sample(trees) -> list:
    trees = list(trees)
    if not trees:
        raise TreeError("empty sample")
    taxa = trees[0].taxa
    for i, t in enumerate(trees):
        if t.taxa != taxa:
            raise TreeError(f"tree {i} is defined on a different taxon set")
    return trees


def frechet_function(trees: Sequence[PhyloTree], u: PhyloTree, pendant: bool = False) -> float:
    """Mean squared geodesic distance from ``u`` to the sample."""
    trees = _check_sample(trees)
    if u.taxa != trees[0].taxa:
        raise TreeError("candidate tree is defined on a different taxon set")
    return sum(distance(t, u, pendant) ** 2 for t in trees) / len(trees)


def _mean_pendant(trees) -> Optional[dict]:
    if any(t.pendant is None for t in trees):
        return None
    n = len(trees)
    return {lab: math.fsum(t.pendant[lab] for t in trees) / n for lab in trees[0].taxa}


def _positive(tree: PhyloTree, pendant) -> PhyloTree:
    return PhyloTree._trusted(tree.taxa, {s: v for s, v in tree.internal.items() if v > 0.0}, pendant)


def _objective(trees, taxa, splits, pendant):
    n = len(trees)

    def fun(v):
        x = PhyloTree._trusted(taxa, {s: float(a) for s, a in zip(splits, v) if a > 0.0}, pendant)
        value = 0.0
        grad = np.zeros(len(splits))
        for t in trees:
            g = geodesic(x, t)
            value += g.distance ** 2
            comps = tangent_components(g)
            grad -= 2.0 * np.array([comps.get(s, 0.0) for s in splits])
        return value / n, grad / n

    return fun


def _polish(trees, x: PhyloTree, tolerance: float, pendant) -> PhyloTree:
    # The Frechet function is smooth inside a face but not across its
    # boundary, so splits the solver pins at zero are removed and the
    # smaller face is solved again.
    x = _positive(x, pendant)
    while x.internal:
        splits = sorted(x.internal)
        fun = _objective(trees, x.taxa, splits, pendant)
        start = np.array([x.internal[s] for s in splits])
        res = optimize.minimize(
            fun,
            start,
            jac=True,
            method="L-BFGS-B",
            bounds=[(0.0, None)] * len(splits),
            options={"maxiter": _MAX_POLISH, "ftol": 0.0, "gtol": 1e-3 * tolerance},
        )
        if not res.fun <= fun(start)[0]:
            break
        pinned = 1e-3 * tolerance
        x = PhyloTree._trusted(x.taxa, {s: float(a) for s, a in zip(splits, res.x) if a > pinned}, pendant)
        if len(x.internal) == len(splits):
            break
    return x


def frechet_mean(trees: Sequence[PhyloTree], cfg: Optional[MeanConfig] = None) -> MeanResult:
    """Approximate the minimiser of ``(1/n) sum_i d(T_i, u)^2``.

    Parameters
    ----------
    trees : sequence of PhyloTree
        Non-empty sample on a common taxon set.
    cfg : MeanConfig, optional

    Returns
    -------
    MeanResult
        Internal splits of the mean shorter than ``cfg.tolerance`` are
        removed and listed in ``dropped``; ``boundary_flag`` is set when the
        mean is not a binary tree with every internal length at least
        ``cfg.tolerance``.
    """
    cfg = cfg or MeanConfig()
    trees = _check_sample(trees)
    n = len(trees)
    pendant = _mean_pendant(trees)
    rng = np.random.default_rng(cfg.seed)

    x = None
    k = 0
    previous = None
    converged = False
    if n == 1:
        x = trees[0]
        converged = True
    while not converged and k < cfg.max_iterations:
        start = x
        order = rng.permutation(n) if cfg.order == "random" else range(n)
        for i in order:
            step = cfg.step_schedule(k)
            if not 0.0 < step <= 1.0:
                raise ValueError(f"step schedule returned {step} at k={k}; steps must lie in (0, 1]")
            if x is None or step == 1.0:
                x = trees[i]
            else:
                x = point_on_geodesic(geodesic(x, trees[i]), step)
            k += 1
            if k >= cfg.max_iterations:
                break
        if cfg.polish:
            x = _polish(trees, x, cfg.tolerance, pendant)
            if previous is not None and distance(previous, x) < cfg.tolerance:
                converged = True
            previous = x
        elif start is not None and distance(start, x) < cfg.tolerance:
            converged = True

    internal = {}
    dropped = []
    for s, v in x.internal.items():
        if v >= cfg.tolerance:
            internal[s] = v
        else:
            dropped.append(s)
    mean = PhyloTree._trusted(x.taxa, internal, pendant if pendant is not None else x.pendant)
    boundary = len(internal) < max(mean.ntaxa - 3, 0)
    value = frechet_function(trees, mean, cfg.pendant)
    return MeanResult(mean, value, k, converged, boundary, tuple(sorted(dropped)))
