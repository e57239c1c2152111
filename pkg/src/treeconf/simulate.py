"""Synthetic tree samples around a base tree, and coverage experiments.

The generator is a local chart: a Gaussian vector ``z`` around the base
coordinates is turned into a tree by keeping each base split with length
``z_j`` when ``z_j > 0`` and otherwise replacing it by a nearest-neighbour
interchange (NNI) alternative with length ``|z_j|``. With at most one
negative coordinate the log map at the base sends the tree back to ``z``;
with several, the result is only an approximation, and split sets that are
not compatible are redrawn.
"""

from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import CoordinateFrame, PhyloTree, Split, TaxonSet, TreeError, _masks_compatible
from .frechet import MeanConfig
from .inference import InferenceError, confidence_member, summarize

__all__ = [
    "GeneratorError",
    "GeneratorSpec",
    "Draw",
    "TreeSampler",
    "CoverageResult",
    "nni_alternative",
    "random_tree",
    "sample_tree",
    "sample_trees",
    "coverage_experiment",
    "write_coverage_csv",
]

REJECTION_WINDOW = 100
MAX_REJECTION_RATE = 0.5


class GeneratorError(ValueError):
    """The generator rejects too many draws to be a useful local chart."""


def random_tree(taxa: TaxonSet, rng: np.random.Generator, low: float = 0.1, high: float = 1.0) -> PhyloTree:
    """Binary tree with a uniformly random topology and uniform edge lengths.

    The topology comes from stepwise addition onto a uniformly chosen edge.
    Pendant lengths are left unset.
    """
    k = len(taxa)
    if k < 3:
        return PhyloTree(taxa, {})
    # Each clade is the taxon set below an edge, seen from taxon 0.
    clades = [0b010, 0b100]
    for i in range(3, k):
        bit = 1 << i
        choice = int(rng.integers(len(clades) + 1))
        if choice == len(clades):
            clades.append(((1 << i) - 1) & ~1)
        else:
            c = clades[choice]
            clades = [d | bit if d & c == c and d != c else d for d in clades]
            clades.append(c | bit)
        clades.append(bit)
    internal = {}
    for c in clades:
        size = bin(c).count("1")
        if 2 <= size <= k - 2:
            internal[Split(c, k)] = float(rng.uniform(low, high))
    return PhyloTree(taxa, internal)


def _children(mask: int, others: Sequence[int], k: int) -> list:
    """Maximal clusters strictly inside ``mask``: the subtrees hanging off that side."""
    full = (1 << k) - 1
    inside = [1 << i for i in range(k) if mask >> i & 1]
    for o in others:
        for side in (o, full ^ o):
            if side & mask == side and side != mask:
                inside.append(side)
    return [c for c in inside if not any(d != c and d & c == c for d in inside)]


def nni_alternative(tree: PhyloTree, split: Split) -> Split:
    """The NNI rearrangement across ``split`` with the smaller canonical mask.

    ``split`` must be an internal split of the binary tree ``tree``. Writing
    its sides as ``A1 A2 | B1 B2``, the two rearrangements introduce
    ``A1 B1 | A2 B2`` and ``A1 B2 | A2 B1``.
    """
    k = tree.ntaxa
    splits = [s.mask for s in tree.positive_splits()]
    if split.mask not in splits:
        raise TreeError(f"split {split.format(tree.taxa)} is not in the tree")
    others = [m for m in splits if m != split.mask]
    full = (1 << k) - 1
    a = _children(split.mask, others, k)
    b = _children(full ^ split.mask, others, k)
    if len(a) != 2 or len(b) != 2:
        raise TreeError("NNI needs a binary vertex at both ends of the split")
    first = Split(a[0] | b[0], k)
    second = Split(a[0] | b[1], k)
    return min(first, second, key=lambda s: s.mask)


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Gaussian local-chart generator around ``frame.base``.

    Parameters
    ----------
    frame : CoordinateFrame
        Frame of a binary base tree with positive internal lengths.
    sigma : array_like
        ``m x m`` positive semi-definite covariance, squared length units.
    seed : int
        Root seed; replicate ``r`` uses the stream ``(seed, r)``.
    """

    frame: CoordinateFrame
    sigma: np.ndarray
    seed: int = 0
    factor: np.ndarray = field(init=False, repr=False)
    alternatives: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.frame.reduced:
            raise TreeError("generator base must be a binary tree with positive lengths")
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        m = self.frame.dim
        if sigma.shape != (m, m):
            raise ValueError(f"sigma must be {m} x {m}, got {sigma.shape}")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
            raise ValueError("sigma must be symmetric")
        w, V = np.linalg.eigh(0.5 * (sigma + sigma.T))
        if m and w.min() < -1e-10 * max(w.max(), 0.0) - 1e-300:
            raise ValueError("sigma must be positive semi-definite")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "factor", V * np.sqrt(np.clip(w, 0.0, None)))
        base = self.frame.base
        object.__setattr__(self, "alternatives", tuple(nni_alternative(base, s) for s in self.frame.order))

    @classmethod
    def isotropic(cls, base: PhyloTree, sd: float, seed: int = 0) -> "GeneratorSpec":
        frame = CoordinateFrame(base)
        return cls(frame, sd * sd * np.eye(frame.dim), seed)

    @property
    def base(self) -> PhyloTree:
        return self.frame.base

    def tree_from_vector(self, z) -> Optional[PhyloTree]:
        """Tree for the chart vector ``z``, or None when its splits clash."""
        z = np.asarray(z, dtype=float)
        internal = {}
        for j, split in enumerate(self.frame.order):
            v = float(z[j])
            if v > 0.0:
                internal[split] = v
            elif v < 0.0:
                alt = self.alternatives[j]
                if alt in internal:
                    return None
                internal[alt] = -v
        masks = [s.mask for s in internal]
        for i in range(len(masks)):
            for j in range(i + 1, len(masks)):
                if not _masks_compatible(masks[i], masks[j]):
                    return None
        return PhyloTree._trusted(self.frame.taxa, internal, self.base.pendant)


class Draw(NamedTuple):
    tree: PhyloTree
    z: np.ndarray
    rejections: int


class TreeSampler:
    """Stateful sampler with exact rejection accounting."""

    def __init__(self, spec: GeneratorSpec, rng: Optional[np.random.Generator] = None):
        self.spec = spec
        self.rng = rng if rng is not None else np.random.default_rng(spec.seed)
        self.attempts = 0
        self.rejections = 0

    def draw(self) -> Draw:
        spec = self.spec
        t = spec.frame.base_coords
        rejected = 0
        while True:
            z = t + spec.factor @ self.rng.standard_normal(spec.frame.dim)
            self.attempts += 1
            tree = spec.tree_from_vector(z)
            if tree is not None:
                return Draw(tree, z, rejected)
            rejected += 1
            self.rejections += 1
            if self.attempts >= REJECTION_WINDOW and self.rejections > MAX_REJECTION_RATE * self.attempts:
                raise GeneratorError(
                    f"{self.rejections} of {self.attempts} draws rejected; sigma is too large "
                    "for the local chart around the base tree"
                )

    def sample(self, n: int) -> list:
        return [self.draw().tree for _ in range(n)]


def sample_tree(spec: GeneratorSpec, rng: np.random.Generator) -> PhyloTree:
    return TreeSampler(spec, rng).draw().tree


def sample_trees(spec: GeneratorSpec, n: int, rng: Optional[np.random.Generator] = None) -> list:
    return TreeSampler(spec, rng).sample(n)


@dataclass(frozen=True)
class CoverageResult:
    """Outcome of a coverage experiment.

    ``replicates`` counts the completed replicates and is the denominator of
    every coverage proportion; replicates whose inference failed are counted
    in ``failed`` and excluded.
    """

    alphas: tuple
    coverage: tuple
    replicates: int
    n: int
    covered: tuple
    failed: int = 0
    rejections: int = 0
    reduced: int = 0

    def rows(self) -> list:
        return [
            {"alpha": a, "coverage": c, "replicates": self.replicates, "n": self.n}
            for a, c in zip(self.alphas, self.coverage)
        ]


def _replicate(args):
    spec, n, alphas, cfg, r = args
    sampler = TreeSampler(spec, np.random.default_rng([spec.seed, r]))
    trees = sampler.sample(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            s = summarize(trees, cfg)
        except (InferenceError, TreeError) as exc:
            return None, sampler.rejections, False, str(exc)
    hits = tuple(confidence_member(s, spec.base, a).member for a in alphas)
    return hits, sampler.rejections, s.reduced, None


def coverage_experiment(
    spec: GeneratorSpec,
    n: int,
    replicates: int,
    alphas: Sequence[float] = (0.10, 0.05, 0.01),
    cfg: Optional[MeanConfig] = None,
    workers: int = 1,
) -> CoverageResult:
    """Proportion of confidence sets that contain the generator's base tree.

    Each replicate draws ``n`` trees from its own random stream, builds the
    confidence set around their Frechet mean and checks the base tree at every
    level in ``alphas``. Results do not depend on ``workers``.
    """
    if replicates < 1:
        raise ValueError("replicates must be positive")
    if n <= spec.frame.dim:
        raise ValueError(f"sample size n={n} must exceed the frame dimension {spec.frame.dim}")
    alphas = tuple(float(a) for a in alphas)
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {a}")
    tasks = [(spec, n, alphas, cfg, r) for r in range(replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=max(1, replicates // (4 * workers))))
    else:
        results = [_replicate(t) for t in tasks]

    covered = [0] * len(alphas)
    done = failed = rejections = reduced = 0
    for hits, rej, red, _ in results:
        rejections += rej
        if hits is None:
            failed += 1
            continue
        done += 1
        reduced += bool(red)
        for i, h in enumerate(hits):
            covered[i] += h
    if failed:
        warnings.warn(f"{failed} of {replicates} replicates failed and were skipped", stacklevel=2)
    coverage = tuple(c / done if done else float("nan") for c in covered)
    return CoverageResult(alphas, coverage, done, n, tuple(covered), failed, rejections, reduced)


def write_coverage_csv(result: CoverageResult, stream: Optional[io.TextIOBase] = None) -> str:
    """Write ``alpha,coverage,replicates,n`` rows; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha", "coverage", "replicates", "n"])
    for row in result.rows():
        writer.writerow([repr(row["alpha"]), repr(row["coverage"]), row["replicates"], row["n"]])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text
