"""Taxon sets, splits and unrooted phylogenetic trees.

Splits are stored as integer bitmasks over taxon indices. A split's mask is
canonicalised so that the bit of taxon 0 is clear, which makes equality of
masks equivalent to equality of bipartitions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

__all__ = [
    "TreeError",
    "TaxonSet",
    "Split",
    "PhyloTree",
    "CoordinateFrame",
    "splits_compatible",
    "tree_from_splits",
    "MIN_FRAME_LENGTH",
]

# Below this an internal length counts as zero for frame construction.
MIN_FRAME_LENGTH = 1e-12


class TreeError(ValueError):
    """Invalid tree, split or taxon set."""


class TaxonSet:
    """An ordered, immutable collection of distinct taxon labels."""

    __slots__ = ("_labels", "_index")

    def __init__(self, labels: Iterable[str]):
        labels = tuple(labels)
        index = {}
        for i, lab in enumerate(labels):
            if not isinstance(lab, str) or lab == "":
                raise TreeError(f"taxon labels must be non-empty strings, got {lab!r}")
            if lab in index:
                raise TreeError(f"duplicate taxon label {lab!r}")
            index[lab] = i
        self._labels = labels
        self._index = index

    @property
    def labels(self) -> tuple:
        return self._labels

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise TreeError(f"unknown taxon {label!r}") from None

    def __len__(self):
        return len(self._labels)

    def __iter__(self):
        return iter(self._labels)

    def __contains__(self, label):
        return label in self._index

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, TaxonSet):
            return NotImplemented
        return self._labels == other._labels

    def __hash__(self):
        return hash(self._labels)

    def __repr__(self):
        return f"TaxonSet({list(self._labels)!r})"

    @property
    def full_mask(self) -> int:
        return (1 << len(self._labels)) - 1

    def mask_of(self, labels: Iterable[str]) -> int:
        mask = 0
        for lab in labels:
            mask |= 1 << self.index(lab)
        return mask

    def labels_of(self, mask: int) -> list:
        return [lab for i, lab in enumerate(self._labels) if mask >> i & 1]


@dataclass(frozen=True, order=True)
class Split:
    """A bipartition of ``ntaxa`` taxa, stored as a canonical bitmask.

    Either side of the bipartition may be passed as ``mask``; the stored
    value always has bit 0 cleared.
    """

    mask: int
    ntaxa: int

    def __post_init__(self):
        full = (1 << self.ntaxa) - 1
        mask = self.mask & full
        if mask & 1:
            mask ^= full
        if mask == 0:
            raise TreeError("a split needs two non-empty sides")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_labels(cls, taxa: TaxonSet, side: Iterable[str]) -> "Split":
        return cls(taxa.mask_of(side), len(taxa))

    @property
    def complement(self) -> int:
        return ((1 << self.ntaxa) - 1) ^ self.mask

    @property
    def is_trivial(self) -> bool:
        """True for pendant splits (one side is a single taxon)."""
        small = min(bin(self.mask).count("1"), self.ntaxa - bin(self.mask).count("1"))
        return small < 2

    def compatible(self, other: "Split") -> bool:
        return splits_compatible(self, other)

    def sides(self, taxa: TaxonSet) -> tuple:
        """(side containing taxon 0, other side) as label lists."""
        return taxa.labels_of(self.complement), taxa.labels_of(self.mask)

    def format(self, taxa: TaxonSet) -> str:
        left, right = self.sides(taxa)
        return ",".join(left) + "|" + ",".join(right)


def splits_compatible(s1: Split, s2: Split) -> bool:
    """Four-intersection test: compatible iff some pair of sides is disjoint."""
    if s1.ntaxa != s2.ntaxa:
        raise TreeError("splits are over different taxon universes")
    full = (1 << s1.ntaxa) - 1
    a, b = s1.mask, s2.mask
    na, nb = full ^ a, full ^ b
    return not (a & b and a & nb and na & b and na & nb)


def _masks_compatible(a: int, b: int) -> bool:
    # Canonical masks both exclude taxon 0, so the complement-complement
    # intersection is never empty.
    return not (a & b) or (a & b) == a or (a & b) == b


@dataclass(frozen=True, eq=False)
class PhyloTree:
    """An unrooted tree: pairwise compatible weighted splits over ``taxa``.

    ``internal`` maps non-trivial splits to non-negative lengths. A zero length
    is allowed and marks a tree on an orthant boundary. ``pendant`` optionally
    maps taxon labels to pendant edge lengths.
    """

    taxa: TaxonSet
    internal: Mapping[Split, float]
    pendant: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        internal = {s: float(v) for s, v in self.internal.items()}
        object.__setattr__(self, "internal", internal)
        if self.pendant is not None:
            pendant = {lab: float(self.pendant.get(lab, 0.0)) for lab in self.taxa}
            if set(self.pendant) - set(pendant):
                raise TreeError("pendant lengths given for unknown taxa")
            object.__setattr__(self, "pendant", pendant)
        self._validate()

    @classmethod
    def _trusted(cls, taxa, internal, pendant=None):
        # Skips validation; callers guarantee compatibility and sign.
        t = object.__new__(cls)
        object.__setattr__(t, "taxa", taxa)
        object.__setattr__(t, "internal", internal)
        object.__setattr__(t, "pendant", pendant)
        return t

    def _validate(self):
        k = len(self.taxa)
        splits = list(self.internal)
        for s, v in self.internal.items():
            if s.ntaxa != k:
                raise TreeError("split defined over a different number of taxa")
            if s.is_trivial:
                raise TreeError(f"pendant split {s.format(self.taxa)} given as internal")
            if not v >= 0.0:
                raise TreeError(f"negative or NaN length {v} on split {s.format(self.taxa)}")
        if self.pendant is not None:
            for lab, v in self.pendant.items():
                if not v >= 0.0:
                    raise TreeError(f"negative or NaN pendant length {v} for {lab!r}")
        if len(splits) > max(k - 3, 0):
            raise TreeError(f"{len(splits)} internal splits exceed the maximum {max(k - 3, 0)} for {k} taxa")
        for i in range(len(splits)):
            for j in range(i + 1, len(splits)):
                if not _masks_compatible(splits[i].mask, splits[j].mask):
                    raise TreeError(
                        f"incompatible splits {splits[i].format(self.taxa)} and {splits[j].format(self.taxa)}"
                    )

    @property
    def ntaxa(self) -> int:
        return len(self.taxa)

    @property
    def is_binary(self) -> bool:
        """All ``ntaxa - 3`` internal edges present with positive length."""
        return (
            len(self.internal) == max(self.ntaxa - 3, 0)
            and all(v > 0.0 for v in self.internal.values())
        )

    def positive_splits(self) -> dict:
        return {s: v for s, v in self.internal.items() if v > 0.0}

    def topology(self) -> frozenset:
        """Splits with strictly positive length."""
        return frozenset(s for s, v in self.internal.items() if v > 0.0)

    def split(self, *side: str) -> Split:
        return Split.from_labels(self.taxa, side)

    def length(self, split: Split) -> float:
        return self.internal.get(split, 0.0)

    def with_lengths(self, internal: Mapping[Split, float], pendant=None) -> "PhyloTree":
        return PhyloTree(self.taxa, internal, self.pendant if pendant is None else pendant)

    def __eq__(self, other):
        if not isinstance(other, PhyloTree):
            return NotImplemented
        return (
            self.taxa == other.taxa
            and self.internal == other.internal
            and self.pendant == other.pendant
        )

    __hash__ = None

    def __repr__(self):
        inner = ", ".join(
            f"{s.format(self.taxa)}: {v:g}" for s, v in sorted(self.internal.items())
        )
        return f"PhyloTree({{{inner}}}, ntaxa={self.ntaxa})"


def tree_from_splits(taxa: TaxonSet, weighted_splits: Mapping[Split, float], pendant=None) -> PhyloTree:
    """Build a tree from a map of compatible splits to non-negative lengths."""
    return PhyloTree(taxa, dict(weighted_splits), pendant)


class CoordinateFrame:
    """A base tree together with a fixed ordering of its internal splits.

    The ordering is by canonical mask value. Coordinates of any vector built on
    this frame follow ``order``.

    The default constructor requires a binary base with all internal lengths
    above ``MIN_FRAME_LENGTH``. :meth:`reduced` builds a frame on a boundary
    (non-binary) base; log maps on such a frame are projections onto the
    retained splits.
    """

    def __init__(self, base: PhyloTree, *, _reduced: bool = False):
        splits = [s for s, v in base.internal.items() if v > MIN_FRAME_LENGTH]
        if not _reduced:
            if len(base.internal) != max(base.ntaxa - 3, 0) or len(splits) != len(base.internal):
                raise TreeError(
                    "base tree must be binary with strictly positive internal lengths; "
                    "use CoordinateFrame.reduced for boundary trees"
                )
        self.base = PhyloTree._trusted(base.taxa, {s: base.internal[s] for s in splits}, base.pendant)
        self.order = tuple(sorted(splits, key=lambda s: s.mask))
        self.reduced = _reduced and len(splits) < max(base.ntaxa - 3, 0)
        self._index = {s: i for i, s in enumerate(self.order)}

    @classmethod
    def reduced(cls, base: PhyloTree) -> "CoordinateFrame":
        """Frame on the positive-length splits of a possibly non-binary base."""
        return cls(base, _reduced=True)

    @property
    def taxa(self) -> TaxonSet:
        return self.base.taxa

    @property
    def dim(self) -> int:
        return len(self.order)

    def index(self, split: Split) -> int:
        try:
            return self._index[split]
        except KeyError:
            raise TreeError(f"split {split.format(self.taxa)} is not a frame coordinate") from None

    def __contains__(self, split):
        return split in self._index

    @property
    def base_coords(self):
        return np.array([self.base.internal[s] for s in self.order], dtype=float)

    def labels(self) -> list:
        return [s.format(self.taxa) for s in self.order]

    def __repr__(self):
        return f"CoordinateFrame(dim={self.dim}, reduced={self.reduced}, splits={self.labels()})"
