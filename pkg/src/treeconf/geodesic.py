"""Geodesics and distances in BHV tree space.

The geodesic between two trees is described by their common splits and an
ordered sequence of support pairs ``(A_i, B_i)``: the splits of ``A_i`` shrink
to zero at fraction ``|A_i| / (|A_i| + |B_i|)`` of the path, exactly when the
splits of ``B_i`` start to grow. The sequence is found by repeatedly splitting
pairs while a minimum-weight vertex cover of the pair's incompatibility graph
has weight below one (the extension step of the polynomial-time geodesic
algorithm). Covers are found with a max-flow/min-cut computation.

Pendant lengths are ignored unless ``pendant=True``; they then add a
Euclidean factor to the distance.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .core import PhyloTree, Split, TreeError, _masks_compatible

__all__ = [
    "Geodesic",
    "geodesic",
    "distance",
    "point_on_geodesic",
    "cone_distance",
    "min_weight_vertex_cover",
]

# Relative slack used when comparing a cover weight with one and ratios with
# each other; below it two support pairs are treated as tied and merged.
_TIE_RTOL = 1e-12
_FLOW_EPS = 1e-15


@dataclass(frozen=True, eq=False)
class Geodesic:
    """The geodesic between ``t1`` and ``t2``.

    Attributes
    ----------
    common : tuple of (Split, float, float)
        Splits carried along the whole path with their lengths in ``t1`` and
        ``t2``. A split of one tree that is compatible with every split of the
        other appears here with length 0 at the other end.
    support : tuple of (tuple, tuple)
        Support pairs ``(A_i, B_i)``; each side is a tuple of
        ``(Split, length)``. Ratios ``|A_i|/|B_i|`` are strictly increasing.
    pendant : bool
        Whether pendant lengths enter the distance.
    """

    t1: PhyloTree
    t2: PhyloTree
    common: tuple
    support: tuple
    pendant: bool = False

    @property
    def norms(self) -> list:
        return [(_norm(a), _norm(b)) for a, b in self.support]

    @property
    def ratios(self) -> list:
        return [na / nb for na, nb in self.norms]

    @property
    def distance(self) -> float:
        terms = [(na + nb) ** 2 for na, nb in self.norms]
        terms += [(l1 - l2) ** 2 for _, l1, l2 in self.common]
        if self.pendant:
            terms.append(_pendant_sq(self.t1, self.t2))
        return math.sqrt(math.fsum(terms))

    @property
    def first_crossing(self) -> float:
        """Fraction of the path at which the first support pair is exchanged.

        Equal to 1 when the support is empty.
        """
        if not self.support:
            return 1.0
        na, nb = _norm(self.support[0][0]), _norm(self.support[0][1])
        return na / (na + nb)


def _norm(side) -> float:
    return math.sqrt(math.fsum(v * v for _, v in side))


def _pendant_sq(t1, t2) -> float:
    p1, p2 = t1.pendant, t2.pendant
    if p1 is None and p2 is None:
        return 0.0
    p1 = p1 or {}
    p2 = p2 or {}
    return math.fsum((p1.get(lab, 0.0) - p2.get(lab, 0.0)) ** 2 for lab in t1.taxa)


def min_weight_vertex_cover(weights_a, weights_b, edges):
    """Minimum-weight vertex cover of a bipartite graph.

    Parameters
    ----------
    weights_a, weights_b : sequence of float
        Non-negative vertex weights of the two sides.
    edges : iterable of (int, int)
        Pairs ``(i, j)`` joining vertex ``i`` of side A and ``j`` of side B.

    Returns
    -------
    (cover_a, cover_b, weight)
        Sorted index lists of covered vertices on each side and the total
        cover weight.
    """
    p, q = len(weights_a), len(weights_b)
    n = p + q + 2
    s, t = p + q, p + q + 1
    cap = [[0.0] * n for _ in range(n)]
    adj = [set() for _ in range(n)]

    def link(u, v, c):
        cap[u][v] = c
        adj[u].add(v)
        adj[v].add(u)

    for i, w in enumerate(weights_a):
        link(s, i, float(w))
    for j, w in enumerate(weights_b):
        link(p + j, t, float(w))
    for i, j in edges:
        link(i, p + j, math.inf)
    adj = [sorted(a) for a in adj]

    # Edmonds-Karp: shortest augmenting paths.
    while True:
        parent = [-1] * n
        parent[s] = s
        queue = deque([s])
        while queue and parent[t] < 0:
            u = queue.popleft()
            for v in adj[u]:
                if parent[v] < 0 and cap[u][v] > _FLOW_EPS:
                    parent[v] = u
                    queue.append(v)
        if parent[t] < 0:
            break
        f = math.inf
        v = t
        while v != s:
            u = parent[v]
            f = min(f, cap[u][v])
            v = u
        v = t
        while v != s:
            u = parent[v]
            cap[u][v] -= f
            cap[v][u] += f
            v = u

    reach = [False] * n
    reach[s] = True
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not reach[v] and cap[u][v] > _FLOW_EPS:
                reach[v] = True
                queue.append(v)
    cover_a = [i for i in range(p) if not reach[i]]
    cover_b = [j for j in range(q) if reach[p + j]]
    weight = sum(weights_a[i] for i in cover_a) + sum(weights_b[j] for j in cover_b)
    return cover_a, cover_b, weight


def _extend(A, B):
    """Split a support pair if a better-ordered refinement exists, else None."""
    if len(A) == 1 and len(B) == 1:
        return None
    na2 = sum(v * v for _, v in A)
    nb2 = sum(v * v for _, v in B)
    wa = [v * v / na2 for _, v in A]
    wb = [v * v / nb2 for _, v in B]
    edges = [
        (i, j)
        for i, (sa, _) in enumerate(A)
        for j, (sb, _) in enumerate(B)
        if not _masks_compatible(sa.mask, sb.mask)
    ]
    cover_a, cover_b, weight = min_weight_vertex_cover(wa, wb, edges)
    if weight >= 1.0 - _TIE_RTOL:
        return None
    in_a, in_b = set(cover_a), set(cover_b)
    c1 = tuple(A[i] for i in range(len(A)) if i in in_a)
    c2 = tuple(A[i] for i in range(len(A)) if i not in in_a)
    d1 = tuple(B[j] for j in range(len(B)) if j not in in_b)
    d2 = tuple(B[j] for j in range(len(B)) if j in in_b)
    if not (c1 and c2 and d1 and d2):
        return None
    return [(c1, d1), (c2, d2)]


def _merge_ties(pairs):
    # Pool adjacent pairs whose ratios are tied or out of order.
    out = []
    for a, b in pairs:
        out.append((a, b))
        while len(out) >= 2:
            (a0, b0), (a1, b1) = out[-2], out[-1]
            r0 = _norm(a0) / _norm(b0)
            r1 = _norm(a1) / _norm(b1)
            if r0 < r1 - _TIE_RTOL * max(r0, r1):
                break
            out[-2:] = [(a0 + a1, b0 + b1)]
    return out


def _sorted_side(side):
    return tuple(sorted(side, key=lambda x: x[0].mask))


def geodesic(t1: PhyloTree, t2: PhyloTree, pendant: bool = False) -> Geodesic:
    """Compute the geodesic from ``t1`` to ``t2``.

    Zero-length splits are ignored. The result is deterministic: support
    pairs list their splits in mask order.
    """
    if t1.taxa != t2.taxa:
        raise TreeError("trees are defined on different taxon sets")
    p1 = {s: v for s, v in t1.internal.items() if v > 0.0}
    p2 = {s: v for s, v in t2.internal.items() if v > 0.0}
    common = []
    only1 = []
    only2 = []
    for s, v in p1.items():
        if s in p2:
            common.append((s, v, p2[s]))
        else:
            only1.append((s, v))
    for s, v in p2.items():
        if s not in p1:
            only2.append((s, v))
    masks1 = [s.mask for s in p1]
    masks2 = [s.mask for s in p2]
    A = []
    B = []
    for s, v in only1:
        if all(_masks_compatible(s.mask, m) for m in masks2):
            common.append((s, v, 0.0))
        else:
            A.append((s, v))
    for s, v in only2:
        if all(_masks_compatible(s.mask, m) for m in masks1):
            common.append((s, 0.0, v))
        else:
            B.append((s, v))
    common.sort(key=lambda x: x[0].mask)

    pairs = []
    if A:
        pairs = [(_sorted_side(A), _sorted_side(B))]
        i = 0
        while i < len(pairs):
            refined = _extend(*pairs[i])
            if refined is None:
                i += 1
            else:
                pairs[i:i + 1] = refined
        pairs = _merge_ties(pairs)
        pairs = [(_sorted_side(a), _sorted_side(b)) for a, b in pairs]
    return Geodesic(t1, t2, tuple(common), tuple(pairs), pendant)


def _key(t: PhyloTree):
    pendant = sorted(t.pendant.items()) if t.pendant is not None else []
    return sorted((s.mask, v) for s, v in t.internal.items() if v > 0.0), pendant


def distance(t1: PhyloTree, t2: PhyloTree, pendant: bool = False) -> float:
    """Geodesic distance between two trees.

    The arguments are put in a canonical order first, so the result is
    exactly symmetric.
    """
    if _key(t2) < _key(t1):
        t1, t2 = t2, t1
    return geodesic(t1, t2, pendant).distance


def point_on_geodesic(g: Geodesic, lam: float) -> PhyloTree:
    """The tree at fraction ``lam`` of arc length along ``g``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if lam == 0.0:
        return g.t1
    if lam == 1.0:
        return g.t2
    internal = {}
    for s, l1, l2 in g.common:
        v = (1.0 - lam) * l1 + lam * l2
        if v > 0.0:
            internal[s] = v
    for a, b in g.support:
        na, nb = _norm(a), _norm(b)
        w = (1.0 - lam) * na - lam * nb
        if w > 0.0:
            for s, v in a:
                internal[s] = v * w / na
        elif w < 0.0:
            for s, v in b:
                internal[s] = -v * w / nb
    pendant = None
    if g.t1.pendant is not None or g.t2.pendant is not None:
        # A tree without pendant lengths counts as having them all zero.
        p1 = g.t1.pendant or {}
        p2 = g.t2.pendant or {}
        pendant = {
            lab: (1.0 - lam) * p1.get(lab, 0.0) + lam * p2.get(lab, 0.0) for lab in g.t1.taxa
        }
    return PhyloTree._trusted(g.t1.taxa, internal, pendant)


def cone_distance(t1: PhyloTree, t2: PhyloTree, pendant: bool = False) -> float:
    """Length of the path that treats all non-common splits as one support pair.

    Common splits (shared, or compatible with every split of the other tree)
    change linearly; every other split of ``t1`` shrinks to zero before any
    other split of ``t2`` grows. This path is always valid, so it bounds
    ``distance`` from above, with equality when the geodesic has a single
    support pair.
    """
    g = geodesic(t1, t2, pendant)
    a = [x for side, _ in g.support for x in side]
    b = [x for _, side in g.support for x in side]
    terms = [(l1 - l2) ** 2 for _, l1, l2 in g.common]
    if a:
        terms.append((_norm(a) + _norm(b)) ** 2)
    if pendant:
        terms.append(_pendant_sq(t1, t2))
    return math.sqrt(math.fsum(terms))
