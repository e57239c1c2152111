"""The modified log map: tree space to R^m, anchored at a base tree.

For a base tree with coordinates ``t`` and a target ``T``, take any tree ``s``
strictly before the first support-pair exchange on the geodesic from the base
to ``T``. Its lengths, read in the base's split order, give the direction of
the first geodesic segment; the map is ``t + (s - t) / |s - t| * d(base, T)``.
Targets in the base's own orthant map to their own coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CoordinateFrame, PhyloTree, TreeError
from .geodesic import Geodesic, geodesic, point_on_geodesic

__all__ = ["LogMapVector", "log_map", "batch_log_map", "log_map_matrix", "tangent_components"]


@dataclass(frozen=True, eq=False)
class LogMapVector:
    """Coordinates of a tree under the log map of ``frame``, in ``frame.order``."""

    frame: CoordinateFrame
    coords: np.ndarray
    distance: float

    def __iter__(self):
        return iter(self.coords)

    def __len__(self):
        return len(self.coords)

    def as_dict(self) -> dict:
        return dict(zip(self.frame.order, self.coords.tolist()))


def tangent_components(g: Geodesic, lam_fraction: float = 0.5) -> dict:
    """Initial direction of ``g`` scaled to the geodesic length.

    Returns a map from split to component, covering the start tree's positive
    splits and any split that starts growing immediately. The direction is read
    off the tree at ``lam_fraction`` of the way to the first support exchange.
    """
    d = g.distance
    if d == 0.0:
        return {}
    if not 0.0 < lam_fraction < 1.0:
        raise ValueError("lam_fraction must lie strictly between 0 and 1")
    lam = lam_fraction * g.first_crossing
    s = point_on_geodesic(g, lam)
    base = g.t1.internal
    diff = {}
    for split, v in base.items():
        if v > 0.0:
            diff[split] = s.internal.get(split, 0.0) - v
    for split, v in s.internal.items():
        if split not in diff:
            diff[split] = v - base.get(split, 0.0)
    norm = math.sqrt(sum(v * v for v in diff.values()))
    if norm == 0.0:
        return {}
    scale = d / norm
    return {split: v * scale for split, v in diff.items()}


def log_map(frame: CoordinateFrame, target: PhyloTree, lam_fraction: float = 0.5) -> LogMapVector:
    """Image of ``target`` under the log map of ``frame``.

    Parameters
    ----------
    frame : CoordinateFrame
        Base tree and split order. On a reduced frame (non-binary base) the
        result is the projection of the tangent vector onto the retained
        splits, so the norm identity no longer holds exactly.
    target : PhyloTree
        Tree on the same taxa as the base.
    lam_fraction : float
        Where to read the initial direction, as a fraction of the first
        support exchange. The result does not depend on it.
    """
    base = frame.base
    if target.taxa != base.taxa:
        raise TreeError("target tree is defined on a different taxon set than the frame")
    t = frame.base_coords
    tops = target.topology()
    if tops <= set(frame.order):
        coords = np.array([target.internal.get(s, 0.0) for s in frame.order], dtype=float)
        return LogMapVector(frame, coords, float(np.linalg.norm(coords - t)))
    g = geodesic(base, target)
    comps = tangent_components(g, lam_fraction)
    coords = t + np.array([comps.get(s, 0.0) for s in frame.order], dtype=float)
    return LogMapVector(frame, coords, g.distance)


def batch_log_map(frame: CoordinateFrame, trees) -> list:
    return [log_map(frame, t) for t in trees]


def log_map_matrix(frame: CoordinateFrame, trees) -> np.ndarray:
    """Stack log maps of ``trees`` as rows of an ``n x m`` array."""
    rows = [log_map(frame, t).coords for t in trees]
    if not rows:
        return np.zeros((0, frame.dim))
    return np.vstack(rows)
