"""Bounded 3D Voronoi diagrams by per-cell half-space clipping.

Every cell starts as the bounding box and is cut by the bisector planes of
its nearest candidates (from a KD-tree) in order of increasing distance.
Clipping for a cell stops once the next candidate lies beyond twice the
cell's farthest vertex, because no later bisector can reach the cell.

The clipping kernel exists twice: a compiled Cython module (``_clip``) and
a pure-Python fallback (``_clip_py``). The compiled one is used when it
imports; set ``REALSPACE_QC_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import _clip_py
from .errors import InternalConsistencyError, ParameterError

try:
    if os.environ.get("REALSPACE_QC_PURE_PYTHON") == "1":
        raise ImportError("pure-Python backend requested")
    from . import _clip as _clip_compiled
except ImportError:
    _clip_compiled = None

BACKENDS = {"python": _clip_py.clip_cells}
if _clip_compiled is not None:
    BACKENDS["cython"] = _clip_compiled.clip_cells
DEFAULT_BACKEND = "cython" if _clip_compiled is not None else "python"

MIN_FACET_AREA = 1e-12
DEFAULT_PAD = 10.0

__all__ = [
    "BoundingBox",
    "VoronoiDiagram",
    "build_diagram",
    "facet_area",
    "cell_volume",
    "diagram_for_grid",
    "DEFAULT_BACKEND",
    "BACKENDS",
]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box that truncates the outer Voronoi cells."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if not np.all(hi > lo):
            raise ParameterError("box max must exceed box min in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, points, margin=0.0) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p > self.lo + margin) & (p < self.hi - margin), axis=1)

    @classmethod
    def around(cls, points, pad: float) -> "BoundingBox":
        """Bounding box of ``points`` grown by ``pad`` on every side."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(p.min(axis=0) - pad, p.max(axis=0) + pad)

    @classmethod
    def for_molecule(cls, molecule, max_radius: float = 0.0) -> "BoundingBox":
        """Default box: nuclei bounding box padded by max(1.25 * max_radius, 10 bohr)."""
        return cls.around(molecule.positions, max(1.25 * max_radius, DEFAULT_PAD))


@dataclass(frozen=True)
class VoronoiDiagram:
    """Cell volumes and facet data in compressed-row (CSR) layout.

    For cell ``m`` the facets are ``indptr[m]:indptr[m+1]``; ``indices`` holds
    the neighbor, ``areas`` the facet area (mean of the two one-sided values),
    ``distances`` the generator separation and ``normals`` the unit vector
    from ``r_m`` towards ``r_n``. ``box_areas[m, k]`` is the area of box
    face k (x-, x+, y-, y+, z-, z+) bounding cell m.
    """

    points: np.ndarray
    box: BoundingBox
    volumes: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    areas: np.ndarray
    distances: np.ndarray
    normals: np.ndarray
    box_areas: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.points)

    @property
    def boundary(self) -> np.ndarray:
        """True for cells that touch the bounding box."""
        return self.box_areas.sum(axis=1) > 0

    @property
    def rows(self) -> np.ndarray:
        """Owning cell of every facet entry (expanded ``indptr``)."""
        return np.repeat(np.arange(self.n_cells), np.diff(self.indptr))

    def neighbors(self, m: int) -> np.ndarray:
        return self.indices[self.indptr[m] : self.indptr[m + 1]]

    def facet_areas(self, m: int) -> np.ndarray:
        return self.areas[self.indptr[m] : self.indptr[m + 1]]

    def closure_defect(self) -> np.ndarray:
        """Per-cell ``|sum_n sigma_mn rhat_mn|`` (zero for closed interior cells)."""
        acc = np.zeros((self.n_cells, 3))
        np.add.at(acc, self.rows, self.areas[:, None] * self.normals)
        return np.linalg.norm(acc, axis=1)

    def to_dict(self) -> dict:
        return {
            "volumes": self.volumes.tolist(),
            "neighbors": [self.neighbors(m).tolist() for m in range(self.n_cells)],
            "facet_areas": [self.facet_areas(m).tolist() for m in range(self.n_cells)],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    def stats(self) -> dict:
        deg = np.diff(self.indptr)
        return {
            "n_cells": int(self.n_cells),
            "n_facets": int(len(self.indices) // 2),
            "boundary_cells": int(self.boundary.sum()),
            "volume_total": float(self.volumes.sum()),
            "box_volume": self.box.volume,
            "volume_min": float(self.volumes.min()),
            "volume_max": float(self.volumes.max()),
            "neighbors_mean": float(deg.mean()) if len(deg) else 0.0,
            "neighbors_max": int(deg.max()) if len(deg) else 0,
            "closure_defect_max_interior": float(
                (self.closure_defect()[~self.boundary]).max(initial=0.0)
            ),
        }


def facet_area(vertices, midpoint) -> float:
    """Area of a planar polygon from its cyclically ordered vertices.

    Uses the fan of triangles around ``midpoint``. The triangle normals are
    summed as vectors before taking the norm, so the result is the polygon
    area even when the reference point sits on or outside an edge; for a
    reference inside the polygon it equals the sum of triangle areas.
    Fewer than three vertices give 0 (degenerate facet).
    """
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    d = v - np.asarray(midpoint, dtype=float)
    cross = np.cross(d, np.roll(d, -1, axis=0)).sum(axis=0)
    return 0.5 * float(np.linalg.norm(cross))


def cell_volume(areas, distances, box_areas=(), box_heights=()) -> float:
    """Volume of a convex cell as a sum of pyramids over its facets.

    Neighbor facets contribute ``|r_m - r_n| * sigma / 6`` (pyramid height is
    half the generator separation). Box faces are pseudo-facets whose
    "separation" is twice the distance from the generator to that face.
    """
    areas = np.asarray(areas, dtype=float)
    distances = np.asarray(distances, dtype=float)
    if areas.shape != distances.shape:
        raise ParameterError("areas and distances must have the same length")
    vol = float(np.dot(areas, distances)) / 6.0
    vol += float(np.dot(np.asarray(box_areas, dtype=float), 2.0 * np.asarray(box_heights, dtype=float))) / 6.0
    if not vol > 0:
        raise InternalConsistencyError("open or degenerate cell: non-positive volume")
    return vol


def _validate(points, box):
    pts = np.ascontiguousarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ParameterError("need a non-empty (N, 3) array of points")
    if not np.all(np.isfinite(pts)):
        raise ParameterError("points must be finite")
    if not box.contains(pts).all():
        raise ParameterError("every point must lie strictly inside the bounding box")
    if len(pts) > 1:
        dist, _ = cKDTree(pts).query(pts, k=2)
        if np.any(dist[:, 1] == 0.0):
            raise ParameterError("duplicate points")
    return pts


def _candidates(tree, pts, cells, k):
    """Nearest ``k`` other points for each cell, padded with -1."""
    k = min(k, len(pts) - 1)
    if k <= 0:
        return np.full((len(cells), 1), -1, dtype=np.int64)
    _, idx = tree.query(pts[cells], k=k + 1)
    idx = np.asarray(idx, dtype=np.int64).reshape(len(cells), k + 1)
    # the query point itself comes first; distinct points guarantee it
    cand = idx[:, 1:]
    cand[cand >= len(pts)] = -1
    return np.ascontiguousarray(cand)


def build_diagram(points, box: BoundingBox, backend: str | None = None, k_initial: int = 32) -> VoronoiDiagram:
    """Voronoi diagram of ``points`` truncated to ``box``.

    Parameters
    ----------
    points : (N, 3) array_like
        Generators, pairwise distinct and strictly inside ``box``.
    box : BoundingBox
    backend : {"cython", "python"}, optional
        Clipping kernel. Defaults to the compiled one when available.
    k_initial : int
        Initial number of KD-tree candidates per cell; doubled for cells
        whose candidate list runs out before the security radius.

    Returns
    -------
    VoronoiDiagram
    """
    backend = backend or DEFAULT_BACKEND
    if backend not in BACKENDS:
        raise ParameterError(f"unknown or unavailable backend {backend!r}; have {sorted(BACKENDS)}")
    clip = BACKENDS[backend]
    pts = _validate(points, box)
    n = len(pts)
    tree = cKDTree(pts)

    owners, labels, areas = [], [], []
    todo = np.arange(n, dtype=np.int64)
    k = max(1, int(k_initial))
    while len(todo):
        cand = _candidates(tree, pts, todo, k)
        o, lab, a, done = clip(pts, todo, cand, box.lo, box.hi)
        finished = set(todo[done].tolist())
        keep = np.fromiter((x in finished for x in o), dtype=bool, count=len(o))
        owners.append(o[keep])
        labels.append(lab[keep])
        areas.append(a[keep])
        todo = np.ascontiguousarray(todo[~done])
        k *= 2
    owner = np.concatenate(owners)
    label = np.concatenate(labels)
    area = np.concatenate(areas)
    return _assemble(pts, box, owner, label, area)


def _assemble(pts, box, owner, label, area):
    n = len(pts)
    is_box = label < 0
    box_areas = np.zeros((n, 6))
    np.add.at(box_areas, (owner[is_box], -1 - label[is_box]), area[is_box])
    heights = np.concatenate([pts - box.lo, box.hi - pts], axis=1)[:, [0, 3, 1, 4, 2, 5]]

    nb = ~is_box
    m_raw, n_raw, a_raw = owner[nb], label[nb], area[nb]
    d_raw = np.linalg.norm(pts[n_raw] - pts[m_raw], axis=1)

    # Volumes from the one-sided facet areas: the pyramids tile the cell exactly.
    volumes = np.zeros(n)
    np.add.at(volumes, m_raw, a_raw * d_raw / 6.0)
    volumes += (box_areas * 2.0 * heights).sum(axis=1) / 6.0
    if not np.all(volumes > 0):
        raise InternalConsistencyError("non-positive cell volume")

    # Symmetric adjacency with averaged areas; drop noise facets.
    sel = a_raw > MIN_FACET_AREA
    m_raw, n_raw, a_raw = m_raw[sel], n_raw[sel], a_raw[sel]
    lo = np.minimum(m_raw, n_raw)
    hi = np.maximum(m_raw, n_raw)
    key = lo * n + hi
    uniq, inv, cnt = np.unique(key, return_inverse=True, return_counts=True)
    area_sum = np.bincount(inv, weights=a_raw, minlength=len(uniq))
    mean_area = area_sum / cnt
    # A facet seen from only one side keeps that side's value.
    pl, ph = uniq // n, uniq % n
    rows = np.concatenate([pl, ph])
    cols = np.concatenate([ph, pl])
    vals = np.concatenate([mean_area, mean_area])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    diff = pts[cols] - pts[rows]
    dist = np.linalg.norm(diff, axis=1)
    normals = diff / dist[:, None]
    return VoronoiDiagram(
        points=pts,
        box=box,
        volumes=volumes,
        indptr=indptr,
        indices=cols.astype(np.int64),
        areas=vals,
        distances=dist,
        normals=normals,
        box_areas=box_areas,
    )


def diagram_for_grid(grid, molecule, pad: float | None = None, backend: str | None = None) -> VoronoiDiagram:
    """Diagram of a molecular grid in the default molecule-padded box."""
    if pad is None:
        box = BoundingBox.for_molecule(molecule, grid.max_radius)
    else:
        box = BoundingBox.around(molecule.positions, pad)
    if not box.contains(grid.points).all():
        box = BoundingBox(
            np.minimum(box.lo, grid.points.min(axis=0) - 1.0),
            np.maximum(box.hi, grid.points.max(axis=0) + 1.0),
        )
    return build_diagram(grid.points, box, backend=backend)
