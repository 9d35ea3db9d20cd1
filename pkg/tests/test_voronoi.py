import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial import ConvexHull, Voronoi

from conftest import lattice_diagram, random_diagram
from realspace_qc import _clip_py
from realspace_qc.errors import InternalConsistencyError, ParameterError
from realspace_qc.voronoi import BACKENDS, BoundingBox, build_diagram, cell_volume, facet_area

UNIT_BOX = BoundingBox([-1.0] * 3, [1.0] * 3)


def test_single_point_fills_box():
    d = build_diagram([[0.1, 0.2, -0.3]], UNIT_BOX)
    assert d.volumes[0] == pytest.approx(8.0, rel=1e-14)
    assert len(d.neighbors(0)) == 0
    assert d.boundary[0]


def test_cubic_lattice_center_cell():
    d = lattice_diagram(3)
    c = 13
    assert d.volumes[c] == pytest.approx(1.0, abs=1e-12)
    assert sorted(d.neighbors(c)) == [4, 10, 12, 14, 16, 22]
    np.testing.assert_allclose(d.facet_areas(c), 1.0, atol=1e-12)
    assert not d.boundary[c]


def test_two_points_share_box_cross_section():
    box = BoundingBox([-2, -1, -0.5], [2, 1, 0.5])
    d = build_diagram([[-0.7, 0, 0], [0.3, 0.1, 0.2]], box)
    # the bisector is tilted, so the facet is the box cross-section over cos(tilt)
    tilt = np.array([1.0, 0.1, 0.2]) / np.linalg.norm([1.0, 0.1, 0.2])
    np.testing.assert_allclose(d.areas, 2.0 / tilt[0], rtol=1e-13)
    d = build_diagram([[-0.7, 0, 0], [0.3, 0, 0]], box)
    np.testing.assert_allclose(d.areas, 2.0, rtol=1e-13)
    assert d.volumes.sum() == pytest.approx(box.volume, rel=1e-13)
    # bisector at x = -0.2
    assert d.volumes[0] == pytest.approx(1.8 * 2.0 * 1.0, rel=1e-13)


def test_facet_area_examples():
    square = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    assert facet_area(square, [0.5, 0.5, 0]) == pytest.approx(1.0)
    tri = [[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0]]
    centroid = np.mean(tri, axis=0)
    assert facet_area(tri, centroid) == pytest.approx(math.sqrt(3) / 4, abs=1e-15)
    assert facet_area(tri[::-1], centroid) == pytest.approx(facet_area(tri, centroid), abs=1e-15)
    assert facet_area(tri[:2], centroid) == 0.0


@given(arrays(float, (7, 2), elements=st.floats(-3, 3)), st.floats(-2, 2), st.floats(-2, 2))
def test_facet_area_independent_of_reference(xy, rx, ry):
    from scipy.spatial import QhullError

    try:
        hull = ConvexHull(xy)
    except QhullError:
        return
    if hull.volume < 1e-3:
        return
    poly = np.column_stack([xy[hull.vertices], np.zeros(len(hull.vertices))])
    assert facet_area(poly, [rx, ry, 0.0]) == pytest.approx(hull.volume, rel=1e-10, abs=1e-12)


def test_cell_volume_unit_cube():
    assert cell_volume([1.0] * 6, [1.0] * 6) == pytest.approx(1.0)
    with pytest.raises(InternalConsistencyError):
        cell_volume([], [])


def test_octahedral_cell_matches_convex_hull():
    corners = 2.0 * np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    pts = np.vstack([[0.0, 0.0, 0.0], corners])
    box = BoundingBox([-5.0] * 3, [5.0] * 3)
    d = build_diagram(pts, box)
    verts, _, _ = _clip_py.cell_polyhedron(pts[0], range(1, 9), pts, box.lo, box.hi)
    # |x| + |y| + |z| <= 3 has volume (4/3) * 27
    assert ConvexHull(verts).volume == pytest.approx(36.0, rel=1e-12)
    assert d.volumes[0] == pytest.approx(36.0, rel=1e-12)


def test_interior_volumes_match_qhull():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-2, 2, (150, 3))
    box = BoundingBox([-3.0] * 3, [3.0] * 3)
    d = build_diagram(pts, box)
    vor = Voronoi(pts)
    checked = 0
    for m, reg in enumerate(vor.point_region):
        region = vor.regions[reg]
        if -1 in region or not region:
            continue
        v = vor.vertices[region]
        if not box.contains(v).all():
            continue
        assert d.volumes[m] == pytest.approx(ConvexHull(v).volume, rel=1e-9)
        checked += 1
    assert checked > 20


def test_lattice_volumes_partition_box():
    d = lattice_diagram(3)
    np.testing.assert_allclose(d.volumes, 1.0, atol=1e-12)
    assert d.volumes.sum() == pytest.approx(d.box.volume, rel=1e-12)


point_clouds = st.integers(1, 40).flatmap(
    lambda n: arrays(float, (n, 3), elements=st.floats(-1.9, 1.9), unique=True)
)


def _distinct(points):
    if len(points) < 2:
        return True
    d = np.linalg.norm(points[:, None] - points[None, :], axis=-1) + np.eye(len(points))
    return d.min() > 1e-3


@settings(max_examples=60, deadline=None)
@given(point_clouds, st.sampled_from(sorted(BACKENDS)))
def test_diagram_invariants(points, backend):
    if not _distinct(points):
        return
    box = BoundingBox([-2.0] * 3, [2.0] * 3)
    d = build_diagram(points, box, backend=backend)
    assert np.all(d.volumes > 0)
    assert d.volumes.sum() == pytest.approx(box.volume, rel=1e-8)
    pairs = set(zip(d.rows.tolist(), d.indices.tolist()))
    assert all((n, m) in pairs for m, n in pairs)
    # facet normals point from r_m to r_n
    expect = points[d.indices] - points[d.rows]
    np.testing.assert_allclose(d.normals * d.distances[:, None], expect, atol=1e-12)
    # closure of interior cells
    acc = np.zeros((d.n_cells, 3))
    np.add.at(acc, d.rows, d.areas[:, None] * d.normals)
    sums = np.bincount(d.rows, weights=d.areas, minlength=d.n_cells)
    interior = ~d.boundary
    assert np.all(np.linalg.norm(acc[interior], axis=1) <= 1e-9 * np.maximum(sums[interior], 1.0))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10_000))
def test_one_sided_facet_areas_are_reciprocal(n, seed):
    pts = np.random.default_rng(seed).uniform(-1.5, 1.5, (n, 3))
    box = BoundingBox([-2.0] * 3, [2.0] * 3)
    cand = np.array([[j for j in np.argsort(np.linalg.norm(pts - p, axis=1)) if j != i] for i, p in enumerate(pts)])
    owner, label, area, done = _clip_py.clip_cells(pts, np.arange(n), cand, box.lo, box.hi)
    assert done.all()
    one_sided = {(int(o), int(l)): a for o, l, a in zip(owner, label, area) if l >= 0 and a > 1e-12}
    for (m, k), a in one_sided.items():
        assert one_sided[(k, m)] == pytest.approx(a, rel=1e-10, abs=1e-14)


def test_facet_vertices_lie_on_bisectors():
    pts = np.random.default_rng(11).uniform(-1, 1, (25, 3))
    box = BoundingBox([-1.5] * 3, [1.5] * 3)
    d = build_diagram(pts, box)
    for m in range(d.n_cells):
        verts, faces, labels = _clip_py.cell_polyhedron(pts[m], d.neighbors(m), pts, box.lo, box.hi)
        for face, lab in zip(faces, labels):
            if lab < 0:
                continue
            v = verts[face]
            gap = np.linalg.norm(v - pts[m], axis=1) - np.linalg.norm(v - pts[lab], axis=1)
            assert np.abs(gap).max() < 1e-12
            mid = 0.5 * (pts[m] + pts[lab])
            assert np.linalg.norm(mid - pts[m]) == pytest.approx(np.linalg.norm(mid - pts[lab]), abs=1e-12)


def test_membership_matches_nearest_point():
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1, 1, (40, 3))
    box = BoundingBox([-1.2] * 3, [1.2] * 3)
    d = build_diagram(pts, box)
    samples = rng.uniform(box.lo, box.hi, (100_000, 3))
    nearest = np.argmin(((samples[:, None, :] - pts[None]) ** 2).sum(-1), axis=1)
    owner = np.full(len(samples), -1)
    hits = np.zeros(len(samples), dtype=int)
    for m in range(d.n_cells):
        nb = d.neighbors(m)
        mids = 0.5 * (pts[m] + pts[nb])
        rhat = d.normals[d.indptr[m] : d.indptr[m + 1]]
        inside = np.all(np.einsum("skd,kd->sk", samples[:, None, :] - mids[None], rhat) <= 0, axis=1)
        owner[inside] = m
        hits += inside
    assert np.all(hits == 1)
    assert np.array_equal(owner, nearest)


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernel not built")
def test_backends_agree():
    pts = np.random.default_rng(2).uniform(-2, 2, (300, 3))
    box = BoundingBox([-3.0] * 3, [3.0] * 3)
    a = build_diagram(pts, box, backend="cython")
    b = build_diagram(pts, box, backend="python")
    np.testing.assert_array_equal(a.indptr, b.indptr)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.volumes, b.volumes, rtol=1e-12)
    np.testing.assert_allclose(a.areas, b.areas, rtol=1e-10, atol=1e-14)


def test_small_candidate_lists_are_extended():
    pts = np.random.default_rng(4).uniform(-2, 2, (80, 3))
    box = BoundingBox([-3.0] * 3, [3.0] * 3)
    a = build_diagram(pts, box, k_initial=1)
    b = build_diagram(pts, box)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.volumes, b.volumes, rtol=1e-12)


def test_input_validation():
    with pytest.raises(ParameterError):
        build_diagram([[0, 0, 0], [0, 0, 0]], UNIT_BOX)
    with pytest.raises(ParameterError):
        build_diagram([[2.0, 0, 0]], UNIT_BOX)
    with pytest.raises(ParameterError):
        build_diagram(np.zeros((0, 3)), UNIT_BOX)
    with pytest.raises(ParameterError):
        build_diagram([[0, 0, 0]], UNIT_BOX, backend="fortran")
    with pytest.raises(ParameterError):
        BoundingBox([0, 0, 0], [1, 0, 1])


def test_json_export(tmp_path):
    d = random_diagram(10)
    d.write_json(tmp_path / "v.json")
    doc = json.loads((tmp_path / "v.json").read_text())
    assert set(doc) == {"volumes", "neighbors", "facet_areas"}
    assert [len(x) for x in doc["neighbors"]] == [len(x) for x in doc["facet_areas"]]
    assert d.stats()["volume_total"] == pytest.approx(d.box.volume)
