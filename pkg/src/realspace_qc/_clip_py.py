"""Pure-Python Voronoi cell clipper (fallback for the compiled ``_clip``).

A cell starts as the bounding box and is cut by the bisector planes of
candidate neighbors taken in increasing distance. Clipping stops once the
next candidate's half-distance exceeds the farthest cell vertex (security
radius), after which no further bisector can touch the cell.

Face labels: ``n >= 0`` is the neighbor whose bisector produced the face;
``-1 - k`` is box face k in the order (x-, x+, y-, y+, z-, z+).
"""

import math

import numpy as np

EPS_REL = 1e-10


def _box_cell(lo, hi):
    verts = [
        [lo[0], lo[1], lo[2]],
        [hi[0], lo[1], lo[2]],
        [hi[0], hi[1], lo[2]],
        [lo[0], hi[1], lo[2]],
        [lo[0], lo[1], hi[2]],
        [hi[0], lo[1], hi[2]],
        [hi[0], hi[1], hi[2]],
        [lo[0], hi[1], hi[2]],
    ]
    faces = [
        [0, 3, 7, 4],
        [1, 5, 6, 2],
        [0, 4, 5, 1],
        [3, 2, 6, 7],
        [0, 1, 2, 3],
        [4, 7, 6, 5],
    ]
    labels = [-1, -2, -3, -4, -5, -6]
    return verts, faces, labels


def _clip(verts, faces, labels, nrm, d, label, eps):
    s = [nrm[0] * v[0] + nrm[1] * v[1] + nrm[2] * v[2] - d for v in verts]
    if max(s) <= eps:
        return verts, faces, labels, False
    edge_new = {}
    new_faces, new_labels = [], []
    for face, lab in zip(faces, labels):
        out = []
        nf = len(face)
        for k in range(nf):
            a = face[k]
            b = face[(k + 1) % nf]
            ina = s[a] <= eps
            inb = s[b] <= eps
            if ina:
                out.append(a)
            if ina != inb:
                i_in, i_out = (a, b) if ina else (b, a)
                if s[i_in] < -eps:
                    key = (a, b) if a < b else (b, a)
                    idx = edge_new.get(key)
                    if idx is None:
                        t = s[i_in] / (s[i_in] - s[i_out])
                        p, q = verts[i_in], verts[i_out]
                        verts.append([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]), p[2] + t * (q[2] - p[2])])
                        s.append(0.0)
                        idx = len(verts) - 1
                        edge_new[key] = idx
                    out.append(idx)
        if len(out) >= 3:
            new_faces.append(out)
            new_labels.append(lab)

    used = sorted({i for f in new_faces for i in f})
    cap = [i for i in used if abs(s[i]) <= eps]
    if len(cap) >= 3:
        cx = sum(verts[i][0] for i in cap) / len(cap)
        cy = sum(verts[i][1] for i in cap) / len(cap)
        cz = sum(verts[i][2] for i in cap) / len(cap)
        u, w = _plane_basis(nrm)
        ang = []
        for i in cap:
            dx, dy, dz = verts[i][0] - cx, verts[i][1] - cy, verts[i][2] - cz
            ang.append(math.atan2(dx * w[0] + dy * w[1] + dz * w[2], dx * u[0] + dy * u[1] + dz * u[2]))
        cap = [i for _, i in sorted(zip(ang, cap))]
        new_faces.append(cap)
        new_labels.append(label)

    remap = {old: k for k, old in enumerate(used)}
    verts = [verts[i] for i in used]
    faces = [[remap[i] for i in f] for f in new_faces]
    return verts, faces, new_labels, True


def _plane_basis(nrm):
    ax = min(range(3), key=lambda k: abs(nrm[k]))
    e = [0.0, 0.0, 0.0]
    e[ax] = 1.0
    u = [
        nrm[1] * e[2] - nrm[2] * e[1],
        nrm[2] * e[0] - nrm[0] * e[2],
        nrm[0] * e[1] - nrm[1] * e[0],
    ]
    nu = math.sqrt(u[0] ** 2 + u[1] ** 2 + u[2] ** 2)
    u = [c / nu for c in u]
    w = [
        nrm[1] * u[2] - nrm[2] * u[1],
        nrm[2] * u[0] - nrm[0] * u[2],
        nrm[0] * u[1] - nrm[1] * u[0],
    ]
    return u, w


def _polygon_area(verts, face, ref):
    sx = sy = sz = 0.0
    nf = len(face)
    for k in range(nf):
        p = verts[face[k]]
        q = verts[face[(k + 1) % nf]]
        ax, ay, az = p[0] - ref[0], p[1] - ref[1], p[2] - ref[2]
        bx, by, bz = q[0] - ref[0], q[1] - ref[1], q[2] - ref[2]
        sx += ay * bz - az * by
        sy += az * bx - ax * bz
        sz += ax * by - ay * bx
    return 0.5 * math.sqrt(sx * sx + sy * sy + sz * sz)


def clip_cells(points, cells, cand, box_lo, box_hi, eps_rel=EPS_REL):
    """Clip the cells listed in ``cells``.

    ``cand[k]`` holds candidate neighbor indices for ``cells[k]`` sorted by
    distance (``-1`` pads). Returns ``(face_owner, face_label, face_area,
    done)`` where ``done[k]`` is False if the candidate list ran out before
    the security radius was reached.
    """
    points = np.asarray(points, dtype=float)
    pts = points.tolist()
    lo = [float(c) for c in box_lo]
    hi = [float(c) for c in box_hi]
    owner, lab_out, area_out = [], [], []
    done = np.zeros(len(cells), dtype=bool)
    for k, m in enumerate(cells):
        rm = pts[m]
        verts, faces, labels = _box_cell(lo, hi)
        r2max = max((v[0] - rm[0]) ** 2 + (v[1] - rm[1]) ** 2 + (v[2] - rm[2]) ** 2 for v in verts)
        finished = True
        row = cand[k]
        for j in range(len(row) + 1):
            if j == len(row) or row[j] < 0:
                finished = j < len(row) or len(row) + 1 >= len(pts)
                break
            n = int(row[j])
            rn = pts[n]
            dx, dy, dz = rn[0] - rm[0], rn[1] - rm[1], rn[2] - rm[2]
            dist2 = dx * dx + dy * dy + dz * dz
            if dist2 > 4.0 * r2max:
                break
            dist = math.sqrt(dist2)
            nrm = (dx / dist, dy / dist, dz / dist)
            mid = (0.5 * (rm[0] + rn[0]), 0.5 * (rm[1] + rn[1]), 0.5 * (rm[2] + rn[2]))
            d = nrm[0] * mid[0] + nrm[1] * mid[1] + nrm[2] * mid[2]
            eps = eps_rel * math.sqrt(r2max)
            verts, faces, labels, cut = _clip(verts, faces, labels, nrm, d, n, eps)
            if cut:
                r2max = max((v[0] - rm[0]) ** 2 + (v[1] - rm[1]) ** 2 + (v[2] - rm[2]) ** 2 for v in verts)
        done[k] = finished
        for face, lab in zip(faces, labels):
            if lab >= 0:
                rn = pts[lab]
                ref = (0.5 * (rm[0] + rn[0]), 0.5 * (rm[1] + rn[1]), 0.5 * (rm[2] + rn[2]))
            else:
                ref = verts[face[0]]
            owner.append(m)
            lab_out.append(lab)
            area_out.append(_polygon_area(verts, face, ref))
    return (
        np.array(owner, dtype=np.int64),
        np.array(lab_out, dtype=np.int64),
        np.array(area_out, dtype=float),
        done,
    )


def cell_polyhedron(point, neighbors, points, box_lo, box_hi, eps_rel=EPS_REL):
    """Vertices, faces and labels of one clipped cell (for inspection and tests)."""
    pts = np.asarray(points, dtype=float).tolist()
    rm = [float(c) for c in point]
    verts, faces, labels = _box_cell([float(c) for c in box_lo], [float(c) for c in box_hi])
    for n in neighbors:
        rn = pts[n]
        dx, dy, dz = rn[0] - rm[0], rn[1] - rm[1], rn[2] - rm[2]
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        nrm = (dx / dist, dy / dist, dz / dist)
        d = nrm[0] * 0.5 * (rm[0] + rn[0]) + nrm[1] * 0.5 * (rm[1] + rn[1]) + nrm[2] * 0.5 * (rm[2] + rn[2])
        r = max(math.dist(v, rm) for v in verts)
        verts, faces, labels, _ = _clip(verts, faces, labels, nrm, d, int(n), eps_rel * r)
    return np.array(verts), faces, labels
