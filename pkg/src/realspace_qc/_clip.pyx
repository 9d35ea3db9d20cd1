# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Voronoi cell clipper; same algorithm and outputs as ``_clip_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, atan2, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF MAXV = 1024
DEF MAXF = 256
DEF MAXFV = 96


cdef struct Cell:
    double V[MAXV][3]
    int nv
    int F[MAXF][MAXFV]
    int FL[MAXF]
    int lab[MAXF]
    int nf


cdef struct Scratch:
    double s[MAXV]
    int ea[MAXV]
    int eb[MAXV]
    int en[MAXV]
    int tmp[MAXFV]
    int used[MAXV]
    int remap[MAXV]
    int cap[MAXV]
    double ang[MAXV]


cdef void box_cell(Cell* c, double* lo, double* hi) nogil:
    cdef int i
    cdef int faces[24]
    faces[:] = [0, 3, 7, 4, 1, 5, 6, 2, 0, 4, 5, 1, 3, 2, 6, 7, 0, 1, 2, 3, 4, 7, 6, 5]
    c.V[0][0] = lo[0]; c.V[0][1] = lo[1]; c.V[0][2] = lo[2]
    c.V[1][0] = hi[0]; c.V[1][1] = lo[1]; c.V[1][2] = lo[2]
    c.V[2][0] = hi[0]; c.V[2][1] = hi[1]; c.V[2][2] = lo[2]
    c.V[3][0] = lo[0]; c.V[3][1] = hi[1]; c.V[3][2] = lo[2]
    c.V[4][0] = lo[0]; c.V[4][1] = lo[1]; c.V[4][2] = hi[2]
    c.V[5][0] = hi[0]; c.V[5][1] = lo[1]; c.V[5][2] = hi[2]
    c.V[6][0] = hi[0]; c.V[6][1] = hi[1]; c.V[6][2] = hi[2]
    c.V[7][0] = lo[0]; c.V[7][1] = hi[1]; c.V[7][2] = hi[2]
    c.nv = 8
    c.nf = 6
    for i in range(6):
        c.F[i][0] = faces[4 * i]
        c.F[i][1] = faces[4 * i + 1]
        c.F[i][2] = faces[4 * i + 2]
        c.F[i][3] = faces[4 * i + 3]
        c.FL[i] = 4
        c.lab[i] = -1 - i


cdef double max_r2(Cell* c, double* rm) nogil:
    cdef double r2 = 0.0, dx, dy, dz, t
    cdef int i
    for i in range(c.nv):
        dx = c.V[i][0] - rm[0]
        dy = c.V[i][1] - rm[1]
        dz = c.V[i][2] - rm[2]
        t = dx * dx + dy * dy + dz * dz
        if t > r2:
            r2 = t
    return r2


cdef void plane_basis(double* nrm, double* u, double* w) nogil:
    cdef int ax = 0
    cdef double e[3]
    cdef double nu
    if fabs(nrm[1]) < fabs(nrm[ax]):
        ax = 1
    if fabs(nrm[2]) < fabs(nrm[ax]):
        ax = 2
    e[0] = 0.0; e[1] = 0.0; e[2] = 0.0
    e[ax] = 1.0
    u[0] = nrm[1] * e[2] - nrm[2] * e[1]
    u[1] = nrm[2] * e[0] - nrm[0] * e[2]
    u[2] = nrm[0] * e[1] - nrm[1] * e[0]
    nu = sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
    u[0] /= nu; u[1] /= nu; u[2] /= nu
    w[0] = nrm[1] * u[2] - nrm[2] * u[1]
    w[1] = nrm[2] * u[0] - nrm[0] * u[2]
    w[2] = nrm[0] * u[1] - nrm[1] * u[0]


# Returns 1 if the cell was cut, 0 if untouched, -1 on buffer overflow.
cdef int clip(Cell* c, Cell* out, Scratch* sc, double* nrm, double d, int label, double eps) nogil:
    cdef int i, k, f, a, b, i_in, i_out, nt, idx, ne = 0, nv, ncap
    cdef bint ina, inb, any_out = 0
    cdef double t, cx, cy, cz, dx, dy, dz, key_ang
    cdef double u[3]
    cdef double w[3]
    cdef int key_a, key_b, tmpi
    nv = c.nv
    for i in range(nv):
        sc.s[i] = nrm[0] * c.V[i][0] + nrm[1] * c.V[i][1] + nrm[2] * c.V[i][2] - d
        if sc.s[i] > eps:
            any_out = 1
    if not any_out:
        return 0

    out.nf = 0
    for f in range(c.nf):
        nt = 0
        for k in range(c.FL[f]):
            a = c.F[f][k]
            b = c.F[f][(k + 1) % c.FL[f]]
            ina = sc.s[a] <= eps
            inb = sc.s[b] <= eps
            if ina:
                if nt >= MAXFV:
                    return -1
                sc.tmp[nt] = a
                nt += 1
            if ina != inb:
                if ina:
                    i_in = a; i_out = b
                else:
                    i_in = b; i_out = a
                if sc.s[i_in] < -eps:
                    if a < b:
                        key_a = a; key_b = b
                    else:
                        key_a = b; key_b = a
                    idx = -1
                    for i in range(ne):
                        if sc.ea[i] == key_a and sc.eb[i] == key_b:
                            idx = sc.en[i]
                            break
                    if idx < 0:
                        if nv >= MAXV:
                            return -1
                        t = sc.s[i_in] / (sc.s[i_in] - sc.s[i_out])
                        c.V[nv][0] = c.V[i_in][0] + t * (c.V[i_out][0] - c.V[i_in][0])
                        c.V[nv][1] = c.V[i_in][1] + t * (c.V[i_out][1] - c.V[i_in][1])
                        c.V[nv][2] = c.V[i_in][2] + t * (c.V[i_out][2] - c.V[i_in][2])
                        sc.s[nv] = 0.0
                        idx = nv
                        nv += 1
                        sc.ea[ne] = key_a
                        sc.eb[ne] = key_b
                        sc.en[ne] = idx
                        ne += 1
                    if nt >= MAXFV:
                        return -1
                    sc.tmp[nt] = idx
                    nt += 1
        if nt >= 3:
            if out.nf >= MAXF - 1:
                return -1
            for k in range(nt):
                out.F[out.nf][k] = sc.tmp[k]
            out.FL[out.nf] = nt
            out.lab[out.nf] = c.lab[f]
            out.nf += 1

    for i in range(nv):
        sc.used[i] = 0
    for f in range(out.nf):
        for k in range(out.FL[f]):
            sc.used[out.F[f][k]] = 1

    ncap = 0
    for i in range(nv):
        if sc.used[i] and fabs(sc.s[i]) <= eps:
            sc.cap[ncap] = i
            ncap += 1
    if ncap >= 3:
        if ncap > MAXFV:
            return -1
        cx = 0.0; cy = 0.0; cz = 0.0
        for k in range(ncap):
            cx += c.V[sc.cap[k]][0]
            cy += c.V[sc.cap[k]][1]
            cz += c.V[sc.cap[k]][2]
        cx /= ncap; cy /= ncap; cz /= ncap
        plane_basis(nrm, u, w)
        for k in range(ncap):
            dx = c.V[sc.cap[k]][0] - cx
            dy = c.V[sc.cap[k]][1] - cy
            dz = c.V[sc.cap[k]][2] - cz
            sc.ang[k] = atan2(dx * w[0] + dy * w[1] + dz * w[2], dx * u[0] + dy * u[1] + dz * u[2])
        # insertion sort by angle
        for k in range(1, ncap):
            key_ang = sc.ang[k]
            tmpi = sc.cap[k]
            i = k - 1
            while i >= 0 and sc.ang[i] > key_ang:
                sc.ang[i + 1] = sc.ang[i]
                sc.cap[i + 1] = sc.cap[i]
                i -= 1
            sc.ang[i + 1] = key_ang
            sc.cap[i + 1] = tmpi
        for k in range(ncap):
            out.F[out.nf][k] = sc.cap[k]
        out.FL[out.nf] = ncap
        out.lab[out.nf] = label
        out.nf += 1

    # compact vertices
    out.nv = 0
    for i in range(nv):
        if sc.used[i]:
            sc.remap[i] = out.nv
            out.V[out.nv][0] = c.V[i][0]
            out.V[out.nv][1] = c.V[i][1]
            out.V[out.nv][2] = c.V[i][2]
            out.nv += 1
    for f in range(out.nf):
        for k in range(out.FL[f]):
            out.F[f][k] = sc.remap[out.F[f][k]]
    return 1


cdef double polygon_area(Cell* c, int f, double* ref) nogil:
    cdef double sx = 0.0, sy = 0.0, sz = 0.0
    cdef double ax, ay, az, bx, by, bz
    cdef int k, p, q, nf = c.FL[f]
    for k in range(nf):
        p = c.F[f][k]
        q = c.F[f][(k + 1) % nf]
        ax = c.V[p][0] - ref[0]; ay = c.V[p][1] - ref[1]; az = c.V[p][2] - ref[2]
        bx = c.V[q][0] - ref[0]; by = c.V[q][1] - ref[1]; bz = c.V[q][2] - ref[2]
        sx += ay * bz - az * by
        sy += az * bx - ax * bz
        sz += ax * by - ay * bx
    return 0.5 * sqrt(sx * sx + sy * sy + sz * sz)


def clip_cells(points, cells, cand, box_lo, box_hi, double eps_rel=1e-10):
    """Compiled twin of ``_clip_py.clip_cells``; identical signature and outputs."""
    cdef double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef long long[::1] C = np.ascontiguousarray(cells, dtype=np.int64)
    cdef long long[:, ::1] K = np.ascontiguousarray(cand, dtype=np.int64)
    cdef double lo[3]
    cdef double hi[3]
    cdef double rm[3]
    cdef double nrm[3]
    cdef double ref[3]
    cdef double r2max, dx, dy, dz, dist2, dist, d, eps
    cdef Py_ssize_t ncell = C.shape[0], kk = K.shape[1], npts = P.shape[0]
    cdef Py_ssize_t k, j, f, cap_out, nout = 0
    cdef long long m, n
    cdef int status, lab
    cdef bint finished
    cdef Cell* cur
    cdef Cell* nxt
    cdef Cell* swp
    for j in range(3):
        lo[j] = box_lo[j]
        hi[j] = box_hi[j]

    cap_out = max(64 * ncell, 64)
    owner_a = np.empty(cap_out, dtype=np.int64)
    label_a = np.empty(cap_out, dtype=np.int64)
    area_a = np.empty(cap_out, dtype=np.float64)
    done_a = np.zeros(ncell, dtype=bool)
    cdef long long[::1] owner = owner_a
    cdef long long[::1] label = label_a
    cdef double[::1] area = area_a
    cdef cnp.npy_bool[::1] done = done_a

    cur = <Cell*> malloc(sizeof(Cell))
    nxt = <Cell*> malloc(sizeof(Cell))
    cdef Scratch* sc = <Scratch*> malloc(sizeof(Scratch))
    if cur == NULL or nxt == NULL or sc == NULL:
        free(cur); free(nxt); free(sc)
        raise MemoryError()
    try:
        for k in range(ncell):
            m = C[k]
            rm[0] = P[m, 0]; rm[1] = P[m, 1]; rm[2] = P[m, 2]
            box_cell(cur, lo, hi)
            r2max = max_r2(cur, rm)
            finished = True
            j = 0
            while True:
                if j == kk or K[k, j] < 0:
                    finished = (j < kk) or (kk + 1 >= npts)
                    break
                n = K[k, j]
                dx = P[n, 0] - rm[0]; dy = P[n, 1] - rm[1]; dz = P[n, 2] - rm[2]
                dist2 = dx * dx + dy * dy + dz * dz
                if dist2 > 4.0 * r2max:
                    break
                dist = sqrt(dist2)
                nrm[0] = dx / dist; nrm[1] = dy / dist; nrm[2] = dz / dist
                d = (nrm[0] * (rm[0] + 0.5 * dx) + nrm[1] * (rm[1] + 0.5 * dy)
                     + nrm[2] * (rm[2] + 0.5 * dz))
                eps = eps_rel * sqrt(r2max)
                status = clip(cur, nxt, sc, nrm, d, <int> n, eps)
                if status < 0:
                    raise RuntimeError(f"cell {m}: clipping buffer overflow")
                if status == 1:
                    swp = cur; cur = nxt; nxt = swp
                    r2max = max_r2(cur, rm)
                j += 1
            done[k] = finished
            if nout + cur.nf > cap_out:
                cap_out = 2 * (nout + cur.nf)
                owner_a = np.resize(owner_a, cap_out); owner = owner_a
                label_a = np.resize(label_a, cap_out); label = label_a
                area_a = np.resize(area_a, cap_out); area = area_a
            for f in range(cur.nf):
                lab = cur.lab[f]
                if lab >= 0:
                    ref[0] = 0.5 * (rm[0] + P[lab, 0])
                    ref[1] = 0.5 * (rm[1] + P[lab, 1])
                    ref[2] = 0.5 * (rm[2] + P[lab, 2])
                else:
                    ref[0] = cur.V[cur.F[f][0]][0]
                    ref[1] = cur.V[cur.F[f][0]][1]
                    ref[2] = cur.V[cur.F[f][0]][2]
                owner[nout] = m
                label[nout] = lab
                area[nout] = polygon_area(cur, f, ref)
                nout += 1
    finally:
        free(cur); free(nxt); free(sc)
    return owner_a[:nout].copy(), label_a[:nout].copy(), area_a[:nout].copy(), done_a
