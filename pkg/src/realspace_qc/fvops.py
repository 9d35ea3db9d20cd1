"""Finite-volume operators on a Voronoi diagram.

All sparse matrices are ``scipy.sparse.csr_matrix`` with sorted column
indices, so iterating rows gives a deterministic row-major entry order.
Potentials that are diagonal in the position basis are returned as plain
1-D arrays.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InternalConsistencyError, ParameterError
from .molgrid import NUCLEUS_EXCLUSION

# Mean of 1/|r - r'| for r, r' drawn independently from the unit cube.
SELF_CELL_C0 = 1.882

__all__ = [
    "SELF_CELL_C0",
    "laplacian",
    "symmetrize_laplacian",
    "directional_derivative",
    "gradient_matrices",
    "nuclear_attraction",
    "coulomb_kernel",
    "coulomb_matrix",
    "onebody",
    "to_coo_text",
    "write_coo",
]


def _csr(diagram, values, diag=None):
    n = diagram.n_cells
    off = sp.csr_matrix((values, diagram.indices, diagram.indptr), shape=(n, n))
    if diag is None:
        off.sort_indices()
        return off
    mat = (off + sp.diags(diag, format="csr")).tocsr()
    mat.sort_indices()
    return mat


def laplacian(diagram, boundary: str = "open") -> sp.csr_matrix:
    """Finite-volume Laplacian ``L``.

    ``L_mn = sigma_mn / (v_m |r_m - r_n|)`` for neighbors and
    ``L_mm = -sum_n L_mn`` so every row sums to zero.

    Parameters
    ----------
    diagram : VoronoiDiagram
    boundary : {"open", "dirichlet"}
        ``"open"`` drops the flux through box faces (no coupling to the
        outside). ``"dirichlet"`` couples each box face to a zero-valued
        mirror image of the generator, which adds ``-A_k / (2 h_k v_m)`` to
        the diagonal (``h_k`` = generator-to-face distance).
    """
    if np.any(diagram.distances <= 0):
        raise InternalConsistencyError("zero distance between neighboring generators")
    rows = diagram.rows
    vals = diagram.areas / (diagram.volumes[rows] * diagram.distances)
    diag = -np.bincount(rows, weights=vals, minlength=diagram.n_cells)
    if boundary == "dirichlet":
        box = diagram.box
        heights = np.concatenate([diagram.points - box.lo, box.hi - diagram.points], axis=1)[:, [0, 3, 1, 4, 2, 5]]
        diag = diag - (diagram.box_areas / (2.0 * heights)).sum(axis=1) / diagram.volumes
    elif boundary != "open":
        raise ParameterError(f"unknown boundary treatment {boundary!r}")
    return _csr(diagram, vals, diag)


def symmetrize_laplacian(lap, volumes) -> sp.csr_matrix:
    """Similarity transform ``V^(1/2) L V^(-1/2)`` with ``V = diag(volumes)``.

    Symmetric because ``v_m L_mn = sigma_mn / d_mn = v_n L_nm``.
    """
    v = np.asarray(volumes, dtype=float)
    if v.shape != (lap.shape[0],) or np.any(v <= 0):
        raise ParameterError("volumes must be positive and match the matrix size")
    s = np.sqrt(v)
    out = (sp.diags(s) @ lap @ sp.diags(1.0 / s)).tocsr()
    # enforce exact symmetry; the two triangles differ only by rounding
    out = ((out + out.T) * 0.5).tocsr()
    out.sort_indices()
    return out


def directional_derivative(diagram, direction, convention: str = "outward") -> sp.csr_matrix:
    """Finite-volume derivative along the unit vector ``direction``.

    ``D_mn = sigma_mn / (2 v_m) * rhat_mn . z`` for neighbors, zero diagonal.
    With ``convention="outward"`` the unit vector points from ``r_m`` to
    ``r_n`` and ``D`` approximates ``+d/dz``. ``convention="printed"`` uses
    ``(r_m - r_n)/|r_m - r_n|`` and therefore approximates ``-d/dz``.
    """
    z = np.asarray(direction, dtype=float).reshape(3)
    if abs(np.linalg.norm(z) - 1.0) > 1e-12:
        raise ParameterError("direction must be a unit vector")
    if convention == "outward":
        sign = 1.0
    elif convention == "printed":
        sign = -1.0
    else:
        raise ParameterError(f"unknown convention {convention!r}")
    rows = diagram.rows
    vals = sign * diagram.areas / (2.0 * diagram.volumes[rows]) * (diagram.normals @ z)
    return _csr(diagram, vals)


def gradient_matrices(diagram) -> tuple:
    """The three Cartesian derivative matrices ``(D_x, D_y, D_z)`` (outward convention)."""
    return tuple(directional_derivative(diagram, e) for e in np.eye(3))


def nuclear_attraction(points, molecule) -> np.ndarray:
    """``U_m = sum_a Z_a / |r_m - R_a|`` (positive; enters H with a minus sign)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.linalg.norm(pts[:, None, :] - molecule.positions[None, :, :], axis=-1)
    if np.any(d < NUCLEUS_EXCLUSION):
        raise ParameterError("grid point coincides with a nucleus")
    return (molecule.charges[None, :] / d).sum(axis=1)


def coulomb_kernel(r_m, r_p, v_m, c0: float = SELF_CELL_C0) -> float:
    """Electron-electron kernel ``1/|r_m - r_p|``.

    Coincident points (same cell) return ``c0 / v_m^(1/3)``, the mean
    inverse distance between two points of a cube with volume ``v_m``.
    """
    d = float(np.linalg.norm(np.asarray(r_m, dtype=float) - np.asarray(r_p, dtype=float)))
    if d == 0.0:
        return c0 / float(v_m) ** (1.0 / 3.0)
    return 1.0 / d


def coulomb_matrix(points, volumes, c0: float | None = SELF_CELL_C0) -> np.ndarray:
    """Dense pair kernel ``W_mp`` for all grid pairs.

    The diagonal holds the self-cell value ``c0 / v_m^(1/3)``. Pass
    ``c0=None`` to mark coincident pairs as excluded: the diagonal is then
    ``+inf`` and callers remove those configurations.
    """
    pts = np.asarray(points, dtype=float)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    np.fill_diagonal(d, 1.0)
    w = 1.0 / d
    if c0 is None:
        np.fill_diagonal(w, np.inf)
    else:
        np.fill_diagonal(w, c0 / np.cbrt(np.asarray(volumes, dtype=float)))
    return w


def onebody(lap, potential) -> sp.csr_matrix:
    """``T = -L/2 - diag(U)``; Hermitian when ``lap`` is the symmetrized Laplacian."""
    u = np.asarray(potential, dtype=float)
    if lap.shape != (len(u), len(u)):
        raise ParameterError(f"matrix shape {lap.shape} does not match potential length {len(u)}")
    out = (-0.5 * lap - sp.diags(u)).tocsr()
    out.sort_indices()
    return out


def to_coo_text(mat) -> str:
    """``row col value`` lines, 0-based, row-major, 17 significant digits."""
    coo = sp.csr_matrix(mat)
    coo.sort_indices()
    coo = coo.tocoo()
    return "".join(f"{i} {j} {v:.17g}\n" for i, j, v in zip(coo.row, coo.col, coo.data))


def write_coo(mat, path) -> None:
    Path(path).write_text(to_coo_text(mat))
