"""Jastrow functions and discretized transcorrelated (TC) operator blocks.

The correlation factor is ``tau = sum_{i,a} g(|r_i - R_a|) + sum_{i<j} u(|r_i - r_j|)``
with ``u = c * h``. Similarity-transforming ``H`` with ``exp(tau)`` gives

* a first-order (gradient) term ``-grad tau . grad`` per electron,
* a scalar ``-(lap tau + |grad tau|^2)/2`` that splits into one-, two- and
  three-body diagonals.

Every block is available in two forms:

``variant="printed"``
    The discrete expressions exactly as commonly written for this grid
    scheme: ``U~ = sum_a (g'/r - (mu/sqrt(pi)) e^{-(mu r)^2} + g'^2/2) +
    sum_{a,b} g'_a g'_b rhat_a . rhat_b``, ``W~ = (1 - erf)/r +
    (mu/sqrt(pi)) e + (1 - erf)^2/2`` and ``D~ee`` with prefactor
    ``(1 - erf)/2``.
``variant="continuum"``
    The terms that the similarity transform actually produces. These
    differ from the printed ones in the sign of the Gaussian term, in the
    double-counted ``a = b`` terms, and in the two-body weight.

``validate_tc_signs`` builds the one-electron operator both ways and
reports which reproduces the bare spectrum.

Infinite ``mu`` means the corresponding Jastrow factor is switched off
in operator builders. The scalar functions themselves return the
``mu -> inf`` limit, which for ``g`` is ``x (1 - Z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import erf

from .errors import ParameterError

SQRT_PI = math.sqrt(math.pi)
# Electron-electron Jastrow weight: u = c * h reproduces the singlet cusp 1/2.
EE_SCALE = 0.5

__all__ = [
    "JastrowParams",
    "g_val",
    "g_prime",
    "g_second",
    "h_val",
    "h_prime",
    "h_second",
    "tc_Dne",
    "tc_Dee_apply",
    "tc_U",
    "tc_W",
    "tc_B",
    "ee_gradient_prefactor",
    "validate_tc_signs",
]


@dataclass(frozen=True)
class JastrowParams:
    """Range parameters of the two Jastrow functions (``inf`` = off)."""

    mu_ne: float = math.inf
    mu_ee: float = math.inf

    def __post_init__(self):
        for name in ("mu_ne", "mu_ee"):
            v = float(getattr(self, name))
            if not v > 0:
                raise ParameterError(f"{name} must be positive (use inf to disable)")
            object.__setattr__(self, name, v)

    @property
    def ne_active(self) -> bool:
        return math.isfinite(self.mu_ne)

    @property
    def ee_active(self) -> bool:
        return math.isfinite(self.mu_ee)

    @classmethod
    def from_dict(cls, doc: dict | None) -> "JastrowParams":
        doc = doc or {}

        def read(key):
            v = doc.get(key)
            if v is None or v in ("inf", "off", "none"):
                return math.inf
            return float(v)

        return cls(read("mu_ne"), read("mu_ee"))


def _erf_mu(x, mu):
    """``erf(mu * x)`` with the ``mu = inf`` limit (1 for x > 0, 0 at x = 0)."""
    x = np.asarray(x, dtype=float)
    if math.isinf(mu):
        return np.where(x > 0, 1.0, 0.0)
    return erf(mu * x)


def _gauss(x, mu):
    """``exp(-(mu x)^2)`` with the ``mu = inf`` limit."""
    x = np.asarray(x, dtype=float)
    if math.isinf(mu):
        return np.where(x > 0, 0.0, 1.0)
    return np.exp(-((mu * x) ** 2))


def g_val(x, Z, mu):
    """Electron-nucleus Jastrow ``x (erf(mu x) - Z) + exp(-(mu x)^2) / (mu sqrt(pi))``."""
    x = np.asarray(x, dtype=float)
    if math.isinf(mu):
        return x * (1.0 - Z)
    return x * (erf(mu * x) - Z) + np.exp(-((mu * x) ** 2)) / (mu * SQRT_PI)


def g_prime(x, Z, mu):
    """``g'(x) = erf(mu x) - Z``; the Gaussian contributions cancel."""
    return _erf_mu(x, mu) - Z


def g_second(x, Z, mu):
    """``g''(x) = (2 mu / sqrt(pi)) exp(-(mu x)^2)`` (0 in the ``mu = inf`` limit)."""
    x = np.asarray(x, dtype=float)
    if math.isinf(mu):
        return np.zeros_like(x)
    return 2.0 * mu / SQRT_PI * np.exp(-((mu * x) ** 2))


def h_val(x, mu):
    """Electron-electron Jastrow ``x (1 - erf(mu x)) - exp(-(mu x)^2) / (mu sqrt(pi))``."""
    x = np.asarray(x, dtype=float)
    if math.isinf(mu):
        return np.zeros_like(x)
    return x * (1.0 - erf(mu * x)) - np.exp(-((mu * x) ** 2)) / (mu * SQRT_PI)


def h_prime(x, mu):
    """``h'(x) = 1 - erf(mu x)``."""
    return 1.0 - _erf_mu(x, mu)


def h_second(x, mu):
    """``h''(x) = -(2 mu / sqrt(pi)) exp(-(mu x)^2)``."""
    x = np.asarray(x, dtype=float)
    if math.isinf(mu):
        return np.zeros_like(x)
    return -2.0 * mu / SQRT_PI * np.exp(-((mu * x) ** 2))


def _nuclear_geometry(points, molecule):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    diff = pts[:, None, :] - molecule.positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    if np.any(dist == 0):
        raise ParameterError("grid point coincides with a nucleus")
    return dist, diff / dist[..., None]


def _nuclear_drift(points, molecule, mu_ne):
    """``sum_a g'(r_a) rhat_a`` per point, i.e. the gradient of the e-n Jastrow."""
    dist, rhat = _nuclear_geometry(points, molecule)
    gp = g_prime(dist, molecule.charges[None, :], mu_ne)
    return (gp[..., None] * rhat).sum(axis=1)


def tc_Dne(diagram, molecule, mu_ne: float, convention: str = "outward") -> sp.csr_matrix:
    """Drift matrix ``D~ne`` coupling each cell to its Voronoi neighbors.

    ``D~ne_mn = sum_a g'(r_ma) / (2 v_m) * sigma_mn * rhat_mn . rhat_ma``.
    With the outward facet normal (``r_n - r_m``) this approximates
    ``grad g . grad``; ``convention="printed"`` flips the facet normal.
    """
    if convention not in ("outward", "printed"):
        raise ParameterError(f"unknown convention {convention!r}")
    sign = 1.0 if convention == "outward" else -1.0
    drift = _nuclear_drift(diagram.points, molecule, mu_ne)
    rows = diagram.rows
    vals = sign * diagram.areas / (2.0 * diagram.volumes[rows]) * np.einsum(
        "ij,ij->i", diagram.normals, drift[rows]
    )
    n = diagram.n_cells
    mat = sp.csr_matrix((vals, diagram.indices, diagram.indptr), shape=(n, n))
    mat.sort_indices()
    return mat


def ee_gradient_prefactor(points, mu_ee: float, scale: float = 1.0):
    """Pair arrays ``A_k[m, p] = scale * h'(r_mp) * rhat_mp,k`` for k = x, y, z.

    ``rhat_mp = (r_m - r_p)/r_mp``; coincident pairs get a zero vector.
    Returns an array of shape ``(3, N, N)``.
    """
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.sqrt((diff**2).sum(axis=-1))
    safe = np.where(r > 0, r, 1.0)
    pref = scale * h_prime(r, mu_ee) / safe
    pref[r == 0] = 0.0
    return np.moveaxis(diff * pref[..., None], -1, 0)


def tc_Dee_apply(diagram, mu_ee: float, state, scale: float = 1.0, convention: str = "outward", grads=None):
    """Apply the electron-electron drift ``D~ee`` to a two-electron state.

    ``(D~ee psi)(m, p) = scale * h'(r_mp) * rhat_mp . [(G psi)(., p) - (G psi)(m, .)]``
    where ``G_mn = sigma_mn / (2 v_m) * rhat_mn`` acts on one register and the
    Kronecker deltas of the four-index form are implicit. ``scale = 1`` is the
    printed ``(1 - erf)/2 * sigma / v`` prefactor.

    Parameters
    ----------
    diagram : VoronoiDiagram
    mu_ee : float
    state : array_like, length N**2 (register 0 is the slow index)
    scale : float
        Multiplies ``h'``; the Hamiltonian uses ``scale = 1/2``.
    convention : {"outward", "printed"}
        Facet normal orientation, as in ``fvops.directional_derivative``.
    grads : tuple of three sparse matrices, optional
        Precomputed ``G_x, G_y, G_z``.
    """
    n = diagram.n_cells
    psi = np.asarray(state)
    if psi.shape != (n * n,):
        raise ParameterError(f"state must have length N^2 = {n * n}")
    if grads is None:
        from .fvops import directional_derivative

        grads = tuple(directional_derivative(diagram, e, convention) for e in np.eye(3))
    A = ee_gradient_prefactor(diagram.points, mu_ee, scale)
    P = psi.reshape(n, n)
    out = np.zeros_like(P)
    for k in range(3):
        out += A[k] * (grads[k] @ P - (grads[k] @ P.T).T)
    return out.reshape(-1)


def tc_U(points, molecule, mu_ne: float, variant: str = "printed") -> np.ndarray:
    """One-body TC potential (without the bare ``-Z/r`` attraction).

    ``variant="printed"``::

        sum_a [g'_a/r_a - (mu/sqrt(pi)) e_a + g'_a^2/2] + sum_{a,b} g'_a g'_b rhat_a . rhat_b

    ``variant="continuum"`` is ``(lap g + |grad g|^2)/2`` summed over nuclei::

        sum_a [g'_a/r_a + g''_a/2] + |sum_a g'_a rhat_a|^2 / 2

    ``variant="printed_no_double"`` is the printed form with the ``a = b``
    terms removed from the double sum.
    """
    dist, rhat = _nuclear_geometry(points, molecule)
    Z = molecule.charges[None, :]
    gp = g_prime(dist, Z, mu_ne)
    drift = (gp[..., None] * rhat).sum(axis=1)
    drift2 = (drift**2).sum(axis=1)
    if variant == "continuum":
        return (gp / dist + 0.5 * g_second(dist, Z, mu_ne)).sum(axis=1) + 0.5 * drift2
    gauss = _gauss(dist, mu_ne) * (0.0 if math.isinf(mu_ne) else mu_ne / SQRT_PI)
    single = (gp / dist - gauss + 0.5 * gp**2).sum(axis=1)
    if variant == "printed":
        return single + drift2
    if variant == "printed_no_double":
        return single + drift2 - (gp**2).sum(axis=1)
    raise ParameterError(f"unknown variant {variant!r}")


def tc_W(r, mu_ee: float, variant: str = "printed", scale: float = EE_SCALE, inv_r=None):
    """Two-body TC potential as a function of the pair distance.

    ``variant="printed"``: ``(1 - erf)/r + (mu/sqrt(pi)) e + (1 - erf)^2 / 2``.

    ``variant="continuum"``: the pair part of ``(lap u + |grad u|^2)/2`` for
    ``u = scale * h``, i.e. ``scale (h'' + 2 h'/r) + scale^2 h'^2``. It enters
    the Hamiltonian as ``1/r - W~``.

    ``inv_r`` optionally replaces ``1/r`` (used for coincident cells, where
    the regularized self-cell inverse distance is supplied).
    """
    r = np.asarray(r, dtype=float)
    if inv_r is None:
        with np.errstate(divide="ignore"):
            inv_r = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), np.inf)
    hp = h_prime(r, mu_ee)
    gauss = _gauss(r, mu_ee) * (0.0 if math.isinf(mu_ee) else mu_ee / SQRT_PI)
    if variant == "printed":
        return hp * inv_r + gauss + 0.5 * hp**2
    if variant == "continuum":
        return scale * (h_second(r, mu_ee) + 2.0 * hp * inv_r) + scale**2 * hp**2
    raise ParameterError(f"unknown variant {variant!r}")


def tc_B(r_mp, r_mt, mu_ee: float):
    """Three-body coupling ``(1 - erf(mu r_mp)) (1 - erf(mu r_mt)) rhat_mp . rhat_mt``.

    ``r_mp`` and ``r_mt`` are separation vectors (..., 3). A zero separation
    contributes 0.
    """
    a = np.asarray(r_mp, dtype=float)
    b = np.asarray(r_mt, dtype=float)
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    ok = (na > 0) & (nb > 0)
    cos = np.where(ok, (a * b).sum(axis=-1) / np.where(ok, na * nb, 1.0), 0.0)
    return h_prime(na, mu_ee) * h_prime(nb, mu_ee) * cos


def validate_tc_signs(diagram, molecule, mu_ne: float, k: int = 1) -> dict:
    """Compare printed and continuum TC one-electron operators.

    Builds, on the same diagram,

    * ``bare``: ``-L/2 - U``;
    * ``printed``: ``-L/2 - D~ne(printed normal) - U~(printed)``, exactly as written;
    * ``printed_with_U``: the printed form plus the bare ``-U``;
    * ``printed_no_double``: as above with ``U~`` minus the double-counted terms;
    * ``continuum``: ``-L/2 - D~ne(outward) - U - U~(continuum)``.

    Returns lowest eigenvalues (by real part), the maximal imaginary part
    and the elementwise discrepancy between the printed and continuum
    matrices. The variant whose energy matches ``bare`` is canonical.
    """
    from .eigensolve import lowest_eigs
    from .fvops import laplacian, nuclear_attraction

    L = laplacian(diagram)
    U = nuclear_attraction(diagram.points, molecule)
    pts = diagram.points
    mats = {
        "bare": -0.5 * L - sp.diags(U),
        "printed": -0.5 * L - tc_Dne(diagram, molecule, mu_ne, "printed") - sp.diags(tc_U(pts, molecule, mu_ne, "printed")),
        "printed_with_U": -0.5 * L
        - tc_Dne(diagram, molecule, mu_ne, "printed")
        - sp.diags(U + tc_U(pts, molecule, mu_ne, "printed")),
        "printed_no_double": -0.5 * L
        - tc_Dne(diagram, molecule, mu_ne, "printed")
        - sp.diags(U + tc_U(pts, molecule, mu_ne, "printed_no_double")),
        "continuum": -0.5 * L
        - tc_Dne(diagram, molecule, mu_ne, "outward")
        - sp.diags(U + tc_U(pts, molecule, mu_ne, "continuum")),
    }
    report = {"mu_ne": mu_ne, "n_points": diagram.n_cells, "energies": {}, "max_imag": {}}
    for name, mat in mats.items():
        vals = lowest_eigs(mat.tocsr(), k=k)
        report["energies"][name] = float(vals[0].real)
        report["max_imag"][name] = float(np.abs(vals.imag).max())
    diff = (mats["printed"] - mats["continuum"]).tocsr()
    report["max_entry_discrepancy"] = float(np.abs(diff.data).max()) if diff.nnz else 0.0
    e0 = report["energies"]["bare"]
    report["canonical"] = min(
        (name for name in mats if name != "bare"), key=lambda nm: abs(report["energies"][nm] - e0)
    )
    return report
