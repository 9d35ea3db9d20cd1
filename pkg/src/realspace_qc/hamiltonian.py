"""Matrix-free many-electron Hamiltonians on a Voronoi grid.

States are real arrays of length ``N**eta``; register 0 is the slowest
index. Everything is expressed in the volume-weighted basis
``psi_m = sqrt(v_m) psi(r_m)``, in which the bare kinetic operator is
symmetric. The transcorrelated (TC) operator is the similarity transform
of the same weighted Hamiltonian by the Jastrow factor, so both kinds share
a spectrum up to discretization error and coincide when the Jastrow
factor is switched off.

Two-body pair kernels are dense ``N x N`` arrays, the three-body kernel of
the TC operator a dense ``N**3`` array; the latter restricts three-electron
TC operators to small grids.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fvops
from .errors import ParameterError
from .transcorrelated import (
    EE_SCALE,
    JastrowParams,
    _nuclear_drift,
    ee_gradient_prefactor,
    h_prime,
    h_second,
    tc_U,
)

DENSE_LIMIT = 4096
THREE_BODY_LIMIT = 64

__all__ = [
    "ManyBodyOperator",
    "hermitian_operator",
    "tc_operator",
    "pair_distances",
    "tc_pair_potential",
    "exchange_project",
    "DENSE_LIMIT",
]


def pair_distances(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))


def tc_pair_potential(r, mu_ee: float, scale: float = EE_SCALE) -> np.ndarray:
    """Electron-electron diagonal of the TC operator without the e-e-n cross term.

    ``1/r - scale (h'' + 2 h'/r) - scale^2 h'^2``. For ``scale = 1/2`` the
    Coulomb singularity cancels against ``h'/r`` and the remainder
    ``(1 - h')/r = erf(mu r)/r`` is evaluated directly, so ``r = 0`` is finite.
    """
    r = np.asarray(r, dtype=float)
    hp = h_prime(r, mu_ee)
    with np.errstate(divide="ignore", invalid="ignore"):
        if scale == 0.5:
            coul = np.where(r > 0, (1.0 - hp) / np.where(r > 0, r, 1.0), 2.0 * mu_ee / math.sqrt(math.pi))
        else:
            coul = (1.0 - 2.0 * scale * hp) / r
    return coul - scale * h_second(r, mu_ee) - scale**2 * hp**2


def _apply_axis(mat, x, axis):
    """Apply a matrix along one register axis of a tensor-shaped state."""
    y = np.moveaxis(x, axis, 0)
    shp = y.shape
    out = mat @ y.reshape(shp[0], -1)
    return np.moveaxis(out.reshape(shp), 0, axis)


def _pair_field(kernel, eta, i, j, n):
    """View of ``kernel[x_i, x_j]`` broadcast to the ``(n,)*eta`` state shape."""
    shape = [1] * eta
    shape[i] = n
    shape[j] = n
    k = kernel if i < j else kernel.T
    return k.reshape(shape)


@dataclass
class ManyBodyOperator:
    """``eta``-electron operator assembled from one-, two- and three-body blocks.

    ``H = sum_i T(i) + sum_{i<j} W[x_i, x_j]
    + sum_{i<j} sum_k A_k[x_i, x_j] (G_k(i) - G_k(j))
    - c^2 sum_i sum_{j<k, j,k != i} B[x_i, x_j, x_k]``

    The drift (``A``, ``G``) and three-body (``B``) blocks are present only
    for the transcorrelated kind. ``W`` may contain ``+inf`` on the diagonal
    to exclude coincident configurations; those amplitudes are then held at
    zero.
    """

    eta: int
    onebody: sp.csr_matrix
    pair: np.ndarray | None = None
    kind: str = "hermitian"
    drift: np.ndarray | None = None
    grads: tuple | None = None
    three: np.ndarray | None = None
    three_scale: float = EE_SCALE**2
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("hermitian", "transcorrelated"):
            raise ParameterError(f"unknown operator kind {self.kind!r}")
        if self.eta < 1:
            raise ParameterError("eta must be at least 1")
        self.onebody = sp.csr_matrix(self.onebody)
        n = self.onebody.shape[0]
        if self.pair is not None and self.pair.shape != (n, n):
            raise ParameterError("pair kernel shape does not match the grid")
        self._mask = None
        if self.pair is not None and np.isinf(self.pair).any():
            if self.eta < 2:
                self._mask = None
            else:
                excluded = np.isinf(self.pair)
                keep = np.ones((n,) * self.eta, dtype=bool)
                for i, j in itertools.combinations(range(self.eta), 2):
                    keep &= ~_pair_field(excluded, self.eta, i, j, n)
                self._mask = keep
                self._pair_finite = np.where(excluded, 0.0, self.pair)
        if self.three is not None and self.three.shape != (n, n, n):
            raise ParameterError("three-body kernel must be N x N x N")

    @property
    def N(self) -> int:
        return self.onebody.shape[0]

    @property
    def dim(self) -> int:
        return self.N**self.eta

    def _pairs(self):
        if self.pair is None:
            return None
        return self._pair_finite if self._mask is not None else self.pair

    def apply(self, state) -> np.ndarray:
        """``H @ state`` for a flat state of length ``N**eta``."""
        x = np.asarray(state, dtype=float)
        if x.shape != (self.dim,):
            raise ParameterError(f"state length {x.size} does not match N^eta = {self.dim}")
        n, eta = self.N, self.eta
        x = x.reshape((n,) * eta)
        if self._mask is not None:
            x = np.where(self._mask, x, 0.0)
        out = np.zeros_like(x)
        for i in range(eta):
            out += _apply_axis(self.onebody, x, i)
        W = self._pairs()
        for i, j in itertools.combinations(range(eta), 2):
            if W is not None:
                out += _pair_field(W, eta, i, j, n) * x
            if self.drift is not None:
                for k in range(3):
                    gi = _apply_axis(self.grads[k], x, i)
                    gj = _apply_axis(self.grads[k], x, j)
                    out += _pair_field(self.drift[k], eta, i, j, n) * (gi - gj)
        if self.three is not None and eta >= 3:
            out -= self.three_scale * self._three_diag() * x
        if self._mask is not None:
            out = np.where(self._mask, out, 0.0)
        return out.reshape(-1)

    __matmul__ = apply

    def _three_diag(self):
        n, eta = self.N, self.eta
        total = np.zeros((n,) * eta)
        for c in range(eta):
            others = [r for r in range(eta) if r != c]
            for j, k in itertools.combinations(others, 2):
                # B[x_c, x_j, x_k] broadcast onto the full register shape
                src = [c, j, k]
                order = np.argsort(src)
                t = np.transpose(self.three, order)
                shape = [1] * eta
                for ax in src:
                    shape[ax] = n
                total = total + t.reshape(shape)
        return total

    def diagonal(self) -> np.ndarray:
        """Diagonal of the operator (Davidson preconditioner)."""
        n, eta = self.N, self.eta
        d1 = self.onebody.diagonal()
        diag = np.zeros((n,) * eta)
        for i in range(eta):
            shape = [1] * eta
            shape[i] = n
            diag = diag + d1.reshape(shape)
        W = self._pairs()
        if W is not None:
            for i, j in itertools.combinations(range(eta), 2):
                diag = diag + _pair_field(W, eta, i, j, n)
        if self.three is not None and eta >= 3:
            diag = diag - self.three_scale * self._three_diag()
        # the drift matrices have zero diagonal
        if self._mask is not None:
            diag = np.where(self._mask, diag, 0.0)
        return diag.reshape(-1)

    def dense_matrix(self) -> np.ndarray:
        """Explicit matrix, built column by column from ``apply``."""
        if self.dim > DENSE_LIMIT:
            raise ParameterError(f"dense matrix limited to dimension {DENSE_LIMIT}, got {self.dim}")
        eye = np.eye(self.dim)
        return np.column_stack([self.apply(eye[:, c]) for c in range(self.dim)])

    def as_linear_operator(self):
        from scipy.sparse.linalg import LinearOperator

        return LinearOperator((self.dim, self.dim), matvec=self.apply, dtype=float)

    def lcu_tensors(self):
        """``(T, W4, B)`` in the layout expected by ``lcu.tc_lcu``.

        ``W4[m, n, p, q]`` is the pair operator ``|m><n| x |p><q|`` entering
        as ``1/2 sum_{i != j}``; ``B`` enters as ``-1/3 sum_{i != j != k}``.
        """
        n = self.N
        T = self.onebody.toarray()
        W4 = None
        if self.pair is not None or self.drift is not None:
            W4 = np.zeros((n, n, n, n))
            if self.pair is not None:
                W = self._pairs()
                idx = np.arange(n)
                W4[idx[:, None], idx[:, None], idx[None, :], idx[None, :]] = W
            if self.drift is not None:
                eye = np.eye(n)
                for k in range(3):
                    G = self.grads[k].toarray()
                    A = self.drift[k]
                    # A[m, p] G[m, n'] delta(p, q) - A[m, p] delta(m, n') G[p, q]
                    W4 += np.einsum("mp,mn,pq->mnpq", A, G, eye)
                    W4 -= np.einsum("mp,mn,pq->mnpq", A, eye, G)
        B = None
        if self.three is not None:
            # -c^2 sum_i sum_{j<k} B[x_i,x_j,x_k] = -1/3 sum_{i!=j!=k} (3/2) c^2 B
            B = 1.5 * self.three_scale * self.three
        return T, W4, B


def _weighted(mat, volumes):
    s = np.sqrt(np.asarray(volumes, dtype=float))
    out = (sp.diags(s) @ sp.csr_matrix(mat) @ sp.diags(1.0 / s)).tocsr()
    out.sort_indices()
    return out


def _pair_kernel(diagram, c0):
    return fvops.coulomb_matrix(diagram.points, diagram.volumes, c0=c0)


def hermitian_operator(diagram, molecule, eta: int, c0: float | None = fvops.SELF_CELL_C0, boundary: str = "open"):
    """Bare Hamiltonian ``sum_i (-L/2 - U)(i) + sum_{i<j} 1/r_ij`` (weighted basis)."""
    lap = fvops.symmetrize_laplacian(fvops.laplacian(diagram, boundary), diagram.volumes)
    T = fvops.onebody(lap, fvops.nuclear_attraction(diagram.points, molecule))
    W = _pair_kernel(diagram, c0) if eta >= 2 else None
    return ManyBodyOperator(eta, T, W, kind="hermitian", info={"c0": c0, "boundary": boundary})


def tc_operator(
    diagram,
    molecule,
    eta: int,
    params: JastrowParams,
    c0: float = fvops.SELF_CELL_C0,
    boundary: str = "open",
    scale: float = EE_SCALE,
):
    """Transcorrelated Hamiltonian ``exp(-tau) H exp(tau)`` (weighted basis).

    One-body: ``-L/2 - D~ne - (U + U~)`` with the continuum ``U~``.
    Pair diagonal: ``1/r - W~ - X`` where ``X`` is the electron-electron-
    nucleus cross term ``u'(r_mp) rhat_mp . (d_m - d_p)`` (``d`` the
    electron-nucleus drift). Pair drift: ``-u' rhat_mp . (grad_1 - grad_2)``.
    Three-body: ``-c^2 sum_i sum_{j<k} h'_ij h'_ik rhat_ij . rhat_ik``.
    Coincident cells use the distance ``v^(1/3)/c0`` in the pair diagonal,
    which reproduces the bare self-cell value when the Jastrow factor is off.
    """
    if c0 is None:
        raise ParameterError("the TC operator needs a finite self-cell constant")
    v = diagram.volumes
    pts = diagram.points
    lap = fvops.laplacian(diagram, boundary)
    U = fvops.nuclear_attraction(pts, molecule)
    one = -0.5 * lap - sp.diags(U)
    if params.ne_active:
        from .transcorrelated import tc_Dne

        one = one - tc_Dne(diagram, molecule, params.mu_ne) - sp.diags(tc_U(pts, molecule, params.mu_ne, "continuum"))
    if params.ne_active:
        T = _weighted(one, v)
    else:
        # identical to the Hermitian one-body matrix, kept exactly symmetric
        T = fvops.onebody(fvops.symmetrize_laplacian(lap, v), U)
    pair = drift = grads = three = None
    if eta >= 2:
        r = pair_distances(pts)
        r_eff = r.copy()
        np.fill_diagonal(r_eff, np.cbrt(v) / c0)
        if params.ee_active:
            pair = tc_pair_potential(r_eff, params.mu_ee, scale)
            A = ee_gradient_prefactor(pts, params.mu_ee, scale)
            if params.ne_active:
                d = _nuclear_drift(pts, molecule, params.mu_ne)
                pair = pair - np.einsum("kmp,mpk->mp", A, d[:, None, :] - d[None, :, :])
            drift = -A
            grads = tuple(_weighted(fvops.directional_derivative(diagram, e), v) for e in np.eye(3))
            if eta >= 3:
                if len(pts) > THREE_BODY_LIMIT:
                    raise ParameterError(f"three-body TC kernel limited to N <= {THREE_BODY_LIMIT}")
                diff = pts[:, None, :] - pts[None, :, :]
                safe = np.where(r > 0, r, 1.0)
                unit = np.where((r > 0)[..., None], diff / safe[..., None], 0.0)
                hp = h_prime(r, params.mu_ee)
                three = np.einsum("mp,mt,mpk,mtk->mpt", hp, hp, unit, unit)
        else:
            pair = 1.0 / r_eff
    return ManyBodyOperator(
        eta,
        T,
        pair,
        kind="transcorrelated",
        drift=drift,
        grads=grads,
        three=three,
        three_scale=scale**2,
        info={"mu_ne": params.mu_ne, "mu_ee": params.mu_ee, "c0": c0, "boundary": boundary},
    )


def exchange_project(state, parity: str = "symmetric") -> np.ndarray:
    """``(psi +- P psi)/2`` with ``P`` the swap of the two electron registers."""
    x = np.asarray(state)
    n = math.isqrt(x.size)
    if n * n != x.size:
        raise ParameterError("exchange projection needs a two-electron state of length N^2")
    swapped = x.reshape(n, n).T.reshape(-1)
    if parity == "symmetric":
        return 0.5 * (x + swapped)
    if parity == "antisymmetric":
        return 0.5 * (x - swapped)
    raise ParameterError(f"unknown parity {parity!r}")
