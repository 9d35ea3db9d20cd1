"""Pauli linear-combination-of-unitaries (LCU) coefficients for grid Hamiltonians.

Each electron register holds ``log2 N`` qubits. A register operator
``X^m Z^n`` (bit masks ``m`` and ``n``) has matrix elements
``<a| X^m Z^n |b> = delta(a, b XOR m) (-1)^popcount(b AND n)``, so the
coefficient tables are Walsh-Hadamard transforms along XOR diagonals.

The Hamiltonian is written as

    H = sum_mn w_mn sum_i P_mn(i)
        + 1/2 sum_mnpq g_mnpq sum_{i != j} P_mn(i) P_pq(j)
        - 1/3 sum_mpt z_mpt sum_{i != j != k} Z^m(i) Z^p(j) Z^t(k)

For a Hermitian operator the two-body part is diagonal and only
``g_0m0p = gamma_mp`` is stored.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError

RECONSTRUCT_LIMIT = 4096

__all__ = [
    "LcuDecomposition",
    "fwht",
    "pauli_matrix",
    "walsh_onebody",
    "walsh_twobody_diag",
    "walsh_twobody",
    "walsh_threebody_diag",
    "tc_lcu",
    "hermitian_lcu",
    "prune_merge",
    "one_norm",
    "reconstruct",
    "brute_force_coefficient",
    "walk_spectrum_check",
    "pad_to_power_of_two",
]


def _check_pow2(n):
    if n < 1 or n & (n - 1):
        raise ParameterError(f"dimension {n} is not a power of two (pad with ghost points)")


def fwht(a, axis=-1):
    """Unnormalized fast Walsh-Hadamard transform along ``axis``.

    ``out[k] = sum_x (-1)^popcount(k & x) a[x]``.
    """
    a = np.moveaxis(np.array(a, dtype=float, copy=True), axis, -1)
    n = a.shape[-1]
    _check_pow2(n)
    h = 1
    while h < n:
        shp = a.shape[:-1] + (n // (2 * h), 2, h)
        b = a.reshape(shp)
        x = b[..., 0, :].copy()
        y = b[..., 1, :]
        b[..., 0, :] += y
        b[..., 1, :] = x - y
        a = b.reshape(a.shape)
        h *= 2
    return np.moveaxis(a, -1, axis)


def _xor_table(n):
    idx = np.arange(n)
    return idx[:, None] ^ idx[None, :]


def _parity(a):
    """popcount(a) mod 2 for integer arrays."""
    a = np.asarray(a, dtype=np.int64).copy()
    p = np.zeros_like(a)
    while np.any(a):
        p ^= a & 1
        a >>= 1
    return p


def pauli_matrix(m: int, n: int, N: int) -> np.ndarray:
    """Dense ``X^m Z^n`` on one register of dimension ``N``."""
    b = np.arange(N)
    out = np.zeros((N, N))
    out[b ^ m, b] = 1.0 - 2.0 * _parity(b & n)
    return out


def walsh_onebody(T) -> np.ndarray:
    """``w_mn = (1/N) sum_x (-1)^(x.n) T[m XOR x, x]`` for all m, n.

    One Walsh-Hadamard transform per XOR diagonal: O(N^2 log N).
    """
    T = T.toarray() if sp.issparse(T) else np.asarray(T, dtype=float)
    n = T.shape[0]
    _check_pow2(n)
    x = np.arange(n)
    F = T[_xor_table(n), x[None, :]]  # F[m, x] = T[m ^ x, x]
    return fwht(F, axis=1) / n


def walsh_twobody_diag(W) -> np.ndarray:
    """``gamma_mp = (1/N^2) sum_xy (-1)^(m.x + p.y) W[x, y]`` (2-D transform)."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    _check_pow2(n)
    return fwht(fwht(W, axis=0), axis=1) / (n * n)


def walsh_twobody(W4) -> np.ndarray:
    """``g_mnpq = (1/N^2) sum_xy (-1)^(x.n + y.q) W4[m^x, x, p^y, y]``."""
    W4 = np.asarray(W4, dtype=float)
    n = W4.shape[0]
    _check_pow2(n)
    xo = _xor_table(n)
    x = np.arange(n)
    F = W4[xo[:, :, None, None], x[None, :, None, None], xo[None, None, :, :], x[None, None, None, :]]
    return fwht(fwht(F, axis=1), axis=3) / (n * n)


def walsh_threebody_diag(B) -> np.ndarray:
    """``z_mpt = (1/N^3) sum_xyz (-1)^(x.m + y.p + z.t) B[x, y, z]`` (3-D transform)."""
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    _check_pow2(n)
    return fwht(fwht(fwht(B, axis=0), axis=1), axis=2) / n**3


@dataclass(frozen=True)
class LcuDecomposition:
    """Pauli coefficient tables.

    ``kind`` is ``"hermitian"`` (``gamma`` is N x N, diagonal two-body) or
    ``"tc"`` (``gamma`` is N^4). ``zeta`` is the N^3 three-body table or
    ``None``. ``shift`` is the identity coefficient removed by pruning, so
    that ``H = H_lcu + shift * I``.
    """

    N: int
    kind: str
    omega: np.ndarray
    gamma: np.ndarray | None
    zeta: np.ndarray | None = None
    shift: float = 0.0
    pruned: bool = False

    def gamma4(self) -> np.ndarray | None:
        """Two-body table in four-index form (also for the Hermitian kind)."""
        if self.gamma is None:
            return None
        if self.kind == "tc":
            return self.gamma
        n = self.N
        g = np.zeros((n, n, n, n))
        g[0, :, 0, :] = self.gamma
        return g

    def n_strings(self, tol: float = 0.0) -> int:
        cnt = int(np.count_nonzero(np.abs(self.omega) > tol))
        if self.gamma is not None:
            cnt += int(np.count_nonzero(np.abs(self.gamma) > tol))
        if self.zeta is not None:
            cnt += int(np.count_nonzero(np.abs(self.zeta) > tol))
        return cnt

    def iter_terms(self, tol: float = 0.0):
        """Yield ``(label, indices, value)`` for every coefficient above ``tol``."""
        for (m, n), v in np.ndenumerate(self.omega):
            if abs(v) > tol:
                yield "omega", (m, n), float(v)
        if self.gamma is not None:
            for idx, v in np.ndenumerate(self.gamma):
                if abs(v) > tol:
                    yield "gamma", idx, float(v)
        if self.zeta is not None:
            for idx, v in np.ndenumerate(self.zeta):
                if abs(v) > tol:
                    yield "zeta", idx, float(v)

    def write_csv(self, path, tol: float = 0.0) -> None:
        """CSV rows ``type, indices..., value``; indices are bit masks."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["type", "indices", "value"])
            for label, idx, v in self.iter_terms(tol):
                w.writerow([label, " ".join(str(int(i)) for i in idx), f"{v:.17g}"])

    def summary(self, eta: int) -> dict:
        return {
            "lambda": one_norm(self, eta),
            "n_strings": self.n_strings(),
            "shift": float(self.shift),
            "N": int(self.N),
            "eta": int(eta),
            "kind": self.kind,
            "pruned": bool(self.pruned),
        }

    def write_summary(self, path, eta: int) -> None:
        Path(path).write_text(json.dumps(self.summary(eta), indent=2))


def hermitian_lcu(T, W) -> LcuDecomposition:
    """Decomposition of ``sum_i T(i) + sum_{i<j} diag(W)(i, j)`` with symmetric ``W``."""
    T = T.toarray() if sp.issparse(T) else np.asarray(T, dtype=float)
    n = T.shape[0]
    gamma = None if W is None else walsh_twobody_diag(W)
    return LcuDecomposition(N=n, kind="hermitian", omega=walsh_onebody(T), gamma=gamma)


def tc_lcu(T, W4=None, B=None) -> LcuDecomposition:
    """Decomposition of a transcorrelated operator.

    Parameters
    ----------
    T : (N, N) one-body matrix
    W4 : (N, N, N, N) array, optional
        Pair operator ``W4[m, n, p, q]`` acting as ``|m><n| x |p><q|``; it must be
        symmetric under exchanging the two registers. Enters as
        ``1/2 sum_{i != j}``.
    B : (N, N, N) array, optional
        Diagonal three-body tensor entering as ``-1/3 sum_{i != j != k}``.
    """
    T = T.toarray() if sp.issparse(T) else np.asarray(T, dtype=float)
    n = T.shape[0]
    gamma = None if W4 is None else walsh_twobody(W4)
    zeta = None if B is None else walsh_threebody_diag(B)
    return LcuDecomposition(N=n, kind="tc", omega=walsh_onebody(T), gamma=gamma, zeta=zeta)


def prune_merge(decomp: LcuDecomposition, eta: int, rule: str = "exact") -> LcuDecomposition:
    """Remove identity Pauli strings and fold repeated strings into lower-order tables.

    A register factor ``X^0 Z^0`` is the identity, so a k-body string with an
    identity factor acts as a (k-1)-body string, summed over the remaining
    register choices. With ``rule="exact"`` the register multiplicities are
    those of the sums ``sum_{i != j}`` and ``sum_{i != j != k}``:

    * two-body to one-body: ``(eta - 1)``,
    * three-body to two-body: ``(eta - 2)``,
    * three-body to one-body: ``(eta - 1)(eta - 2)``,

    and the discarded identity coefficient is returned as ``shift``.
    ``rule="printed"`` uses ``(N - 1)``, ``(N - 1)`` and ``(N - 1)^2``
    together with the printed ``-1/3`` three-to-two weight; it reproduces
    ``H`` only when those multiplicities happen to coincide.
    """
    if rule not in ("exact", "printed"):
        raise ParameterError(f"unknown rule {rule!r}")
    if decomp.pruned:
        return decomp
    n = decomp.N
    if rule == "exact":
        m21, m32, m31 = eta - 1, eta - 2, (eta - 1) * (eta - 2)
        w32 = 2.0 / 3.0
    else:
        m21, m32, m31 = n - 1, n - 1, (n - 1) ** 2
        w32 = 1.0 / 3.0
    omega = decomp.omega.copy()
    shift = 0.0
    g4 = decomp.gamma4()
    g4 = None if g4 is None else g4.copy()
    zeta = None if decomp.zeta is None else decomp.zeta.copy()

    if zeta is not None and eta >= 3 or (zeta is not None and rule == "printed"):
        if g4 is None:
            g4 = np.zeros((n, n, n, n))
        nz = np.arange(1, n)
        # one zero index -> two-body diagonal string Z^a(i) Z^b(j)
        a, b = np.meshgrid(nz, nz, indexing="ij")
        if rule == "exact":
            add = zeta[0][np.ix_(nz, nz)] + zeta[:, 0, :][np.ix_(nz, nz)] + zeta[:, :, 0][np.ix_(nz, nz)]
        else:
            add = zeta[0][np.ix_(nz, nz)] + 2.0 * zeta[:, :, 0][np.ix_(nz, nz)]
        g4[0, a, 0, b] -= w32 * m32 * add
        # two zero indices -> one-body string Z^a(i)
        if rule == "exact":
            add1 = zeta[nz, 0, 0] + zeta[0, nz, 0] + zeta[0, 0, nz]
        else:
            add1 = zeta[nz, 0, 0] + 2.0 * zeta[0, 0, nz]
        omega[0, nz] -= m31 * add1 / 3.0
        shift -= eta * (eta - 1) * (eta - 2) * zeta[0, 0, 0] / 3.0
        zeta[0, :, :] = 0.0
        zeta[:, 0, :] = 0.0
        zeta[:, :, 0] = 0.0
    elif zeta is not None:
        # fewer than three electrons: the three-body sum is empty
        zeta = np.zeros_like(zeta)

    if g4 is not None:
        if eta >= 2:
            fold = 0.5 * m21 * (g4[:, :, 0, 0] + g4[0, 0, :, :])
            fold[0, 0] = 0.0
            omega += fold
            shift += 0.5 * eta * (eta - 1) * g4[0, 0, 0, 0]
        g4[:, :, 0, 0] = 0.0
        g4[0, 0, :, :] = 0.0

    shift += eta * omega[0, 0]
    omega[0, 0] = 0.0

    if decomp.kind == "hermitian":
        gamma = None if g4 is None else g4[0, :, 0, :].copy()
    else:
        gamma = g4
    return replace(decomp, omega=omega, gamma=gamma, zeta=zeta, shift=decomp.shift + shift, pruned=True)


def one_norm(decomp: LcuDecomposition, eta: int, per_string: bool = False):
    """``lambda = eta sum|w| + eta(eta-1)/2 sum|g| + eta(eta-1)(eta-2)/3 sum|z|``.

    The register multiplicities come from expanding ``sum_i``,
    ``1/2 sum_{i != j}`` and ``1/3 sum_{i != j != k}``. With
    ``per_string=True`` the unweighted coefficient sums are returned as well.
    """
    s1 = float(np.abs(decomp.omega).sum())
    s2 = 0.0 if decomp.gamma is None or eta < 2 else float(np.abs(decomp.gamma).sum())
    s3 = 0.0 if decomp.zeta is None or eta < 3 else float(np.abs(decomp.zeta).sum())
    lam = eta * s1 + 0.5 * eta * (eta - 1) * s2 + eta * (eta - 1) * (eta - 2) / 3.0 * s3
    if per_string:
        return lam, {"onebody": s1, "twobody": s2, "threebody": s3}
    return lam


def embed(op, regs, N: int, eta: int) -> np.ndarray:
    """Dense operator acting as ``op`` on registers ``regs`` (in that order), identity elsewhere.

    Register 0 is the most significant index of the state vector.
    """
    k = len(regs)
    full = np.kron(op, np.eye(N ** (eta - k)))
    order = list(regs) + [r for r in range(eta) if r not in regs]
    perm = np.argsort(order)
    t = full.reshape((N,) * (2 * eta)).transpose(list(perm) + [eta + p for p in perm])
    return t.reshape(N**eta, N**eta)


def _register_operators(decomp):
    n = decomp.N
    one = np.zeros((n, n))
    for (m, k), v in np.ndenumerate(decomp.omega):
        if v != 0.0:
            one += v * pauli_matrix(m, k, n)
    two = None
    g4 = decomp.gamma4()
    if g4 is not None and np.any(g4):
        two = np.zeros((n * n, n * n))
        paulis = {}
        for (m, k, p, q), v in np.ndenumerate(g4):
            if v != 0.0:
                a = paulis.setdefault((m, k), pauli_matrix(m, k, n))
                b = paulis.setdefault((p, q), pauli_matrix(p, q, n))
                two += v * np.kron(a, b)
    three = None
    if decomp.zeta is not None and np.any(decomp.zeta):
        z = np.array([np.diag(pauli_matrix(0, t, n)) for t in range(n)])  # z[t, x] = (-1)^(t.x)
        diag = np.einsum("mpt,mx,py,tz->xyz", decomp.zeta, z, z, z)
        three = np.diag(diag.ravel())
    return one, two, three


def reconstruct(decomp: LcuDecomposition, eta: int, include_shift: bool = True) -> np.ndarray:
    """Dense ``N^eta`` matrix of the decomposition, built from explicit Pauli strings."""
    n = decomp.N
    dim = n**eta
    if dim > RECONSTRUCT_LIMIT:
        raise ParameterError(f"reconstruction limited to dimension {RECONSTRUCT_LIMIT}, got {dim}")
    one, two, three = _register_operators(decomp)
    H = np.zeros((dim, dim))
    for i in range(eta):
        H += embed(one, [i], n, eta)
    if two is not None:
        for i, j in itertools.permutations(range(eta), 2):
            H += 0.5 * embed(two, [i, j], n, eta)
    if three is not None:
        for i, j, k in itertools.permutations(range(eta), 3):
            H -= embed(three, [i, j, k], n, eta) / 3.0
    if include_shift and decomp.shift:
        H += decomp.shift * np.eye(dim)
    return H


def brute_force_coefficient(H, masks, N: int) -> float:
    """Coefficient of a full Pauli string in ``H`` via ``tr(P^T H) / dim``.

    ``masks`` lists ``(x_mask, z_mask)`` per register.
    """
    P = np.ones((1, 1))
    for m, k in masks:
        P = np.kron(P, pauli_matrix(m, k, N))
    H = np.asarray(H)
    return float(np.trace(P.T @ H) / H.shape[0])


def walk_spectrum_check(H, lam: float) -> dict:
    """Eigenphases of the one-ancilla walk operator versus ``arccos(E_k / lambda)``.

    Builds the unitary dilation ``U = [[A, S], [S, -A]]`` with ``A = H/lambda``
    and ``S = sqrt(I - A^2)``, multiplies by the reflection ``diag(I, -I)``
    and compares the phases of its eigenvalues with ``+-arccos(E_k/lambda)``.
    """
    H = np.asarray(H, dtype=float)
    if H.shape[0] > 512:
        raise ParameterError("walk-operator check limited to dimension 512")
    if not np.allclose(H, H.T, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ParameterError("walk-operator check needs a symmetric matrix")
    E, Vec = np.linalg.eigh(0.5 * (H + H.T))
    if np.abs(E).max() > lam * (1 + 1e-12):
        raise ParameterError("spectral norm exceeds lambda")
    A = H / lam
    s = np.sqrt(np.clip(1.0 - (E / lam) ** 2, 0.0, None))
    S = (Vec * s) @ Vec.T
    d = H.shape[0]
    U = np.block([[A, S], [S, -A]])
    R = np.diag(np.concatenate([np.ones(d), -np.ones(d)]))
    Q = U @ R
    unitarity = float(np.abs(Q @ Q.T - np.eye(2 * d)).max())
    phases = np.sort(np.angle(np.linalg.eigvals(Q)))
    theta = np.arccos(np.clip(E / lam, -1.0, 1.0))
    expected = np.sort(np.concatenate([theta, -theta]))
    return {
        "phases": phases,
        "expected": expected,
        "max_phase_error": float(np.abs(phases - expected).max()),
        "unitarity_error": unitarity,
    }


def pad_to_power_of_two(T, W=None, ghost_value: float = 0.0):
    """Append ghost points with no coupling so the dimension is a power of two.

    ``T`` gets zero rows and columns (``ghost_value`` on the new diagonal);
    ``W`` (pair kernel) gets zero rows and columns. Returns ``(T, W, n_ghost)``.
    """
    T = T.toarray() if sp.issparse(T) else np.asarray(T, dtype=float)
    n = T.shape[0]
    m = 1 << max(0, (n - 1).bit_length())
    k = m - n
    if k == 0:
        return T, W, 0
    Tp = np.zeros((m, m))
    Tp[:n, :n] = T
    Tp[np.arange(n, m), np.arange(n, m)] = ghost_value
    Wp = None
    if W is not None:
        Wp = np.zeros((m, m))
        Wp[:n, :n] = np.asarray(W, dtype=float)
    return Tp, Wp, k
