"""Eigensolvers: dense reference and a matrix-free generalized Davidson.

The Davidson solver targets the eigenvalue with the lowest real part and
works for non-symmetric operators whose wanted eigenvalue is real (the
transcorrelated case). The projected matrix is solved with a general
eigensolver; ties in real part are broken by the smaller imaginary part.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, InternalConsistencyError, NumericalError, ParameterError

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096

__all__ = [
    "EigResult",
    "dense_eig",
    "davidson",
    "initial_guess",
    "separable_preconditioner",
    "lowest_eigs",
    "write_trace",
]


@dataclass
class EigResult:
    """Converged (or best-effort) eigenpair with its convergence history."""

    eigenvalue: float
    vector: np.ndarray
    residual: float
    iterations: int
    imag: float = 0.0
    trace: list = field(default_factory=list)


def _order(vals):
    return np.lexsort((np.abs(vals.imag), vals.real))


def dense_eig(matrix, hermitian: bool | None = None):
    """Full spectrum sorted by real part, with right eigenvectors as columns.

    Parameters
    ----------
    matrix : (n, n) array_like or sparse matrix
        ``n <= 4096``.
    hermitian : bool, optional
        Use the symmetric solver. Detected automatically when omitted.
    """
    a = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ParameterError("matrix must be square")
    if a.shape[0] > DENSE_LIMIT:
        raise ParameterError(f"dense eigensolver limited to dimension {DENSE_LIMIT}")
    if hermitian is None:
        hermitian = np.allclose(a, a.conj().T, rtol=0, atol=1e-13 * max(1.0, np.abs(a).max()))
    try:
        if hermitian:
            vals, vecs = np.linalg.eigh(a)
            return vals, vecs
        vals, vecs = sla.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"dense eigensolver failed: {exc}") from exc
    idx = _order(vals)
    vals, vecs = vals[idx], vecs[:, idx]
    if np.all(vals.imag == 0):
        vals = vals.real
        vecs = vecs.real if np.all(vecs.imag == 0) else vecs
    return vals, vecs


def _select(theta):
    """Index of the Ritz value with lowest real part (ties: smallest |imag|)."""
    re = theta.real
    lowest = re.min()
    tol = 1e-12 * max(1.0, abs(lowest))
    cand = np.flatnonzero(re <= lowest + tol)
    return int(cand[np.argmin(np.abs(theta.imag[cand]))])


def _orthonormalize_against(v, basis, count):
    for _ in range(2):
        if count:
            coef = basis[:, :count].T @ v
            v = v - basis[:, :count] @ coef
    nrm = np.linalg.norm(v)
    return v, nrm


def davidson(
    apply,
    guess,
    diagonal=None,
    tol: float = 1e-8,
    max_subspace: int = 20,
    max_iter: int = 2000,
    hermitian: bool = False,
    callback=None,
    preconditioner=None,
) -> EigResult:
    """Lowest-real-part eigenpair of a matrix-free operator.

    Parameters
    ----------
    apply : callable
        ``apply(x) -> A @ x`` for 1-D float arrays.
    guess : ndarray
        Nonzero start vector.
    diagonal : ndarray, optional
        Diagonal of ``A`` for the preconditioner ``(theta - diag)^-1``.
        Without it the plain residual is used as correction.
    tol : float
        Convergence threshold on the residual 2-norm of the unit Ritz vector.
    max_subspace : int
        When the basis reaches this size it is collapsed to the current and
        previous Ritz vectors.
    max_iter : int
        Maximum number of operator applications after the first.
    hermitian : bool
        Use the symmetric projected eigensolver.
    callback : callable, optional
        Called as ``callback(iteration, eigenvalue, residual)``.
    preconditioner : callable, optional
        ``preconditioner(residual, theta)`` returning the correction vector,
        approximating ``(theta - A)^-1 residual``. Takes precedence over
        ``diagonal``.

    Returns
    -------
    EigResult

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations; ``.best`` holds the last EigResult.
    """
    x0 = np.asarray(guess, dtype=float).ravel()
    n = x0.size
    if max_subspace < 3:
        raise ParameterError("max_subspace must be at least 3")
    max_subspace = min(max_subspace, n)
    nrm = np.linalg.norm(x0)
    if not nrm > 0:
        raise ParameterError("guess must be nonzero")
    V = np.empty((n, max_subspace))
    AV = np.empty((n, max_subspace))
    V[:, 0] = x0 / nrm
    AV[:, 0] = apply(V[:, 0])
    k = 1
    trace = []
    x_prev = None
    best = None
    for it in range(max_iter + 1):
        M = V[:, :k].T @ AV[:, :k]
        if hermitian:
            theta, Y = np.linalg.eigh(0.5 * (M + M.T))
            j = 0
            th = complex(theta[0])
            y = Y[:, 0]
        else:
            theta, Y = sla.eig(M)
            j = _select(theta)
            th = theta[j]
            y = Y[:, j]
            if np.abs(y.imag).max() > 0:
                # real operator, (nearly) real eigenvalue: pick the real part of the
                # phase-aligned vector
                y = y * np.exp(-1j * np.angle(y[np.argmax(np.abs(y))]))
            y = y.real
        y /= np.linalg.norm(y)
        lam = th.real
        x = V[:, :k] @ y
        ax = AV[:, :k] @ y
        xn = np.linalg.norm(x)
        x /= xn
        ax /= xn
        r = ax - lam * x
        res = float(np.linalg.norm(r))
        trace.append((it, float(lam), res))
        if callback is not None:
            callback(it, float(lam), res)
        best = EigResult(float(lam), x, res, it, float(th.imag), trace)
        if res <= tol:
            return best
        if it == max_iter:
            break
        if preconditioner is not None:
            t = preconditioner(r, lam)
        elif diagonal is not None:
            denom = lam - diagonal
            small = np.abs(denom) < 1e-8
            denom = np.where(small, np.copysign(1e-8, denom + 0.0), denom)
            t = r / denom
        else:
            t = r.copy()
        if k + 1 > max_subspace:
            # collapse onto the current and previous Ritz vectors
            V[:, 0] = x
            AV[:, 0] = ax
            k = 1
            if x_prev is not None:
                w, wn = _orthonormalize_against(x_prev, V, 1)
                if wn > 1e-8:
                    V[:, 1] = w / wn
                    AV[:, 1] = apply(V[:, 1])
                    k = 2
        x_prev = x
        t, tn = _orthonormalize_against(t, V, k)
        if tn < 1e-14:
            # preconditioned correction lies in the subspace; fall back to the residual
            t, tn = _orthonormalize_against(r, V, k)
            if tn < 1e-14:
                raise ConvergenceError("Davidson stagnated: no new search direction", best)
        V[:, k] = t / tn
        AV[:, k] = apply(V[:, k])
        k += 1
    raise ConvergenceError(f"Davidson did not converge in {max_iter} iterations (residual {best.residual:.3e})", best)


def separable_preconditioner(onebody, eta: int, floor: float = 1e-2):
    """Exact inverse of ``sum_i T(i) - theta`` for a symmetric one-body matrix ``T``.

    The many-electron residual is rotated into the product eigenbasis of
    ``T`` (one dense ``eigh`` of size N), divided by ``theta - sum_i e_i``
    and rotated back; denominators smaller than ``floor`` in magnitude are
    clamped. Suitable when the one-body part dominates, as for atoms and
    small molecules. Works for ``eta`` in {1, 2}.
    """
    if eta not in (1, 2):
        raise ParameterError("separable preconditioner supports eta in {1, 2}")
    T = onebody.toarray() if sp.issparse(onebody) else np.asarray(onebody, dtype=float)
    e, Q = np.linalg.eigh(0.5 * (T + T.T))
    n = len(e)
    levels = e if eta == 1 else e[:, None] + e[None, :]

    def apply(residual, theta):
        d = theta - levels
        d = np.where(np.abs(d) < floor, np.copysign(floor, d), d)
        if eta == 1:
            return Q @ ((Q.T @ residual) / d)
        R = residual.reshape(n, n)
        return (Q @ ((Q.T @ R @ Q) / d) @ Q.T).reshape(-1)

    return apply


def lowest_eigs(mat, k: int = 1, sigma: float | None = None):
    """Lowest-real-part eigenvalues of a sparse matrix (helper for small studies).

    Dense for dimension <= 2000; otherwise shift-invert ARPACK around
    ``sigma`` (estimated by a loose Davidson run when omitted).
    """
    n = mat.shape[0]
    if n <= 2000:
        vals, _ = dense_eig(mat.toarray() if sp.issparse(mat) else mat, hermitian=False)
        return np.asarray(vals[:k], dtype=complex)
    if sigma is None:
        diag = mat.diagonal()
        guess = np.ones(n)
        try:
            est = davidson(lambda v: mat @ v, guess, diag, tol=1e-3, max_iter=300).eigenvalue
        except ConvergenceError as exc:
            est = exc.best.eigenvalue
        sigma = est - 0.05 * max(abs(est), 1.0)
    vals = spla.eigs(mat.tocsc(), k=k, sigma=sigma, which="LM", return_eigenvectors=False)
    return vals[_order(vals)]


def initial_guess(points, volumes, molecule, eta: int = 1, weighted: bool = True, exclude=None) -> np.ndarray:
    """Slater-1s LCAO guess ``psi_m ~ sqrt(v_m) sum_a exp(-Z_a |r_m - R_a|)``.

    ``weighted=False`` omits ``sqrt(v_m)`` (point-sample representation).
    For ``eta = 2`` the normalized tensor square is returned, which is
    symmetric under exchange of the two electrons.

    ``exclude`` is an optional boolean mask of cells that start at zero.
    Pass the cells touching the bounding box: they reach far beyond the
    grid, so ``sqrt(v_m)`` times the point value grossly overstates their
    share of the orbital. The mask is ignored if it covers every cell.
    """
    if eta not in (1, 2):
        raise ParameterError("initial guess supports eta in {1, 2}")
    pts = np.asarray(points, dtype=float)
    d = np.linalg.norm(pts[:, None, :] - molecule.positions[None, :, :], axis=-1)
    phi = np.exp(-molecule.charges[None, :] * d).sum(axis=1)
    if weighted:
        phi = phi * np.sqrt(np.asarray(volumes, dtype=float))
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=bool)
        if not exclude.all():
            phi = np.where(exclude, 0.0, phi)
    nrm = np.linalg.norm(phi)
    if not nrm > 0:
        raise InternalConsistencyError("initial guess has zero norm")
    phi = phi / nrm
    if eta == 1:
        return phi
    return np.outer(phi, phi).ravel()


def write_trace(trace, path) -> None:
    """Write a Davidson trace as CSV ``iter,eigenvalue,residual``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "eigenvalue", "residual"])
        for it, lam, res in trace:
            w.writerow([it, f"{lam:.17g}", f"{res:.17g}"])
