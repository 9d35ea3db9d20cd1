"""Classical simulation of Chebyshev phase estimation for real-spectrum matrices.

For ``x = E/alpha = cos(2 pi phi)`` the Chebyshev vectors satisfy
``T_l(H/alpha) psi = cos(2 pi l phi) psi`` when ``psi`` is an eigenvector,
so a discrete Fourier transform over the history index ``l`` peaks at
``l/upsilon = +-phi``. The history state is produced the way the quantum
algorithm does it, by solving a unit lower-triangular "padded" linear
system, which here is plain block forward substitution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateInputError, ParameterError

__all__ = [
    "QcpeConfig",
    "HistoryState",
    "cheb_T",
    "cheb_U",
    "cheb_T_rescaled",
    "history_by_recurrence",
    "pad_matrix",
    "solve_padded",
    "cmod",
    "spectral_norm",
    "register_distribution",
    "qcpe_estimate",
    "random_real_spectrum_matrix",
]


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-15):
        raise ParameterError("Chebyshev argument must lie in [-1, 1]")
    return np.clip(x, -1.0, 1.0)


def cheb_T(l: int, x):
    """First-kind Chebyshev polynomial ``cos(l arccos x)``."""
    x = _check_unit(x)
    return np.cos(l * np.arccos(x))


def cheb_U(l: int, x):
    """Second-kind Chebyshev polynomial ``sin((l+1) t)/sin t`` with ``x = cos t``."""
    x = _check_unit(x)
    t = np.arccos(x)
    s = np.sin(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin((l + 1) * t) / s
    # endpoints: U_l(1) = l + 1, U_l(-1) = (-1)^l (l + 1)
    edge = np.where(x > 0, 1.0, (-1.0) ** l) * (l + 1)
    return np.where(np.abs(s) < 1e-12, edge, val)


def cheb_T_rescaled(l: int, x):
    """``T_0/2`` for ``l = 0``, otherwise ``T_l``."""
    return 0.5 * cheb_T(0, x) if l == 0 else cheb_T(l, x)


def cmod(q: float, x):
    """Centered modulus ``x - q floor((x + q/2)/q)``, in ``[-q/2, q/2)``."""
    if not q > 0:
        raise ParameterError("modulus must be positive")
    x = np.asarray(x, dtype=float)
    return x - q * np.floor((x + 0.5 * q) / q)


@dataclass
class QcpeConfig:
    """Phase-estimation parameters.

    ``upsilon`` is the history length (a power of two), ``upsilon_prime``
    the success window in DFT bins and ``alpha_H`` the normalization
    (``>= 2 ||H||``; ``None`` picks ``2.5 ||H||``).
    """

    upsilon: int = 256
    upsilon_prime: int = 5
    alpha_H: float | None = None
    repeats: int = 15

    def __post_init__(self):
        u = int(self.upsilon)
        if u < 2 or u & (u - 1):
            raise ParameterError("upsilon must be a power of two >= 2")
        if int(self.upsilon_prime) < 5:
            raise ParameterError("upsilon_prime must be at least 5")
        if int(self.repeats) < 1:
            raise ParameterError("repeats must be >= 1")
        self.upsilon, self.upsilon_prime, self.repeats = u, int(self.upsilon_prime), int(self.repeats)

    @classmethod
    def from_dict(cls, doc: dict) -> "QcpeConfig":
        known = {"upsilon", "upsilon_prime", "alpha_H", "repeats"}
        extra = set(doc) - known
        if extra:
            raise ParameterError(f"unknown qcpe keys: {sorted(extra)}")
        return cls(**doc)


@dataclass
class HistoryState:
    """Blocks ``T_l(H/alpha) psi`` (``rescaled``: block 0 halved), shape ``(upsilon, n)``."""

    blocks: np.ndarray
    alpha: float
    rescaled: bool = False

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.blocks))

    def recurrence_residual(self, H) -> float:
        """Largest block residual of ``T_{l+1} = 2(H/a) T_l - T_{l-1}`` (rescaled-aware)."""
        b = self.blocks
        if len(b) < 3:
            return 0.0
        prev = b[:-2].copy()
        if self.rescaled:
            prev[0] *= 2.0
        res = b[2:] - 2.0 * (H @ b[1:-1].T).T / self.alpha + prev
        return float(np.abs(res).max())


def _as_operator(H):
    if sp.issparse(H):
        return H.tocsr()
    if callable(H):
        return H
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ParameterError("H must be a square matrix")
    return H


def _matvec(H, v):
    return H(v) if callable(H) else H @ v


def history_by_recurrence(H, alpha: float, psi, upsilon: int) -> HistoryState:
    """Chebyshev history via ``T_{l+1} = 2 (H/alpha) T_l - T_{l-1}``."""
    H = _as_operator(H)
    psi = np.asarray(psi, dtype=float)
    out = np.empty((upsilon, psi.size))
    out[0] = psi
    if upsilon > 1:
        out[1] = _matvec(H, psi) / alpha
    for l in range(1, upsilon - 1):
        out[l + 1] = 2.0 * _matvec(H, out[l]) / alpha - out[l - 1]
    return HistoryState(out, float(alpha), rescaled=False)


def pad_matrix(H, alpha: float, upsilon: int):
    """Sparse ``I x I + L^2 x I - 2 L x (H/alpha)`` with ``L`` the lower shift."""
    H = sp.csr_matrix(np.asarray(H, dtype=float) if not sp.issparse(H) else H)
    n = H.shape[0]
    shift = sp.eye(upsilon, k=-1, format="csr")
    eye = sp.eye(n, format="csr")
    return (sp.kron(sp.eye(upsilon), eye) + sp.kron(shift @ shift, eye) - 2.0 * sp.kron(shift, H / alpha)).tocsr()


def solve_padded(H, alpha: float, psi, upsilon: int) -> HistoryState:
    """Solve ``Pad(H/alpha) Phi = ((|0> - |2>)/2) x psi`` by block forward substitution.

    The solution blocks are ``T~_l(H/alpha) psi``: ``psi/2`` then ``T_l psi``.
    """
    if upsilon < 3:
        raise ParameterError("upsilon must be at least 3")
    H = _as_operator(H)
    psi = np.asarray(psi, dtype=float)
    out = np.zeros((upsilon, psi.size))
    rhs0, rhs2 = 0.5 * psi, -0.5 * psi
    out[0] = rhs0
    out[1] = 2.0 * _matvec(H, out[0]) / alpha
    for l in range(2, upsilon):
        rhs = rhs2 if l == 2 else 0.0
        out[l] = rhs + 2.0 * _matvec(H, out[l - 1]) / alpha - out[l - 2]
    return HistoryState(out, float(alpha), rescaled=True)


def spectral_norm(H, iters: int = 200, seed: int = 0) -> float:
    """``||H||_2``: exact for dense matrices up to 2048, power iteration on ``H^T H`` otherwise."""
    if not sp.issparse(H) and not callable(H):
        H = np.asarray(H, dtype=float)
        if H.shape[0] <= 2048:
            return float(np.linalg.norm(H, 2))
    if callable(H):
        raise ParameterError("spectral norm of a matrix-free operator must be supplied via alpha_H")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(H.shape[0])
    est = 0.0
    for _ in range(iters):
        w = H.T @ (H @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        est = math.sqrt(nw)
    return float(est)


def register_distribution(history: HistoryState) -> np.ndarray:
    """Outcome probabilities of the history register after a unitary DFT."""
    F = np.fft.fft(history.blocks, axis=0, norm="ortho")
    p = (np.abs(F) ** 2).sum(axis=1)
    tot = p.sum()
    if not tot > 0:
        raise DegenerateInputError("history state is zero")
    return p / tot


def _second_kind_proxy(H, alpha, psi, upsilon):
    u_prev = psi
    u_cur = 2.0 * _matvec(H, psi) / alpha
    best = max(np.linalg.norm(u_prev), np.linalg.norm(u_cur))
    for _ in range(2, upsilon):
        u_prev, u_cur = u_cur, 2.0 * _matvec(H, u_cur) / alpha - u_prev
        best = max(best, float(np.linalg.norm(u_cur)))
    return float(best / np.linalg.norm(psi))


def qcpe_estimate(H, psi, config: QcpeConfig, rng=None, reference: float | None = None, seed: int | None = None):
    """Estimate the eigenvalue whose eigenvector ``psi`` approximates.

    Parameters
    ----------
    H : (n, n) array or sparse matrix with real spectrum
    psi : (n,) initial state
    config : QcpeConfig
    rng : numpy Generator, optional
        Sampling source; built from ``seed`` when omitted.
    reference : float, optional
        Exact eigenvalue, used only for success statistics.

    Returns
    -------
    (E_estimate, statistics)
        ``statistics`` holds ``phi`` (from ``reference`` when given), the
        distribution ``peaks``, the sampled indices, the per-sample
        estimates, ``success_rate`` and ``max_second_kind_norm``.
    """
    H = _as_operator(H)
    psi = np.asarray(psi, dtype=float)
    nrm = np.linalg.norm(psi)
    if not nrm > 0:
        raise DegenerateInputError("initial state has zero norm")
    psi = psi / nrm
    h_norm = spectral_norm(H) if not callable(H) else None
    alpha = config.alpha_H
    if alpha is None:
        if h_norm is None:
            raise ParameterError("alpha_H is required for matrix-free operators")
        alpha = 2.5 * h_norm
    if h_norm is not None and alpha < 2.0 * h_norm * (1 - 1e-12):
        raise ParameterError(f"alpha_H = {alpha:g} is below 2||H|| = {2 * h_norm:g}")
    if rng is None:
        rng = np.random.default_rng(seed)
    ups = config.upsilon
    hist = solve_padded(H, alpha, psi, ups)
    prob = register_distribution(hist)
    samples = rng.choice(ups, size=config.repeats, p=prob)
    estimates = alpha * np.cos(2.0 * np.pi * samples / ups)
    estimate = float(np.median(estimates))
    order = np.argsort(prob)[::-1]
    stats = {
        "alpha_H": float(alpha),
        "upsilon": ups,
        "upsilon_prime": config.upsilon_prime,
        "peaks": [int(k) for k in order[:2]],
        "peak_probability": float(prob[order[:2]].sum()),
        "samples": [int(k) for k in samples],
        "estimates": [float(e) for e in estimates],
        "E_estimate": estimate,
        "max_second_kind_norm": _second_kind_proxy(H, alpha, psi, ups),
    }
    if seed is not None:
        stats["seed"] = int(seed)
    if reference is not None:
        phi = math.acos(max(-1.0, min(1.0, reference / alpha))) / (2.0 * math.pi)
        window = config.upsilon_prime / ups
        ok = np.minimum(np.abs(cmod(1.0, samples / ups - phi)), np.abs(cmod(1.0, samples / ups + phi))) < window
        stats["phi"] = phi
        stats["success"] = [bool(b) for b in ok]
        stats["success_rate"] = float(ok.mean())
        stats["error_bound"] = 2.0 * math.pi * alpha * window
        stats["median_error"] = abs(estimate - reference)
    return estimate, stats


def write_report(stats: dict, path) -> None:
    keys = ("phi", "peaks", "success_rate", "E_estimate", "seed")
    doc = {k: stats[k] for k in keys if k in stats}
    doc.update({k: v for k, v in stats.items() if k not in keys})
    Path(path).write_text(json.dumps(doc, indent=2))


def random_real_spectrum_matrix(n: int, rng, cond: float = 10.0) -> tuple:
    """``D S D^-1`` with ``S`` random symmetric and ``D`` a random well-conditioned matrix.

    Returns ``(H, eigenvalues, right_eigenvectors)``; the spectrum is real by construction.
    """
    a = rng.standard_normal((n, n))
    S = 0.5 * (a + a.T)
    E, V = np.linalg.eigh(S)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    D = q * np.geomspace(1.0, cond, n)
    R = D @ V
    H = R @ np.diag(E) @ np.linalg.inv(R)
    return H, E, R / np.linalg.norm(R, axis=0)
