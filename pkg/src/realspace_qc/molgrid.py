"""Molecule-adaptive multicenter grids.

Each nucleus carries a spherical grid: Becke-style logarithmic radii times
an angular point set (Gauss-Legendre product, Lebedev, or uniform). The
molecular grid is the union of these atomic grids with near-duplicates
removed in a deterministic first-wins order.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from ._lebedev_data import LEBEDEV_DEGREE, LEBEDEV_ORBITS
from .errors import NumericalError, ParameterError

ANGSTROM_TO_BOHR = 1.8897261254578281
NUCLEUS_EXCLUSION = 1e-8

__all__ = [
    "ANGSTROM_TO_BOHR",
    "AtomGridSpec",
    "Grid",
    "Molecule",
    "assemble_grid",
    "becke_radial",
    "gauss_legendre_sphere",
    "lebedev_sphere",
    "lebedev_weights",
    "uniform_sphere",
    "SUPPORTED_LEBEDEV_ORDERS",
]

SUPPORTED_LEBEDEV_ORDERS = tuple(sorted(LEBEDEV_ORBITS))


@dataclass(frozen=True)
class Molecule:
    """Clamped nuclei: charges ``Z`` and positions ``R`` (bohr)."""

    charges: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        Z = np.atleast_1d(np.asarray(self.charges, dtype=float))
        R = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if Z.size == 0:
            raise ParameterError("molecule has no atoms")
        if R.shape != (Z.size, 3):
            raise ParameterError(f"positions must have shape ({Z.size}, 3), got {R.shape}")
        if np.any(Z <= 0) or not np.all(np.isfinite(Z)):
            raise ParameterError("nuclear charges must be positive and finite")
        if Z.size > 1:
            d = np.linalg.norm(R[:, None, :] - R[None, :, :], axis=-1)
            d[np.diag_indices_from(d)] = np.inf
            if d.min() <= 1e-10:
                raise ParameterError("two nuclei coincide")
        Z.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "charges", Z)
        object.__setattr__(self, "positions", R)

    @property
    def natoms(self) -> int:
        return self.charges.size

    def nuclear_repulsion(self) -> float:
        e = 0.0
        for a, b in itertools.combinations(range(self.natoms), 2):
            e += self.charges[a] * self.charges[b] / np.linalg.norm(self.positions[a] - self.positions[b])
        return float(e)

    @classmethod
    def from_dict(cls, doc: dict) -> "Molecule":
        atoms = doc.get("atoms")
        if not atoms:
            raise ParameterError("molecule document must contain a non-empty 'atoms' list")
        unit = doc.get("unit", "bohr").lower()
        if unit not in ("bohr", "angstrom"):
            raise ParameterError(f"unknown unit {unit!r}; use 'bohr' or 'angstrom'")
        scale = ANGSTROM_TO_BOHR if unit == "angstrom" else 1.0
        try:
            Z = [float(a["Z"]) for a in atoms]
            R = [[scale * float(c) for c in a["xyz"]] for a in atoms]
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed atom entry: {exc}") from exc
        return cls(np.array(Z), np.array(R))

    @classmethod
    def from_json(cls, path) -> "Molecule":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "unit": "bohr",
            "atoms": [{"Z": float(z), "xyz": [float(c) for c in r]} for z, r in zip(self.charges, self.positions)],
        }


@dataclass(frozen=True)
class AtomGridSpec:
    """Per-atom grid recipe.

    ``angular`` is one of ``("lebedev", order)``, ``("gauss_legendre",
    n_theta, n_phi)`` or ``("uniform", n_theta, n_phi)``.
    """

    n_radial: int
    alpha: float = 1.0
    nu: float = 1.0
    angular: tuple = ("lebedev", 50)

    def __post_init__(self):
        if int(self.n_radial) != self.n_radial or self.n_radial < 1:
            raise ParameterError("n_radial must be a positive integer")
        if not self.alpha > 0 or not self.nu > 0:
            raise ParameterError("alpha and nu must be positive")
        kind = self.angular[0]
        if kind == "lebedev":
            if len(self.angular) != 2 or self.angular[1] not in LEBEDEV_ORBITS:
                raise ParameterError(
                    f"unsupported Lebedev order {self.angular[1:]}; supported: {SUPPORTED_LEBEDEV_ORDERS}"
                )
        elif kind in ("gauss_legendre", "uniform"):
            if len(self.angular) != 3 or min(self.angular[1:]) < 1:
                raise ParameterError(f"{kind} needs positive (n_theta, n_phi)")
        else:
            raise ParameterError(f"unknown angular kind {kind!r}")

    def directions(self) -> np.ndarray:
        kind = self.angular[0]
        if kind == "lebedev":
            return lebedev_sphere(self.angular[1])
        if kind == "gauss_legendre":
            return gauss_legendre_sphere(*self.angular[1:])
        return uniform_sphere(*self.angular[1:])

    def radii(self) -> np.ndarray:
        return becke_radial(self.n_radial, self.alpha, self.nu)

    @property
    def n_points(self) -> int:
        return self.n_radial * len(self.directions())

    @classmethod
    def from_dict(cls, doc: dict) -> "AtomGridSpec":
        ang = doc.get("angular", ["lebedev", 50])
        return cls(
            n_radial=int(doc["n_radial"]),
            alpha=float(doc.get("alpha", 1.0)),
            nu=float(doc.get("nu", 1.0)),
            angular=(str(ang[0]),) + tuple(int(a) for a in ang[1:]),
        )


@dataclass(frozen=True)
class Grid:
    """Molecular grid points with per-point provenance.

    ``atom_index[k]``, ``shell_index[k]`` and ``angular_index[k]`` identify
    the atomic grid, radial shell and angular node that produced point k.
    """

    points: np.ndarray
    atom_index: np.ndarray
    shell_index: np.ndarray
    angular_index: np.ndarray
    merge_eps: float
    max_radius: float = 0.0
    specs: tuple = field(default=(), compare=False)

    @property
    def n_points(self) -> int:
        return len(self.points)

    def to_text(self) -> str:
        lines = [
            f"{x:.17g} {y:.17g} {z:.17g} {a} {s}"
            for (x, y, z), a, s in zip(self.points, self.atom_index, self.shell_index)
        ]
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())


def becke_radial(n_r: int, alpha: float, nu: float) -> np.ndarray:
    """Radii ``r_i = -alpha * ln(1 - u_i**nu)`` with ``u_i = i/(n_r+1)``.

    The endpoint u = 1 is excluded because it maps to infinity.
    """
    if int(n_r) != n_r or n_r < 1:
        raise ParameterError("n_r must be a positive integer")
    if not alpha > 0 or not nu > 0:
        raise ParameterError("alpha and nu must be positive")
    u = np.arange(1, n_r + 1, dtype=float) / (n_r + 1)
    return -alpha * np.log1p(-(u**nu))


def legendre_roots(n: int, maxiter: int = 100) -> np.ndarray:
    """Roots of P_n in ascending order, by Newton iteration from Chebyshev guesses."""
    if n < 1:
        raise ParameterError("degree must be >= 1")
    k = np.arange(1, n + 1)
    x = -np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(maxiter):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        raise NumericalError(f"Newton iteration for Legendre roots of degree {n} did not converge")
    # exact symmetry about zero
    x = 0.5 * (x - x[::-1])
    return x


def _spherical(theta, phi):
    st = np.sin(theta)
    return np.column_stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def gauss_legendre_sphere(n_theta: int, n_phi: int) -> np.ndarray:
    """Product grid: polar angles from Legendre roots, uniform azimuth.

    Points are ordered theta-major: index = j * n_phi + k.
    """
    if n_theta < 1 or n_phi < 1:
        raise ParameterError("n_theta and n_phi must be >= 1")
    theta = 0.5 * np.pi * (legendre_roots(n_theta) + 1.0)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    return _spherical(T.ravel(), P.ravel())


def uniform_sphere(n_theta: int, n_phi: int) -> np.ndarray:
    """Product grid with midpoint-uniform polar angles and uniform azimuth."""
    if n_theta < 1 or n_phi < 1:
        raise ParameterError("n_theta and n_phi must be >= 1")
    theta = np.pi * (np.arange(n_theta) + 0.5) / n_theta
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    return _spherical(T.ravel(), P.ravel())


def _orbit_base(kind, params):
    if kind == "a1":
        return (1.0, 0.0, 0.0)
    if kind == "a2":
        s = math.sqrt(0.5)
        return (0.0, s, s)
    if kind == "a3":
        s = math.sqrt(1.0 / 3.0)
        return (s, s, s)
    if kind == "b":
        (l,) = params
        return (l, l, math.sqrt(1.0 - 2.0 * l * l))
    if kind == "c":
        (p,) = params
        return (p, math.sqrt(1.0 - p * p), 0.0)
    if kind == "d":
        r, s = params
        return (r, s, math.sqrt(1.0 - r * r - s * s))
    raise ValueError(kind)


def _expand_orbit(base):
    seen = {}
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            v = tuple(signs[i] * base[perm[i]] for i in range(3))
            key = tuple(round(c, 12) + 0.0 for c in v)
            if key not in seen:
                seen[key] = v
    return list(seen.values())


def _lebedev(order):
    if order not in LEBEDEV_ORBITS:
        raise ParameterError(f"unsupported Lebedev order {order}; supported: {SUPPORTED_LEBEDEV_ORDERS}")
    pts, wts = [], []
    for kind, w, *params in LEBEDEV_ORBITS[order]:
        orbit = _expand_orbit(_orbit_base(kind, params))
        pts.extend(orbit)
        wts.extend([w] * len(orbit))
    pts = np.array(pts)
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    return pts, np.array(wts)


def lebedev_sphere(order: int) -> np.ndarray:
    """Unit vectors of the Lebedev rule with ``order`` points."""
    return _lebedev(order)[0]


def lebedev_weights(order: int) -> np.ndarray:
    """Quadrature weights (sum to one); unused by the finite-volume scheme."""
    return _lebedev(order)[1]


def lebedev_degree(order: int) -> int:
    return LEBEDEV_DEGREE[order]


def assemble_grid(molecule: Molecule, specs, merge_eps: float = 1e-6) -> Grid:
    """Union of atom-centered spherical grids.

    Points closer than ``merge_eps`` to an earlier point (atom-major,
    shell-major order) are dropped; points within 1e-8 bohr of any nucleus
    are rejected.
    """
    if isinstance(specs, AtomGridSpec):
        specs = [specs] * molecule.natoms
    specs = tuple(specs)
    if len(specs) != molecule.natoms:
        raise ParameterError(f"need {molecule.natoms} atom grid specs, got {len(specs)}")
    chunks, atom_idx, shell_idx, ang_idx = [], [], [], []
    rmax = 0.0
    for a, (center, spec) in enumerate(zip(molecule.positions, specs)):
        radii = spec.radii()
        dirs = spec.directions()
        rmax = max(rmax, float(radii[-1]))
        for s, r in enumerate(radii):
            chunks.append(center + r * dirs)
            atom_idx.append(np.full(len(dirs), a))
            shell_idx.append(np.full(len(dirs), s))
            ang_idx.append(np.arange(len(dirs)))
    pts = np.concatenate(chunks)
    atom_idx = np.concatenate(atom_idx)
    shell_idx = np.concatenate(shell_idx)
    ang_idx = np.concatenate(ang_idx)

    keep = np.ones(len(pts), dtype=bool)
    dn = np.linalg.norm(pts[:, None, :] - molecule.positions[None, :, :], axis=-1)
    keep &= dn.min(axis=1) > NUCLEUS_EXCLUSION
    if merge_eps > 0:
        tree = cKDTree(pts)
        pairs = tree.query_pairs(merge_eps, output_type="ndarray")
        if len(pairs):
            pairs = np.sort(pairs, axis=1)
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
            for i, j in pairs:
                if keep[i]:
                    keep[j] = False
    if not keep.any():
        raise ParameterError("grid is empty after merging")
    return Grid(
        points=pts[keep],
        atom_index=atom_idx[keep],
        shell_index=shell_idx[keep],
        angular_index=ang_idx[keep],
        merge_eps=float(merge_eps),
        max_radius=rmax,
        specs=specs,
    )
