"""Experiment drivers behind the command-line interface.

A run is described by a JSON document::

    {
      "molecule": {"unit": "angstrom", "atoms": [{"Z": 1, "xyz": [0, 0, 0]}]},
      "grid": {"n_radial": 30, "alpha": 1.0, "nu": 1.0, "angular": ["lebedev", 50]},
      "electrons": 1,
      "jastrow": {"mu_ne": 1.0, "mu_ee": "inf"},
      "solver": {"tol": 1e-6, "max_iter": 500, "max_subspace": 12}
    }

``grid`` may also be a list with one entry per atom. A ``jastrow`` block
selects the transcorrelated Hamiltonian. Command-specific blocks
(``scan``, ``lcu``, ``qcpe``, ``cusp``) are described with each driver.
All energies are in hartree, lengths in bohr.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import hamiltonian as hm
from . import lcu as lcu_mod
from . import qcpe as qcpe_mod
from .eigensolve import (
    EigResult,
    davidson,
    dense_eig,
    initial_guess,
    separable_preconditioner,
)
from .errors import ConvergenceError, ParameterError
from .fvops import SELF_CELL_C0
from .molgrid import ANGSTROM_TO_BOHR, AtomGridSpec, Molecule, assemble_grid
from .transcorrelated import JastrowParams
from .voronoi import diagram_for_grid

log = logging.getLogger(__name__)

CHEMICAL_ACCURACY = 1.6e-3

_TOP_KEYS = {
    "molecule",
    "molecule_file",
    "grid",
    "merge_eps",
    "electrons",
    "jastrow",
    "boundary",
    "c0",
    "solver",
    "seed",
    "scan",
    "lcu",
    "qcpe",
    "cusp",
}


@dataclass
class RunConfig:
    """Validated run description (see module docstring for the JSON layout)."""

    molecule: Molecule
    specs: tuple
    electrons: int = 1
    jastrow: JastrowParams | None = None
    boundary: str = "open"
    c0: float | None = SELF_CELL_C0
    merge_eps: float = 1e-6
    solver: dict = field(default_factory=dict)
    seed: int = 0
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ParameterError("configuration must be a JSON object")
        unknown = set(doc) - _TOP_KEYS
        if unknown:
            raise ParameterError(f"unknown configuration keys: {sorted(unknown)}")
        if "molecule" in doc:
            mol = Molecule.from_dict(doc["molecule"])
        elif "molecule_file" in doc:
            path = Path(doc["molecule_file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            try:
                mol = Molecule.from_json(path)
            except OSError as exc:
                raise ParameterError(f"cannot read molecule file: {exc}") from exc
        else:
            raise ParameterError("configuration needs 'molecule' or 'molecule_file'")
        grid = doc.get("grid")
        if grid is None:
            raise ParameterError("configuration needs a 'grid' block")
        grids = grid if isinstance(grid, list) else [grid] * mol.natoms
        if len(grids) != mol.natoms:
            raise ParameterError(f"need one grid block per atom ({mol.natoms}), got {len(grids)}")
        specs = tuple(AtomGridSpec.from_dict(g) for g in grids)
        eta = doc.get("electrons", None)
        if eta is None:
            eta = int(round(mol.charges.sum()))
        eta = int(eta)
        if eta < 1:
            raise ParameterError("electrons must be >= 1")
        jas = JastrowParams.from_dict(doc["jastrow"]) if doc.get("jastrow") is not None else None
        boundary = doc.get("boundary", "open")
        if boundary not in ("open", "dirichlet"):
            raise ParameterError(f"unknown boundary {boundary!r}")
        solver = dict(doc.get("solver", {}))
        bad = set(solver) - {"tol", "max_iter", "max_subspace"}
        if bad:
            raise ParameterError(f"unknown solver keys: {sorted(bad)}")
        extra = {k: doc[k] for k in ("scan", "lcu", "qcpe", "cusp") if k in doc}
        c0 = doc.get("c0", SELF_CELL_C0)
        if c0 is not None:
            c0 = float(c0)
            if not c0 > 0:
                raise ParameterError("c0 must be positive (or null to exclude coincident cells)")
        elif jas is not None:
            raise ParameterError("the TC operator needs a finite c0")
        return cls(
            molecule=mol,
            specs=specs,
            electrons=eta,
            jastrow=jas,
            boundary=boundary,
            c0=c0,
            merge_eps=float(doc.get("merge_eps", 1e-6)),
            solver=solver,
            seed=int(doc.get("seed", 0)),
            extra=extra,
        )

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ParameterError(f"cannot read configuration: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParameterError(f"configuration is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent)

    def with_molecule(self, molecule: Molecule, specs=None, electrons=None) -> "RunConfig":
        return RunConfig(
            molecule=molecule,
            specs=self.specs if specs is None else specs,
            electrons=self.electrons if electrons is None else electrons,
            jastrow=self.jastrow,
            boundary=self.boundary,
            c0=self.c0,
            merge_eps=self.merge_eps,
            solver=self.solver,
            seed=self.seed,
            extra=self.extra,
        )


def build_grid(cfg: RunConfig):
    grid = assemble_grid(cfg.molecule, cfg.specs, merge_eps=cfg.merge_eps)
    return grid, diagram_for_grid(grid, cfg.molecule)


def build_operator(cfg: RunConfig, diagram, electrons: int | None = None, jastrow: JastrowParams | None = None):
    eta = cfg.electrons if electrons is None else electrons
    jas = cfg.jastrow if jastrow is None else jastrow
    if jas is None:
        return hm.hermitian_operator(diagram, cfg.molecule, eta, c0=cfg.c0, boundary=cfg.boundary)
    return hm.tc_operator(diagram, cfg.molecule, eta, jas, c0=cfg.c0, boundary=cfg.boundary)


def ground_state(cfg: RunConfig, diagram, op) -> EigResult:
    """Lowest eigenpair of ``op`` with a Slater-type guess and the separable preconditioner.

    Raises ConvergenceError (carrying the best estimate) on failure.
    """
    if op.eta > 2:
        raise ParameterError("ground-state solves support at most two electrons")
    tol = float(cfg.solver.get("tol", 1e-6))
    max_iter = int(cfg.solver.get("max_iter", 500))
    default_sub = 20 if op.dim <= 10**6 else 8
    max_sub = int(cfg.solver.get("max_subspace", default_sub))
    bare = hm.hermitian_operator(diagram, cfg.molecule, 1, c0=cfg.c0, boundary=cfg.boundary)
    pc = separable_preconditioner(bare.onebody, op.eta)
    guess = initial_guess(diagram.points, diagram.volumes, cfg.molecule, eta=op.eta, exclude=diagram.boundary)
    return davidson(
        op.apply,
        guess,
        tol=tol,
        max_iter=max_iter,
        max_subspace=max_sub,
        hermitian=op.kind == "hermitian",
        preconditioner=pc,
    )


def solve(cfg: RunConfig) -> tuple[dict, EigResult]:
    """Grid, diagram, operator and Davidson ground state.

    Returns the energy report and the eigen result. On non-convergence a
    ConvergenceError is raised whose ``report`` attribute holds the partial
    report.
    """
    grid, diagram = build_grid(cfg)
    op = build_operator(cfg, diagram)
    e_nuc = cfg.molecule.nuclear_repulsion()
    report = {
        "N": int(diagram.n_cells),
        "dim": int(op.dim),
        "electrons": op.eta,
        "kind": op.kind,
        "E_nuclear": e_nuc,
    }
    if op.kind == "transcorrelated":
        report["mu_ne"] = cfg.jastrow.mu_ne
        report["mu_ee"] = cfg.jastrow.mu_ee
    try:
        res = ground_state(cfg, diagram, op)
    except ConvergenceError as exc:
        best = exc.best
        if best is not None:
            report.update(_energy_fields(best, e_nuc))
        report["converged"] = False
        exc.report = report
        raise
    report.update(_energy_fields(res, e_nuc))
    report["converged"] = True
    return report, res


def _energy_fields(res: EigResult, e_nuc: float) -> dict:
    return {
        "E_electronic": float(res.eigenvalue),
        "E_total": float(res.eigenvalue + e_nuc),
        "residual": float(res.residual),
        "iterations": int(res.iterations),
        "imag": float(res.imag),
    }


def atom_energies(cfg: RunConfig) -> list[float]:
    """Ground-state energy of every atom alone on its own atomic grid (neutral atoms)."""
    out = []
    for a in range(cfg.molecule.natoms):
        z = float(cfg.molecule.charges[a])
        eta = int(round(z))
        if abs(eta - z) > 1e-12 or eta not in (1, 2):
            raise ParameterError("atomic reference energies need neutral atoms with 1 or 2 electrons")
        atom = Molecule([z], [cfg.molecule.positions[a]])
        sub = cfg.with_molecule(atom, specs=(cfg.specs[a],), electrons=eta)
        rep, _ = solve(sub)
        out.append(rep["E_total"])
    return out


def scan_dissociation(cfg: RunConfig, distances_angstrom) -> list[dict]:
    """Total and binding energies of a diatomic along the bond axis.

    The first atom stays at the origin and the second is placed on +z.
    Binding energies are relative to the separated atoms on their own
    atomic grids. A failed point is recorded with ``NaN`` energies and an
    ``error`` message.
    """
    if cfg.molecule.natoms != 2:
        raise ParameterError("dissociation scans need a diatomic molecule")
    ref = sum(atom_energies(cfg))
    rows = []
    for r_ang in distances_angstrom:
        R = float(r_ang) * ANGSTROM_TO_BOHR
        mol = Molecule(cfg.molecule.charges, [[0.0, 0.0, 0.0], [0.0, 0.0, R]])
        row = {"R": float(r_ang), "R_bohr": R}
        try:
            rep, _ = solve(cfg.with_molecule(mol))
            row.update(E_total=rep["E_total"], E_binding=rep["E_total"] - ref, error="")
        except ConvergenceError as exc:
            log.warning("R = %s failed: %s", r_ang, exc)
            row.update(E_total=math.nan, E_binding=math.nan, error=str(exc))
        rows.append(row)
    return rows


def scan_convergence(cfg: RunConfig, n_radial_list, reference: float | None = None) -> dict:
    """Energy error along a radial refinement ladder (same angular grid and exponents).

    ``reference`` defaults to ``-Z^2/2`` for a one-electron atom.
    """
    if reference is None:
        if cfg.molecule.natoms == 1 and cfg.electrons == 1:
            reference = -0.5 * float(cfg.molecule.charges[0]) ** 2
        else:
            raise ParameterError("scan-convergence needs 'reference_energy' for this system")
    rows = []
    first = None
    for nr in n_radial_list:
        specs = tuple(
            AtomGridSpec(int(nr), alpha=s.alpha, nu=s.nu, angular=s.angular) for s in cfg.specs
        )
        sub = cfg.with_molecule(cfg.molecule, specs=specs)
        try:
            rep, _ = solve(sub)
            err = rep["E_total"] - reference
            rows.append({"n_radial": int(nr), "N": rep["N"], "E": rep["E_total"], "error": err})
            if first is None and abs(err) <= CHEMICAL_ACCURACY:
                first = rep["N"]
        except ConvergenceError as exc:
            rows.append({"n_radial": int(nr), "N": -1, "E": math.nan, "error": math.nan})
            log.warning("n_radial = %s failed: %s", nr, exc)
    return {"reference": reference, "rows": rows, "first_N_chemical_accuracy": first}


def _pad_tensors(T, W4, B, n_total):
    n = T.shape[0]
    Tp = np.zeros((n_total, n_total))
    Tp[:n, :n] = T
    W4p = Bp = None
    if W4 is not None:
        W4p = np.zeros((n_total,) * 4)
        W4p[:n, :n, :n, :n] = W4
    if B is not None:
        Bp = np.zeros((n_total,) * 3)
        Bp[:n, :n, :n] = B
    return Tp, W4p, Bp


def lcu_run(cfg: RunConfig, rule: str = "exact", validate: bool = False) -> tuple:
    """Pauli LCU of the run's Hamiltonian on its (small) grid.

    The grid is padded to a power of two with uncoupled ghost points.
    Returns ``(decomposition, summary)``; with ``validate`` the summary also
    holds the largest deviation between the reconstructed operator and the
    dense Hamiltonian on the physical configurations.
    """
    grid, diagram = build_grid(cfg)
    op = build_operator(cfg, diagram)
    n = op.N
    n_pad = 1 << max(0, (n - 1).bit_length())
    if n_pad**2 > 1 << 16:
        raise ParameterError(f"LCU tables for N = {n} (padded {n_pad}) are too large")
    T, W4, B = op.lcu_tensors()
    Tp, W4p, Bp = _pad_tensors(T, W4, B, n_pad)
    if op.kind == "hermitian":
        Wp = None
        if op.pair is not None:
            Wp = np.zeros((n_pad, n_pad))
            Wp[:n, :n] = op._pairs()
        dec = lcu_mod.hermitian_lcu(Tp, Wp)
    else:
        dec = lcu_mod.tc_lcu(Tp, W4p, Bp)
    pruned = lcu_mod.prune_merge(dec, op.eta, rule=rule)
    lam, parts = lcu_mod.one_norm(pruned, op.eta, per_string=True)
    summary = pruned.summary(op.eta)
    summary.update({"lambda_parts": parts, "N_physical": int(n), "n_ghost": int(n_pad - n), "rule": rule})
    if validate:
        if n_pad**op.eta > lcu_mod.RECONSTRUCT_LIMIT or op.dim > hm.DENSE_LIMIT:
            raise ParameterError("validation needs N^eta <= 4096 (after padding)")
        R = lcu_mod.reconstruct(pruned, op.eta)
        phys = np.arange(n)
        idx = phys
        for _ in range(op.eta - 1):
            idx = (idx[:, None] * n_pad + phys[None, :]).ravel()
        H = op.dense_matrix()
        summary["reconstruction_residual"] = float(np.abs(R[np.ix_(idx, idx)] - H).max())
    return pruned, summary


def qcpe_run(cfg: RunConfig, seed: int) -> dict:
    """Chebyshev phase estimation on a random real-spectrum matrix or the run's Hamiltonian.

    ``qcpe`` block: ``source`` ("random" or "hamiltonian"), ``size`` (random
    source), ``upsilon``, ``upsilon_prime``, ``alpha_factor`` (``alpha_H =
    factor * ||H||``, default 2.5), ``repeats``. The target is the eigenvalue
    with the lowest real part; its right eigenvector is the initial state.
    """
    block = dict(cfg.extra.get("qcpe", {}))
    source = block.pop("source", "random")
    size = int(block.pop("size", 16))
    factor = float(block.pop("alpha_factor", 2.5))
    rng = np.random.default_rng(seed)
    if source == "random":
        H, _, _ = qcpe_mod.random_real_spectrum_matrix(size, rng)
    elif source == "hamiltonian":
        _, diagram = build_grid(cfg)
        op = build_operator(cfg, diagram)
        H = op.dense_matrix()
    else:
        raise ParameterError(f"unknown qcpe source {source!r}")
    if factor < 2.0:
        raise ParameterError("alpha_factor must be >= 2")
    config = qcpe_mod.QcpeConfig(alpha_H=factor * qcpe_mod.spectral_norm(H), **block)
    vals, vecs = dense_eig(H)
    E0 = float(np.real(vals[0]))
    psi = np.real(vecs[:, 0])
    est, stats = qcpe_mod.qcpe_estimate(H, psi, config, rng=rng, reference=E0)
    stats.update({"seed": int(seed), "E_exact": E0, "source": source, "dimension": int(H.shape[0])})
    stats["max_imag_spectrum"] = float(np.abs(np.imag(vals)).max())
    return stats


def ring_indices(grid, spec: AtomGridSpec, radius: float):
    """Equatorial ring of a Gauss-Legendre atomic grid on the shell closest to ``radius``.

    Returns ``(indices ordered by azimuth, phi values, shell radius)``.
    """
    kind = spec.angular[0]
    if kind != "gauss_legendre":
        raise ParameterError("the ring cut needs a Gauss-Legendre angular grid")
    n_theta, n_phi = spec.angular[1], spec.angular[2]
    if n_theta % 2 == 0:
        raise ParameterError("the ring cut needs an odd number of polar nodes (an equatorial ring)")
    radii = spec.radii()
    shell = int(np.argmin(np.abs(radii - radius)))
    j = n_theta // 2
    idx = []
    for k in range(n_phi):
        hit = np.flatnonzero((grid.atom_index == 0) & (grid.shell_index == shell) & (grid.angular_index == j * n_phi + k))
        if len(hit) != 1:
            raise ParameterError("ring point missing from the grid (merged or excluded)")
        idx.append(int(hit[0]))
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    return np.array(idx), phi, float(radii[shell])


def kink_metric(ring_values) -> float:
    """Second difference across the coalescence point (index 0), relative to the mean amplitude."""
    v = np.asarray(ring_values, dtype=float)
    return float(abs(v[1] - 2.0 * v[0] + v[-1]) / np.abs(v).mean())


def cusp_cut(cfg: RunConfig) -> dict:
    """Two-electron ring cut through electron-electron coalescence.

    Electron 2 is fixed at the ring point with azimuth 0; the ground-state
    amplitude ``psi(m, ref)/sqrt(v_m)`` is sampled along the ring for every
    ``mu_ee`` in the ``cusp.mu_ee`` list (``"inf"`` = no e-e Jastrow factor).
    ``cusp.radius`` (bohr, default 0.5) selects the shell.
    """
    if cfg.molecule.natoms != 1 or cfg.electrons != 2:
        raise ParameterError("cusp-cut expects a single atom with two electrons")
    block = cfg.extra.get("cusp", {})
    mus = [math.inf if str(m).lower() in ("inf", "none", "off") else float(m) for m in block.get("mu_ee", ["inf", 4, 2, 1])]
    radius = float(block.get("radius", 0.5))
    mu_ne = cfg.jastrow.mu_ne if cfg.jastrow is not None else math.inf
    grid, diagram = build_grid(cfg)
    ring, phi, shell_r = ring_indices(grid, cfg.specs[0], radius)
    ref = ring[0]
    rows, metrics = [], []
    for mu in mus:
        op = hm.tc_operator(diagram, cfg.molecule, 2, JastrowParams(mu_ne, mu), c0=cfg.c0, boundary=cfg.boundary)
        res = ground_state(cfg, diagram, op)
        P = res.vector.reshape(op.N, op.N)
        P = P * np.sign(P.sum())
        vals = P[ring, ref] / np.sqrt(diagram.volumes[ring])
        for p, v in zip(phi, vals):
            rows.append({"mu_ee": mu, "phi": float(p), "psi": float(v)})
        metrics.append({"mu_ee": mu, "kink": kink_metric(vals), "energy": float(res.eigenvalue), "residual": float(res.residual)})
    return {"ring_radius": shell_r, "N": int(diagram.n_cells), "rows": rows, "metrics": metrics}
