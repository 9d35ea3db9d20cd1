import csv
import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_diagram
from realspace_qc.errors import ParameterError
from realspace_qc.hamiltonian import hermitian_operator, tc_operator
from realspace_qc.lcu import (
    LcuDecomposition,
    brute_force_coefficient,
    fwht,
    hermitian_lcu,
    one_norm,
    pad_to_power_of_two,
    pauli_matrix,
    prune_merge,
    reconstruct,
    tc_lcu,
    walk_spectrum_check,
    walsh_onebody,
    walsh_threebody_diag,
    walsh_twobody,
    walsh_twobody_diag,
)
from realspace_qc.molgrid import Molecule
from realspace_qc.transcorrelated import JastrowParams

MOL = Molecule([1.0], [[0.1, -0.2, 0.05]])


def test_pauli_matrices_single_qubit():
    np.testing.assert_array_equal(pauli_matrix(0, 1, 2), np.diag([1.0, -1.0]))
    np.testing.assert_array_equal(pauli_matrix(1, 0, 2), [[0, 1], [1, 0]])
    np.testing.assert_array_equal(pauli_matrix(1, 1, 2), [[0, -1], [1, 0]])
    # multi-bit masks are tensor products, bit 0 least significant
    np.testing.assert_array_equal(pauli_matrix(2, 1, 4), np.kron([[0, 1], [1, 0]], np.diag([1.0, -1.0])))


def test_walsh_onebody_examples():
    w = walsh_onebody(np.diag([1.0, -1.0]))
    np.testing.assert_allclose(w, [[0, 1], [0, 0]], atol=1e-15)
    a, b, c, d = 0.3, -1.2, 2.5, 0.7
    w = walsh_onebody(np.array([[a, b], [c, d]]))
    np.testing.assert_allclose(w, [[(a + d) / 2, (a - d) / 2], [(b + c) / 2, (c - b) / 2]], atol=1e-15)
    w = walsh_onebody(np.eye(8))
    expected = np.zeros((8, 8))
    expected[0, 0] = 1
    np.testing.assert_allclose(w, expected, atol=1e-15)


def test_walsh_twobody_diag_examples():
    g = walsh_twobody_diag(np.ones((4, 4)))
    assert g[0, 0] == pytest.approx(1.0)
    assert np.abs(g).sum() == pytest.approx(1.0)
    g = walsh_twobody_diag(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(g, [[0.5, 0], [0, -0.5]], atol=1e-15)
    W = np.random.default_rng(0).random((8, 8))
    g = walsh_twobody_diag(W + W.T)
    np.testing.assert_allclose(g, g.T, atol=1e-14)


def test_threebody_transform_examples():
    z = walsh_threebody_diag(np.full((4, 4, 4), 0.7))
    assert z[0, 0, 0] == pytest.approx(0.7)
    assert np.abs(z).sum() == pytest.approx(0.7)
    B = np.random.default_rng(1).random((4, 4, 4))
    B = B + B.transpose(0, 2, 1)
    z = walsh_threebody_diag(B)
    np.testing.assert_allclose(z, z.transpose(0, 2, 1), atol=1e-14)


def test_four_index_single_entry_by_enumeration():
    W4 = np.zeros((2, 2, 2, 2))
    W4[1, 0, 1, 1] = 1.0
    g = walsh_twobody(W4)
    for m, n, p, q in itertools.product(range(2), repeat=4):
        ref = sum(
            (-1) ** ((x & n).bit_count() + (y & q).bit_count()) * W4[m ^ x, x, p ^ y, y]
            for x in range(2)
            for y in range(2)
        ) / 4
        assert g[m, n, p, q] == pytest.approx(ref, abs=1e-15)
    assert np.abs(g).sum() == pytest.approx(1.0)


@given(st.integers(0, 6).flatmap(lambda k: arrays(float, (2**k,), elements=st.floats(-1e3, 1e3))))
def test_fwht_is_self_inverse(a):
    np.testing.assert_allclose(fwht(fwht(a)) / len(a), a, atol=1e-9)


def test_fwht_rejects_non_power_of_two():
    with pytest.raises(ParameterError):
        fwht(np.ones(6))
    with pytest.raises(ParameterError):
        walsh_onebody(np.eye(3))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 6), st.integers(0, 10_000))
def test_reconstruct_inverts_onebody_transform(k, seed):
    n = 2**k
    T = np.random.default_rng(seed).standard_normal((n, n))
    dec = LcuDecomposition(N=n, kind="tc", omega=walsh_onebody(T), gamma=None)
    np.testing.assert_allclose(reconstruct(dec, 1), T, atol=1e-12)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_onebody_table_matches_trace_formula(n):
    T = np.random.default_rng(n).standard_normal((n, n))
    w = walsh_onebody(T)
    for m, k in itertools.product(range(n), repeat=2):
        assert w[m, k] == pytest.approx(brute_force_coefficient(T, [(m, k)], n), abs=1e-12)


def _hermitian_case(n, seed=0):
    op = hermitian_operator(random_diagram(n, seed), MOL, 2)
    return op, hermitian_lcu(op.onebody, op.pair)


def _tc_case(n, eta, seed=0):
    op = tc_operator(random_diagram(n, seed), MOL, eta, JastrowParams(0.9, 1.1))
    return op, tc_lcu(*op.lcu_tensors())


@pytest.mark.parametrize("kind", ["hermitian", "tc"])
@pytest.mark.parametrize("n", [4, 8])
def test_pruned_tables_match_trace_formula(kind, n):
    op, dec = _hermitian_case(n) if kind == "hermitian" else _tc_case(n, 2)
    H = op.dense_matrix()
    pr = prune_merge(dec, 2)
    g4 = pr.gamma4()
    for a, b in itertools.product(range(n), repeat=2):
        # one-body string on register 0, identity on register 1
        assert brute_force_coefficient(H, [(a, b), (0, 0)], n) == pytest.approx(pr.omega[a, b] if (a, b) != (0, 0) else pr.shift, abs=1e-12)
    for m, k, p, q in itertools.product(range(n), repeat=4):
        if (m, k) == (0, 0) or (p, q) == (0, 0):
            continue
        assert brute_force_coefficient(H, [(m, k), (p, q)], n) == pytest.approx(g4[m, k, p, q], abs=1e-12)


@pytest.mark.parametrize("n", [4, 8])
@pytest.mark.parametrize("eta", [2, 3])
@pytest.mark.parametrize("kind", ["hermitian", "tc"])
def test_reconstruction_reproduces_operator(n, eta, kind):
    if kind == "hermitian":
        op = hermitian_operator(random_diagram(n, 1), MOL, eta)
        dec = hermitian_lcu(op.onebody, op.pair)
    else:
        op, dec = _tc_case(n, eta, seed=1)
    H = op.dense_matrix()
    np.testing.assert_allclose(reconstruct(dec, eta), H, atol=1e-10)
    pr = prune_merge(dec, eta)
    np.testing.assert_allclose(reconstruct(pr, eta), H, atol=1e-10)
    np.testing.assert_allclose(reconstruct(pr, eta, include_shift=False), H - pr.shift * np.eye(len(H)), atol=1e-10)
    assert pr.omega[0, 0] == 0.0
    assert pr.n_strings() < dec.n_strings()


@pytest.mark.parametrize("n,eta", [(4, 2), (8, 2), (4, 3)])
def test_pruning_shifts_spectrum_by_constant(n, eta):
    op, dec = _tc_case(n, eta, seed=2)
    pr = prune_merge(dec, eta)
    a = np.sort_complex(np.linalg.eigvals(op.dense_matrix()))
    b = np.sort_complex(np.linalg.eigvals(reconstruct(pr, eta, include_shift=False)))
    diff = a - b
    np.testing.assert_allclose(diff, diff[0], atol=1e-10)
    assert diff[0].real == pytest.approx(pr.shift, abs=1e-10)


def test_printed_rule_folds_with_grid_multiplicity():
    n = 4
    rng = np.random.default_rng(3)
    T = rng.standard_normal((n, n))
    W = rng.standard_normal((n, n))
    dec = hermitian_lcu(T + T.T, W + W.T)
    pr = prune_merge(dec, 2, rule="printed")
    for k in range(1, n):
        assert pr.omega[0, k] == pytest.approx(dec.omega[0, k] + (n - 1) * dec.gamma[0, k], abs=1e-14)
    for m, k in itertools.product(range(1, n), range(n)):
        assert pr.omega[m, k] == dec.omega[m, k]
    assert pr.omega[0, 0] == 0.0
    assert np.all(pr.gamma[0, :] == 0) and np.all(pr.gamma[:, 0] == 0)


def test_prune_without_two_body_only_drops_identity():
    T = np.random.default_rng(4).standard_normal((4, 4))
    dec = hermitian_lcu(T, np.zeros((4, 4)))
    pr = prune_merge(dec, 2)
    expected = dec.omega.copy()
    expected[0, 0] = 0.0
    np.testing.assert_array_equal(pr.omega, expected)
    assert pr.shift == pytest.approx(2 * dec.omega[0, 0])
    assert prune_merge(pr, 2) is pr
    with pytest.raises(ParameterError):
        prune_merge(dec, 2, rule="other")


def test_one_norm_examples():
    omega = np.zeros((4, 4))
    omega[1, 2] = 0.5
    dec = LcuDecomposition(N=4, kind="hermitian", omega=omega, gamma=None)
    assert one_norm(dec, 2) == pytest.approx(1.0)
    ident = LcuDecomposition(N=4, kind="hermitian", omega=np.eye(4)[0:1].T @ np.eye(4)[0:1] * 3.0, gamma=np.zeros((4, 4)))
    assert one_norm(prune_merge(ident, 2), 2) == 0.0
    lam, parts = one_norm(dec, 3, per_string=True)
    assert parts == {"onebody": 0.5, "twobody": 0.0, "threebody": 0.0}
    assert lam == pytest.approx(1.5)


@pytest.mark.parametrize("n,eta", [(2, 1), (4, 1), (4, 2), (8, 2), (4, 3), (8, 3)])
@pytest.mark.parametrize("kind", ["hermitian", "tc"])
def test_one_norm_bounds_spectral_radius(n, eta, kind):
    if kind == "hermitian":
        op = hermitian_operator(random_diagram(n, 5), MOL, eta)
        dec = hermitian_lcu(op.onebody, op.pair if eta >= 2 else None)
    else:
        op, dec = _tc_case(n, eta, seed=5)
    pr = prune_merge(dec, eta)
    rho = np.abs(np.linalg.eigvals(reconstruct(pr, eta, include_shift=False))).max()
    assert one_norm(pr, eta) >= rho * (1 - 1e-12)


def test_walk_phases_scalar_and_pauli_z():
    rep = walk_spectrum_check(np.array([[0.3]]), 1.0)
    np.testing.assert_allclose(rep["phases"], [-math.acos(0.3), math.acos(0.3)], atol=1e-12)
    rep = walk_spectrum_check(np.diag([1.0, -1.0]), 2.0)
    third = math.pi / 3
    np.testing.assert_allclose(rep["phases"], [-2 * third, -third, third, 2 * third], atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_walk_phases_random_symmetric(seed):
    A = np.random.default_rng(seed).standard_normal((16, 16))
    H = 0.5 * (A + A.T)
    lam = 1.3 * np.abs(np.linalg.eigvalsh(H)).max()
    rep = walk_spectrum_check(H, lam)
    assert rep["max_phase_error"] <= 1e-8
    assert rep["unitarity_error"] <= 1e-12


def test_walk_check_rejects_bad_input():
    with pytest.raises(ParameterError):
        walk_spectrum_check(np.diag([2.0, 0.0]), 1.0)
    with pytest.raises(ParameterError):
        walk_spectrum_check(np.array([[0.0, 1.0], [0.0, 0.0]]), 5.0)


def test_ghost_padding():
    T = np.arange(9.0).reshape(3, 3)
    W = np.ones((3, 3))
    Tp, Wp, k = pad_to_power_of_two(T, W)
    assert k == 1 and Tp.shape == (4, 4) and Wp.shape == (4, 4)
    np.testing.assert_array_equal(Tp[:3, :3], T)
    assert np.all(Tp[3] == 0) and np.all(Wp[:, 3] == 0)
    _, _, k = pad_to_power_of_two(np.eye(8))
    assert k == 0


def test_reconstruct_guard():
    dec = LcuDecomposition(N=16, kind="tc", omega=np.zeros((16, 16)), gamma=None)
    with pytest.raises(ParameterError):
        reconstruct(dec, 4)


def test_exports(tmp_path):
    _, dec = _hermitian_case(4)
    pr = prune_merge(dec, 2)
    pr.write_csv(tmp_path / "c.csv")
    rows = list(csv.reader((tmp_path / "c.csv").open()))
    assert rows[0] == ["type", "indices", "value"]
    assert len(rows) - 1 == pr.n_strings()
    pr.write_summary(tmp_path / "s.json", 2)
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["lambda"] == pytest.approx(one_norm(pr, 2))
    assert {"lambda", "n_strings", "shift"} <= set(doc)
