import math
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neeqma import oracle
from neeqma.pauli import PauliSum, compute_xi, load_hamiltonian
from neeqma.simulator import StateVector, apply_exp_h, init_basis_state, make_rng

from conftest import dense_sum, expm_herm, random_problem

# (c, e1, e2) for h = X + Z, t = 1, psi = |0>, pair (16, 32); generated by
# oracle_trotter_constants when this fixture was recorded.
XZ_FIXTURE = (0.15594369476537456 + 0.6984559986366082j,
              -3.5328007954582574e-06 + 1.0039587033716657e-05j,
              0.11654122034342151 - 0.1879840995100608j)


class TestDense:
    def test_examples(self):
        assert np.allclose(oracle.dense_operator(PauliSum.from_labels([(1.0, "Z")])),
                           np.diag([1, -1]))
        xz = PauliSum.from_labels([(1.0, "X"), (1.0, "Z")])
        assert np.allclose(oracle.dense_operator(xz), [[1, 1], [1, -1]])

    @given(st.integers(0, 2**32 - 1))
    def test_hermitian_and_matches_kron(self, seed):
        h, _ = random_problem(seed, 3, 6)
        m = oracle.dense_operator(h)
        assert np.max(np.abs(m - m.conj().T)) <= 1e-12
        assert np.allclose(m, dense_sum(h))

    def test_qubit_limit(self):
        with pytest.raises(oracle.OracleError):
            oracle.dense_operator(PauliSum.from_labels([(1.0, "Z" * 13)]))


class TestJacobi:
    @given(st.integers(0, 2**32 - 1), st.integers(1, 5))
    def test_decomposition(self, seed, q):
        r = make_rng(seed)
        a = r.normal(size=(2**q, 2**q)) + 1j * r.normal(size=(2**q, 2**q))
        a = a + a.conj().T
        w, v = oracle.jacobi_eigh(a)
        assert np.allclose(v.conj().T @ v, np.eye(2**q), atol=1e-12)
        assert np.allclose(a @ v, v * w, atol=1e-10)
        assert np.allclose(w, np.linalg.eigvalsh(a), atol=1e-10)

    def test_trace_identities(self):
        h, _ = random_problem(3, 4, 8)
        m = oracle.dense_operator(h)
        w, _ = oracle.jacobi_eigh(m)
        assert abs(w.sum() - np.trace(m).real) <= 1e-9
        assert abs((w**2).sum() - np.trace(m @ m).real) <= 1e-8

    def test_diagonal_input(self):
        w, v = oracle.jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
        assert np.allclose(w, [-1, 2, 3]) and np.allclose(np.abs(v), np.eye(3)[:, [1, 2, 0]])

    def test_rejects_non_hermitian(self):
        with pytest.raises(oracle.OracleError):
            oracle.jacobi_eigh(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_sweep_cap(self):
        a = make_rng(0).normal(size=(8, 8))
        with pytest.raises(oracle.OracleError, match="did not converge"):
            oracle.jacobi_eigh(a + a.T, max_sweeps=1)


class TestOverlaps:
    def test_examples(self):
        z = oracle.eigen_overlaps(PauliSum.from_labels([(1.0, "Z")]), init_basis_state("0"))
        assert [tuple(p) for p in z] == [(pytest.approx(1.0), pytest.approx(1.0)),
                                         (pytest.approx(-1.0), pytest.approx(0.0, abs=1e-15))]
        x = oracle.eigen_overlaps(PauliSum.from_labels([(1.0, "X")]), init_basis_state("0"))
        assert sorted((round(p.value, 12), round(p.weight, 12)) for p in x) == [
            (-1.0, 0.5), (1.0, 0.5)]

    @given(st.integers(0, 2**32 - 1))
    def test_weights_sum_to_one(self, seed):
        h, psi = random_problem(seed, 3, 5)
        pairs = oracle.eigen_overlaps(h, psi)
        assert abs(sum(p.weight for p in pairs) - 1) <= 1e-10
        assert all(a.weight >= b.weight for a, b in zip(pairs, pairs[1:]))

    def test_degenerate_merged(self):
        h = PauliSum.from_labels([(1.0, "ZI")])
        psi = StateVector(np.full(4, 0.5), 2)
        pairs = oracle.eigen_overlaps(h, psi)
        assert len(pairs) == 2 and all(p.weight == pytest.approx(0.5) for p in pairs)
        assert len(oracle.eigen_overlaps(h, psi, merge_degenerate=False)) == 4


class TestExactAction:
    def test_zero_time(self, rng):
        h, _ = random_problem(1, 2, 3)
        psi = StateVector.random(2, rng)
        assert np.allclose(oracle.exact_unitary_action(h, 0.0, psi).amplitudes, psi.amplitudes)

    def test_z_phases(self):
        psi = StateVector(np.array([0.6, 0.8]), 1)
        out = oracle.exact_unitary_action(PauliSum.from_labels([(1.0, "Z")]), 0.5, psi)
        assert np.allclose(out.amplitudes, [0.6 * np.exp(0.5j), 0.8 * np.exp(-0.5j)])

    @given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
    def test_agrees_with_taylor(self, seed, t):
        h, psi = random_problem(seed, 3, 5)
        a = oracle.exact_unitary_action(h, t, psi)
        b = apply_exp_h(psi.copy(), h, t)
        assert np.max(np.abs(a.amplitudes - b.amplitudes)) <= 1e-10
        assert abs(a.norm() - 1) <= 1e-12


class TestTrotterConstants:
    def test_xz_fixture(self):
        got = oracle.oracle_trotter_constants(PauliSum.from_labels([(1.0, "X"), (1.0, "Z")]),
                                              1.0, init_basis_state("0"))
        assert got == pytest.approx(XZ_FIXTURE, abs=1e-12)

    def test_xz_closed_form(self):
        # exp(i(X + Z)) has <0|.|0> = cos(sqrt 2) + i sin(sqrt 2)/sqrt 2
        c = XZ_FIXTURE[0]
        assert c == pytest.approx(math.cos(math.sqrt(2)) + 1j * math.sin(math.sqrt(2))
                                  / math.sqrt(2), abs=1e-12)

    def test_commuting(self, rng):
        h = PauliSum.from_labels([(0.4, "ZZ"), (-0.7, "ZI")])
        _, e1, e2 = oracle.oracle_trotter_constants(h, 1.0, StateVector.random(2, rng))
        assert abs(e1) <= 1e-10 and abs(e2) <= 1e-10

    def test_pairs_agree(self):
        for seed in range(3):
            h, psi = random_problem(40 + seed, 3, 4)
            _, a, _ = oracle.oracle_trotter_constants(h, 1.0, psi, (8, 16))
            _, b, _ = oracle.oracle_trotter_constants(h, 1.0, psi, (16, 32))
            assert abs(a - b) <= 0.15 * abs(b)

    @pytest.mark.parametrize("pair", [(16, 16), (4, 32), (32, 16)])
    def test_bad_pairs(self, pair):
        with pytest.raises(oracle.OracleError):
            oracle.oracle_trotter_constants(PauliSum.from_labels([(1.0, "X")]), 1.0,
                                            init_basis_state("0"), pair)

    def test_matches_dense_trotter(self):
        h, psi = random_problem(9, 2, 3)
        dense = oracle.trotter_matrix(h, 0.8, 5)
        step = np.eye(4, dtype=complex)
        for term in h:
            step = expm_herm(dense_sum(PauliSum([term])), 0.8 / 5) @ step
        assert np.allclose(dense, np.linalg.matrix_power(step, 5))


class TestSeries:
    def test_commuting_zero(self):
        h = PauliSum.from_labels([(0.4, "ZZ"), (-0.7, "ZI")])
        assert np.allclose(oracle.oracle_er1_series(h, 1.0), 0)

    def test_matches_two_point_e1(self):
        for seed in range(3):
            h, psi = random_problem(60 + seed, 2, 3)
            _, e1, _ = oracle.oracle_trotter_constants(h, 1.0, psi)
            m = oracle.oracle_er1_series(h, 1.0, k_max=20)
            series = np.vdot(psi.amplitudes, m @ psi.amplitudes)
            assert abs(series - e1) <= 0.01 * abs(e1)

    def test_is_frechet_derivative(self):
        # E_11 = d/ds exp(A + s X) at s = 0 with A = itH, X = -t^2 Xi_1
        h, _ = random_problem(5, 2, 3)
        t, eps = 0.7, 1e-6
        a = 1j * t * oracle.dense_operator(h)
        x = -(t**2) * oracle.dense_operator(compute_xi(h.reversed(), 1))
        from scipy.linalg import expm
        fd = (expm(a + eps * x) - expm(a - eps * x)) / (2 * eps)
        assert np.allclose(oracle.oracle_er1_series(h, t, 30), fd, atol=1e-8)

    def test_bound_holds(self):
        for seed in range(5):
            h, _ = random_problem(80 + seed, 1 + seed % 3, 3)
            for t in (0.5, 1.0):
                b1, b2 = oracle.error_operator_bounds(h, t)
                assert oracle.operator_norm(oracle.oracle_er1_series(h, t)) <= b1 + 1e-12
                assert b2 >= 0

    def test_qubit_limit(self):
        with pytest.raises(oracle.OracleError):
            oracle.oracle_er1_series(PauliSum.from_labels([(1.0, "X" * 7)]), 1.0)


LIH_FILE = os.environ.get("NEEQMA_LIH_FILE")


@pytest.mark.lih
@pytest.mark.skipif(not LIH_FILE, reason="set NEEQMA_LIH_FILE to the 12-qubit LiH Hamiltonian")
class TestLiH:
    def test_spectral_radius(self):
        h = load_hamiltonian(LIH_FILE)
        assert h.n_qubits == 12
        assert oracle.spectral_radius(h) == pytest.approx(8.654853588861483, rel=1e-10)

    def test_dominant_overlaps(self):
        h = load_hamiltonian(LIH_FILE)
        pairs = oracle.eigen_overlaps(h, init_basis_state("111000111000"))
        assert [p.weight for p in pairs[:3]] == pytest.approx([0.4368, 0.2616, 0.1176], abs=1e-4)
