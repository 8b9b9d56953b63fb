import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neumann_lab.errors import DomainError, NonCommutingError
from neumann_lab.operator_core import (SIGMA_X, SIGMA_Y, SIGMA_Z, HermitianOperator, IntervalSet,
                                       check_projection_is_identity, cluster_eigenvalues,
                                       commutant_dimension, commutator, eigenspace_projector,
                                       functional_calculus, generating_operator, operator_norm,
                                       s_form, spectral_projector)


def rand_herm(n, rng):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return HermitianOperator((z + z.conj().T) / 2)


def rand_unitary(n, rng):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return q


def commuting_pair(n, rng):
    q = rand_unitary(n, rng)
    a = q @ np.diag(rng.standard_normal(n)) @ q.conj().T
    b = q @ np.diag(rng.standard_normal(n)) @ q.conj().T
    return HermitianOperator(a), HermitianOperator(b)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestHermitianOperator:
    def test_symmetrizes_small_skew(self):
        m = np.array([[1.0, 2.0], [2.0 + 1e-12, 3.0]])
        A = HermitianOperator(m)
        assert np.allclose(A.entries, A.entries.conj().T, atol=0)

    def test_rejects_large_skew(self):
        with pytest.raises(ValueError, match="not Hermitian"):
            HermitianOperator([[0.0, 1.0], [0.0, 0.0]])

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            HermitianOperator(np.zeros((2, 3)))

    def test_entries_read_only(self):
        A = HermitianOperator.identity(3)
        with pytest.raises(ValueError):
            A.entries[0, 0] = 5

    def test_decomposition_invariants(self):
        rng = np.random.default_rng(3)
        A = rand_herm(24, rng)
        v, w = A.eigenvectors, A.eigenvalues
        assert np.all(np.diff(w) >= 0)
        assert operator_norm(v.conj().T @ v - np.eye(24)) <= 1e-10
        assert operator_norm((v * w) @ v.conj().T - A.entries) <= 1e-10 * A.norm()

    def test_concurrent_decomposition_is_shared(self):
        A = rand_herm(40, np.random.default_rng(0))
        seen = []
        threads = [threading.Thread(target=lambda: seen.append(id(A.eigenvectors)))
                   for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(set(seen)) == 1

    def test_dict_round_trip(self):
        A = rand_herm(5, np.random.default_rng(1))
        B = HermitianOperator.from_dict(A.to_dict())
        assert np.array_equal(A.entries, B.entries)
        assert A.to_dict()["dim"] == 5

    def test_arithmetic(self):
        A = HermitianOperator(SIGMA_X)
        B = HermitianOperator(SIGMA_Z)
        assert np.allclose((A + B).entries, SIGMA_X + SIGMA_Z)
        assert np.allclose((2.0 * A - B).entries, 2 * SIGMA_X - SIGMA_Z)
        with pytest.raises(ValueError, match="dimension mismatch"):
            A + HermitianOperator.identity(3)


class TestIntervalSet:
    def test_merges_touching(self):
        U = IntervalSet(((0, 1), (1, 2), (5, 6)))
        assert U.intervals == ((0.0, 2.0), (5.0, 6.0))

    def test_half_open(self):
        U = IntervalSet(((0, 1),))
        assert U.contains(0.0) and not U.contains(1.0)

    def test_complement_partition(self):
        U = IntervalSet(((-1, 0), (2, math.inf)))
        x = np.linspace(-5, 5, 1001)
        assert np.all(U.contains(x) ^ U.complement().contains(x))

    def test_list_round_trip(self):
        U = IntervalSet(((-math.inf, 0), (1, 2)))
        assert IntervalSet.from_list(U.to_list()) == U

    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            IntervalSet(((1, 1),))


class TestFunctionalCalculus:
    def test_identity_function(self):
        A = rand_herm(8, np.random.default_rng(2))
        assert operator_norm(functional_calculus(A, lambda x: x).entries - A.entries) <= 1e-12 * A.scale

    def test_diagonal_g(self):
        A = HermitianOperator.diagonal([0.0, 1.0])
        out = functional_calculus(A, lambda x: np.arctan(x) + np.pi)
        assert np.allclose(out.entries, np.diag([np.pi, np.pi / 4 + np.pi]), atol=1e-14)

    def test_pauli_square(self):
        out = functional_calculus(HermitianOperator(SIGMA_X), lambda x: x**2)
        assert np.allclose(out.entries, SIGMA_X @ SIGMA_X, atol=1e-14)

    def test_domain_error_names_eigenvalue(self):
        A = HermitianOperator.diagonal([-1.0, 4.0])
        with pytest.raises(DomainError, match="-1"):
            functional_calculus(A, np.sqrt)

    def test_table_lookup(self):
        A = HermitianOperator.diagonal([1.0, 2.0])
        out = functional_calculus(A, {1.0: 10.0, 2.0: 20.0})
        assert np.allclose(out.entries, np.diag([10.0, 20.0]))

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_monoid_action(self, seed):
        A = rand_herm(10, np.random.default_rng(seed))
        psi, phi = np.arctan, np.exp
        left = functional_calculus(functional_calculus(A, psi), phi)
        right = functional_calculus(A, lambda x: phi(psi(x)))
        assert operator_norm(left.entries - right.entries) <= 1e-9 * max(1.0, right.norm())

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_spectrum_maps(self, seed):
        A = rand_herm(10, np.random.default_rng(seed))
        out = functional_calculus(A, np.arctan)
        assert np.allclose(np.sort(np.arctan(A.eigenvalues)), out.eigenvalues, atol=1e-12)

    def test_extension_independence(self):
        A = HermitianOperator.diagonal([1.0, 2.0, 3.0])
        psi1 = lambda x: x**2
        psi2 = lambda x: np.where(x > 0.5, x**2, -7.0)
        assert np.array_equal(functional_calculus(A, psi1).entries,
                              functional_calculus(A, psi2).entries)


class TestSpectralProjector:
    def test_diagonal_selection(self):
        P = spectral_projector(HermitianOperator.diagonal([1, 2, 3]), IntervalSet(((1.5, 2.5),)))
        assert np.allclose(P.entries, np.diag([0, 1, 0]))

    def test_full_measure(self):
        A = rand_herm(6, np.random.default_rng(4))
        assert np.allclose(spectral_projector(A, IntervalSet.full()).entries, np.eye(6))

    def test_pauli_x(self):
        P = spectral_projector(HermitianOperator(SIGMA_X), IntervalSet(((0.5, 1.5),)))
        assert np.allclose(P.entries, 0.5 * np.ones((2, 2)), atol=1e-14)

    def test_empty_selection(self):
        P = spectral_projector(HermitianOperator.diagonal([1, 2]), IntervalSet(((5, 6),)))
        assert not P.entries.any()

    def test_boundary_half_open(self):
        A = HermitianOperator.diagonal([1.0, 2.0])
        P = spectral_projector(A, IntervalSet(((1.0, 2.0),)))
        assert np.allclose(P.entries, np.diag([1, 0]))

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.floats(-3, 3), st.floats(0.1, 4))
    def test_projector_properties(self, seed, lo, width):
        A = rand_herm(12, np.random.default_rng(seed))
        U = IntervalSet(((lo, lo + width),))
        P = spectral_projector(A, U).entries
        Q = spectral_projector(A, U.complement()).entries
        assert operator_norm(P @ P - P) <= 1e-10
        assert operator_norm(P @ A.entries - A.entries @ P) <= 1e-10 * A.scale
        assert operator_norm(P + Q - np.eye(12)) <= 1e-10

    def test_degenerate_cluster_kept_whole(self):
        A = HermitianOperator.diagonal([1.0, 1.0 + 1e-13, 3.0])
        below = spectral_projector(A, IntervalSet(((0.5, 1.0 + 5e-14),)))
        above = spectral_projector(A, IntervalSet(((1.0 + 5e-14, 2.0),)))
        assert np.allclose(below.entries, np.zeros((3, 3)))
        assert np.allclose(above.entries, np.diag([1, 1, 0]))

    def test_eigenspace_projector(self):
        P, found = eigenspace_projector(HermitianOperator.diagonal([1, 2, 2]), 2.0)
        assert found and np.allclose(P.entries, np.diag([0, 1, 1]))
        _, found = eigenspace_projector(HermitianOperator.diagonal([1, 2]), 7.0)
        assert not found


class TestSForm:
    def test_commuting_diagonal(self):
        E = HermitianOperator.diagonal([1.0, -2.0, 3.0])
        F = HermitianOperator.diagonal([0.5, 4.0, -1.0])
        assert operator_norm(s_form(E, F)) <= 1e-12

    def test_pauli(self):
        S = s_form(HermitianOperator(SIGMA_X), HermitianOperator(SIGMA_Z))
        assert np.max(np.abs(S.entries + 4 * np.eye(2))) <= 1e-14

    def test_zero(self):
        E = rand_herm(5, np.random.default_rng(0))
        assert operator_norm(s_form(E, HermitianOperator.zeros(5))) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            s_form(HermitianOperator.identity(2), HermitianOperator.identity(3))

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.integers(2, 64))
    def test_vanishes_on_commuting(self, seed, n):
        E, F = commuting_pair(n, np.random.default_rng(seed))
        assert operator_norm(s_form(E, F)) <= 1e-10 * (E.norm() * F.norm()) ** 2


class TestNorms:
    def test_examples(self):
        assert operator_norm(HermitianOperator.identity(4)) == pytest.approx(1.0)
        assert operator_norm(HermitianOperator.diagonal([1, -3])) == pytest.approx(3.0)
        c = commutator(HermitianOperator(SIGMA_X), HermitianOperator(SIGMA_Z))
        assert np.allclose(c, -2j * SIGMA_Y)
        assert operator_norm(c) == pytest.approx(2.0)

    def test_zero_norm(self):
        assert operator_norm(np.zeros((3, 3))) == 0.0


class TestProjectionIdentity:
    def test_identity(self):
        rep = check_projection_is_identity(HermitianOperator.identity(3))
        assert rep and rep.distance_to_identity == 0

    def test_not_positive(self):
        rep = check_projection_is_identity(HermitianOperator.diagonal([1, 0]))
        assert rep.idempotent and not rep.positive_spectrum and not rep

    def test_tolerance_clustering(self):
        assert check_projection_is_identity(HermitianOperator.diagonal([1, 1 + 1e-16]))

    def test_non_idempotent(self):
        assert not check_projection_is_identity(HermitianOperator.diagonal([2, 1]))


class TestGeneratingOperator:
    def test_already_diagonal(self):
        gen = generating_operator([HermitianOperator.diagonal([1, 2]),
                                   HermitianOperator.diagonal([3, 3])], seed=0)
        assert np.allclose(gen.S.entries, np.diag([1, 2]))
        assert gen.funcs[0] == {1: pytest.approx(1.0), 2: pytest.approx(2.0)}
        assert gen.funcs[1] == {1: pytest.approx(3.0), 2: pytest.approx(3.0)}

    def test_identity(self):
        gen = generating_operator([HermitianOperator.identity(3)], seed=0)
        assert np.allclose(gen.S.entries, np.eye(3))
        assert gen.funcs[0] == {1: pytest.approx(1.0)}

    @pytest.mark.parametrize("seed", range(5))
    def test_polynomial_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        S0 = rand_herm(16, rng)
        K = [functional_calculus(S0, np.polynomial.Polynomial(rng.standard_normal(d + 2)))
             for d in range(3)]
        gen = generating_operator(K, seed=seed)
        for k, Kk in enumerate(K):
            assert operator_norm(gen.reconstruct(k).entries - Kk.entries) <= 1e-9 * Kk.scale

    def test_degenerate_family(self):
        rng = np.random.default_rng(7)
        q = rand_unitary(6, rng)
        d1 = np.array([1, 1, 1, 2, 2, 3.0])
        d2 = np.array([5, 5, 6, 6, 7, 7.0])
        K = [HermitianOperator(q @ np.diag(d) @ q.conj().T) for d in (d1, d2)]
        gen = generating_operator(K, seed=1)
        assert len(gen.funcs[0]) == 5
        for k in range(2):
            assert operator_norm(gen.reconstruct(k).entries - K[k].entries) <= 1e-9 * K[k].scale

    def test_non_commuting(self):
        with pytest.raises(NonCommutingError) as info:
            generating_operator([HermitianOperator(SIGMA_X), HermitianOperator(SIGMA_Z)])
        assert info.value.pair == (0, 1)
        assert info.value.norm == pytest.approx(2.0)


class TestCommutant:
    def test_pauli_irreducible(self):
        assert commutant_dimension([HermitianOperator(SIGMA_X), HermitianOperator(SIGMA_Z)]) == 1

    def test_identity(self):
        assert commutant_dimension([HermitianOperator.identity(3)]) == 9

    def test_diagonal(self):
        assert commutant_dimension([HermitianOperator.diagonal([1, 2])]) == 2

    def test_empty(self):
        assert commutant_dimension([], dim=3) == 9
        with pytest.raises(ValueError):
            commutant_dimension([])

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        fam = [HermitianOperator(np.kron(SIGMA_X, np.eye(2))),
               HermitianOperator(np.kron(SIGMA_Z, np.eye(2)))]
        u = rand_unitary(4, rng)
        conj = [HermitianOperator(u @ k.entries @ u.conj().T) for k in fam]
        assert commutant_dimension(fam) == commutant_dimension(conj) == 4


def test_cluster_eigenvalues():
    groups = cluster_eigenvalues(np.array([0.0, 1e-12, 1.0, 2.0, 2.0]), 1e-10)
    assert [g.tolist() for g in groups] == [[0, 1], [2], [3, 4]]
