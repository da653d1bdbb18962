"""Resolvent, contour projectors and eigenvalue clustering."""

import numpy as np
import pytest
import scipy.linalg as sla

from adlab import Contour, contour_projector, decompose, operator_norm, resolvent
from adlab.errors import ContourTooClose, GapViolation, NearSingular, NoConvergence
from adlab.families import _intro_matrices
from adlab.spectral import group_circle


def intro_shifted(eps=0.01, a=1.0, k=-1.0):
    h, l = _intro_matrices(a, k)
    return h - eps * l


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm(np.eye(3)) == pytest.approx(1.0)

    def test_diagonal_complex(self):
        assert operator_norm(np.diag([3j, -2])) == pytest.approx(3.0, abs=1e-12)

    def test_rank_one(self):
        m = np.array([[0.0, 1.0 / 0.1], [0.0, 0.0]])
        assert operator_norm(m) == pytest.approx(10.0, rel=1e-12)


class TestResolvent:
    def test_diagonal(self):
        r = resolvent(np.diag([0.0, 1.0]), 2.0)
        np.testing.assert_allclose(r, np.diag([-0.5, -1.0]), atol=1e-14)

    def test_zero_matrix(self):
        r = resolvent(np.zeros((2, 2)), 1.0)
        np.testing.assert_allclose(r, -np.eye(2), atol=1e-14)

    def test_matches_dense_solve(self):
        h = intro_shifted()
        lam = 0.5
        oracle = sla.lu_solve(sla.lu_factor(h - lam * np.eye(3)), np.eye(3))
        np.testing.assert_allclose(resolvent(h, lam), oracle, atol=1e-12)

    def test_residual(self):
        h = intro_shifted()
        lam = 0.5 + 0.2j
        r = resolvent(h, lam)
        assert operator_norm((h - lam * np.eye(3)) @ r - np.eye(3)) < 1e-12

    def test_near_singular(self):
        with pytest.raises(NearSingular):
            resolvent(np.diag([0.0, 1.0]), 1.0 + 1e-13)


class TestContourProjector:
    def test_isolated_simple_eigenvalue(self):
        p = contour_projector(np.diag([0.0, 1.0]), Contour(center=0.0, radius=0.3))
        np.testing.assert_allclose(p, np.diag([1.0, 0.0]), atol=1e-12)

    def test_whole_spectrum_gives_identity(self):
        h = np.array([[0.0, 1.0], [0.0, 0.0]])
        p = contour_projector(h, Contour(center=0.0, radius=0.5))
        np.testing.assert_allclose(p, np.eye(2), atol=1e-12)

    def test_matches_printed_projector(self):
        # closed-form projector of the shifted intro matrix around eigenvalue 1
        eps, a, k = 0.01, 1.0, -1.0
        h = intro_shifted(eps, a, k)
        den = 1.0 - eps * a * k
        expected = np.array([
            [0, 0, eps * k / den],
            [0, 0, eps ** 2 * k ** 2 / den],
            [0, 0, 1.0],
        ])
        p = contour_projector(h, Contour(center=1.0, radius=0.4))
        assert operator_norm(p - expected) < 1e-12

    def test_eigenvalue_on_circle_rejected(self):
        with pytest.raises(ContourTooClose):
            contour_projector(np.diag([0.0, 1.0]), Contour(center=0.0, radius=1.0))

    def test_node_cap(self):
        with pytest.raises(NoConvergence):
            contour_projector(np.diag([0.0, 1.0]), Contour(center=0.0, radius=0.3),
                              max_nodes=16)

    def test_contour_validation(self):
        with pytest.raises(ValueError):
            Contour(center=0.0, radius=-1.0)
        with pytest.raises(ValueError):
            Contour(center=0.0, radius=1.0, nodes=7)


class TestDecompose:
    def test_diagonal_with_multiplicity(self):
        dec = decompose(np.diag([0.0, 0.0, 1.0]), 0.5)
        assert [g.multiplicity for g in dec.groups] == [2, 1]
        assert dec.groups[0].eigenvalue == pytest.approx(0.0)
        assert operator_norm(dec.groups[0].nilpotent) == 0.0
        assert dec.min_gap == pytest.approx(1.0)

    def test_intro_nilpotent_block(self):
        # rank-one nilpotent a*e1<e2| on the doubly degenerate eigenvalue 0
        h, _ = _intro_matrices(1.0, -1.0)
        dec = decompose(h, 0.5)
        g0 = dec.groups[0]
        assert g0.multiplicity == 2
        expected = np.zeros((3, 3), dtype=complex)
        expected[0, 1] = 1.0
        np.testing.assert_allclose(g0.nilpotent, expected, atol=1e-12)
        assert dec.groups[1].multiplicity == 1

    def test_jordan_recovery(self):
        rng = np.random.default_rng(7)
        j = np.zeros((4, 4), dtype=complex)
        j[0, 0] = j[1, 1] = j[2, 2] = 1.5 + 0.5j
        j[0, 1] = 1.0  # one Jordan block of size 2 inside the triple eigenvalue
        j[3, 3] = -1.0
        t = np.eye(4) + 0.3 * (rng.standard_normal((4, 4))
                               + 1j * rng.standard_normal((4, 4)))
        h = t @ j @ np.linalg.inv(t)
        dec = decompose(h, 0.5)
        assert [g.multiplicity for g in dec.groups] == [1, 3]
        assert dec.groups[1].eigenvalue == pytest.approx(1.5 + 0.5j, abs=1e-8)
        nil = dec.groups[1].nilpotent
        assert np.linalg.matrix_rank(nil, tol=1e-8) == 1
        assert operator_norm(nil @ nil) < 1e-8 * operator_norm(nil) ** 2

    def test_gap_violation(self):
        with pytest.raises(GapViolation):
            decompose(np.diag([0.0, 0.3, 1.0]), 0.5)

    def test_omega(self):
        dec = decompose(np.diag([1.0 + 2.0j, -1.0 - 1.0j]), 0.5)
        assert dec.omega == pytest.approx(2.0)


class TestProjectorAlgebra:
    """Invariants on random well-gapped matrices (small version of the
    acceptance suite)."""

    @pytest.mark.parametrize("seed", range(12))
    def test_invariants(self, seed):
        rng = np.random.default_rng(100 + seed)
        dim = int(rng.integers(2, 5))
        eigs = [-2.0, 1.0 + 1.5j, 3.0 - 1.0j][: max(1, int(rng.integers(1, min(dim, 3) + 1)))]
        sizes = rng.multinomial(dim - len(eigs), np.ones(len(eigs)) / len(eigs)) + 1
        j = np.zeros((dim, dim), dtype=complex)
        pos = 0
        for lam, m in zip(eigs, sizes):
            for i in range(m):
                j[pos + i, pos + i] = lam
            if m > 1 and rng.random() < 0.5:
                j[pos, pos + 1] = 1.0
            pos += m
        t = np.eye(dim) + 0.25 * (rng.standard_normal((dim, dim))
                                  + 1j * rng.standard_normal((dim, dim)))
        h = t @ j @ np.linalg.inv(t)

        dec = decompose(h, 0.5)
        eye = np.eye(dim)
        total = sum(g.projector for g in dec.groups) + dec.complement_projector
        assert operator_norm(total - eye) <= 1e-10 * dim
        for a, ga in enumerate(dec.groups):
            for b, gb in enumerate(dec.groups):
                ref = ga.projector if a == b else 0.0
                assert operator_norm(ga.projector @ gb.projector - ref) <= 1e-10
        recon = sum(g.eigenvalue * g.projector + g.nilpotent for g in dec.groups)
        assert operator_norm(recon - h) <= 1e-9 * max(1.0, operator_norm(h))
        for g in dec.groups:
            dn = operator_norm(g.nilpotent)
            if dn > 0:
                power = np.linalg.matrix_power(g.nilpotent, g.multiplicity)
                assert operator_norm(power) <= 1e-8 * dn ** g.multiplicity

    @pytest.mark.parametrize("seed", range(6))
    def test_contour_agrees_with_schur_route(self, seed):
        rng = np.random.default_rng(300 + seed)
        d = np.diag(rng.uniform(-3, 3, 3) * (1 + 0j))
        while np.abs(d.diagonal()[:, None] - d.diagonal()[None, :])[
                ~np.eye(3, dtype=bool)].min() < 1.0:
            d = np.diag(rng.uniform(-3, 3, 3) * (1 + 0j))
        t = np.eye(3) + 0.25 * rng.standard_normal((3, 3))
        h = t @ d @ np.linalg.inv(t)
        dec = decompose(h, 0.5)
        for i, g in enumerate(dec.groups):
            p = contour_projector(h, group_circle(dec, i))
            assert operator_norm(p - g.projector) <= 1e-9
