"""Tests for the preparability diagnostics."""

import numpy as np
import pytest

from mpsprep.bases import aligned_residual, clock_basis, pauli_basis
from mpsprep.diagnostics import (
    blocked_intersection,
    certify_preparable,
    find_product_solutions,
    gram_matrix,
    product_defect,
    product_factors,
    solution_space,
)
from mpsprep.families import (
    aklt_deformed_tensor,
    clock_tensor,
    phase_diagram_point,
    random_aklt_deformation,
    tetrahedron_tensor,
)
from mpsprep.linalg import DomainError, unitarity_residual
from mpsprep.mps import SimplexWeights, random_tensor


def _weights(chi, seed):
    rng = np.random.default_rng(seed)
    return SimplexWeights(chi=chi, values=rng.dirichlet(np.ones(chi * chi)).reshape(chi, chi))


class TestSolutionSpace:
    def test_gram_hermitian(self):
        g = gram_matrix(tetrahedron_tensor(_weights(2, 0)))
        assert g.shape == (4, 4)
        assert np.allclose(g, g.conj().T)

    def test_generic_tetrahedron(self):
        space = solution_space(tetrahedron_tensor(_weights(2, 1)))
        assert space.ambient_dim == 4
        assert space.dimension == 4
        assert not space.degenerate

    def test_degenerate_point(self):
        space = solution_space(tetrahedron_tensor(phase_diagram_point("ghz")))
        assert np.allclose(space.eigenvalues[:2], 0)
        assert np.isclose(space.eigenvalues[2], space.eigenvalues[3])
        assert sorted(space.multiplicities) == [2, 2]
        assert space.dimension == sum(m * m for m in space.multiplicities) == 8

    def test_clock(self):
        assert solution_space(clock_tensor(_weights(3, 2))).dimension == 9

    def test_random_tensors_preserve_gram(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            space = solution_space(random_tensor(int(rng.integers(2, 5)), 2, rng))
            w = space.element(rng.normal(size=space.dimension))
            assert unitarity_residual(w) < 1e-10
            assert space.invariance_residual(w) < 1e-10

    def test_elements_preserve_gram(self):
        space = solution_space(tetrahedron_tensor(_weights(2, 3)))
        theta = np.random.default_rng(0).normal(size=space.dimension)
        w = space.element(theta)
        assert unitarity_residual(w) < 1e-12
        assert space.invariance_residual(w) < 1e-10

    def test_blocked_intersection(self):
        a = tetrahedron_tensor(_weights(2, 4))
        assert blocked_intersection(a, 1).dimension == 4
        assert blocked_intersection(a, 2).dimension == 4

    def test_blocked_intersection_shrinks(self):
        a = random_tensor(3, 2, np.random.default_rng(12))
        dims = [blocked_intersection(a, k).dimension for k in (1, 2, 3)]
        assert dims == [4, 1, 1]


class TestProductSolutions:
    def test_kron_is_product(self):
        v = pauli_basis().elements[2]
        w = np.kron(v.T, v.conj().T)
        assert product_defect(w, 2) < 1e-12
        left, right = product_factors(w, 2)
        assert unitarity_residual(left) < 1e-10
        assert unitarity_residual(right) < 1e-10

    def test_generic_unitary_is_not(self):
        w = np.eye(4)[[0, 1, 3, 2]]
        assert product_defect(w, 2) > 0.1

    def test_search_finds_paulis(self):
        space = solution_space(tetrahedron_tensor(_weights(2, 5)))
        pairs = find_product_solutions(space, restarts=16, seed=0, workers=1)
        assert len(pairs) == 4
        assert np.allclose(pairs[0][0], np.eye(2))
        basis = pauli_basis()
        assert sorted(basis.classify(left, tol=1e-6)[0] for left, _ in pairs) == [0, 1, 2, 3]

    def test_search_finds_clock_group(self):
        space = solution_space(clock_tensor(_weights(3, 9)))
        pairs = find_product_solutions(space, restarts=32, seed=0, workers=1)
        assert len(pairs) == 9
        basis = clock_basis(3)
        assert sorted(basis.classify(left, tol=1e-6)[0] for left, _ in pairs) == list(range(9))


class TestCertify:
    @pytest.mark.parametrize("seed", range(3))
    def test_tetrahedron(self, seed):
        cert = certify_preparable(tetrahedron_tensor(_weights(2, seed)), restarts=4, workers=1)
        assert cert.certified
        assert aligned_residual(cert.basis, pauli_basis()) < 1e-6
        assert cert.verified_fidelity >= 1 - 1e-9

    def test_clock(self):
        cert = certify_preparable(clock_tensor(_weights(3, 6)), restarts=4, workers=1)
        assert cert.certified
        assert aligned_residual(cert.basis, clock_basis(3)) < 1e-6

    def test_aklt_deformed(self):
        a, _ = aklt_deformed_tensor(random_aklt_deformation(np.random.default_rng(7)))
        assert certify_preparable(a, restarts=8, workers=1).certified

    def test_search_certifies_without_shortcuts(self):
        cert = certify_preparable(
            tetrahedron_tensor(_weights(2, 13)), restarts=16, workers=1, methods=("search",)
        )
        assert cert.certified
        assert cert.method == "search"
        assert cert.search.distinct == 4
        assert aligned_residual(cert.basis, pauli_basis()) < 1e-6
        assert cert.verified_fidelity >= 1 - 1e-9

    def test_shortcuts_only_leave_search_unused(self):
        cert = certify_preparable(
            tetrahedron_tensor(_weights(2, 13)), workers=1, methods=("columns", "standard")
        )
        assert cert.method in ("columns", "standard")
        assert cert.search is None

    def test_unknown_method(self):
        with pytest.raises(DomainError, match="methods"):
            certify_preparable(tetrahedron_tensor(_weights(2, 0)), methods=("guess",))

    def test_random_tensor_unknown(self):
        cert = certify_preparable(random_tensor(4, 2, np.random.default_rng(8)), restarts=4, workers=1)
        assert cert.verdict == "Unknown"
        assert cert.basis is None

    def test_to_dict(self):
        cert = certify_preparable(tetrahedron_tensor(phase_diagram_point("aklt")), restarts=4, workers=1)
        out = cert.to_dict()
        assert out["verdict"] == "Certified"
        assert set(out) == {
            "verdict",
            "tensor",
            "method",
            "dimension",
            "basis",
            "residuals",
            "search",
            "verifiedFidelity",
        }
        assert len(out["residuals"]) == 4
