"""Tests for MPS tensors, transfer matrices and dense contraction."""

import numpy as np
import pytest

from mpsprep.bases import clock_basis, pauli_basis
from mpsprep.families import phase_diagram_point, tetrahedron_tensor
from mpsprep.linalg import DomainError, ResourceError, ShapeError
from mpsprep.mps import (
    MPSTensor,
    SimplexWeights,
    UniformMPS,
    blocked_tensor,
    check_conditions,
    dense_state,
    entanglement_data,
    random_tensor,
    transfer_matrix,
)


def _aklt():
    return tetrahedron_tensor(phase_diagram_point("aklt"))


class TestMPSTensor:
    def test_rank_three(self):
        with pytest.raises(ShapeError, match="rank 3"):
            MPSTensor(data=np.ones((2, 2)))

    def test_read_only(self):
        a = _aklt()
        with pytest.raises(ValueError):
            a.data[0, 0, 0] = 1.0

    def test_bonds(self):
        a = MPSTensor(data=np.ones((3, 2, 4)))
        assert (a.d, a.chi_left, a.chi_right) == (3, 2, 4)
        with pytest.raises(ShapeError, match="bond dimensions differ"):
            _ = a.chi

    def test_with_physical_permutes(self):
        a = _aklt()
        swap = np.eye(4)[[0, 2, 1, 3]]
        assert np.allclose(a.with_physical(swap).data[1], a.data[2])


class TestSimplexWeights:
    def test_from_flat(self):
        w = SimplexWeights.from_flat([0.1, 0.2, 0.3, 0.4])
        assert np.isclose(w.values[1, 1], 0.3)
        assert np.allclose(w.flat(), [0.1, 0.2, 0.3, 0.4])

    def test_negative(self):
        with pytest.raises(DomainError, match="non-negative"):
            SimplexWeights.from_flat([1.2, -0.2, 0.0, 0.0])

    def test_sum(self):
        with pytest.raises(DomainError, match="sum to 1"):
            SimplexWeights.from_flat([0.5, 0.2, 0.0, 0.0])

    def test_renormalize(self):
        w = SimplexWeights.from_flat([2, 1, 1, 0], renormalize=True)
        assert np.allclose(w.flat(), [0.5, 0.25, 0.25, 0.0])

    def test_count(self):
        with pytest.raises(ShapeError):
            SimplexWeights.from_flat([1.0, 0.0, 0.0], chi=2)


class TestTransferMatrix:
    def test_aklt_spectrum(self):
        values = transfer_matrix(_aklt()).eigenvalues()
        assert np.allclose(values, [1, -1 / 3, -1 / 3, -1 / 3], atol=1e-12)

    def test_cluster_is_rank_one(self):
        e = transfer_matrix(tetrahedron_tensor(phase_diagram_point("cluster"))).matrix
        vec1 = np.eye(2).reshape(-1)
        assert np.allclose(e, 0.5 * np.outer(vec1, vec1))

    def test_pauli_invariance(self):
        transfer = transfer_matrix(_aklt())
        for v in pauli_basis().elements:
            assert transfer.invariance_residual(v) < 1e-12

    def test_random_tensor_normalized(self):
        a = random_tensor(3, 2, np.random.default_rng(0))
        assert np.isclose(transfer_matrix(a).spectral_radius(), 1.0)


class TestBlockedTensor:
    def test_shape_and_product(self):
        a = _aklt()
        b = blocked_tensor(a, 2)
        assert b.data.shape == (16, 2, 2)
        assert np.allclose(b.data[1 * 4 + 2], a.data[1] @ a.data[2])

    def test_invalid_k(self):
        with pytest.raises(DomainError):
            blocked_tensor(_aklt(), 0)


class TestDenseState:
    def test_dims(self):
        s = UniformMPS(tensor=_aklt(), sites=3, boundary="dangling")
        state = dense_state(s)
        assert state.dims == (2, 4, 4, 4, 2)
        assert np.isclose(np.linalg.norm(state.vector), 1.0)

    def test_periodic_trace(self):
        a = _aklt()
        state = dense_state(UniformMPS(tensor=a, sites=2, boundary="periodic"))
        raw = np.array([np.trace(a.data[p] @ a.data[q]) for p in range(4) for q in range(4)])
        assert np.allclose(state.vector, raw / np.linalg.norm(raw))

    def test_zero_state(self):
        a = MPSTensor(data=np.array([[[0, 1], [0, 0]]]))
        with pytest.raises(DomainError, match="contracts to zero"):
            dense_state(UniformMPS(tensor=a, sites=1, boundary="periodic"))

    def test_cap(self, monkeypatch):
        monkeypatch.setenv("MPSPREP_MAX_DIM", "1000")
        with pytest.raises(ResourceError):
            dense_state(UniformMPS(tensor=_aklt(), sites=6))


class TestEntanglementData:
    def test_aklt_bond(self):
        s = UniformMPS(tensor=_aklt(), sites=6, boundary="dangling")
        assert np.allclose(entanglement_data(s, 3), [0.5, 0.5], atol=1e-10)

    def test_periodic_has_chi_squared_values(self):
        s = UniformMPS(tensor=_aklt(), sites=4, boundary="periodic")
        spectrum = entanglement_data(s, 2)
        assert spectrum.shape == (4,)
        assert np.isclose(spectrum.sum(), 1.0)

    def test_site_spectrum(self):
        s = UniformMPS(tensor=_aklt(), sites=4, boundary="dangling")
        spectrum = entanglement_data(s, ("site", 1))
        assert np.isclose(spectrum.sum(), 1.0)
        assert np.all(np.diff(spectrum) <= 1e-12)

    def test_bad_cut(self):
        s = UniformMPS(tensor=_aklt(), sites=4, boundary="dangling")
        with pytest.raises(DomainError):
            entanglement_data(s, 4)


class TestCheckConditions:
    def test_tetrahedron_satisfied(self):
        w = SimplexWeights.from_flat(np.random.default_rng(1).dirichlet(np.ones(4)))
        report = check_conditions(tetrahedron_tensor(w), pauli_basis())
        assert report.satisfied
        assert report.max_push_residual < 1e-10

    def test_random_tensor_not_satisfied(self):
        a = random_tensor(4, 2, np.random.default_rng(2))
        report = check_conditions(a, pauli_basis())
        assert not report.satisfied
        assert report.max_invariance_residual > 1e-6

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            check_conditions(_aklt(), clock_basis(3))
