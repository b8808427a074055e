"""Tests for applying a stored-program MPO by measurement."""

import numpy as np
import pytest

from mpsprep.linalg import DomainError
from mpsprep.mpo import mpo_apply, mpo_matrix, resource_state
from mpsprep.mps import UniformMPS, random_tensor


class TestResourceState:
    @pytest.mark.parametrize("resource", ["cluster", "bell"])
    def test_stabilized(self, resource):
        n = 2
        vec, gens = resource_state(n, resource)
        m = 2 * n
        bits = (np.arange(2**m)[:, None] >> np.arange(m)[::-1]) & 1
        place = 1 << np.arange(m)[::-1]
        for row in gens:
            x, z = row[:m].astype(int), row[m:].astype(int)
            flipped = (bits ^ x) @ place
            out = ((-1.0) ** (bits @ z % 2) * vec)[flipped]
            assert abs(abs(np.vdot(vec, out)) - 1.0) < 1e-12

    def test_unknown(self):
        with pytest.raises(DomainError):
            resource_state(2, "ring")


class TestMpoMatrix:
    def test_bell_is_identity(self):
        k = mpo_matrix(3, "bell")
        assert np.allclose(k / k[0, 0], np.eye(8))

    def test_cluster_shape(self):
        k = mpo_matrix(3, "cluster")
        assert k.shape == (8, 8)
        assert np.linalg.norm(k) > 0


class TestMpoApply:
    @pytest.mark.parametrize("resource", ["cluster", "bell"])
    def test_deterministic(self, resource):
        psi = UniformMPS(tensor=random_tensor(2, 2, np.random.default_rng(0)), sites=4)
        report = mpo_apply(psi, seed=1, resource=resource, trials=5, workers=1)
        assert report.boundary == "open"
        assert report.min_fidelity >= 1 - 1e-9

    def test_qubits_only(self):
        psi = UniformMPS(tensor=random_tensor(3, 2, np.random.default_rng(0)), sites=3)
        with pytest.raises(DomainError, match="qubit"):
            mpo_apply(psi, seed=0)

    def test_dangling_rejected(self):
        psi = UniformMPS(
            tensor=random_tensor(2, 2, np.random.default_rng(0)), sites=3, boundary="dangling"
        )
        with pytest.raises(DomainError, match="periodic"):
            mpo_apply(psi, seed=0)
