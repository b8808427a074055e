"""Tests for the preparable families and the spectrum/weights correspondence."""

import math

import numpy as np
import pytest

from mpsprep.bases import pauli_basis
from mpsprep.families import (
    NAMED_POINTS,
    InfeasibleSpectrumError,
    aklt_deformed_tensor,
    canonicalize_weights,
    clock_tensor,
    correlation_length,
    correlation_lengths,
    flatten_labels,
    ghz_cat_state,
    nice_basis_tensor,
    phase_diagram_point,
    random_aklt_deformation,
    spectrum_to_weights,
    tetrahedron_tensor,
    trajectory_sweep,
    weights_to_spectrum,
)
from mpsprep.linalg import DomainError, fidelity
from mpsprep.mps import SimplexWeights, UniformMPS, check_conditions, dense_state, transfer_matrix


def _random_weights(chi, seed):
    rng = np.random.default_rng(seed)
    return SimplexWeights(chi=chi, values=rng.dirichlet(np.ones(chi * chi)).reshape(chi, chi))


class TestTensors:
    def test_tetrahedron_elements(self):
        a = tetrahedron_tensor(phase_diagram_point("ghz"))
        assert np.allclose(a.data[0], np.eye(2) / math.sqrt(2))
        assert np.allclose(a.data[1], 0)

    def test_tetrahedron_needs_chi_two(self):
        with pytest.raises(DomainError):
            tetrahedron_tensor(_random_weights(3, 0))

    def test_clock_shape(self):
        a = clock_tensor(_random_weights(3, 1))
        assert a.data.shape == (9, 3, 3)

    def test_nice_basis_tensor_matches_tetrahedron(self):
        w = phase_diagram_point("aklt")
        a = nice_basis_tensor(pauli_basis(), {"I": 0.0, "X": 1 / 3, "Y": 1 / 3, "Z": 1 / 3})
        assert np.allclose(a.data, tetrahedron_tensor(w).data)

    def test_nice_basis_unknown_class(self):
        with pytest.raises(DomainError, match="unknown conjugacy classes"):
            nice_basis_tensor(pauli_basis(), {"Q": 1.0})

    def test_nice_basis_weights_sum(self):
        with pytest.raises(DomainError):
            nice_basis_tensor(pauli_basis(), {"I": 0.5})


class TestSpectrum:
    def test_aklt(self):
        mu = flatten_labels(weights_to_spectrum(phase_diagram_point("aklt")))
        assert np.allclose(mu, [1, -1 / 3, -1 / 3, -1 / 3], atol=1e-12)

    @pytest.mark.parametrize("chi", [2, 3, 4])
    def test_round_trip(self, chi):
        for seed in range(5):
            w = _random_weights(chi, seed)
            mu = weights_to_spectrum(w)
            again = weights_to_spectrum(spectrum_to_weights(mu, chi))
            assert np.max(np.abs(again - mu)) < 1e-13

    @pytest.mark.parametrize("chi", [2, 3])
    def test_matches_transfer_eigenvalues(self, chi):
        w = _random_weights(chi, 7)
        a = tetrahedron_tensor(w) if chi == 2 else clock_tensor(w)
        measured = transfer_matrix(a).eigenvalues()
        for mu in weights_to_spectrum(w).reshape(-1):
            assert np.min(np.abs(measured - mu)) < 1e-10

    def test_feasible_flat_spectrum(self):
        w = spectrum_to_weights([1.0, 0.9, 0.9, 0.9])
        assert np.allclose(w.flat(), [0.925, 0.025, 0.025, 0.025])

    def test_infeasible(self):
        with pytest.raises(InfeasibleSpectrumError, match="negative") as exc_info:
            spectrum_to_weights([1.0, -0.9, -0.9, -0.9])
        assert exc_info.value.weights is not None
        assert np.isclose(exc_info.value.weights.min(), -0.425)

    def test_leading_eigenvalue(self):
        with pytest.raises(InfeasibleSpectrumError, match="leading"):
            spectrum_to_weights([0.5, 0.0, 0.0, 0.0])


class TestCorrelationLength:
    def test_aklt(self):
        xi = correlation_lengths(weights_to_spectrum(phase_diagram_point("aklt")))
        assert np.allclose(xi, 1 / math.log(3))

    def test_edges(self):
        assert correlation_length(0.0) == 0.0
        assert correlation_length(1.0) == math.inf

    def test_above_one(self):
        with pytest.raises(DomainError):
            correlation_length(1.5)


class TestPhaseDiagram:
    @pytest.mark.parametrize("name", sorted(NAMED_POINTS))
    def test_named(self, name):
        assert np.allclose(phase_diagram_point(name).flat(), NAMED_POINTS[name])

    def test_trajectory_needs_beta(self):
        with pytest.raises(DomainError, match="finite beta"):
            phase_diagram_point("deformedCluster")

    def test_unknown(self):
        with pytest.raises(DomainError, match="unknown point"):
            phase_diagram_point("haldane")

    def test_cluster_at_zero(self):
        for name in ("deformedCluster", "clusterToGHZ"):
            assert np.allclose(phase_diagram_point(name, 0.0).flat(), 0.25)

    def test_aklt_at_zero(self):
        assert np.allclose(phase_diagram_point("deformedAKLT", 0.0).flat(), [0, 1 / 3, 1 / 3, 1 / 3])

    def test_large_beta_finite(self):
        w = phase_diagram_point("deformedCluster", 500.0)
        assert np.allclose(w.flat(), [1, 0, 0, 0])

    def test_canonicalize(self):
        w, order = canonicalize_weights(SimplexWeights.from_flat([0.1, 0.2, 0.4, 0.3]))
        assert np.allclose(w.flat(), [0.1, 0.4, 0.3, 0.2])
        assert order == (1, 2, 0)


class TestEndpoints:
    def test_product_limit(self):
        w = phase_diagram_point("deformedCluster", 3.0)
        psi = dense_state(UniformMPS(tensor=tetrahedron_tensor(w), sites=6)).vector
        assert abs(psi[0]) ** 2 >= 0.999

    def test_ghz_limit(self):
        w = phase_diagram_point("clusterToGHZ", 3.0)
        psi = dense_state(UniformMPS(tensor=tetrahedron_tensor(w), sites=6)).vector
        assert fidelity(ghz_cat_state(6, labels=(0, 2)), psi) >= 0.999

    def test_ghz_point_is_cat(self):
        psi = dense_state(
            UniformMPS(tensor=tetrahedron_tensor(phase_diagram_point("ghz")), sites=4)
        ).vector
        assert np.isclose(fidelity(ghz_cat_state(4), psi), 1.0)

    def test_deformed_aklt_oracle(self):
        n, beta = 4, 0.5
        aklt = dense_state(
            UniformMPS(tensor=tetrahedron_tensor(phase_diagram_point("aklt")), sites=n)
        ).vector
        local = np.array([0.0, math.exp(beta), math.exp(beta), 1.0])
        deform = local
        for _ in range(n - 1):
            deform = np.kron(deform, local)
        w = phase_diagram_point("deformedAKLT", beta)
        psi = dense_state(UniformMPS(tensor=tetrahedron_tensor(w), sites=n)).vector
        assert 1 - fidelity(deform * aklt, psi) < 1e-9


class TestTrajectorySweep:
    def test_columns(self):
        rows = trajectory_sweep("deformedAKLT", [0.0, 0.5], sites=4)
        assert list(rows[0]) == [
            "beta",
            "lambda_1",
            "lambda_2",
            "lambda_3",
            "lambda_4",
            "mu_2",
            "mu_3",
            "mu_4",
            "xi_max",
            "schmidt_1",
            "schmidt_2",
        ]

    def test_aklt_xi_increasing(self):
        rows = trajectory_sweep("deformedAKLT", np.arange(13) * 0.25, sites=4)
        xi = [r["xi_max"] for r in rows]
        assert all(b > a for a, b in zip(xi, xi[1:]))
        assert np.isclose(xi[0], 1 / math.log(3))


class TestAkltDeformed:
    def test_identity_deformation_is_aklt(self):
        a, basis = aklt_deformed_tensor(np.eye(3))
        assert np.allclose(a.data[1:], tetrahedron_tensor(phase_diagram_point("aklt")).data[1:])
        assert np.allclose(a.data[0], 0)
        assert check_conditions(a, basis).satisfied

    @pytest.mark.parametrize("seed", range(3))
    def test_random_deformation_pushes_through(self, seed):
        m = random_aklt_deformation(np.random.default_rng(seed))
        a, basis = aklt_deformed_tensor(m)
        assert check_conditions(a, basis).satisfied

    def test_singular(self):
        with pytest.raises(DomainError, match="singular"):
            aklt_deformed_tensor(np.zeros((3, 3)))

    def test_complex_gram_rejected(self):
        m = np.eye(3, dtype=complex)
        m[0, 1] = 1j
        with pytest.raises(DomainError, match="must be real"):
            aklt_deformed_tensor(m)


class TestCatState:
    def test_normalized(self):
        assert np.isclose(np.linalg.norm(ghz_cat_state(3)), 1.0)

    def test_unused_labels_empty(self):
        psi = ghz_cat_state(2, labels=(0, 3), d=4).reshape(4, 4)
        assert np.allclose(psi[1:3, :], 0)
