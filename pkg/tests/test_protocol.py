"""Tests for the measurement-and-correction protocol on chains."""

import math

import numpy as np
import pytest

from mpsprep.bases import PAULIS, UnitaryErrorBasis, clock_basis, clock_matrices, pauli_basis
from mpsprep.families import aklt_deformed_tensor, clock_tensor, phase_diagram_point, tetrahedron_tensor
from mpsprep.linalg import DomainError, ShapeError, random_unitary, unitarity_residual
from mpsprep.mps import MPSTensor, SimplexWeights, random_tensor
from mpsprep.protocol import (
    UNCLASSIFIED,
    NotCorrectable,
    OutcomeRecord,
    ProtocolReport,
    TrialResult,
    construct_correction_unitary,
    derive_corrections,
    init_clusters,
    outcome_distribution,
    push_residual,
    run_protocol,
    sample_outcomes,
)


def _tetrahedron(seed=0):
    w = SimplexWeights.from_flat(np.random.default_rng(seed).dirichlet(np.ones(4)))
    return tetrahedron_tensor(w)


def _rephased_clock_basis(phi):
    """Shift-and-multiply basis whose shift-1 diagonals carry an extra phase on one entry."""
    x, _ = clock_matrices(3)
    fourier = np.exp(2j * np.pi / 3) ** np.outer(np.arange(3), np.arange(3))
    rephase = np.array([1.0, np.exp(1j * phi), 1.0])
    elements = []
    for shift in range(3):
        for k in range(3):
            diag = fourier[k] * (rephase if shift == 1 else 1.0)
            elements.append(np.linalg.matrix_power(x, shift) @ np.diag(diag))
    return UnitaryErrorBasis(dim=3, elements=elements, name="rephased-clock")


# ---------------------------------------------------------------------------
# Correction unitary
# ---------------------------------------------------------------------------


class TestConstructCorrectionUnitary:
    @pytest.mark.parametrize("k", range(4))
    def test_pauli_pairs(self, k):
        a = _tetrahedron()
        v = PAULIS[k]
        u = construct_correction_unitary(a, v, v.conj().T)
        assert unitarity_residual(u) < 1e-10
        assert push_residual(a, u, v, v.conj().T) < 1e-10

    def test_rotated_frame(self):
        rng = np.random.default_rng(3)
        frame = random_unitary(2, rng)
        lam = rng.dirichlet(np.ones(4))
        data = np.stack([math.sqrt(x) * frame @ s @ frame.conj().T for x, s in zip(lam, PAULIS)])
        a = MPSTensor(data=data).with_physical(random_unitary(4, rng))
        v = frame @ PAULIS[2] @ frame.conj().T
        u = construct_correction_unitary(a, v, v.conj().T)
        assert unitarity_residual(u) < 1e-10
        assert push_residual(a, u, v, v.conj().T) < 1e-10

    def test_rank_deficient_range(self):
        # AKLT leaves physical slot 0 empty, so the complement has to be matched too
        a = tetrahedron_tensor(phase_diagram_point("aklt"))
        u = construct_correction_unitary(a, PAULIS[1], PAULIS[1])
        assert unitarity_residual(u) < 1e-10

    def test_push_residual_between_tolerances(self):
        # invariance holds to ~6e-9 but no phase maps Z onto the rotated Z within 1e-10
        a = MPSTensor(data=PAULIS[3][None])
        eps = 1e-9
        v = np.cos(eps) * np.eye(2) + 1j * np.sin(eps) * PAULIS[1]
        with pytest.raises(NotCorrectable, match="push-through") as exc_info:
            construct_correction_unitary(a, v, v.conj().T)
        assert 1e-10 < exc_info.value.residual < 1e-8

    def test_violating_pair(self):
        rng = np.random.default_rng(4)
        a = random_tensor(4, 2, rng)
        v = random_unitary(2, rng)
        with pytest.raises(NotCorrectable, match="not invariant") as exc_info:
            construct_correction_unitary(a, v, v.conj().T)
        assert exc_info.value.residual > 1e-8

    def test_shape(self):
        with pytest.raises(ShapeError):
            construct_correction_unitary(_tetrahedron(), np.eye(3), np.eye(3))


# ---------------------------------------------------------------------------
# Registers and sampling
# ---------------------------------------------------------------------------


class TestInitClusters:
    def test_layout(self):
        reg = init_clusters(_tetrahedron(), 3)
        assert len(reg.layout) == 9
        assert reg.layout[1] == (0, "physical", 4)
        assert np.isclose(np.linalg.norm(reg.global_vector()), 1.0)

    def test_needs_two_sites(self):
        with pytest.raises(DomainError):
            init_clusters(_tetrahedron(), 1)


class TestOutcomeDistribution:
    def test_uniform_for_invariant_tensor(self):
        dist = outcome_distribution(_tetrahedron(1), 3, pauli_basis())
        assert np.isclose(dist.total, 1.0)
        assert np.allclose(dist.probabilities, 1 / 16)

    def test_probability_lookup(self):
        dist = outcome_distribution(_tetrahedron(2), 3, pauli_basis())
        assert np.isclose(dist.probability((1, 3)), 1 / 16)


class TestSampleOutcomes:
    def test_seeded(self):
        a = _tetrahedron()
        r1 = sample_outcomes(a, 5, pauli_basis(), seed=11)
        r2 = sample_outcomes(a, 5, pauli_basis(), seed=11)
        assert r1 == r2
        assert len(r1.bond_outcomes) == 4
        assert np.isclose(r1.probability, 0.25**4)

    def test_periodic_measures_every_bond(self):
        record = sample_outcomes(_tetrahedron(), 4, pauli_basis(), seed=0, boundary="periodic")
        assert len(record.bond_outcomes) == 4


class TestDeriveCorrections:
    def test_right_sweep(self):
        record = OutcomeRecord(bond_outcomes=(1, 3), probability=1 / 16)
        plan = derive_corrections(_tetrahedron(), pauli_basis(), record)
        assert sorted(plan.site_unitaries) == [1, 2]
        assert set(plan.boundary_unitaries) == {"right"}
        assert plan.correctable

    def test_left_sweep(self):
        record = OutcomeRecord(bond_outcomes=(1, 3), probability=1 / 16)
        plan = derive_corrections(_tetrahedron(), pauli_basis(), record, direction="left")
        assert sorted(plan.site_unitaries) == [0, 1]
        assert set(plan.boundary_unitaries) == {"left"}

    def test_periodic_residual_class(self):
        record = OutcomeRecord(bond_outcomes=(1, 1, 3), probability=1 / 64)
        plan = derive_corrections(_tetrahedron(), pauli_basis(), record, boundary="periodic")
        assert plan.residual_class == 3
        assert not plan.correctable

    def test_periodic_unclassified_residual(self):
        # every unitary pushes through the bond-pair tensor; the rephased shift block
        # of the basis does not close under products
        a = MPSTensor(data=np.eye(9).reshape(9, 3, 3) / 3)
        basis = _rephased_clock_basis(0.3)
        record = OutcomeRecord(bond_outcomes=(3, 3, 0), probability=1 / 729)
        plan = derive_corrections(a, basis, record, boundary="periodic")
        assert basis.classify(plan.residual) is None
        assert plan.residual_class == UNCLASSIFIED
        assert not plan.correctable

    def test_periodic_left_rejected(self):
        record = OutcomeRecord(bond_outcomes=(0, 0, 0), probability=1.0)
        with pytest.raises(DomainError):
            derive_corrections(
                _tetrahedron(), pauli_basis(), record, boundary="periodic", direction="left"
            )


# ---------------------------------------------------------------------------
# End to end
# ---------------------------------------------------------------------------


class TestRunProtocol:
    @pytest.mark.parametrize("direction", ["right", "left"])
    def test_tetrahedron_deterministic(self, direction):
        report = run_protocol(
            _tetrahedron(5), 5, pauli_basis(), trials=20, seed=3, direction=direction, workers=1
        )
        assert report.deterministic()
        assert report.min_fidelity >= 1 - 1e-9

    def test_cluster_point(self):
        a = tetrahedron_tensor(phase_diagram_point("cluster"))
        report = run_protocol(a, 6, pauli_basis(), trials=10, seed=7, workers=1)
        assert report.min_fidelity >= 1 - 1e-9

    def test_clock_chain(self):
        rng = np.random.default_rng(6)
        w = SimplexWeights(chi=3, values=rng.dirichlet(np.ones(9)).reshape(3, 3))
        report = run_protocol(clock_tensor(w), 3, clock_basis(3), trials=10, seed=1, workers=1)
        assert report.deterministic()

    def test_aklt_deformed(self):
        a, basis = aklt_deformed_tensor(np.diag([1.0, 2.0, 0.5]))
        report = run_protocol(a, 4, basis, trials=10, seed=2, workers=1)
        assert report.deterministic()

    def test_workers_do_not_change_results(self):
        a = _tetrahedron(8)
        inline = run_protocol(a, 4, pauli_basis(), trials=12, seed=9, workers=1)
        pooled = run_protocol(a, 4, pauli_basis(), trials=12, seed=9, workers=3)
        assert inline.to_dict() == pooled.to_dict()

    def test_report_fields(self):
        report = run_protocol(_tetrahedron(), 4, pauli_basis(), trials=5, seed=0, workers=1)
        out = report.to_dict()
        assert out["trials"] == 5
        assert out["seed"] == 0
        assert sum(out["outcomeHistogram"].values()) == 5 * 3
        assert "residualHistogram" not in out
        assert len(report.rows()) == 5

    def test_periodic_analysis_mode(self):
        report = run_protocol(
            _tetrahedron(), 4, pauli_basis(), trials=40, seed=4, boundary="periodic", workers=1
        )
        out = report.to_dict()
        assert sum(out["residualHistogram"].values()) == 40
        assert set(out["residualHistogram"]) <= {"I", "X", "Y", "Z"}
        assert report.min_fidelity >= 1 - 1e-9

    def test_unclassified_trials_are_uncorrectable(self):
        report = ProtocolReport(
            name="t", sites=3, boundary="periodic", seed=0, labels=["I", "X", "Y", "Z"]
        )
        report.trials = [
            TrialResult(trial=0, record=(1, 1, 0), probability=0.1, fidelity=1.0, residual_class=0),
            TrialResult(
                trial=1,
                record=(1, 2, 0),
                probability=0.1,
                fidelity=0.2,
                residual_class=UNCLASSIFIED,
                correctable=False,
            ),
        ]
        assert report.uncorrectable == 1
        assert report.min_fidelity == 1.0
        assert report.residual_histogram == {"I": 1, "other": 1}
        assert not report.deterministic()

    def test_not_correctable(self):
        a = random_tensor(4, 2, np.random.default_rng(10))
        with pytest.raises(NotCorrectable) as exc_info:
            run_protocol(a, 3, pauli_basis(), trials=8, seed=0, workers=1)
        assert exc_info.value.site is not None
        assert exc_info.value.bond is not None

    def test_basis_mismatch(self):
        with pytest.raises(ShapeError):
            run_protocol(_tetrahedron(), 3, clock_basis(3), trials=1, seed=0, workers=1)
