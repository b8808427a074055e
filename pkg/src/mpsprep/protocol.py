"""Single-round measurement protocol on chains.

Clusters ``|A>`` on (left ancilla, physical, right ancilla) are prepared side by side,
neighbouring ancillas are measured in the Choi basis of the conjugate error basis
(so outcome ``k`` inserts exactly ``V_k / sqrt(chi)`` on the bond), and the outcomes
are swept along the chain into physical unitaries plus one boundary unitary.

Example:
    from mpsprep import pauli_basis, phase_diagram_point, run_protocol, tetrahedron_tensor

    a = tetrahedron_tensor(phase_diagram_point("aklt"))
    report = run_protocol(a, n=6, basis=pauli_basis(), trials=100, seed=7)
    assert report.min_fidelity > 1 - 1e-9
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.linalg import null_space

from .bases import UnitaryErrorBasis
from .linalg import (
    SVD_RTOL,
    DomainError,
    MpsprepError,
    ResourceError,
    ShapeError,
    apply_on_axis,
    check_cap,
    fidelity,
    nearest_unitary,
    pinv,
)
from .mps import Boundary, MPSTensor, UniformMPS, dense_state, transfer_matrix

logger = logging.getLogger(__name__)

PUSH_PRECONDITION_TOL = 1e-8
PUSH_TOL = 1e-10
DETERMINISM_TOL = 1e-9
MAX_RECORDS = 2**20
# residual_class of a ring leftover that is no multiple of a basis element
UNCLASSIFIED = -1

Direction = Literal["right", "left"]


class NotCorrectable(MpsprepError):
    def __init__(
        self,
        message: str,
        residual: float | None = None,
        site: int | None = None,
        bond: int | None = None,
    ):
        super().__init__(message)
        self.residual = residual
        self.site = site
        self.bond = bond


# ---------------------------------------------------------------------------
# Virtual-to-physical correspondence
# ---------------------------------------------------------------------------


def push_residual(a: MPSTensor, u: np.ndarray, v_left: np.ndarray, v_right: np.ndarray) -> float:
    """``||U o A - v_left A v_right||``."""
    return float(np.linalg.norm(a.with_physical(u).data - a.conjugated(v_left, v_right).data))


def construct_correction_unitary(
    a: MPSTensor, v_left: np.ndarray, v_right: np.ndarray
) -> np.ndarray:
    """Physical unitary U with ``U o A = v_left A v_right``.

    Viewing A as the map ``A[p, (l, r)]`` into the physical space, ``A_V A^+`` is an
    isometry from range(A) onto range(A_V) whenever both have the same Gram matrix,
    which is exactly transfer-matrix invariance. The orthogonal complements are
    matched isometrically, and reduce to ``1 - A A^+`` when the ranges coincide.
    """
    transfer = transfer_matrix(a)
    v_left = np.asarray(v_left, dtype=np.complex128)
    v_right = np.asarray(v_right, dtype=np.complex128)
    if v_left.shape != (a.chi, a.chi) or v_right.shape != (a.chi, a.chi):
        raise ShapeError(f"virtual operators must be {a.chi} x {a.chi}")
    residual = float(np.linalg.norm(transfer.conjugated(v_left, v_right) - transfer.matrix))
    if residual >= PUSH_PRECONDITION_TOL:
        raise NotCorrectable(
            f"transfer matrix is not invariant (residual {residual:.3e})", residual=residual
        )
    amap = a.physical_map()
    vmap = a.conjugated(v_left, v_right).physical_map()
    x = vmap @ pinv(amap)
    source = null_space(amap.conj().T, rcond=SVD_RTOL)
    if source.shape[1]:
        overlap = np.linalg.norm(vmap.conj().T @ source)
        target = source
        if overlap > PUSH_PRECONDITION_TOL * max(1.0, float(np.linalg.norm(vmap))):
            target = null_space(vmap.conj().T, rcond=SVD_RTOL)
            if target.shape != source.shape:
                raise NotCorrectable("ranges of A and V o A differ in dimension", residual=residual)
        x = x + target @ source.conj().T
    u = nearest_unitary(x)
    final = push_residual(a, u, v_left, v_right)
    if final >= PUSH_TOL:
        raise NotCorrectable(f"push-through residual {final:.3e}", residual=final)
    return u


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


class ClusterRegister(BaseModel):
    """N decoupled copies of ``|A>`` over (left ancilla, physical, right ancilla)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    tensor: MPSTensor
    sites: int = Field(ge=2)
    site_state: np.ndarray
    layout: list[tuple[int, str, int]]

    def global_vector(self) -> np.ndarray:
        check_cap(self.site_state.size**self.sites, "cluster register")
        out = self.site_state
        for _ in range(self.sites - 1):
            out = np.kron(out, self.site_state)
        return out


class OutcomeRecord(BaseModel):
    """Basis index measured on each bond (0 is the identity outcome)."""

    model_config = ConfigDict(frozen=True)

    bond_outcomes: tuple[int, ...]
    probability: float = Field(gt=0.0, le=1.0 + 1e-12)

    @field_validator("bond_outcomes", mode="before")
    @classmethod
    def _tuple(cls, value):
        return tuple(int(x) for x in value)


class CorrectionPlan(BaseModel):
    """Physical unitaries per site and per boundary ancilla that undo a record."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    site_unitaries: dict[int, np.ndarray]
    boundary_unitaries: dict[str, np.ndarray] = {}
    residual: np.ndarray | None = None
    residual_class: int | None = None

    @property
    def correctable(self) -> bool:
        """No residual (open chains) or an identity residual on the closing bond."""
        return self.residual_class in (None, 0)


@dataclass
class OutcomeDistribution:
    records: np.ndarray
    probabilities: np.ndarray

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())

    def probability(self, record) -> float:
        hits = np.all(self.records == np.asarray(record), axis=1)
        return float(self.probabilities[hits][0])


@dataclass
class TrialResult:
    trial: int
    record: tuple[int, ...]
    probability: float
    fidelity: float
    residual_class: int | None = None
    correctable: bool = True


@dataclass
class ProtocolReport:
    """Per-trial fidelities and outcome statistics of one protocol run."""

    name: str
    sites: int
    boundary: str
    seed: int
    labels: list[str]
    trials: list[TrialResult] = field(default_factory=list)

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([t.fidelity for t in self.trials])

    @property
    def min_fidelity(self) -> float:
        """Smallest fidelity among correctable trials (1.0 if there are none)."""
        return min((t.fidelity for t in self.trials if t.correctable), default=1.0)

    @property
    def uncorrectable(self) -> int:
        return sum(1 for t in self.trials if not t.correctable)

    @property
    def outcome_histogram(self) -> dict[str, int]:
        counts = Counter(k for t in self.trials for k in t.record)
        return {self.labels[k]: counts[k] for k in sorted(counts)}

    @property
    def residual_histogram(self) -> dict[str, int]:
        counts = Counter(
            "other" if t.residual_class in (None, UNCLASSIFIED) else self.labels[t.residual_class]
            for t in self.trials
        )
        return dict(sorted(counts.items()))

    def deterministic(self, tol: float = DETERMINISM_TOL) -> bool:
        return self.uncorrectable == 0 and self.min_fidelity >= 1.0 - tol

    def to_dict(self) -> dict:
        out = {
            "tensor": self.name,
            "n": self.sites,
            "boundary": self.boundary,
            "trials": len(self.trials),
            "seed": self.seed,
            "fidelities": [float(f) for f in self.fidelities],
            "minFidelity": float(self.min_fidelity),
            "outcomeHistogram": self.outcome_histogram,
            "uncorrectable": self.uncorrectable,
        }
        if self.boundary in ("periodic", "torus"):
            out["residualHistogram"] = self.residual_histogram
        return out

    def rows(self) -> list[dict]:
        return [
            {
                "trial": t.trial,
                "record": " ".join(self.labels[k] for k in t.record),
                "probability": t.probability,
                "fidelity": t.fidelity,
                "correctable": int(t.correctable),
            }
            for t in self.trials
        ]


# ---------------------------------------------------------------------------
# Registers and outcome statistics
# ---------------------------------------------------------------------------


def _site_vector(a: MPSTensor) -> np.ndarray:
    """``|A>`` ordered (l, p, r) and normalized."""
    site = a.data.transpose(1, 0, 2)
    return site / np.linalg.norm(site)


def init_clusters(a: MPSTensor, n: int) -> ClusterRegister:
    if n < 2:
        raise DomainError(f"need at least 2 sites, got {n}")
    check_cap(a.chi**2 * a.d**n, f"{n}-site register")
    layout = [
        (k, role, dim)
        for k in range(n)
        for role, dim in (("left", a.chi_left), ("physical", a.d), ("right", a.chi_right))
    ]
    return ClusterRegister(
        tensor=a, sites=n, site_state=_site_vector(a).reshape(-1), layout=layout
    )


def outcome_distribution(
    a: MPSTensor, n: int, basis: UnitaryErrorBasis, max_records: int = MAX_RECORDS
) -> OutcomeDistribution:
    """Exact joint distribution of the ``n - 1`` bond outcomes of a Dangling chain."""
    chi = a.chi
    n_records = (chi * chi) ** (n - 1)
    if n_records > max_records:
        raise ResourceError(f"{n_records} records exceed the enumeration budget {max_records}")
    norm2 = float(np.linalg.norm(a.data)) ** 2
    e = transfer_matrix(a).matrix / norm2
    inserts = np.stack([np.kron(v, v.conj()) for v in basis.elements]) / chi
    one = np.eye(chi).reshape(-1)
    rows = (one @ e)[None, :]
    for _ in range(n - 1):
        rows = np.einsum("ri,xij,jk->rxk", rows, inserts, e).reshape(-1, chi * chi)
    probs = (rows @ one).real
    records = np.array(list(itertools.product(range(chi * chi), repeat=n - 1)), dtype=int)
    return OutcomeDistribution(records=records.reshape(n_records, n - 1), probabilities=probs)


def _measure_chain(
    a: MPSTensor,
    n: int,
    basis: UnitaryErrorBasis,
    rng: np.random.Generator,
    boundary: Boundary,
) -> tuple[list[int], float, np.ndarray]:
    """Sample bond outcomes bond by bond; returns record, its probability and the post-state."""
    if n < 2:
        raise DomainError(f"need at least 2 sites, got {n}")
    if basis.dim != a.chi:
        raise ShapeError(f"basis dimension {basis.dim} does not match bond dimension {a.chi}")
    chi = a.chi
    check_cap(chi**4 * a.d**n, f"{n}-site protocol")
    site = _site_vector(a)
    inserts = basis.stack / np.sqrt(chi)
    state = site
    record: list[int] = []
    probability = 1.0

    def pick(branches: np.ndarray) -> np.ndarray:
        nonlocal probability
        weights = np.array([np.vdot(b, b).real for b in branches])
        probs = weights / weights.sum()
        k = int(rng.choice(len(probs), p=probs))
        record.append(k)
        probability *= float(probs[k])
        return branches[k] / np.sqrt(weights[k])

    for _ in range(n - 1):
        branches = np.einsum("lPa,xab,bqr->xlPqr", state, inserts, site)
        state = pick(branches.reshape(len(inserts), chi, -1, chi))
    if boundary == "periodic":
        state = pick(np.einsum("bPa,xab->xP", state, inserts))
    return record, probability, state.reshape(-1)


def sample_outcomes(
    a: MPSTensor,
    n: int,
    basis: UnitaryErrorBasis,
    seed: int | np.random.SeedSequence,
    boundary: Boundary = "dangling",
) -> OutcomeRecord:
    record, probability, _ = _measure_chain(a, n, basis, np.random.default_rng(seed), boundary)
    return OutcomeRecord(bond_outcomes=record, probability=probability)


# ---------------------------------------------------------------------------
# Corrections
# ---------------------------------------------------------------------------


def _push(a: MPSTensor, v_left: np.ndarray, v_right: np.ndarray, site: int, bond: int) -> np.ndarray:
    try:
        return construct_correction_unitary(a, v_left, v_right)
    except NotCorrectable as exc:
        raise NotCorrectable(
            f"site {site}: outcome from bond {bond} does not push through ({exc})",
            residual=exc.residual,
            site=site,
            bond=bond,
        ) from exc


def derive_corrections(
    a: MPSTensor,
    basis: UnitaryErrorBasis,
    record: OutcomeRecord,
    boundary: Boundary = "dangling",
    direction: Direction = "right",
) -> CorrectionPlan:
    """Sweep the bond outcomes into per-site unitaries.

    On a Dangling chain the accumulated operator lands on the right ancilla
    (left ancilla for ``direction="left"``). On a ring it returns to the closing bond
    and is reported as the plan's residual.
    """
    outcomes = record.bond_outcomes
    v = basis.elements
    plan: dict[int, np.ndarray] = {}
    if boundary == "periodic":
        if direction != "right":
            raise DomainError("periodic sweeps run left to right")
        n = len(outcomes)
        w = v[outcomes[0]]
        for k in range(1, n):
            plan[k] = _push(a, w, w.conj().T, k, k - 1).conj().T
            w = w @ v[outcomes[k]]
        match = basis.classify(w)
        residual_class = UNCLASSIFIED if match is None else match[0]
        return CorrectionPlan(site_unitaries=plan, residual=w, residual_class=residual_class)

    n = len(outcomes) + 1
    if direction == "right":
        w = v[outcomes[0]]
        for k in range(1, n):
            plan[k] = _push(a, w, w.conj().T, k, k - 1).conj().T
            if k < n - 1:
                w = w @ v[outcomes[k]]
        return CorrectionPlan(site_unitaries=plan, boundary_unitaries={"right": w.conj()})

    w = v[outcomes[-1]]
    for k in range(n - 2, -1, -1):
        plan[k] = _push(a, w.conj().T, w, k, k).conj().T
        if k > 0:
            w = v[outcomes[k - 1]] @ w
    return CorrectionPlan(site_unitaries=plan, boundary_unitaries={"left": w.conj().T})


def apply_plan(state: np.ndarray, plan: CorrectionPlan, dims: tuple[int, ...], boundary: Boundary) -> np.ndarray:
    psi = np.asarray(state).reshape(dims)
    offset = 1 if boundary == "dangling" else 0
    for site, u in plan.site_unitaries.items():
        psi = apply_on_axis(psi, u, site + offset)
    for side, u in plan.boundary_unitaries.items():
        psi = apply_on_axis(psi, u, 0 if side == "left" else len(dims) - 1)
    return psi.reshape(-1)


# ---------------------------------------------------------------------------
# End to end
# ---------------------------------------------------------------------------


def run_protocol(
    a: MPSTensor,
    n: int,
    basis: UnitaryErrorBasis,
    trials: int,
    seed: int,
    boundary: Boundary = "dangling",
    direction: Direction = "right",
    workers: int | None = None,
) -> ProtocolReport:
    """Sample, correct and compare against the dense target, one trial per seed stream."""
    target = dense_state(UniformMPS(tensor=a, sites=n, boundary=boundary))
    children = np.random.SeedSequence(seed).spawn(trials)

    def one_trial(i: int) -> TrialResult:
        rng = np.random.default_rng(children[i])
        record, probability, post = _measure_chain(a, n, basis, rng, boundary)
        plan = derive_corrections(
            a, basis, OutcomeRecord(bond_outcomes=record, probability=probability), boundary, direction
        )
        corrected = apply_plan(post, plan, target.dims, boundary)
        return TrialResult(
            trial=i,
            record=tuple(record),
            probability=probability,
            fidelity=fidelity(target.vector, corrected),
            residual_class=plan.residual_class,
            correctable=plan.correctable,
        )

    if workers == 1:
        results = [one_trial(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_trial, range(trials)))

    report = ProtocolReport(
        name=a.name,
        sites=n,
        boundary=boundary,
        seed=seed,
        labels=[basis.label(k) for k in range(len(basis.elements))],
        trials=results,
    )
    logger.info(
        "%s: %d trials on %d sites, min fidelity %.12f, %d uncorrectable",
        a.name,
        trials,
        n,
        report.min_fidelity,
        report.uncorrectable,
    )
    return report
