"""Unitary error bases, nice error bases, and their Choi (Bell) measurement bases.

A basis is validated when it is constructed: unitarity, trace-orthogonality, the
identity in slot 0 and, when group metadata is attached, the group-like product
rule ``V_g V_h = w(g, h) V_{gh}``.

Example:
    from mpsprep.bases import choi_vectors, clock_basis

    basis = clock_basis(3)
    choi = choi_vectors(basis)
    assert choi.vectors.shape == (9, 9)
"""

from __future__ import annotations

import itertools
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .linalg import DomainError, MpsprepError, ctensor, proportionality

logger = logging.getLogger(__name__)

BASIS_TOL = 1e-10

IDENTITY = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULIS = (IDENTITY, PAULI_X, PAULI_Y, PAULI_Z)
PAULI_LABELS = ("I", "X", "Y", "Z")


class BasisValidationError(MpsprepError):
    pass


class GroupData(BaseModel):
    """Index group of a nice error basis: labels, multiplication table, cocycle."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    labels: list[str]
    table: list[list[int]]
    cocycle: np.ndarray

    @property
    def order(self) -> int:
        return len(self.labels)

    def inverse(self, g: int) -> int:
        return self.table[g].index(0)

    def conjugacy_classes(self) -> list[list[int]]:
        seen: set[int] = set()
        classes: list[list[int]] = []
        for g in range(self.order):
            if g in seen:
                continue
            members = sorted({self.table[self.table[h][g]][self.inverse(h)] for h in range(self.order)})
            seen.update(members)
            classes.append(members)
        return classes


class UnitaryErrorBasis(BaseModel):
    """chi^2 trace-orthogonal chi x chi unitaries with V_0 = identity."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int
    elements: list[np.ndarray]
    labels: list[str] | None = None
    group: GroupData | None = None
    name: str = "custom"

    @field_validator("elements", mode="before")
    @classmethod
    def _coerce_elements(cls, value):
        return [ctensor(v) for v in value]

    @model_validator(mode="after")
    def _validate(self) -> UnitaryErrorBasis:
        chi = self.dim
        if chi < 1:
            raise BasisValidationError(f"bond dimension must be positive, got {chi}")
        if len(self.elements) != chi * chi:
            raise BasisValidationError(f"need {chi * chi} elements, got {len(self.elements)}")
        if self.labels is not None and len(self.labels) != chi * chi:
            raise BasisValidationError("one label per element required")
        eye = np.eye(chi)
        for k, v in enumerate(self.elements):
            if v.shape != (chi, chi):
                raise BasisValidationError(f"element {k} has shape {v.shape}, want {(chi, chi)}")
            residual = float(np.linalg.norm(v.conj().T @ v - eye))
            if residual >= BASIS_TOL:
                raise BasisValidationError(f"element {k} is not unitary (residual {residual:.3e})")
        if np.linalg.norm(self.elements[0] - eye) >= BASIS_TOL:
            raise BasisValidationError("element 0 must be the identity")
        gram = np.einsum("aij,bij->ab", np.conj(self.stack), self.stack)
        off = gram - chi * np.eye(chi * chi)
        bad = np.argwhere(np.abs(off) >= BASIS_TOL)
        if bad.size:
            a, b = (int(x) for x in bad[0])
            raise BasisValidationError(
                f"pair ({a}, {b}) is not trace-orthogonal (|Tr V_a^+ V_b| = {abs(gram[a, b]):.3e})"
            )
        if self.group is not None:
            _validate_group(self)
        return self

    @property
    def stack(self) -> np.ndarray:
        """Elements as one (chi^2, chi, chi) array."""
        return np.stack(self.elements)

    def label(self, k: int) -> str:
        return self.labels[k] if self.labels is not None else str(k)

    def coefficients(self, op: np.ndarray) -> np.ndarray:
        """Expansion ``op = sum_k c_k V_k``."""
        return np.einsum("kij,ij->k", np.conj(self.stack), op) / self.dim

    def classify(self, op: np.ndarray, tol: float = 1e-8) -> tuple[int, complex] | None:
        """Index and phase ``c`` with ``op = c V_k``, or None if op is no multiple of one element."""
        coeffs = self.coefficients(op)
        k = int(np.argmax(np.abs(coeffs)))
        c, residual = proportionality(op, self.elements[k])
        if residual > tol * max(1.0, float(np.linalg.norm(op))):
            return None
        return k, c


def _validate_group(basis: UnitaryErrorBasis) -> None:
    group = basis.group
    n = basis.dim * basis.dim
    if group.order != n or len(group.table) != n or any(len(row) != n for row in group.table):
        raise BasisValidationError(f"group table must be {n} x {n}")
    if any(group.table[0][h] != h or group.table[h][0] != h for h in range(n)):
        raise BasisValidationError("group element 0 must be the identity")
    for g, h in itertools.product(range(n), repeat=2):
        w = group.cocycle[g, h]
        if abs(abs(w) - 1.0) >= BASIS_TOL:
            raise BasisValidationError(f"pair ({g}, {h}) has cocycle off the unit circle ({w})")
        lhs = basis.elements[g] @ basis.elements[h]
        rhs = w * basis.elements[group.table[g][h]]
        if np.linalg.norm(lhs - rhs) >= BASIS_TOL:
            raise BasisValidationError(f"pair ({g}, {h}) breaks V_g V_h = w(g, h) V_gh")


def _extract_cocycle(elements: list[np.ndarray], table: list[list[int]]) -> np.ndarray:
    n = len(elements)
    chi = elements[0].shape[0]
    cocycle = np.empty((n, n), dtype=np.complex128)
    for g, h in itertools.product(range(n), repeat=2):
        gh = table[g][h]
        cocycle[g, h] = np.trace(elements[gh].conj().T @ elements[g] @ elements[h]) / chi
    return cocycle


def _product_table(orders: tuple[int, int], labels: list[tuple[int, int]]) -> list[list[int]]:
    index = {lab: k for k, lab in enumerate(labels)}
    m, n = orders
    return [
        [index[((g[0] + h[0]) % m, (g[1] + h[1]) % n)] for h in labels]
        for g in labels
    ]


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def label_order(chi: int) -> list[tuple[int, int]]:
    """Order of the (a, b) labels used to flatten weights, spectra and bases.

    For chi = 2 the order follows (1, X, Y, Z); other bond dimensions are a-major.
    """
    if chi == 2:
        return [(0, 0), (1, 0), (1, 1), (0, 1)]
    return [(a, b) for a in range(chi) for b in range(chi)]


def clock_matrices(chi: int) -> tuple[np.ndarray, np.ndarray]:
    """Shift ``X`` and clock ``Z`` with ``X Z = w Z X``, ``w = exp(2 pi i / chi)``."""
    omega = np.exp(2j * np.pi / chi)
    x = np.roll(np.eye(chi, dtype=np.complex128), 1, axis=1)
    z = np.diag(omega ** np.arange(chi)).astype(np.complex128)
    return x, z


def pauli_basis() -> UnitaryErrorBasis:
    labels = label_order(2)
    table = _product_table((2, 2), labels)
    elements = [p.copy() for p in PAULIS]
    group = GroupData(
        labels=list(PAULI_LABELS), table=table, cocycle=_extract_cocycle(elements, table)
    )
    return UnitaryErrorBasis(
        dim=2, elements=elements, labels=list(PAULI_LABELS), group=group, name="pauli"
    )


def clock_basis(chi: int) -> UnitaryErrorBasis:
    if chi < 2:
        raise DomainError(f"clock basis needs chi >= 2, got {chi}")
    x, z = clock_matrices(chi)
    labels = label_order(chi)
    elements = [
        np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b) for a, b in labels
    ]
    names = [f"X^{a}Z^{b}" for a, b in labels]
    table = _product_table((chi, chi), labels)
    group = GroupData(labels=names, table=table, cocycle=_extract_cocycle(elements, table))
    return UnitaryErrorBasis(
        dim=chi, elements=elements, labels=names, group=group, name=f"clock{chi}"
    )


def from_projective_rep(
    table: list[list[int]],
    rep: list[np.ndarray],
    labels: list[str] | None = None,
    name: str = "projective",
) -> UnitaryErrorBasis:
    """Build a nice error basis from a projective representation of a group of order chi^2.

    Element 0 of ``table`` must be the group identity and ``rep[0]`` the identity matrix.
    """
    elements = [ctensor(v) for v in rep]
    n = len(elements)
    chi = elements[0].shape[0]
    if chi * chi != n:
        raise BasisValidationError(f"group of order {n} cannot index a chi={chi} basis")
    if len(table) != n or any(len(row) != n for row in table):
        raise BasisValidationError(f"group table must be {n} x {n}")
    names = labels if labels is not None else [f"g{k}" for k in range(n)]
    table = [[int(x) for x in row] for row in table]
    group = GroupData(labels=list(names), table=table, cocycle=_extract_cocycle(elements, table))
    return UnitaryErrorBasis(dim=chi, elements=elements, labels=list(names), group=group, name=name)


def quaternion_transversal_basis() -> UnitaryErrorBasis:
    """chi = 2 nice error basis from the quaternion group's two-dimensional irrep.

    The representatives ``1, i, j, k`` of the cosets of the centre ``{+1, -1}`` map to
    ``1, -iX, -iY, -iZ``; the index group is the quotient, a Klein four-group.
    """
    rep = [IDENTITY, -1j * PAULI_X, -1j * PAULI_Y, -1j * PAULI_Z]
    table: list[list[int]] = []
    for g in rep:
        row = []
        for h in rep:
            product = g @ h
            row.append(
                next(k for k, v in enumerate(rep) if proportionality(product, v)[1] < BASIS_TOL)
            )
        table.append(row)
    return from_projective_rep(table, rep, labels=["1", "i", "j", "k"], name="quaternion")


def conjugate_basis(basis: UnitaryErrorBasis) -> UnitaryErrorBasis:
    """Entrywise complex conjugate basis; the cocycle is conjugated with it."""
    group = None
    if basis.group is not None:
        group = GroupData(
            labels=basis.group.labels,
            table=basis.group.table,
            cocycle=np.conj(basis.group.cocycle),
        )
    return UnitaryErrorBasis(
        dim=basis.dim,
        elements=[np.conj(v) for v in basis.elements],
        labels=basis.labels,
        group=group,
        name=f"conj({basis.name})",
    )


# ---------------------------------------------------------------------------
# Choi vectors and derived checks
# ---------------------------------------------------------------------------


class ChoiBasis(BaseModel):
    """chi^2 orthonormal maximally entangled vectors, row k for basis element k."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int
    vectors: np.ndarray

    @model_validator(mode="after")
    def _validate(self) -> ChoiBasis:
        chi = self.dim
        if self.vectors.shape != (chi * chi, chi * chi):
            raise BasisValidationError(f"Choi vectors must be {chi * chi} x {chi * chi}")
        gram = self.vectors.conj() @ self.vectors.T
        if np.linalg.norm(gram - np.eye(chi * chi)) >= BASIS_TOL:
            raise BasisValidationError("Choi vectors are not orthonormal")
        for k, vec in enumerate(self.vectors):
            s = np.linalg.svd(vec.reshape(chi, chi), compute_uv=False)
            if np.max(np.abs(s - 1.0 / np.sqrt(chi))) >= BASIS_TOL:
                raise BasisValidationError(f"Choi vector {k} is not maximally entangled")
        return self

    def as_matrix(self, k: int) -> np.ndarray:
        """Read vector k back as the chi x chi operator it encodes."""
        return self.vectors[k].reshape(self.dim, self.dim) * np.sqrt(self.dim)


def choi_vectors(basis: UnitaryErrorBasis) -> ChoiBasis:
    chi = basis.dim
    vectors = basis.stack.reshape(chi * chi, chi * chi) / np.sqrt(chi)
    return ChoiBasis(dim=chi, vectors=vectors)


def superoperator_matrix(basis: UnitaryErrorBasis) -> np.ndarray:
    """Matrix whose columns are the flattened ``V_k / sqrt(chi)``; unitary for any valid basis."""
    chi = basis.dim
    return basis.stack.reshape(chi * chi, chi * chi).T / np.sqrt(chi)


def cocycle_associativity_residual(basis: UnitaryErrorBasis) -> float:
    """Largest ``|w(g,h) w(gh,k) - w(h,k) w(g,hk)|`` over all triples."""
    if basis.group is None:
        raise BasisValidationError(f"basis {basis.name!r} carries no group data")
    t = basis.group.table
    w = basis.group.cocycle
    n = basis.group.order
    worst = 0.0
    for g, h, k in itertools.product(range(n), repeat=3):
        lhs = w[g, h] * w[t[g][h], k]
        rhs = w[h, k] * w[g, t[h][k]]
        worst = max(worst, abs(lhs - rhs))
    return worst


def aligned_residual(found: UnitaryErrorBasis, reference: UnitaryErrorBasis) -> float:
    """Worst per-element distance of ``found`` to ``reference`` after phase alignment.

    Elements are matched as sets, so order and phases may differ.
    """
    if found.dim != reference.dim:
        return float("inf")
    worst = 0.0
    for v in found.elements:
        best = min(proportionality(v, r)[1] for r in reference.elements)
        worst = max(worst, best)
    return worst
