"""Uniform matrix product states: tensors, transfer matrices, dense oracles, condition checks.

Conventions fixed here and used everywhere else:
    * an MPS tensor is stored as ``A[p, l, r]`` (physical, left, right);
    * the transfer matrix is ``E = sum_p A^p (x) conj(A^p)`` with rows indexed by
      ``(l, l_bar)``, so ``E @ vec(M) = vec(sum_p A^p M A^p^+)`` for row-major ``vec``;
    * a Dangling chain lists its qudits as ``(left ancilla, sites..., right ancilla)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .bases import UnitaryErrorBasis, label_order
from .linalg import DomainError, ShapeError, check_cap, ctensor, eig_hermitian, svd

logger = logging.getLogger(__name__)

Boundary = Literal["periodic", "dangling"]

WEIGHT_TOL = 1e-12
INVARIANCE_TOL = 1e-10


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


class MPSTensor(BaseModel):
    """Local tensor ``A[p, l, r]``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    name: str = "custom"

    @field_validator("data", mode="before")
    @classmethod
    def _coerce(cls, value):
        arr = ctensor(value)
        if arr.ndim != 3:
            raise ShapeError(f"MPS tensor must have rank 3 (p, l, r), got rank {arr.ndim}")
        arr.setflags(write=False)
        return arr

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def chi_left(self) -> int:
        return self.data.shape[1]

    @property
    def chi_right(self) -> int:
        return self.data.shape[2]

    @property
    def chi(self) -> int:
        if self.chi_left != self.chi_right:
            raise ShapeError(f"bond dimensions differ: {self.chi_left} vs {self.chi_right}")
        return self.chi_left

    def matrix(self, p: int) -> np.ndarray:
        return self.data[p]

    def physical_map(self) -> np.ndarray:
        """The tensor as a d x (chi_l chi_r) map from the joined virtual space."""
        return self.data.reshape(self.d, -1)

    def conjugated(self, v_left: np.ndarray, v_right: np.ndarray) -> MPSTensor:
        """``v_left A^p v_right`` for every p."""
        return MPSTensor(data=np.einsum("ij,pjk,kl->pil", v_left, self.data, v_right), name=self.name)

    def with_physical(self, u: np.ndarray) -> MPSTensor:
        """``(U o A)^p = sum_q U_pq A^q``."""
        return MPSTensor(data=np.tensordot(u, self.data, axes=([1], [0])), name=self.name)


class UniformMPS(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    tensor: MPSTensor
    sites: int = Field(ge=1)
    boundary: Boundary = "periodic"

    @model_validator(mode="after")
    def _square(self) -> UniformMPS:
        _ = self.tensor.chi
        return self

    @property
    def dims(self) -> tuple[int, ...]:
        chi, d = self.tensor.chi, self.tensor.d
        if self.boundary == "dangling":
            return (chi,) + (d,) * self.sites + (chi,)
        return (d,) * self.sites


class SimplexWeights(BaseModel):
    """Non-negative weights ``lambda[a, b]`` summing to one."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    chi: int = Field(ge=2)
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _coerce(cls, value):
        return np.array(value, dtype=float)

    @model_validator(mode="after")
    def _validate(self) -> SimplexWeights:
        if self.values.shape != (self.chi, self.chi):
            raise ShapeError(f"weights must be {self.chi} x {self.chi}, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("weights must be finite")
        if np.min(self.values) < -WEIGHT_TOL:
            raise DomainError(f"weights must be non-negative, min is {np.min(self.values):.3e}")
        total = float(np.sum(self.values))
        if abs(total - 1.0) > WEIGHT_TOL:
            raise DomainError(f"weights must sum to 1, got {total!r}")
        return self

    @classmethod
    def from_flat(cls, values, chi: int = 2, renormalize: bool = False) -> SimplexWeights:
        """Build from values listed in ``label_order(chi)``."""
        flat = np.array(values, dtype=float).reshape(-1)
        if flat.size != chi * chi:
            raise ShapeError(f"need {chi * chi} weights for chi={chi}, got {flat.size}")
        if renormalize:
            if np.min(flat) < 0 or np.sum(flat) <= 0:
                raise DomainError("weights must be non-negative with a positive sum")
            flat = flat / np.sum(flat)
        grid = np.zeros((chi, chi))
        for value, (a, b) in zip(flat, label_order(chi)):
            grid[a, b] = value
        return cls(chi=chi, values=grid)

    def flat(self) -> np.ndarray:
        return np.array([self.values[a, b] for a, b in label_order(self.chi)])


class TransferMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    chi: int
    matrix: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues sorted by decreasing modulus."""
        vals = np.linalg.eigvals(self.matrix)
        return vals[np.argsort(-np.abs(vals), kind="stable")]

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.matrix))))

    def conjugated(self, v_left: np.ndarray, v_right: np.ndarray) -> np.ndarray:
        """Transfer matrix of ``v_left A v_right``."""
        return np.kron(v_left, v_left.conj()) @ self.matrix @ np.kron(v_right, v_right.conj())

    def invariance_residual(self, v: np.ndarray) -> float:
        """``||(V (x) conj V) E (V^+ (x) V^T) - E||``."""
        return float(np.linalg.norm(self.conjugated(v, v.conj().T) - self.matrix))


@dataclass
class DenseState:
    """Normalized contraction of a finite chain."""

    vector: np.ndarray
    norm: float
    dims: tuple[int, ...]

    def shaped(self) -> np.ndarray:
        return self.vector.reshape(self.dims)


@dataclass
class ElementCheck:
    index: int
    label: str
    invariance_residual: float
    unitary: np.ndarray | None = None
    push_residual: float | None = None


@dataclass
class ConditionReport:
    """Push-through and symmetry check of a tensor against a basis."""

    checks: list[ElementCheck] = field(default_factory=list)

    @property
    def max_invariance_residual(self) -> float:
        return max((c.invariance_residual for c in self.checks), default=0.0)

    @property
    def max_push_residual(self) -> float:
        return max((c.push_residual for c in self.checks if c.push_residual is not None), default=0.0)

    @property
    def satisfied(self) -> bool:
        return all(
            c.invariance_residual < INVARIANCE_TOL and c.unitary is not None for c in self.checks
        )


# ---------------------------------------------------------------------------
# Transfer matrix and dense contraction
# ---------------------------------------------------------------------------


def transfer_matrix(a: MPSTensor) -> TransferMatrix:
    if a.chi_left != a.chi_right:
        raise ShapeError(f"transfer matrix needs equal bonds, got {a.chi_left} and {a.chi_right}")
    mat = sum(np.kron(a.data[p], a.data[p].conj()) for p in range(a.d))
    return TransferMatrix(chi=a.chi, matrix=np.asarray(mat, dtype=np.complex128))


def blocked_tensor(a: MPSTensor, k: int) -> MPSTensor:
    """Tensor of ``k`` consecutive sites with the physical legs fused."""
    if k < 1:
        raise DomainError(f"block size must be >= 1, got {k}")
    check_cap(a.d**k * a.chi_left * a.chi_right, f"{k}-site block")
    out = a.data
    for _ in range(k - 1):
        out = np.einsum("Pij,pjk->Ppik", out, a.data).reshape(-1, a.chi_left, a.chi_right)
    return MPSTensor(data=out, name=f"{a.name}^{k}")


def _open_chain(a: MPSTensor, n: int) -> np.ndarray:
    """``(A^{p1} ... A^{pn})_{lr}`` as an array ``[l, P, r]``."""
    chi = a.chi
    site = a.data.transpose(1, 0, 2)
    out = site
    for _ in range(n - 1):
        out = np.tensordot(out, site, axes=([2], [0])).reshape(chi, -1, chi)
    return out


def dense_state(s: UniformMPS) -> DenseState:
    a = s.tensor
    size = a.chi**2 * a.d**s.sites
    check_cap(size, f"{s.sites}-site dense state")
    chain = _open_chain(a, s.sites)
    if s.boundary == "periodic":
        vec = np.trace(chain, axis1=0, axis2=2)
    else:
        vec = chain.reshape(-1)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DomainError(f"{s.boundary} chain of {s.sites} sites contracts to zero")
    return DenseState(vector=vec / norm, norm=norm, dims=s.dims)


def entanglement_data(s: UniformMPS, cut: int | tuple[str, int]) -> np.ndarray:
    """Entanglement spectrum, descending.

    ``cut`` is a bond index ``k`` (or ``("bond", k)``), splitting the chain after site
    ``k``; or ``("site", j)`` for the spectrum of site j's reduced density matrix.
    On a Dangling chain a bond cut crosses one virtual bond and returns ``chi`` values,
    (1/2, 1/2) for the interior tetrahedron points. On a ring the same cut crosses two
    bonds, so it returns ``chi^2`` values that approach the product of two single-bond
    spectra (1/4 each for those points) as the ring grows.
    """
    mode, k = ("bond", cut) if isinstance(cut, int) else cut
    state = dense_state(s)
    dims = state.dims
    offset = 1 if s.boundary == "dangling" else 0
    if mode == "site":
        if not 0 <= k < s.sites:
            raise DomainError(f"site {k} outside a chain of {s.sites}")
        axis = k + offset
        psi = np.moveaxis(state.shaped(), axis, 0).reshape(dims[axis], -1)
        rho = psi @ psi.conj().T
        values, _ = eig_hermitian(rho)
        return np.clip(values[::-1].real, 0.0, None)
    if mode != "bond":
        raise DomainError(f"unknown cut mode {mode!r}")
    if not 1 <= k < s.sites:
        raise DomainError(f"bond {k} outside a chain of {s.sites}")
    left = int(np.prod(dims[: k + offset]))
    _, sv, _ = svd(state.vector.reshape(left, -1))
    rank = s.tensor.chi if s.boundary == "dangling" else s.tensor.chi**2
    spectrum = np.zeros(rank)
    n = min(rank, sv.size)
    spectrum[:n] = sv[:n] ** 2
    return spectrum


def random_tensor(d: int, chi: int, rng: np.random.Generator, name: str = "random") -> MPSTensor:
    """Gaussian random tensor scaled so its transfer matrix has spectral radius one."""
    data = rng.normal(size=(d, chi, chi)) + 1j * rng.normal(size=(d, chi, chi))
    radius = transfer_matrix(MPSTensor(data=data)).spectral_radius()
    return MPSTensor(data=data / np.sqrt(radius), name=name)


# ---------------------------------------------------------------------------
# Condition checks
# ---------------------------------------------------------------------------


def check_conditions(a: MPSTensor, basis: UnitaryErrorBasis) -> ConditionReport:
    """Symmetry residual of the transfer matrix under each basis element, plus its physical unitary."""
    from .protocol import NotCorrectable, construct_correction_unitary, push_residual

    if basis.dim != a.chi:
        raise ShapeError(f"basis dimension {basis.dim} does not match bond dimension {a.chi}")
    transfer = transfer_matrix(a)
    report = ConditionReport()
    for k, v in enumerate(basis.elements):
        check = ElementCheck(
            index=k, label=basis.label(k), invariance_residual=transfer.invariance_residual(v)
        )
        if check.invariance_residual < INVARIANCE_TOL:
            try:
                u = construct_correction_unitary(a, v, v.conj().T)
            except NotCorrectable:
                pass
            else:
                check.unitary = u
                check.push_residual = push_residual(a, u, v, v.conj().T)
        logger.debug("element %s: invariance residual %.3e", check.label, check.invariance_residual)
        report.checks.append(check)
    return report
