"""Dense complex linear-algebra kernel.

Every array downstream is a complex128 ``numpy.ndarray`` (a CTensor). This module
owns the shared exception hierarchy, the dense-dimension cap, and the handful of
decompositions the protocol and diagnostics code needs.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Sequence

import numpy as np
import scipy.linalg
from scipy.stats import unitary_group

logger = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 2**24
MAX_DIM_ENV = "MPSPREP_MAX_DIM"

SVD_RTOL = 1e-12
HERMITIAN_TOL = 1e-10
DEGENERACY_TOL = 1e-9


class MpsprepError(Exception):
    pass


class DimensionError(MpsprepError):
    pass


class ShapeError(MpsprepError):
    pass


class PreconditionError(MpsprepError):
    pass


class ResourceError(MpsprepError):
    pass


class DomainError(MpsprepError):
    pass


class ConfigError(MpsprepError):
    pass


# ---------------------------------------------------------------------------
# Construction and caps
# ---------------------------------------------------------------------------


def dense_cap() -> int:
    """Largest number of stored values any dense array may have."""
    raw = os.environ.get(MAX_DIM_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_MAX_DIM
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"{MAX_DIM_ENV} must be an integer, got {raw!r}") from None
    if cap <= 0:
        raise ConfigError(f"{MAX_DIM_ENV} must be positive, got {cap}")
    return cap


def check_cap(size: int, what: str) -> None:
    cap = dense_cap()
    if size > cap:
        raise ResourceError(f"{what} needs {size} values, cap is {cap}")


def ctensor(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Validate and copy ``data`` into a complex128 CTensor."""
    arr = np.array(data, dtype=np.complex128)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != arr.size:
            raise ShapeError(f"{arr.size} values cannot fill shape {shape}")
        arr = arr.reshape(shape)
    if any(s <= 0 for s in arr.shape):
        raise ShapeError(f"extents must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("tensor has non-finite entries")
    check_cap(arr.size, "tensor")
    return arr


def _require_rank2(m: np.ndarray, op: str) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ShapeError(f"{op} needs a rank-2 tensor, got rank {m.ndim}")
    return m


# ---------------------------------------------------------------------------
# Kernel operations
# ---------------------------------------------------------------------------


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Contract ``a`` and ``b`` over the listed axis pairs.

    Remaining axes keep their order, those of ``a`` first.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = [ia for ia, _ in pairs]
    axes_b = [ib for _, ib in pairs]
    for ia, ib in pairs:
        if not (-a.ndim <= ia < a.ndim and -b.ndim <= ib < b.ndim):
            raise DimensionError(f"axis pair ({ia}, {ib}) out of range")
        if a.shape[ia] != b.shape[ib]:
            raise DimensionError(
                f"axis pair ({ia}, {ib}) has extents {a.shape[ia]} and {b.shape[ib]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD with singular values in descending order."""
    m = _require_rank2(m, "svd")
    try:
        return scipy.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        logger.debug("gesdd failed on %s input, retrying with gesvd", m.shape)
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def pinv(m: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudoinverse with a relative singular-value cutoff."""
    m = _require_rank2(m, "pinv")
    u, s, vh = svd(m)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]), dtype=np.complex128)
    keep = s > SVD_RTOL * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vh.conj().T * s_inv) @ u.conj().T


def eig_hermitian(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, values ascending."""
    m = _require_rank2(m, "eig_hermitian")
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"eig_hermitian needs a square matrix, got {m.shape}")
    residual = float(np.linalg.norm(m - m.conj().T))
    if residual >= HERMITIAN_TOL * max(1.0, float(np.linalg.norm(m))):
        raise PreconditionError(f"matrix is not Hermitian (residual {residual:.3e})")
    return scipy.linalg.eigh(0.5 * (m + m.conj().T))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_rank2(a, "kron")
    _require_rank2(b, "kron")
    return np.kron(a, b)


def degenerate_blocks(values: np.ndarray, tol: float = DEGENERACY_TOL) -> list[list[int]]:
    """Group ascending eigenvalues whose neighbouring gaps are below ``tol``."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    scale = max(1.0, float(np.max(np.abs(values))))
    blocks = [[0]]
    for i in range(1, values.size):
        if values[i] - values[i - 1] < tol * scale:
            blocks[-1].append(i)
        else:
            blocks.append([i])
    return blocks


# ---------------------------------------------------------------------------
# Small helpers shared by the protocol and diagnostics code
# ---------------------------------------------------------------------------


def unitarity_residual(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1])))


def nearest_unitary(m: np.ndarray) -> np.ndarray:
    u, _ = scipy.linalg.polar(m)
    return u


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1), dtype=np.complex128)
    return np.asarray(unitary_group.rvs(n, random_state=rng), dtype=np.complex128)


def phase_fixed(m: np.ndarray) -> np.ndarray:
    """Rescale by a global phase so the largest-magnitude entry is real positive."""
    flat = m.reshape(-1)
    k = int(np.argmax(np.abs(flat)))
    if abs(flat[k]) == 0.0:
        return m
    return m * (abs(flat[k]) / flat[k])


def proportionality(a: np.ndarray, b: np.ndarray) -> tuple[complex, float]:
    """Best ``c`` with ``a ~ c b`` and the residual ``||a - c b||``."""
    denom = np.vdot(b, b)
    if abs(denom) == 0.0:
        return 0j, float(np.linalg.norm(a))
    c = complex(np.vdot(b, a) / denom)
    return c, float(np.linalg.norm(a - c * b))


def fidelity(psi: np.ndarray, phi: np.ndarray) -> float:
    """Phase-insensitive overlap ``|<psi|phi>|^2`` of the normalized vectors."""
    psi = np.asarray(psi).reshape(-1)
    phi = np.asarray(phi).reshape(-1)
    n1 = np.linalg.norm(psi)
    n2 = np.linalg.norm(phi)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    return float(abs(np.vdot(psi, phi)) ** 2 / (n1 * n2) ** 2)


def apply_on_axis(state: np.ndarray, op: np.ndarray, axis: int) -> np.ndarray:
    """Apply a single-qudit operator to one axis of a shaped state."""
    out = np.tensordot(op, state, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)
