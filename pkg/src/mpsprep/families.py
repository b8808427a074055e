"""Preparable MPS families: the chi=2 tetrahedron, clock and nice-basis families.

Weights and transfer spectra are both indexed by clock labels ``(a, b)``; the
eigenvalue ``mu[a, b]`` belongs to the eigenoperator ``X^a Z^b`` and

    mu[a, b]   = sum_cd lambda[c, d] w^-(ad - bc)
    lambda[c, d] = (1 / chi^2) sum_ab mu[a, b] w^(ad - bc),   w = exp(2 pi i / chi).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping

import numpy as np
import scipy.linalg

from .bases import (
    PAULIS,
    UnitaryErrorBasis,
    clock_basis,
    clock_matrices,
    from_projective_rep,
    label_order,
    pauli_basis,
)
from .linalg import DomainError, MpsprepError, PreconditionError, ctensor, random_unitary
from .mps import MPSTensor, SimplexWeights, UniformMPS, entanglement_data

logger = logging.getLogger(__name__)

SPECTRUM_TOL = 1e-10
REALITY_TOL = 1e-10


class InfeasibleSpectrumError(MpsprepError):
    def __init__(self, message: str, weights: np.ndarray | None = None):
        super().__init__(message)
        self.weights = weights


NAMED_POINTS: dict[str, tuple[float, float, float, float]] = {
    "trivial": (1.0, 0.0, 0.0, 0.0),
    "cluster": (0.25, 0.25, 0.25, 0.25),
    "aklt": (0.0, 1 / 3, 1 / 3, 1 / 3),
    "ghz": (0.5, 0.0, 0.0, 0.5),
    "neel": (0.0, 0.5, 0.5, 0.0),
}

TRAJECTORIES = ("deformedCluster", "clusterToGHZ", "deformedAKLT")


# ---------------------------------------------------------------------------
# Tensors
# ---------------------------------------------------------------------------


def tetrahedron_tensor(w: SimplexWeights) -> MPSTensor:
    """``A^i = sqrt(lambda_i) sigma^i`` with physical index i over (1, X, Y, Z)."""
    if w.chi != 2:
        raise DomainError(f"tetrahedron family needs chi = 2, got {w.chi}")
    data = np.stack([math.sqrt(lam) * s for lam, s in zip(w.flat(), PAULIS)])
    return MPSTensor(data=data, name="tetrahedron")


def clock_tensor(w: SimplexWeights) -> MPSTensor:
    """``A^(a,b) = sqrt(lambda_ab) X^a Z^b`` on a chi^2-level physical qudit."""
    x, z = clock_matrices(w.chi)
    data = np.stack(
        [
            math.sqrt(w.values[a, b])
            * np.linalg.matrix_power(x, a)
            @ np.linalg.matrix_power(z, b)
            for a, b in label_order(w.chi)
        ]
    )
    return MPSTensor(data=data, name=f"clock{w.chi}")


def nice_basis_tensor(basis: UnitaryErrorBasis, class_weights: Mapping[str, float]) -> MPSTensor:
    """``A^g = sqrt(lambda_C / |C|) V_g`` with C the conjugacy class of g in the index group.

    ``class_weights`` is keyed by the label of each class's first member.
    """
    if basis.group is None:
        raise PreconditionError(f"basis {basis.name!r} carries no group data")
    classes = basis.group.conjugacy_classes()
    keys = [basis.group.labels[c[0]] for c in classes]
    unknown = set(class_weights) - set(keys)
    if unknown:
        raise DomainError(f"unknown conjugacy classes {sorted(unknown)}; classes are {keys}")
    weights = np.array([float(class_weights.get(k, 0.0)) for k in keys])
    if np.min(weights) < 0 or abs(weights.sum() - 1.0) > 1e-12:
        raise DomainError("class weights must be non-negative and sum to 1")
    data = np.zeros((basis.group.order, basis.dim, basis.dim), dtype=np.complex128)
    for members, lam in zip(classes, weights):
        for g in members:
            data[g] = math.sqrt(lam / len(members)) * basis.elements[g]
    return MPSTensor(data=data, name=f"nice({basis.name})")


# ---------------------------------------------------------------------------
# Spectrum <-> weights
# ---------------------------------------------------------------------------


def _phase_matrix(chi: int) -> np.ndarray:
    """``F[(a,b), (c,d)] = w^-(ad - bc)`` over a-major labels."""
    idx = np.arange(chi)
    a = idx[:, None, None, None]
    b = idx[None, :, None, None]
    c = idx[None, None, :, None]
    d = idx[None, None, None, :]
    exponent = (a * d - b * c) % chi
    return np.exp(-2j * np.pi * exponent / chi).reshape(chi * chi, chi * chi)


def _as_grid(values, chi: int, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.shape == (chi, chi):
        return arr
    flat = arr.reshape(-1)
    if flat.size != chi * chi:
        raise DomainError(f"need {chi * chi} values for chi={chi}, got {flat.size}")
    grid = np.zeros((chi, chi), dtype=dtype)
    for value, (a, b) in zip(flat, label_order(chi)):
        grid[a, b] = value
    return grid


def flatten_labels(grid: np.ndarray) -> np.ndarray:
    """List a (chi, chi) array in ``label_order``."""
    return np.array([grid[a, b] for a, b in label_order(grid.shape[0])])


def weights_to_spectrum(w: SimplexWeights) -> np.ndarray:
    """Transfer eigenvalues ``mu[a, b]`` as a complex (chi, chi) array."""
    chi = w.chi
    return (_phase_matrix(chi) @ w.values.reshape(-1)).reshape(chi, chi)


def spectrum_to_weights(mu, chi: int = 2) -> SimplexWeights:
    """Invert :func:`weights_to_spectrum`; ``mu`` is a (chi, chi) grid or listed in label order."""
    grid = _as_grid(mu, chi, np.complex128)
    if abs(grid[0, 0] - 1.0) > SPECTRUM_TOL:
        raise InfeasibleSpectrumError(f"leading eigenvalue must be 1, got {grid[0, 0]}")
    lam = (_phase_matrix(chi).conj().T @ grid.reshape(-1)).reshape(chi, chi) / chi**2
    if np.max(np.abs(lam.imag)) > REALITY_TOL:
        raise InfeasibleSpectrumError(
            f"weights have imaginary parts up to {np.max(np.abs(lam.imag)):.3e}", lam
        )
    lam = lam.real
    worst = float(np.min(lam))
    if worst < -SPECTRUM_TOL:
        a, b = np.unravel_index(int(np.argmin(lam)), lam.shape)
        raise InfeasibleSpectrumError(
            f"weight lambda[{a},{b}] = {worst:.6g} is negative", lam
        )
    lam = np.clip(lam, 0.0, None)
    return SimplexWeights(chi=chi, values=lam / lam.sum())


def correlation_length(mu: complex) -> float:
    r = abs(mu)
    if r > 1.0 + 1e-10:
        raise DomainError(f"|mu| = {r:.6g} exceeds 1")
    if r == 0.0:
        return 0.0
    if r >= 1.0 - 1e-12:
        return math.inf
    return 1.0 / abs(math.log(r))


def correlation_lengths(mu) -> np.ndarray:
    """``xi = 1/|ln|mu||`` for every subleading eigenvalue, in label order."""
    values = np.asarray(mu, dtype=np.complex128)
    flat = flatten_labels(values)[1:] if values.ndim == 2 else values.reshape(-1)
    return np.array([correlation_length(m) for m in flat])


# ---------------------------------------------------------------------------
# Phase diagram
# ---------------------------------------------------------------------------


def phase_diagram_point(name: str, beta: float | None = None) -> SimplexWeights:
    """Named tetrahedron points and the three deformation trajectories."""
    if name in NAMED_POINTS:
        return SimplexWeights.from_flat(NAMED_POINTS[name])
    if name not in TRAJECTORIES:
        raise DomainError(
            f"unknown point {name!r}; expected one of {sorted(NAMED_POINTS) + list(TRAJECTORIES)}"
        )
    if beta is None or not math.isfinite(beta):
        raise DomainError(f"trajectory {name!r} needs a finite beta")
    # log-domain weights keep large beta finite
    match name:
        case "deformedCluster":
            logs = np.array([4 * beta, 0.0, 0.0, -4 * beta])
        case "clusterToGHZ":
            logs = np.array([2 * beta, -2 * beta, 2 * beta, -2 * beta])
        case _:
            logs = np.array([-np.inf, 2 * beta, 2 * beta, 0.0])
    weights = np.exp(logs - np.max(logs))
    return SimplexWeights.from_flat(weights / weights.sum())


def canonicalize_weights(w: SimplexWeights) -> tuple[SimplexWeights, tuple[int, int, int]]:
    """Apply the permutation gauge so that ``lambda_x >= lambda_y >= lambda_z``.

    Returns the new weights and the permutation of (X, Y, Z) slots used.
    """
    if w.chi != 2:
        raise DomainError("canonicalization is defined for chi = 2")
    flat = w.flat()
    order = tuple(int(i) for i in np.argsort(-flat[1:], kind="stable"))
    canon = np.concatenate([[flat[0]], flat[1:][list(order)]])
    return SimplexWeights.from_flat(canon), order


def trajectory_sweep(name: str, betas, sites: int = 6) -> list[dict[str, float]]:
    """Rows ``beta, lambda_1..4, mu_2..4, xi_max, schmidt_1, schmidt_2`` along a trajectory."""
    rows = []
    for beta in betas:
        w = phase_diagram_point(name, float(beta))
        mu = flatten_labels(weights_to_spectrum(w)).real
        xi = correlation_lengths(weights_to_spectrum(w))
        chain = UniformMPS(tensor=tetrahedron_tensor(w), sites=sites, boundary="dangling")
        schmidt = entanglement_data(chain, sites // 2)
        row = {"beta": float(beta)}
        row.update({f"lambda_{k + 1}": float(v) for k, v in enumerate(w.flat())})
        row.update({f"mu_{k + 2}": float(v) for k, v in enumerate(mu[1:])})
        row["xi_max"] = float(np.max(xi))
        row["schmidt_1"] = float(schmidt[0])
        row["schmidt_2"] = float(schmidt[1])
        rows.append(row)
    return rows


def ghz_cat_state(n: int, labels: tuple[int, int] = (0, 3), d: int = 4) -> np.ndarray:
    """``(|++...> + |--...>)/sqrt 2`` with ``|+-> = (|l0> +- |l1>)/sqrt 2`` on each qudit."""
    plus = np.zeros(d, dtype=np.complex128)
    minus = np.zeros(d, dtype=np.complex128)
    plus[list(labels)] = 1 / math.sqrt(2)
    minus[labels[0]], minus[labels[1]] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    up, down = plus, minus
    for _ in range(n - 1):
        up = np.kron(up, plus)
        down = np.kron(down, minus)
    return (up + down) / math.sqrt(2)


# ---------------------------------------------------------------------------
# Deformed AKLT
# ---------------------------------------------------------------------------


def aklt_deformed_tensor(m) -> tuple[MPSTensor, UnitaryErrorBasis]:
    """AKLT tensor ``sigma^i / sqrt 3`` deformed on its physical leg by ``m``, plus its push basis.

    The spin-1 leg sits in slots 1..3 of a d=4 qudit (slot 0 stays empty). The
    basis is ``{1, n_1.sigma, n_2.sigma, n_3.sigma}`` for the orthonormal
    eigenframe ``n_a`` of ``m^+ m``, which must be real for the frame to exist.
    """
    m = ctensor(m)
    if m.shape != (3, 3):
        raise DomainError(f"deformation must be 3 x 3, got {m.shape}")
    if abs(np.linalg.det(m)) <= 1e-12:
        raise DomainError("deformation matrix is singular")
    gram = m.conj().T @ m
    if np.linalg.norm(gram.imag) > 1e-10 * np.linalg.norm(gram):
        raise DomainError("m^+ m must be real for a chi = 2 push basis to exist")
    _, frame = scipy.linalg.eigh(gram.real)
    if np.linalg.det(frame) < 0:
        frame[:, 0] *= -1
    sigmas = np.stack(PAULIS[1:])
    data = np.zeros((4, 2, 2), dtype=np.complex128)
    data[1:] = np.tensordot(m, sigmas, axes=([1], [0])) / math.sqrt(np.trace(gram).real)
    rotated = [PAULIS[0]] + [np.tensordot(frame[:, a], sigmas, axes=([0], [0])) for a in range(3)]
    klein = [[g ^ h for h in range(4)] for g in range(4)]
    basis = from_projective_rep(klein, rotated, labels=["I", "n1", "n2", "n3"], name="aklt-frame")
    return MPSTensor(data=data, name="aklt-deformed"), basis


def random_aklt_deformation(rng: np.random.Generator) -> np.ndarray:
    """Random ``W R`` with W Haar unitary and R real, well conditioned."""
    while True:
        r = rng.normal(size=(3, 3))
        if np.linalg.cond(r) < 50:
            return random_unitary(3, rng) @ r


def standard_basis(chi: int) -> UnitaryErrorBasis:
    return pauli_basis() if chi == 2 else clock_basis(chi)
