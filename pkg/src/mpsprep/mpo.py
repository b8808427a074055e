"""Applying a stored-program MPO by measurement.

A 2N-qubit resource ``a1 b1 a2 b2 ...`` is prepared first. Each input qubit is Bell-measured
with its ``a`` partner; the ideal outcome leaves ``K psi`` on the ``b`` qubits with
``K[b, a] = C(a, b)``. Any other outcome inserts a Pauli on ``a``, which is traded for a
Pauli on ``b`` through a stabilizer of the resource found by solving a GF(2) system.

Resources:
    cluster  path-graph cluster state, whose MPO is the Kramers-Wannier map
    bell     N Bell pairs, whose MPO is the identity (plain teleportation)
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np

from .bases import PAULI_X, PAULI_Z, label_order, pauli_basis
from .gf2 import solve_gf2
from .linalg import DomainError, apply_on_axis, check_cap, fidelity
from .mps import UniformMPS, dense_state
from .protocol import NotCorrectable, ProtocolReport, TrialResult

logger = logging.getLogger(__name__)

Resource = Literal["cluster", "bell"]


def resource_state(n: int, resource: Resource = "cluster") -> tuple[np.ndarray, np.ndarray]:
    """Resource vector over ``(a1, b1, ..., aN, bN)`` and its stabilizer generators.

    Generators are rows ``(x | z)`` of length ``4N``.
    """
    m = 2 * n
    check_cap(2**m, f"{m}-qubit resource")
    bits = np.array(list(itertools.product((0, 1), repeat=m)), dtype=int)
    gens = np.zeros((m, 2 * m), dtype=np.uint8)
    match resource:
        case "cluster":
            signs = np.sum(bits[:, :-1] * bits[:, 1:], axis=1) % 2
            vec = (1 - 2 * signs).astype(np.complex128)
            for q in range(m):
                gens[q, q] = 1
                for nb in (q - 1, q + 1):
                    if 0 <= nb < m:
                        gens[q, m + nb] = 1
        case "bell":
            paired = np.all(bits[:, 0::2] == bits[:, 1::2], axis=1)
            vec = paired.astype(np.complex128)
            for j in range(n):
                gens[2 * j, [2 * j, 2 * j + 1]] = 1
                gens[2 * j + 1, [m + 2 * j, m + 2 * j + 1]] = 1
        case _:
            raise DomainError(f"unknown resource {resource!r}")
    return vec / np.linalg.norm(vec), gens


def mpo_matrix(n: int, resource: Resource = "cluster") -> np.ndarray:
    """``K[b, a] = C(a, b)`` as a ``2^N x 2^N`` matrix."""
    vec, _ = resource_state(n, resource)
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    c = vec.reshape((2,) * (2 * n)).transpose(order).reshape(2**n, 2**n)
    return c.T


def _byproduct(outcomes: list[int], gens: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Pauli on the ``b`` qubits equivalent, on the resource, to the inserted Paulis on ``a``."""
    m = 2 * n
    xz = label_order(2)
    target = np.zeros(2 * m, dtype=np.uint8)
    for j, k in enumerate(outcomes):
        target[2 * j], target[m + 2 * j] = xz[k]
    a_cols = [2 * j for j in range(n)] + [m + 2 * j for j in range(n)]
    coeffs = solve_gf2(gens[:, a_cols].T, target[a_cols])
    if coeffs is None:
        raise NotCorrectable(f"outcomes {outcomes} have no stabilizer equivalent on the output")
    total = (coeffs.astype(int) @ gens.astype(int)) % 2
    return total[1:m:2], total[m + 1 :: 2]


def _input_vector(psi: UniformMPS) -> np.ndarray:
    if psi.tensor.d != 2:
        raise DomainError(f"inputs must be qubit chains, got d={psi.tensor.d}")
    if psi.boundary == "dangling" and psi.tensor.chi > 1:
        raise DomainError("dangling inputs carry ancillas; use a periodic chain")
    return dense_state(UniformMPS(tensor=psi.tensor, sites=psi.sites, boundary="periodic")).vector


def mpo_apply(
    psi: UniformMPS,
    seed: int,
    resource: Resource = "cluster",
    trials: int = 1,
    workers: int | None = None,
) -> ProtocolReport:
    """Teleport ``psi`` through the resource and compare with ``K psi``."""
    n = psi.sites
    check_cap(8**n, f"{n}-qubit MPO application")
    vin = _input_vector(psi)
    vres, gens = resource_state(n, resource)
    ideal = mpo_matrix(n, resource) @ vin
    basis = pauli_basis()
    inserts = basis.stack / np.sqrt(2)

    # axes (in1, a1, in2, a2, ..., b1, ..., bN)
    res = vres.reshape((2,) * (2 * n)).transpose(
        list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    )
    joint = np.multiply.outer(vin.reshape((2,) * n), res)
    order = [ax for j in range(n) for ax in (j, n + j)] + list(range(2 * n, 3 * n))
    start = joint.transpose(order)
    children = np.random.SeedSequence(seed).spawn(trials)

    def one_trial(i: int) -> TrialResult:
        rng = np.random.default_rng(children[i])
        state = start
        record: list[int] = []
        probability = 1.0
        for _ in range(n):
            branches = np.tensordot(inserts, state, axes=([1, 2], [0, 1]))
            weights = np.array([np.vdot(b, b).real for b in branches])
            probs = weights / weights.sum()
            k = int(rng.choice(len(probs), p=probs))
            record.append(k)
            probability *= float(probs[k])
            state = branches[k] / np.sqrt(weights[k])
        bx, bz = _byproduct(record, gens, n)
        for j in range(n):
            if bz[j]:
                state = apply_on_axis(state, PAULI_Z, j)
            if bx[j]:
                state = apply_on_axis(state, PAULI_X, j)
        return TrialResult(
            trial=i,
            record=tuple(record),
            probability=probability,
            fidelity=fidelity(ideal, state.reshape(-1)),
        )

    if workers == 1:
        results = [one_trial(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_trial, range(trials)))

    report = ProtocolReport(
        name=f"mpo[{resource}]",
        sites=n,
        boundary="open",
        seed=seed,
        labels=[basis.label(k) for k in range(4)],
        trials=results,
    )
    logger.info("%s on %d qubits: min fidelity %.12f", report.name, n, report.min_fidelity)
    return report
