"""Preparation with computational-basis measurements only.

The chain is delta junctions joined by two-leg clusters ``B``. Neighbouring clusters are
entangled with a CNOT from the right leg of one cluster (control, kept as the junction's
physical spin) onto the left leg of the next (target), and only the target is measured
in the Z basis. Outcome 1 leaves an X on the bond, which a delta junction copies onto its
spin and the following bond; an X that pushes through ``B`` as ``X B = (U o B) X`` is swept
to the right end and undone with physical X and U corrections.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg

from .bases import PAULI_X
from .linalg import DomainError, ShapeError, apply_on_axis, check_cap, fidelity
from .mps import MPSTensor
from .protocol import ProtocolReport, TrialResult, construct_correction_unitary

logger = logging.getLogger(__name__)

ALPHA_CAP = 1.0 - 1e-12


def ising_split_tensor(beta: float) -> MPSTensor:
    """``B = exp(alpha X)`` with a trivial physical leg, ``tanh(alpha) = exp(-2 beta)``."""
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    alpha = float(np.arctanh(min(np.exp(-2.0 * beta), ALPHA_CAP)))
    return MPSTensor(data=scipy.linalg.expm(alpha * PAULI_X)[None, :, :], name=f"ising({beta:g})")


def ising_target(n: int, beta: float) -> np.ndarray:
    """Normalized ``exp(beta sum Z Z)|+>^n`` on an open chain."""
    check_cap(2**n, f"{n}-spin Ising state")
    spins = 1 - 2 * np.array(list(itertools.product((0, 1), repeat=n)))
    energy = np.sum(spins[:, :-1] * spins[:, 1:], axis=1)
    psi = np.exp(beta * (energy - (n - 1))).astype(np.complex128)
    return psi / np.linalg.norm(psi)


def _chain_dims(b: MPSTensor, n: int) -> tuple[int, ...]:
    """Spin 0, then (B physical, spin) for each of the ``n - 1`` clusters."""
    return (2,) + (b.d, 2) * (n - 1)


def junction_chain(b: MPSTensor, n: int) -> np.ndarray:
    """Target vector: ``prod_k B[p_k, s_k, s_k+1]`` over (s0, p0, s1, ..., s_n-1)."""
    site = b.data.transpose(1, 0, 2)
    out = site.reshape(-1, 2)
    for _ in range(n - 2):
        out = np.einsum("Xr,rqs->Xrqs", out, site).reshape(-1, 2)
    vec = out.reshape(-1)
    return vec / np.linalg.norm(vec)


def _measure_junctions(
    b: MPSTensor, n: int, rng: np.random.Generator
) -> tuple[list[int], float, np.ndarray]:
    site = b.data.transpose(1, 0, 2)
    site = site / np.linalg.norm(site)
    flips = np.arange(2)
    state = site.reshape(-1, 2)
    record: list[int] = []
    probability = 1.0
    for _ in range(n - 2):
        branches = [
            np.einsum("Xr,rqs->Xrqs", state, site[flips ^ m]).reshape(-1, 2) for m in (0, 1)
        ]
        weights = np.array([np.vdot(x, x).real for x in branches])
        probs = weights / weights.sum()
        m = int(rng.choice(2, p=probs))
        record.append(m)
        probability *= float(probs[m])
        state = branches[m] / np.sqrt(weights[m])
    return record, probability, state.reshape(-1)


def _correct(post: np.ndarray, record: list[int], u: np.ndarray, dims: tuple[int, ...]) -> np.ndarray:
    """Apply X^{P_k} to spin k and (U^+)^{c_k} to cluster k's physical leg."""
    psi = post.reshape(dims)
    carry = 0
    for k, m in enumerate([0] + record):
        carry ^= m
        if carry:
            psi = apply_on_axis(psi, u.conj().T, 2 * k + 1)
            psi = apply_on_axis(psi, PAULI_X, 2 * k + 2)
    return psi.reshape(-1)


def incomplete_protocol(
    b: MPSTensor | None = None,
    n: int = 8,
    beta: float | None = None,
    trials: int = 50,
    seed: int = 0,
    workers: int | None = None,
) -> ProtocolReport:
    """Run the Z-measurement protocol ``trials`` times.

    Fidelities are against the ideal junction chain, or against the Ising state itself
    when the clusters come from ``beta``.
    """
    ising = b is None
    if ising:
        if beta is None:
            raise DomainError("need either a cluster tensor or beta")
        b = ising_split_tensor(beta)
    if b.chi_left != 2 or b.chi_right != 2:
        raise ShapeError("junction chains need two-dimensional bonds")
    if n < 2:
        raise DomainError(f"need at least 2 spins, got {n}")
    u = construct_correction_unitary(b, PAULI_X, PAULI_X)
    dims = _chain_dims(b, n)
    check_cap(int(np.prod(dims)), f"{n}-spin junction chain")
    target = ising_target(n, beta) if ising else junction_chain(b, n)
    children = np.random.SeedSequence(seed).spawn(trials)

    def one_trial(i: int) -> TrialResult:
        record, probability, post = _measure_junctions(b, n, np.random.default_rng(children[i]))
        corrected = _correct(post, record, u, dims)
        return TrialResult(
            trial=i,
            record=tuple(record),
            probability=probability,
            fidelity=fidelity(target, corrected),
        )

    if workers == 1:
        results = [one_trial(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_trial, range(trials)))

    report = ProtocolReport(
        name=b.name, sites=n, boundary="dangling", seed=seed, labels=["0", "1"], trials=results
    )
    logger.info("%s: %d junction trials, min fidelity %.12f", b.name, trials, report.min_fidelity)
    return report
