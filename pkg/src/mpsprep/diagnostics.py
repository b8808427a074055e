"""Deciding whether a tensor admits a single-round measurement protocol.

A pair of virtual operators acts on the joined legs of ``A`` as ``W = kron(v_left.T, v_right)``
(``A_W[p, (l, r)] = sum A[p, (l', r')] W[(l', r'), (l, r)]``). A physical unitary with
``U o A = A_W`` exists exactly when W preserves the Gram matrix ``G = A^+ A``, so the unitary
solutions are the unitaries commuting with G: ``U_G diag(D_b) U_G^+`` with one unitary block
per degenerate eigenspace. The search looks for product (disentangled) elements of that
family and assembles them into an error basis.

Example:
    from mpsprep import certify_preparable, phase_diagram_point, tetrahedron_tensor

    cert = certify_preparable(tetrahedron_tensor(phase_diagram_point("aklt")))
    assert cert.verdict == "Certified"
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import least_squares, minimize

from .bases import (
    BasisValidationError,
    UnitaryErrorBasis,
    conjugate_basis,
    quaternion_transversal_basis,
)
from .families import standard_basis
from .linalg import (
    DomainError,
    PreconditionError,
    check_cap,
    degenerate_blocks,
    eig_hermitian,
    nearest_unitary,
    phase_fixed,
    proportionality,
    svd,
    unitarity_residual,
)
from .mps import ConditionReport, MPSTensor, blocked_tensor, check_conditions
from .protocol import NotCorrectable, run_protocol

logger = logging.getLogger(__name__)

Verdict = Literal["Certified", "Unknown"]
Method = Literal["columns", "standard", "search"]
METHODS: tuple[Method, ...] = ("columns", "standard", "search")

SOLUTION_TOL = 1e-8
PRODUCT_TOL = 1e-8
MATCH_TOL = 1e-6
NULL_RTOL = 1e-10
DEFAULT_RESTARTS = 64


# ---------------------------------------------------------------------------
# Solution space
# ---------------------------------------------------------------------------


def gram_matrix(a: MPSTensor) -> np.ndarray:
    """``G = A^+ A`` for A read as a map from the joined virtual legs to the physical leg."""
    amap = a.physical_map()
    return amap.conj().T @ amap


class SolutionSpace(BaseModel):
    """Unitaries commuting with the Gram matrix, parameterized by Hermitian generators.

    Every element is ``expm(i sum_k theta_k h_k)``; ``basis`` holds the identity and one
    sample unitary per generator.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    chi: int
    gram: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    blocks: list[list[int]]
    generators: list[np.ndarray]
    basis: list[np.ndarray]
    name: str = "custom"

    @model_validator(mode="after")
    def _validate(self) -> SolutionSpace:
        for k, w in enumerate(self.basis):
            residual = self.invariance_residual(w)
            if residual >= SOLUTION_TOL:
                raise PreconditionError(f"solution {k} breaks invariance (residual {residual:.3e})")
        return self

    @property
    def ambient_dim(self) -> int:
        return self.chi * self.chi

    @property
    def dimension(self) -> int:
        """Real dimension of the solution manifold."""
        return len(self.generators)

    @property
    def multiplicities(self) -> list[int]:
        return [len(b) for b in self.blocks]

    @property
    def degenerate(self) -> bool:
        return any(len(b) > 1 for b in self.blocks)

    def element(self, theta: np.ndarray) -> np.ndarray:
        h = np.tensordot(np.asarray(theta, dtype=float), np.stack(self.generators), axes=1)
        return scipy.linalg.expm(1j * h)

    def invariance_residual(self, w: np.ndarray) -> float:
        return float(np.linalg.norm(w @ self.gram @ w.conj().T - self.gram))


def _block_generators(vectors: np.ndarray) -> list[np.ndarray]:
    """Orthonormal Hermitian basis of the operators supported on span(vectors)."""
    m = vectors.shape[1]
    out = []
    for i in range(m):
        ui = vectors[:, i : i + 1]
        out.append(ui @ ui.conj().T)
        for j in range(i + 1, m):
            uj = vectors[:, j : j + 1]
            cross = ui @ uj.conj().T
            out.append((cross + cross.conj().T) / np.sqrt(2))
            out.append(1j * (cross - cross.conj().T) / np.sqrt(2))
    return out


def _space_from_generators(
    chi: int, gram: np.ndarray, generators: list[np.ndarray], name: str
) -> SolutionSpace:
    values, vectors = eig_hermitian(gram)
    basis = [np.eye(chi * chi, dtype=np.complex128)]
    basis += [scipy.linalg.expm(1j * h) for h in generators]
    return SolutionSpace(
        chi=chi,
        gram=gram,
        eigenvalues=values,
        eigenvectors=vectors,
        blocks=degenerate_blocks(values),
        generators=generators,
        basis=basis,
        name=name,
    )


def solution_space(a: MPSTensor) -> SolutionSpace:
    chi = a.chi
    gram = gram_matrix(a)
    values, vectors = eig_hermitian(gram)
    generators: list[np.ndarray] = []
    for block in degenerate_blocks(values):
        generators += _block_generators(vectors[:, block])
    space = _space_from_generators(chi, gram, generators, a.name)
    logger.debug(
        "%s: solution space of dimension %d, multiplicities %s",
        a.name,
        space.dimension,
        space.multiplicities,
    )
    return space


def _commutant_generators(grams: list[np.ndarray]) -> list[np.ndarray]:
    """Hermitian basis of the matrices commuting with every Gram matrix."""
    n = grams[0].shape[0]
    check_cap(len(grams) * n**4, "commutant system")
    eye = np.eye(n)
    # row-major vec(G X - X G) = (G (x) 1 - 1 (x) G^T) vec(X)
    scaled = [g / max(float(np.linalg.norm(g)), 1e-300) for g in grams]
    system = np.vstack([np.kron(g, eye) - np.kron(eye, g.T) for g in scaled])
    null = scipy.linalg.null_space(system, rcond=NULL_RTOL)
    hermitian = []
    for col in null.T:
        x = col.reshape(n, n)
        hermitian += [(x + x.conj().T) / 2, (x - x.conj().T) / 2j]
    real = np.array([np.concatenate([h.real.reshape(-1), h.imag.reshape(-1)]) for h in hermitian])
    u, s, _ = svd(real.T)
    rank = int(np.sum(s > NULL_RTOL * max(1.0, s[0]))) if s.size else 0
    out = []
    for vec in u[:, :rank].T:
        h = (vec[: n * n] + 1j * vec[n * n :]).reshape(n, n)
        out.append((h + h.conj().T) / 2)
    return out


def blocked_intersection(a: MPSTensor, k: int) -> SolutionSpace:
    """Solutions shared by the single-site tensor and its ``k``-site block."""
    if k == 1:
        return solution_space(a)
    blocked = blocked_tensor(a, k)
    gram = gram_matrix(a)
    grams = [gram, gram_matrix(blocked)]
    space = _space_from_generators(a.chi, gram, _commutant_generators(grams), f"{a.name}^{k}")
    logger.debug("%s: intersection with %d-site block has dimension %d", a.name, k, space.dimension)
    return space


# ---------------------------------------------------------------------------
# Product solutions
# ---------------------------------------------------------------------------


def _reshuffled(w: np.ndarray, chi: int) -> np.ndarray:
    """W[(l', r'), (l, r)] as a matrix over ((l', l), (r', r))."""
    return w.reshape(chi, chi, chi, chi).transpose(0, 2, 1, 3).reshape(chi * chi, chi * chi)


def product_defect(w: np.ndarray, chi: int) -> float:
    """``1 - s_1^2 / sum s^2`` over the operator-Schmidt values across the left/right split."""
    s = np.linalg.svd(_reshuffled(w, chi), compute_uv=False)
    return float(1.0 - s[0] ** 2 / np.sum(s**2))


def _rank_one_residual(w: np.ndarray, chi: int) -> np.ndarray:
    r = _reshuffled(w, chi)
    u, s, vh = svd(r)
    rest = (r - s[0] * np.outer(u[:, 0], vh[0])) / np.linalg.norm(r)
    return np.concatenate([rest.real.reshape(-1), rest.imag.reshape(-1)])


def product_factors(w: np.ndarray, chi: int) -> tuple[np.ndarray, np.ndarray]:
    """``(v_left, v_right)`` with ``W ~ kron(v_left.T, v_right)``, both unitary, phase fixed."""
    u, s, vh = svd(_reshuffled(w, chi))
    p = nearest_unitary(u[:, 0].reshape(chi, chi))
    q = nearest_unitary(vh[0].reshape(chi, chi))
    return phase_fixed(p.T), phase_fixed(q)


def _same_up_to_phase(a: np.ndarray, b: np.ndarray) -> bool:
    return proportionality(a, b)[1] < MATCH_TOL * max(1.0, float(np.linalg.norm(a)))


@dataclass
class SearchStats:
    restarts: int
    accepted: int = 0
    distinct: int = 0
    best_defect: float = float("inf")

    def to_dict(self) -> dict:
        return {
            "restarts": self.restarts,
            "accepted": self.accepted,
            "distinct": self.distinct,
            "bestDefect": self.best_defect,
        }


def _one_restart(space: SolutionSpace, seed: np.random.SeedSequence) -> tuple[np.ndarray, float]:
    rng = np.random.default_rng(seed)
    chi = space.chi
    theta0 = rng.uniform(-np.pi, np.pi, size=space.dimension)
    coarse = minimize(
        lambda t: product_defect(space.element(t), chi),
        theta0,
        method="Powell",
        options={"xtol": 1e-8, "ftol": 1e-12, "maxfev": 400 * max(1, space.dimension)},
    )
    fine = least_squares(
        lambda t: _rank_one_residual(space.element(t), chi),
        coarse.x,
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=200,
    )
    w = space.element(fine.x)
    return w, product_defect(w, chi)


def _close_under_products(found: list[np.ndarray], cap: int) -> list[np.ndarray]:
    out = list(found)
    grew = True
    while grew and len(out) < cap:
        grew = False
        for a in list(out):
            for b in list(out):
                w = a @ b
                if not any(_same_up_to_phase(w, c) for c in out):
                    out.append(w)
                    grew = True
                    if len(out) >= cap:
                        return out
    return out


def _search(
    space: SolutionSpace,
    restarts: int,
    tol: float,
    seed: int,
    workers: int | None,
) -> tuple[list[np.ndarray], SearchStats]:
    chi = space.chi
    stats = SearchStats(restarts=restarts)
    found = [np.eye(chi * chi, dtype=np.complex128)]
    if space.dimension:
        children = np.random.SeedSequence(seed).spawn(restarts)
        if workers == 1:
            results = [_one_restart(space, c) for c in children]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda c: _one_restart(space, c), children))
        for w, defect in results:
            stats.best_defect = min(stats.best_defect, defect)
            if defect > tol:
                continue
            stats.accepted += 1
            if not any(_same_up_to_phase(w, c) for c in found):
                found.append(w)
    found = _close_under_products(found, chi**4)
    stats.distinct = len(found)
    logger.info(
        "%s: %d/%d restarts accepted, %d distinct product solutions",
        space.name,
        stats.accepted,
        restarts,
        stats.distinct,
    )
    return found, stats


def find_product_solutions(
    space: SolutionSpace,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = PRODUCT_TOL,
    seed: int = 0,
    workers: int | None = None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Product elements of the solution family as ``(v_left, v_right)`` unitary pairs.

    The identity is always included; the list is closed under products.
    """
    found, _ = _search(space, restarts, tol, seed, workers)
    return [product_factors(w, space.chi) for w in found]


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------


@dataclass
class PreparabilityCertificate:
    verdict: Verdict
    tensor: str
    basis: UnitaryErrorBasis | None = None
    method: str | None = None
    residuals: list[dict] = field(default_factory=list)
    dimension: int = 0
    search: SearchStats | None = None
    verified_fidelity: float | None = None

    @property
    def certified(self) -> bool:
        return self.verdict == "Certified"

    @property
    def max_invariance_residual(self) -> float:
        return max((r["invariance"] for r in self.residuals), default=0.0)

    def to_dict(self) -> dict:
        from .serialize import basis_to_dict

        return {
            "verdict": self.verdict,
            "tensor": self.tensor,
            "method": self.method,
            "dimension": self.dimension,
            "basis": None if self.basis is None else basis_to_dict(self.basis),
            "residuals": self.residuals,
            "search": None if self.search is None else self.search.to_dict(),
            "verifiedFidelity": self.verified_fidelity,
        }


def _residual_table(report: ConditionReport) -> list[dict]:
    return [
        {"label": c.label, "invariance": c.invariance_residual, "push": c.push_residual}
        for c in report.checks
    ]


def _verify(
    a: MPSTensor, basis: UnitaryErrorBasis, sites: int, trials: int, seed: int
) -> tuple[ConditionReport, float | None]:
    report = check_conditions(a, basis)
    if not report.satisfied:
        return report, None
    try:
        run = run_protocol(a, sites, basis, trials=trials, seed=seed, workers=1)
    except NotCorrectable as exc:
        logger.debug("%s: verification run failed: %s", a.name, exc)
        return report, None
    return report, run.min_fidelity if run.deterministic() else None


def _assemble(chi: int, candidates: list[np.ndarray], name: str) -> UnitaryErrorBasis | None:
    """Greedily pick trace-orthogonal unitaries, identity first."""
    chosen = [np.eye(chi, dtype=np.complex128)]
    for v in candidates:
        if len(chosen) == chi * chi:
            break
        if unitarity_residual(v) >= MATCH_TOL:
            continue
        if all(abs(np.trace(w.conj().T @ v)) < MATCH_TOL * chi for w in chosen):
            chosen.append(v)
    if len(chosen) < chi * chi:
        return None
    try:
        return UnitaryErrorBasis(
            dim=chi, elements=chosen, labels=[f"v{k}" for k in range(chi * chi)], name=name
        )
    except BasisValidationError as exc:
        logger.debug("candidate basis rejected: %s", exc)
        return None


def _column_candidates(space: SolutionSpace) -> list[list[np.ndarray]]:
    """Eigenvector columns read as chi x chi operators, under each reading convention."""
    if space.degenerate:
        return []
    chi = space.chi
    mats = [col.reshape(chi, chi) * np.sqrt(chi) for col in space.eigenvectors.T]
    readings = [lambda m: m, np.transpose, np.conj, lambda m: m.conj().T]
    out = []
    for read in readings:
        ops = [read(m) for m in mats]
        if any(unitarity_residual(op) >= MATCH_TOL for op in ops):
            continue
        anchor = max(ops, key=lambda op: abs(np.trace(op)))
        out.append([phase_fixed(nearest_unitary(anchor.conj().T @ op)) for op in ops])
    return out


def _standard_bases(chi: int) -> list[UnitaryErrorBasis]:
    base = standard_basis(chi)
    out = [base, conjugate_basis(base)]
    if chi == 2:
        out.append(quaternion_transversal_basis())
    return out


def certify_preparable(
    a: MPSTensor,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = PRODUCT_TOL,
    seed: int = 0,
    block: int | None = None,
    workers: int | None = None,
    verify_sites: int = 4,
    verify_trials: int = 8,
    methods: tuple[Method, ...] = METHODS,
) -> PreparabilityCertificate:
    """Look for an error basis the tensor pushes through, and check it end to end.

    Tries the eigenvector columns of the Gram matrix, then the standard bases, then a
    product search over the solution family (of the ``block``-site intersection if given).
    A Certified verdict carries a basis that passes the condition check and a short
    protocol run; anything else is Unknown. ``methods`` restricts the strategies tried.
    """
    chi = a.chi
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise DomainError(f"unknown certification methods {sorted(unknown)}; expected {list(METHODS)}")
    space = solution_space(a)
    cert = PreparabilityCertificate(verdict="Unknown", tensor=a.name, dimension=space.dimension)

    def accept(basis: UnitaryErrorBasis, method: str) -> bool:
        report, fid = _verify(a, basis, verify_sites, verify_trials, seed)
        if fid is None:
            return False
        cert.verdict = "Certified"
        cert.basis = basis
        cert.method = method
        cert.residuals = _residual_table(report)
        cert.verified_fidelity = fid
        return True

    for ops in _column_candidates(space) if "columns" in methods else []:
        basis = _assemble(chi, ops, f"{a.name}-columns")
        if basis is not None and accept(basis, "columns"):
            logger.info("%s: certified from eigenvector columns", a.name)
            return cert

    for basis in _standard_bases(chi) if "standard" in methods else []:
        if accept(basis, "standard"):
            logger.info("%s: certified by the %s basis", a.name, basis.name)
            return cert

    if "search" not in methods:
        logger.info("%s: no error basis found, verdict Unknown", a.name)
        return cert

    search_space = space if block is None else blocked_intersection(a, block)
    found, stats = _search(search_space, restarts, tol, seed, workers)
    cert.search = stats
    candidates = []
    for w in found[1:]:
        v_left, v_right = product_factors(w, chi)
        if _same_up_to_phase(v_right, v_left.conj().T):
            candidates.append(v_left)
    basis = _assemble(chi, candidates, f"{a.name}-search")
    if basis is not None and accept(basis, "search"):
        logger.info("%s: certified by product search", a.name)
        return cert

    logger.info("%s: no error basis found, verdict Unknown", a.name)
    return cert
