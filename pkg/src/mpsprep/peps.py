"""Two-dimensional examples: the deformed toric code and the deformed GHZ state.

Both live on an Lx x Ly square lattice. Every vertex owns its right (R) and down (D) edge;
its up and left legs connect to the edges owned by the neighbours above and to the left.

toric  qubits sit on edges. The vertex tensor ``T[u, r, d, l, zR, zD]`` copies the values
       of its own edges onto the r and d legs and weighs the four incident edge values
       with Hadamards into a junction carrying ``exp(alpha Z)|+>``, ``tanh(alpha) = exp(-2 beta)``.
       The network is ``exp(beta sum_v A_v)|+>`` with ``A_v = prod Z``.
ghz    qubits sit on vertices. The vertex tensor is a four-leg delta with ``exp(beta X)``
       on its physical leg; the network is ``exp(beta sum_v X_v)|GHZ>``.

Open lattices keep the left leg of vertex (0, 0) as a physical reference qubit (last in
qubit order) that absorbs the single charge or Z a record can leave behind; other missing
legs are capped. Torus runs have no such qubit and report the residual sector instead.

Example:
    from mpsprep.peps import PEPSLattice, simulate_peps_protocol

    report = simulate_peps_protocol("ghz", PEPSLattice.parse("3x3-open"), beta=0.5, trials=20, seed=1)
    assert report.deterministic(1e-8)
"""

from __future__ import annotations

import itertools
import logging
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .bases import PAULI_LABELS, PAULI_X, PAULI_Z, label_order, pauli_basis
from .gf2 import solve_gf2
from .linalg import DomainError, ResourceError, apply_on_axis, check_cap, fidelity
from .network import Node, TensorNetwork
from .protocol import NotCorrectable, ProtocolReport, TrialResult

logger = logging.getLogger(__name__)

Example = Literal["toric", "ghz"]
Topology = Literal["torus", "open"]

MAX_QUBITS = 16
MAX_PATTERNS = 2**14
ALPHA_CAP = 1.0 - 1e-12
PUSH_RULE_TOL = 1e-12

HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
PAULI_INDEX = {xz: k for k, xz in enumerate(label_order(2))}

_LATTICE_RE = re.compile(r"^(\d+)x(\d+)-(torus|open)$")


# ---------------------------------------------------------------------------
# Lattice
# ---------------------------------------------------------------------------


class Edge(NamedTuple):
    index: int
    owner: int
    direction: str
    neighbor: int


class PEPSLattice(BaseModel):
    model_config = ConfigDict(frozen=True)

    lx: int = Field(ge=1)
    ly: int = Field(ge=1)
    topology: Topology = "open"

    @model_validator(mode="after")
    def _torus_extent(self) -> PEPSLattice:
        if self.topology == "torus" and (self.lx < 2 or self.ly < 2):
            raise DomainError(f"a torus needs extents >= 2, got {self.lx}x{self.ly}")
        return self

    @classmethod
    def parse(cls, spec: str) -> PEPSLattice:
        match = _LATTICE_RE.match(spec.strip())
        if match is None:
            raise DomainError(f"lattice must look like '2x2-torus' or '3x3-open', got {spec!r}")
        return cls(lx=int(match[1]), ly=int(match[2]), topology=match[3])

    def __str__(self) -> str:
        return f"{self.lx}x{self.ly}-{self.topology}"

    @property
    def n_vertices(self) -> int:
        return self.lx * self.ly

    @property
    def reference(self) -> bool:
        return self.topology == "open"

    def vertex(self, x: int, y: int) -> int:
        return (y % self.ly) * self.lx + (x % self.lx)

    @property
    def edges(self) -> list[Edge]:
        out: list[Edge] = []
        torus = self.topology == "torus"
        for y, x in itertools.product(range(self.ly), range(self.lx)):
            v = self.vertex(x, y)
            if torus or x + 1 < self.lx:
                out.append(Edge(len(out), v, "R", self.vertex(x + 1, y)))
            if torus or y + 1 < self.ly:
                out.append(Edge(len(out), v, "D", self.vertex(x, y + 1)))
        return out

    def edge_index(self) -> dict[tuple[int, str], int]:
        return {(e.owner, e.direction): e.index for e in self.edges}

    def plaquettes(self) -> list[list[int]]:
        """Edge indices around each face: top, right, bottom, left."""
        lookup = self.edge_index()
        faces = []
        for y, x in itertools.product(range(self.ly), range(self.lx)):
            if self.topology == "open" and (x + 1 >= self.lx or y + 1 >= self.ly):
                continue
            faces.append(
                [
                    lookup[(self.vertex(x, y), "R")],
                    lookup[(self.vertex(x + 1, y), "D")],
                    lookup[(self.vertex(x, y + 1), "R")],
                    lookup[(self.vertex(x, y), "D")],
                ]
            )
        return faces

    def winding_loops(self) -> list[list[int]]:
        if self.topology != "torus":
            return []
        lookup = self.edge_index()
        horizontal = [lookup[(self.vertex(x, 0), "R")] for x in range(self.lx)]
        vertical = [lookup[(self.vertex(0, y), "D")] for y in range(self.ly)]
        return [horizontal, vertical]

    def n_qubits(self, example: Example) -> int:
        base = len(self.edges) if example == "toric" else self.n_vertices
        return base + int(self.reference)


# ---------------------------------------------------------------------------
# Local tensors and push rules
# ---------------------------------------------------------------------------


class VertexTensor(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    legs: tuple[str, ...]
    name: str
    alpha: float | None = None


def toric_alpha(beta: float) -> float:
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    return float(np.arctanh(min(np.exp(-2.0 * beta), ALPHA_CAP)))


def toric_deformed_tensor(beta: float) -> VertexTensor:
    alpha = toric_alpha(beta)
    c = np.array([np.exp(alpha), np.exp(-alpha)])
    h = HADAMARD
    core = np.einsum("n,un,ln,zn,wn->ulzw", c, h, h, h, h)
    eye = np.eye(2)
    data = np.einsum("ulzw,rz,dw->urdlzw", core, eye, eye)
    return VertexTensor(
        data=data, legs=("u", "r", "d", "l", "zR", "zD"), name=f"toric({beta:g})", alpha=alpha
    )


def ghz_deformed_tensor(beta: float) -> VertexTensor:
    if beta < 0:
        raise DomainError(f"beta must be non-negative, got {beta}")
    e = scipy.linalg.expm(beta * PAULI_X)
    data = np.zeros((2, 2, 2, 2, 2), dtype=np.complex128)
    for s in (0, 1):
        data[s, s, s, s, :] = e[:, s]
    return VertexTensor(data=data, legs=("u", "r", "d", "l", "p"), name=f"ghz({beta:g})")


def vertex_tensor(example: Example, beta: float) -> VertexTensor:
    match example:
        case "toric":
            return toric_deformed_tensor(beta)
        case "ghz":
            return ghz_deformed_tensor(beta)
        case _:
            raise DomainError(f"unknown example {example!r}")


def _on_legs(t: VertexTensor, op: np.ndarray, legs) -> np.ndarray:
    out = t.data
    for leg in legs:
        out = apply_on_axis(out, op, t.legs.index(leg))
    return out


@dataclass
class PushRuleReport:
    example: str
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def passed(self, tol: float = PUSH_RULE_TOL) -> bool:
        return self.max_residual < tol


def verify_push_rules(example: Example, beta: float = 0.7) -> PushRuleReport:
    """Check each local rewriting rule as a tensor identity."""
    t = vertex_tensor(example, beta)
    report = PushRuleReport(example=example)

    def record(name: str, lhs: np.ndarray, rhs: np.ndarray) -> None:
        report.residuals[name] = float(np.linalg.norm(lhs - rhs))

    if example == "toric":
        record("Z(r)=Z(zR)", _on_legs(t, PAULI_Z, ["r"]), _on_legs(t, PAULI_Z, ["zR"]))
        record("Z(d)=Z(zD)", _on_legs(t, PAULI_Z, ["d"]), _on_legs(t, PAULI_Z, ["zD"]))
        groups = {"u": ["u"], "l": ["l"], "r": ["r", "zR"], "d": ["d", "zD"]}
        for a, b in itertools.combinations(groups, 2):
            record(
                f"X({a})=X({b})",
                _on_legs(t, PAULI_X, groups[a]),
                _on_legs(t, PAULI_X, groups[b]),
            )
    else:
        virtual = ["u", "r", "d", "l"]
        for a, b in itertools.combinations(virtual, 2):
            record(f"Z({a})=Z({b})", _on_legs(t, PAULI_Z, [a]), _on_legs(t, PAULI_Z, [b]))
        for a in virtual:
            others = [leg for leg in virtual if leg != a] + ["p"]
            record(f"X({a})=X({','.join(others)})", _on_legs(t, PAULI_X, [a]), _on_legs(t, PAULI_X, others))
    logger.debug("%s push rules: max residual %.3e", example, report.max_residual)
    return report


# ---------------------------------------------------------------------------
# Network assembly
# ---------------------------------------------------------------------------

Insertion = Literal["none", "bell", "parity"]


def build_network(
    example: Example,
    lattice: PEPSLattice,
    beta: float,
    insertion: Insertion = "none",
    reference: bool | None = None,
) -> TensorNetwork:
    """Vertex nodes first (node v for vertex v), then one insertion node per edge.

    ``bell`` insertion nodes are 2x2 operators on (owner side, neighbour side); ``parity``
    nodes are ``delta(b, a + x) delta(s, a)`` and expose a survivor leg ``s<e>``.
    """
    reference = lattice.reference if reference is None else reference
    t = vertex_tensor(example, beta)
    edges = lattice.edges
    own = {(e.owner, e.direction): e for e in edges}
    incoming = {(e.neighbor, e.direction): e for e in edges}

    def side(e: Edge, owner_side: bool) -> str:
        if insertion == "none":
            return f"b{e.index}"
        return f"o{e.index}" if owner_side else f"n{e.index}"

    nodes: list[Node] = []
    for v in range(lattice.n_vertices):
        arr = t.data
        labels = list(t.legs)

        def cap(leg: str) -> None:
            nonlocal arr
            ax = labels.index(leg)
            arr = arr.take(0, axis=ax) if example == "toric" else arr.sum(axis=ax)
            labels.pop(ax)

        names: dict[str, str] = {}
        for leg, direction in (("r", "R"), ("d", "D")):
            e = own.get((v, direction))
            if e is None:
                cap(leg)
                if example == "toric":
                    cap("z" + direction)
            else:
                names[leg] = side(e, True)
                if example == "toric":
                    names["z" + direction] = f"q{e.index}"
        for leg, direction in (("u", "D"), ("l", "R")):
            e = incoming.get((v, direction))
            if e is not None:
                names[leg] = side(e, False)
            elif leg == "l" and v == 0 and reference:
                names[leg] = "ref"
            else:
                cap(leg)
        if example == "ghz":
            names["p"] = f"q{v}"
        nodes.append(Node(np.ascontiguousarray(arr), tuple(names[x] for x in labels)))

    output = [f"q{e.index}" for e in edges] if example == "toric" else [
        f"q{v}" for v in range(lattice.n_vertices)
    ]
    if reference:
        output.append("ref")
    for e in edges:
        if insertion == "bell":
            nodes.append(Node(np.eye(2, dtype=np.complex128), (f"o{e.index}", f"n{e.index}")))
        elif insertion == "parity":
            nodes.append(Node(_parity_node(0), (f"o{e.index}", f"n{e.index}", f"s{e.index}")))
            output.append(f"s{e.index}")
    return TensorNetwork(nodes, output)


def _parity_node(x: int) -> np.ndarray:
    node = np.zeros((2, 2, 2), dtype=np.complex128)
    for a in (0, 1):
        node[a, a ^ x, a] = 1.0
    return node


def _check_size(example: Example, lattice: PEPSLattice, extra: int = 0) -> int:
    n = lattice.n_qubits(example)
    if n > MAX_QUBITS:
        raise ResourceError(f"{example} on {lattice} has {n} qubits, cap is {MAX_QUBITS}")
    check_cap(2 ** (n + extra), f"{example} on {lattice}")
    return n


def dense_peps_state(
    example: Example, lattice: PEPSLattice, beta: float, reference: bool | None = None
) -> np.ndarray:
    _check_size(example, lattice)
    vec = build_network(example, lattice, beta, reference=reference).contract().reshape(-1)
    return vec / np.linalg.norm(vec)


# ---------------------------------------------------------------------------
# Dense oracles and observables
# ---------------------------------------------------------------------------


def _stars(lattice: PEPSLattice, reference: bool) -> list[list[int]]:
    stars: list[list[int]] = [[] for _ in range(lattice.n_vertices)]
    for e in lattice.edges:
        stars[e.owner].append(e.index)
        stars[e.neighbor].append(e.index)
    if reference:
        stars[0].append(len(lattice.edges))
    return stars


def toric_oracle(lattice: PEPSLattice, beta: float, reference: bool | None = None) -> np.ndarray:
    """Normalized ``exp(beta sum_v A_v)|+>`` over the edge qubits (and the reference)."""
    reference = lattice.reference if reference is None else reference
    n = len(lattice.edges) + int(reference)
    check_cap(2**n, "toric oracle")
    signs = 1 - 2 * np.array(list(itertools.product((0, 1), repeat=n)))
    energy = sum(np.prod(signs[:, star], axis=1) for star in _stars(lattice, reference))
    psi = np.exp(beta * (np.asarray(energy, dtype=float) - lattice.n_vertices)).astype(np.complex128)
    return psi / np.linalg.norm(psi)


def ghz_oracle(lattice: PEPSLattice, beta: float, reference: bool | None = None) -> np.ndarray:
    """Normalized ``exp(beta sum_v X_v)|GHZ>``; the reference qubit is not rotated."""
    reference = lattice.reference if reference is None else reference
    e = scipy.linalg.expm(beta * PAULI_X)
    branches = []
    for s in (0, 1):
        vec = np.ones(1, dtype=np.complex128)
        for _ in range(lattice.n_vertices):
            vec = np.kron(vec, e[:, s])
        if reference:
            vec = np.kron(vec, np.eye(2)[s])
        branches.append(vec)
    psi = branches[0] + branches[1]
    return psi / np.linalg.norm(psi)


def toric_stabilizer_expectations(
    state: np.ndarray, lattice: PEPSLattice, reference: bool | None = None
) -> dict[str, list[float]]:
    """``<A_v>`` per vertex and ``<B_p>`` per face of a dense edge-qubit state."""
    reference = lattice.reference if reference is None else reference
    n = len(lattice.edges) + int(reference)
    psi = np.asarray(state).reshape((2,) * n)
    probs = np.abs(psi.reshape(-1)) ** 2
    signs = 1 - 2 * np.array(list(itertools.product((0, 1), repeat=n)))
    stars = [float(probs @ np.prod(signs[:, star], axis=1)) for star in _stars(lattice, reference)]
    plaquettes = []
    for face in lattice.plaquettes():
        flipped = np.flip(psi, axis=tuple(sorted(set(face))))
        plaquettes.append(float(np.vdot(psi, flipped).real))
    return {"star": stars, "plaquette": plaquettes}


# ---------------------------------------------------------------------------
# Corrections
# ---------------------------------------------------------------------------


@dataclass
class PEPSCorrection:
    x_qubits: list[int] = field(default_factory=list)
    z_qubits: list[int] = field(default_factory=list)
    residual_class: int | None = None

    @property
    def correctable(self) -> bool:
        return self.residual_class is None


def _boundary_matrix(lattice: PEPSLattice, reference: bool) -> np.ndarray:
    """Vertex x (edge + reference) incidence mod 2."""
    edges = lattice.edges
    d = np.zeros((lattice.n_vertices, len(edges) + int(reference)), dtype=np.uint8)
    for e in edges:
        d[e.owner, e.index] ^= 1
        d[e.neighbor, e.index] ^= 1
    if reference:
        d[0, len(edges)] = 1
    return d


def peps_corrections(
    example: Example,
    lattice: PEPSLattice,
    x: np.ndarray,
    z: np.ndarray,
    reference: bool | None = None,
) -> PEPSCorrection:
    """Physical Paulis undoing the X part ``x`` and Z part ``z`` of a per-edge record."""
    reference = lattice.reference if reference is None else reference
    edges = lattice.edges
    x = np.asarray(x, dtype=np.uint8)
    z = np.asarray(z, dtype=np.uint8)
    plan = PEPSCorrection()
    if example == "toric":
        plan.z_qubits = [int(e) for e in np.nonzero(z)[0]]
        charges = np.zeros(lattice.n_vertices, dtype=np.uint8)
        for e in edges:
            charges[e.neighbor] ^= x[e.index]
        flips = solve_gf2(_boundary_matrix(lattice, reference), charges)
        if flips is None:
            plan.residual_class = PAULI_INDEX[(1, 0)]
        else:
            plan.x_qubits = [int(q) for q in np.nonzero(flips)[0]]
        return plan

    coboundary = _boundary_matrix(lattice, reference=False).T
    domain = solve_gf2(coboundary, x)
    if domain is None:
        odd = [
            face for face in lattice.plaquettes() + lattice.winding_loops() if x[face].sum() % 2
        ]
        raise NotCorrectable(f"X insertions are odd around edges {odd[0] if odd else '?'}")
    plan.x_qubits = [int(v) for v in np.nonzero(domain)[0]]
    if reference and domain[0]:
        plan.x_qubits.append(lattice.n_vertices)
    if int(z.sum()) % 2:
        if reference:
            plan.z_qubits = [lattice.n_vertices]
        else:
            plan.residual_class = PAULI_INDEX[(0, 1)]
    return plan


def _apply_correction(state: np.ndarray, plan: PEPSCorrection) -> np.ndarray:
    psi = state
    for q in plan.z_qubits:
        psi = apply_on_axis(psi, PAULI_Z, q)
    for q in plan.x_qubits:
        psi = apply_on_axis(psi, PAULI_X, q)
    return psi


# ---------------------------------------------------------------------------
# Outcome statistics
# ---------------------------------------------------------------------------


def _bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> k) & 1 for k in range(width)], dtype=np.uint8)


class InsertionPattern(BaseModel):
    """Per-edge Pauli labels (indices into the Pauli basis) left by a Bell record."""

    model_config = ConfigDict(frozen=True)

    labels: tuple[int, ...]

    @model_validator(mode="after")
    def _pauli_labels(self) -> InsertionPattern:
        bad = [k for k in self.labels if not 0 <= k < 4]
        if bad:
            raise DomainError(f"insertion labels must index the Pauli basis, got {bad}")
        return self

    @classmethod
    def from_bits(cls, x: np.ndarray, z: np.ndarray) -> InsertionPattern:
        return cls(labels=tuple(PAULI_INDEX[(int(a), int(b))] for a, b in zip(x, z)))

    @property
    def x_bits(self) -> np.ndarray:
        return np.array([label_order(2)[k][0] for k in self.labels], dtype=np.uint8)

    @property
    def z_bits(self) -> np.ndarray:
        return np.array([label_order(2)[k][1] for k in self.labels], dtype=np.uint8)

    def overrides(self, offset: int) -> dict[int, np.ndarray]:
        """Insertion nodes for a bell network whose edge nodes start at ``offset``."""
        elements = pauli_basis().elements
        return {offset + e: elements[k] for e, k in enumerate(self.labels)}


class PatternDistribution(NamedTuple):
    """Exact Bell-record law, factored as (X pattern, Z class) with Z uniform in its class."""

    weights: np.ndarray
    class_sizes: np.ndarray
    total: float

    @property
    def joint(self) -> np.ndarray:
        return self.weights * self.class_sizes[None, :] / self.total


def pattern_distribution(
    example: Example, lattice: PEPSLattice, beta: float, network: TensorNetwork | None = None
) -> PatternDistribution:
    """Squared norms of the network for every X pattern and each Z class representative.

    Toric Z insertions push onto physical qubits, so all Z patterns weigh the same; GHZ
    Z insertions only matter through their total parity.
    """
    edges = lattice.edges
    b = len(edges)
    if 2**b > MAX_PATTERNS:
        raise ResourceError(f"{2**b} insertion patterns exceed the budget {MAX_PATTERNS}")
    network = network or build_network(example, lattice, beta, insertion="bell")
    offset = lattice.n_vertices
    reps = [np.zeros(b, dtype=np.uint8)]
    if example == "ghz" and b:
        odd = np.zeros(b, dtype=np.uint8)
        odd[0] = 1
        reps.append(odd)
    weights = np.zeros((2**b, len(reps)))
    for xi in range(2**b):
        x = _bits(xi, b)
        for c, z in enumerate(reps):
            amp = network.contract(InsertionPattern.from_bits(x, z).overrides(offset))
            weights[xi, c] = float(np.vdot(amp, amp).real)
    sizes = np.full(len(reps), 2.0 ** (b - len(reps) + 1))
    total = float(np.sum(weights * sizes[None, :]))
    logger.debug("%s on %s: %d patterns enumerated", example, lattice, 2**b)
    return PatternDistribution(weights=weights, class_sizes=sizes, total=total)


def _sample_pattern(
    dist: PatternDistribution, b: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, float]:
    joint = dist.joint
    flat = joint.reshape(-1)
    k = int(rng.choice(flat.size, p=flat / flat.sum()))
    xi, c = divmod(k, joint.shape[1])
    x = _bits(xi, b)
    z = rng.integers(0, 2, size=b).astype(np.uint8)
    if joint.shape[1] > 1 and b and int(z.sum()) % 2 != c:
        z[-1] ^= 1
    return x, z, float(dist.weights[xi, c] / dist.total)


# ---------------------------------------------------------------------------
# Protocol
# ---------------------------------------------------------------------------


def simulate_peps_protocol(
    example: Example,
    lattice: PEPSLattice,
    beta: float,
    trials: int,
    seed: int,
    incomplete: bool = False,
    workers: int | None = None,
) -> ProtocolReport:
    """Bell-measure every edge, correct with physical Paulis, compare to the dense network.

    With ``incomplete=True`` (toric only) each edge is measured for ZZ parity alone and the
    surviving ancilla is disentangled coherently by ``|+><+| (x) 1 + |-><-| (x) Z`` on the
    edge qubit; the fidelity is that of the reduced state on the lattice qubits.
    """
    if incomplete and example != "toric":
        raise DomainError("the parity-only variant exists for the toric example")
    n = _check_size(example, lattice, extra=len(lattice.edges) if incomplete else 0)
    b = len(lattice.edges)
    target = dense_peps_state(example, lattice, beta)
    bell = build_network(example, lattice, beta, insertion="bell")
    dist = pattern_distribution(example, lattice, beta, network=bell)
    parity = build_network(example, lattice, beta, insertion="parity") if incomplete else None
    offset = lattice.n_vertices
    gate = np.kron(np.outer([1, 1], [1, 1]) / 2, np.eye(2)) + np.kron(
        np.outer([1, -1], [1, -1]) / 2, PAULI_Z
    )
    children = np.random.SeedSequence(seed).spawn(trials)

    def one_trial(i: int) -> TrialResult:
        rng = np.random.default_rng(children[i])
        x, z, probability = _sample_pattern(dist, b, rng)
        if parity is None:
            pattern = InsertionPattern.from_bits(x, z)
            post = bell.contract(pattern.overrides(offset))
        else:
            z = np.zeros(b, dtype=np.uint8)
            pattern = InsertionPattern.from_bits(x, z)
            probability = float(np.sum(dist.joint[int(sum(int(v) << k for k, v in enumerate(x)))]))
            post = parity.contract({offset + e: _parity_node(int(x[e])) for e in range(b)})
            for e in range(b):
                ax = (n + e, e)
                post = np.moveaxis(
                    np.tensordot(gate.reshape(2, 2, 2, 2), post, axes=([2, 3], list(ax))),
                    (0, 1),
                    ax,
                )
        post = post / np.linalg.norm(post)
        plan = peps_corrections(example, lattice, x, z)
        corrected = _apply_correction(post, plan)
        if parity is None:
            fid = fidelity(target, corrected.reshape(-1))
        else:
            reduced = np.tensordot(target.conj(), corrected.reshape(2**n, -1), axes=([0], [0]))
            fid = float(np.vdot(reduced, reduced).real)
        return TrialResult(
            trial=i,
            record=pattern.labels,
            probability=probability,
            fidelity=fid,
            residual_class=0 if plan.correctable else plan.residual_class,
            correctable=plan.correctable,
        )

    if workers == 1:
        results = [one_trial(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_trial, range(trials)))

    report = ProtocolReport(
        name=f"{example}({beta:g}) on {lattice}",
        sites=n,
        boundary=lattice.topology,
        seed=seed,
        labels=list(PAULI_LABELS),
        trials=results,
    )
    logger.info(
        "%s: %d trials, min fidelity %.12f, %d uncorrectable",
        report.name,
        trials,
        report.min_fidelity,
        report.uncorrectable,
    )
    return report


# ---------------------------------------------------------------------------
# Parity laws
# ---------------------------------------------------------------------------


@dataclass
class ParityReport:
    example: str
    lattice: str
    samples: int
    violations: dict[str, int] = field(default_factory=dict)
    sectors: dict[str, int] = field(default_factory=dict)
    log: list[dict] = field(default_factory=list)

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    @property
    def passed(self) -> bool:
        return self.total_violations == 0

    def to_dict(self) -> dict:
        return {
            "example": self.example,
            "lattice": self.lattice,
            "samples": self.samples,
            "violations": self.violations,
            "sectors": self.sectors,
        }


def _constraints(lattice: PEPSLattice) -> dict[str, list[int]]:
    named = {f"plaquette{k}": face for k, face in enumerate(lattice.plaquettes())}
    for name, loop in zip(("winding-x", "winding-y"), lattice.winding_loops()):
        named[name] = loop
    return named


def parity_statistics(
    example: Example, lattice: PEPSLattice, samples: int, seed: int, beta: float = 1.0
) -> ParityReport:
    """Sample X patterns and count odd loops (GHZ) or tally charge sectors (toric)."""
    _check_size(example, lattice)
    dist = pattern_distribution(example, lattice, beta)
    b = len(lattice.edges)
    rng = np.random.default_rng(seed)
    constraints = _constraints(lattice) if example == "ghz" else {}
    violations: Counter[str] = Counter({name: 0 for name in constraints})
    sectors: Counter[str] = Counter()
    log: list[dict] = []
    for k in range(samples):
        x, _, _ = _sample_pattern(dist, b, rng)
        odd = [name for name, loop in constraints.items() if int(x[loop].sum()) % 2]
        violations.update(odd)
        if example == "toric":
            charge = sum(int(x[e.index]) for e in lattice.edges) % 2
            sector = "odd" if charge else "even"
        else:
            sector = "odd" if odd else "even"
        sectors[sector] += 1
        log.append(
            {"sample": k, "pattern": "".join(str(int(v)) for v in x), "odd": len(odd), "sector": sector}
        )
    report = ParityReport(
        example=example,
        lattice=str(lattice),
        samples=samples,
        violations=dict(violations),
        sectors=dict(sorted(sectors.items())),
        log=log,
    )
    logger.info("%s on %s: %d samples, %d violations", example, lattice, samples, report.total_violations)
    return report


@dataclass
class ForbiddenReport:
    max_forbidden: float
    min_allowed: float
    forbidden: int
    allowed: int


def forbidden_amplitudes(example: Example, lattice: PEPSLattice, beta: float = 1.0) -> ForbiddenReport:
    """Largest norm of a pattern the parity law forbids and smallest of one it allows.

    Norms are relative to the insertion-free network; the toric network forbids nothing.
    """
    _check_size(example, lattice)
    dist = pattern_distribution(example, lattice, beta)
    norms = np.sqrt(dist.weights[:, 0] / dist.weights[0, 0])
    b = len(lattice.edges)
    coboundary = _boundary_matrix(lattice, reference=False).T
    allowed = np.array(
        [example == "toric" or solve_gf2(coboundary, _bits(xi, b)) is not None for xi in range(2**b)]
    )
    return ForbiddenReport(
        max_forbidden=float(norms[~allowed].max(initial=0.0)),
        min_allowed=float(norms[allowed].min(initial=np.inf)),
        forbidden=int((~allowed).sum()),
        allowed=int(allowed.sum()),
    )
