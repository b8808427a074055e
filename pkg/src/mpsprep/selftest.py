"""Acceptance suite behind ``mpsprep selftest``.

The checks and their parameters live in the packaged ``acceptance.yaml``; each entry names a
function registered here. Every check returns ``(passed, detail)`` and never raises: an
exception counts as a failure and is reported with the check.

Example:
    from mpsprep.selftest import run_selftest

    results = run_selftest(quick=True, only=[2])
    assert results.all_passed
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bases import PAULIS, aligned_residual, clock_basis, pauli_basis
from .config import parse_grid
from .diagnostics import certify_preparable
from .families import (
    InfeasibleSpectrumError,
    aklt_deformed_tensor,
    clock_tensor,
    correlation_lengths,
    ghz_cat_state,
    phase_diagram_point,
    random_aklt_deformation,
    spectrum_to_weights,
    tetrahedron_tensor,
    trajectory_sweep,
    weights_to_spectrum,
)
from .incomplete import incomplete_protocol
from .linalg import ConfigError, fidelity, random_unitary, unitarity_residual
from .mpo import mpo_apply
from .mps import (
    MPSTensor,
    SimplexWeights,
    UniformMPS,
    dense_state,
    entanglement_data,
    random_tensor,
    transfer_matrix,
)
from .peps import (
    PEPSLattice,
    dense_peps_state,
    forbidden_amplitudes,
    parity_statistics,
    simulate_peps_protocol,
    toric_oracle,
    toric_stabilizer_expectations,
)
from .protocol import NotCorrectable, construct_correction_unitary, push_residual, run_protocol

logger = logging.getLogger(__name__)

SUITE_PATH = Path(__file__).with_name("acceptance.yaml")

CheckFn = Callable[[dict, np.random.Generator], tuple[bool, str]]
CHECKS: dict[str, CheckFn] = {}


def check(name: str) -> Callable[[CheckFn], CheckFn]:
    def register(fn: CheckFn) -> CheckFn:
        CHECKS[name] = fn
        return fn

    return register


@dataclass
class CheckSpec:
    id: int
    name: str
    check: str
    params: dict = field(default_factory=dict)


@dataclass
class CheckResult:
    spec: CheckSpec
    passed: bool
    detail: str = ""
    seconds: float = 0.0
    error: str | None = None


@dataclass
class SelftestResults:
    results: list[CheckResult] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> int:
        return sum(1 for r in self.results if r.passed)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.results if not r.passed)

    @property
    def total(self) -> int:
        return len(self.results)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if not r.passed]


def load_suite(path: Path | None = None, quick: bool = False) -> list[CheckSpec]:
    path = path or SUITE_PATH
    if not path.exists():
        raise ConfigError(f"acceptance suite not found: {path}")
    data = yaml.safe_load(path.read_text())
    if not isinstance(data, list):
        raise ConfigError(f"expected a list of checks in {path}, got {type(data).__name__}")
    specs = []
    for entry in data:
        if not isinstance(entry, dict) or not {"id", "name", "check"} <= entry.keys():
            raise ConfigError(f"check entries need 'id', 'name' and 'check': {entry!r}")
        if entry["check"] not in CHECKS:
            raise ConfigError(f"unknown check {entry['check']!r}")
        params = dict(entry.get("params") or {})
        if quick:
            params.update(entry.get("quick") or {})
        specs.append(
            CheckSpec(id=int(entry["id"]), name=str(entry["name"]), check=entry["check"], params=params)
        )
    return specs


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


@check("tetrahedron_determinism")
def _tetrahedron_determinism(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    worst = 1.0
    for k in range(p["points"]):
        w = SimplexWeights.from_flat(rng.dirichlet(np.ones(4)))
        report = run_protocol(
            tetrahedron_tensor(w), p["sites"], pauli_basis(), trials=p["trials"], seed=k, workers=1
        )
        worst = min(worst, report.min_fidelity)
    return worst >= 1 - p["tol"], f"min fidelity {worst:.15f} over {p['points']} points"


@check("aklt_analytics")
def _aklt_analytics(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    a = tetrahedron_tensor(phase_diagram_point("aklt"))
    expected = np.array([1.0, -1 / 3, -1 / 3, -1 / 3])
    measured = np.sort(transfer_matrix(a).eigenvalues().real)[::-1]
    spectrum_err = float(np.max(np.abs(measured - np.sort(expected)[::-1])))
    xi = float(np.max(correlation_lengths(weights_to_spectrum(phase_diagram_point("aklt")))))
    xi_err = abs(xi - 1 / math.log(3))
    schmidt = entanglement_data(UniformMPS(tensor=a, sites=p["sites"], boundary="dangling"), p["sites"] // 2)
    ent_err = float(np.max(np.abs(schmidt - 0.5)))
    passed = spectrum_err < p["spectrum_tol"] and xi_err < p["spectrum_tol"] and ent_err < p["entanglement_tol"]
    return passed, f"spectrum {spectrum_err:.1e}, xi {xi_err:.1e}, schmidt {ent_err:.1e}"


def _match_error(requested: np.ndarray, measured: np.ndarray) -> float:
    return float(max(np.min(np.abs(measured - mu)) for mu in requested))


@check("spectrum_round_trip")
def _spectrum_round_trip(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    round_trip = measured_err = 0.0
    for chi in p["chis"]:
        for _ in range(p["draws"]):
            w = SimplexWeights(chi=chi, values=rng.dirichlet(np.ones(chi * chi)).reshape(chi, chi))
            mu = weights_to_spectrum(w)
            again = weights_to_spectrum(spectrum_to_weights(mu, chi))
            round_trip = max(round_trip, float(np.max(np.abs(again - mu))))
            a = tetrahedron_tensor(w) if chi == 2 else clock_tensor(w)
            measured_err = max(
                measured_err, _match_error(mu.reshape(-1), transfer_matrix(a).eigenvalues())
            )
    try:
        spectrum_to_weights([1.0, -0.9, -0.9, -0.9])
        rejected = False
    except InfeasibleSpectrumError:
        rejected = True
    passed = round_trip < p["round_trip_tol"] and measured_err < p["measured_tol"] and rejected
    return passed, f"round trip {round_trip:.1e}, measured {measured_err:.1e}, infeasible rejected {rejected}"


def _periodic(w: SimplexWeights, n: int) -> np.ndarray:
    return dense_state(UniformMPS(tensor=tetrahedron_tensor(w), sites=n, boundary="periodic")).vector


@check("trajectory_endpoints")
def _trajectory_endpoints(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    n, beta = p["sites"], p["endpoint_beta"]
    product = np.zeros(4**n)
    product[0] = 1.0
    f_product = fidelity(product, _periodic(phase_diagram_point("deformedCluster", beta), n))
    f_cat = fidelity(
        ghz_cat_state(n, labels=(0, 2)), _periodic(phase_diagram_point("clusterToGHZ", beta), n)
    )

    m = p["oracle_sites"]
    aklt = _periodic(phase_diagram_point("aklt"), m)
    oracle_err = 0.0
    for b in p["oracle_betas"]:
        local = np.array([0.0, math.exp(b), math.exp(b), 1.0])
        deform = local
        for _ in range(m - 1):
            deform = np.kron(deform, local)
        oracle = deform * aklt
        oracle_err = max(
            oracle_err, 1 - fidelity(oracle, _periodic(phase_diagram_point("deformedAKLT", b), m))
        )

    xi = [row["xi_max"] for row in trajectory_sweep("deformedAKLT", parse_grid(p["xi_grid"]), sites=m)]
    increasing = all(b > a for a, b in zip(xi, xi[1:]))
    passed = f_product >= 0.999 and f_cat >= 0.999 and oracle_err < 1e-9 and increasing
    return passed, (
        f"product {f_product:.6f}, cat {f_cat:.6f}, aklt oracle {oracle_err:.1e}, "
        f"xi increasing {increasing}"
    )


@check("correction_theorem")
def _correction_theorem(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(p["pairs"]):
        frame = random_unitary(2, rng)
        lam = rng.dirichlet(np.ones(4))
        data = np.stack([math.sqrt(x) * frame @ s @ frame.conj().T for x, s in zip(lam, PAULIS)])
        a = MPSTensor(data=data).with_physical(random_unitary(4, rng))
        v = frame @ PAULIS[int(rng.integers(0, 4))] @ frame.conj().T
        u = construct_correction_unitary(a, v, v.conj().T)
        worst = max(worst, unitarity_residual(u), push_residual(a, u, v, v.conj().T))

    rejected = 0
    for _ in range(p["pairs"]):
        a = random_tensor(4, 2, rng)
        v = random_unitary(2, rng)
        try:
            construct_correction_unitary(a, v, v.conj().T)
        except NotCorrectable:
            rejected += 1
    passed = worst < p["tol"] and rejected == p["pairs"]
    return passed, f"worst residual {worst:.1e}, rejected {rejected}/{p['pairs']}"


@check("aklt_random_deformations")
def _aklt_random(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    certified = 0
    worst = 1.0
    for k in range(p["draws"]):
        a, basis = aklt_deformed_tensor(random_aklt_deformation(rng))
        cert = certify_preparable(a, restarts=p["restarts"], seed=k, workers=1)
        certified += int(cert.certified)
        report = run_protocol(a, p["sites"], basis, trials=p["trials"], seed=k, workers=1)
        worst = min(worst, report.min_fidelity)
    passed = certified == p["draws"] and worst >= 1 - p["tol"]
    return passed, f"certified {certified}/{p['draws']}, min fidelity {worst:.15f}"


@check("toric_peps")
def _toric_peps(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    lattice = PEPSLattice.parse(p["lattice"])
    oracle_err = 0.0
    worst = worst_incomplete = 1.0
    for k, beta in enumerate(p["betas"]):
        state = dense_peps_state("toric", lattice, beta)
        oracle_err = max(oracle_err, 1 - fidelity(toric_oracle(lattice, beta), state))
        report = simulate_peps_protocol("toric", lattice, beta, p["trials"], seed=k, workers=1)
        worst = min(worst, report.min_fidelity)
        partial = simulate_peps_protocol(
            "toric", lattice, beta, p["trials"], seed=k, incomplete=True, workers=1
        )
        worst_incomplete = min(worst_incomplete, partial.min_fidelity)
    stab = toric_stabilizer_expectations(
        dense_peps_state("toric", lattice, p["stabilizer_beta"]), lattice
    )
    lowest = min(stab["star"] + stab["plaquette"])
    passed = (
        oracle_err < p["oracle_tol"]
        and worst >= 1 - p["tol"]
        and worst_incomplete >= 1 - p["tol"]
        and lowest >= 0.99
    )
    return passed, (
        f"oracle {oracle_err:.1e}, min fidelity {worst:.12f}, parity-only {worst_incomplete:.12f}, "
        f"lowest stabilizer {lowest:.4f}"
    )


@check("ghz_parity")
def _ghz_parity(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    lattice = PEPSLattice.parse(p["lattice"])
    stats = parity_statistics("ghz", lattice, p["samples"], seed=int(rng.integers(2**31)))
    amps = forbidden_amplitudes("ghz", lattice)
    passed = stats.passed and amps.max_forbidden < p["amplitude_tol"]
    return passed, (
        f"{stats.total_violations} violations in {stats.samples} samples, "
        f"largest forbidden amplitude {amps.max_forbidden:.1e} over {amps.forbidden} patterns"
    )


@check("diagnostics_families")
def _diagnostics_families(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    aligned = 0.0
    certified = 0
    for k in range(p["draws"]):
        for chi, reference in ((2, pauli_basis()), (3, clock_basis(3))):
            w = SimplexWeights(chi=chi, values=rng.dirichlet(np.ones(chi * chi)).reshape(chi, chi))
            a = tetrahedron_tensor(w) if chi == 2 else clock_tensor(w)
            cert = certify_preparable(a, restarts=p["restarts"], seed=k, workers=1)
            if cert.certified:
                certified += 1
                aligned = max(aligned, aligned_residual(cert.basis, reference))
    false_certified = 0
    for k in range(p["random_tensors"]):
        cert = certify_preparable(random_tensor(4, 2, rng), restarts=p["restarts"], seed=k, workers=1)
        false_certified += int(cert.certified)
    passed = certified == 2 * p["draws"] and aligned < p["aligned_tol"] and false_certified == 0
    return passed, (
        f"certified {certified}/{2 * p['draws']} (aligned {aligned:.1e}), "
        f"random tensors certified {false_certified}/{p['random_tensors']}"
    )


@check("incomplete_ising")
def _incomplete_ising(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    worst = 1.0
    for k, beta in enumerate(p["betas"]):
        report = incomplete_protocol(n=p["sites"], beta=beta, trials=p["trials"], seed=k, workers=1)
        worst = min(worst, report.min_fidelity)
    return worst >= 1 - p["tol"], f"min fidelity {worst:.15f}"


@check("mpo_cluster")
def _mpo_cluster(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    worst = 1.0
    for k in range(p["inputs"]):
        psi = UniformMPS(tensor=random_tensor(2, 2, rng), sites=p["qubits"], boundary="periodic")
        worst = min(worst, mpo_apply(psi, seed=k, resource="cluster", workers=1).min_fidelity)
    return worst >= 1 - p["tol"], f"min fidelity {worst:.15f} over {p['inputs']} inputs"


@check("runtime")
def _runtime(p: dict, rng: np.random.Generator) -> tuple[bool, str]:
    elapsed = p.get("elapsed", 0.0)
    return elapsed < p["budget_seconds"], f"{elapsed:.1f}s of {p['budget_seconds']}s"


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def run_selftest(
    path: Path | None = None,
    quick: bool = False,
    seed: int = 0,
    only: list[int] | None = None,
    verbose: bool = False,
) -> SelftestResults:
    specs = load_suite(path, quick)
    if only is not None:
        specs = [s for s in specs if s.id in only]
    results = SelftestResults()
    start = time.perf_counter()
    for spec in specs:
        params = dict(spec.params)
        if spec.check == "runtime":
            params["elapsed"] = time.perf_counter() - start
        rng = np.random.default_rng([seed, spec.id])
        t0 = time.perf_counter()
        try:
            passed, detail = CHECKS[spec.check](params, rng)
            result = CheckResult(spec=spec, passed=bool(passed), detail=detail)
        except Exception as exc:
            logger.debug("check %s raised", spec.name, exc_info=True)
            result = CheckResult(spec=spec, passed=False, error=f"{type(exc).__name__}: {exc}")
        result.seconds = time.perf_counter() - t0
        results.results.append(result)
        logger.info("check %d %s: %s", spec.id, spec.name, "PASS" if result.passed else "FAIL")
        if verbose:
            status = "PASS" if result.passed else "FAIL"
            msg = f"  {status}  [{spec.id}] {spec.name} ({result.seconds:.1f}s)"
            if result.detail:
                msg += f" -- {result.detail}"
            if result.error:
                msg += f" -- {result.error}"
            print(msg)
    results.seconds = time.perf_counter() - start
    return results
