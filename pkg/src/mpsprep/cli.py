"""Command-line front end: ``mpsprep {family,prepare,diagnose,peps,selftest}``.

Every output embeds the resolved configuration, so identical arguments give byte-identical
files. Exit codes:

    0  success
    1  invalid input (bad flags, config or files, out-of-domain values)
    2  infeasible spectrum
    3  not correctable (or a protocol run below its fidelity bar)
    4  diagnostics verdict Unknown
    5  dense-dimension cap exceeded
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bases import (
    UnitaryErrorBasis,
    clock_basis,
    conjugate_basis,
    pauli_basis,
    quaternion_transversal_basis,
)
from .config import RunConfig, parse_grid, resolve_config
from .diagnostics import certify_preparable
from .families import (
    InfeasibleSpectrumError,
    aklt_deformed_tensor,
    clock_tensor,
    correlation_length,
    flatten_labels,
    nice_basis_tensor,
    phase_diagram_point,
    random_aklt_deformation,
    spectrum_to_weights,
    standard_basis,
    tetrahedron_tensor,
    trajectory_sweep,
    weights_to_spectrum,
)
from .incomplete import incomplete_protocol
from .linalg import ConfigError, MpsprepError, ResourceError
from .mpo import mpo_apply
from .mps import (
    MPSTensor,
    SimplexWeights,
    UniformMPS,
    entanglement_data,
    random_tensor,
    transfer_matrix,
)
from .peps import PEPSLattice, parity_statistics, simulate_peps_protocol, verify_push_rules
from .protocol import NotCorrectable, ProtocolReport, run_protocol
from .selftest import run_selftest
from .serialize import (
    FormatError,
    basis_to_dict,
    csv_text,
    dumps,
    encode_complex,
    load_basis,
    load_tensor,
    tensor_to_dict,
    write_text,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_NOT_CORRECTABLE = 3
EXIT_UNKNOWN = 4
EXIT_RESOURCE = 5

PREPARE_TOL = 1e-8
PEPS_TOL = 1e-7
DEFAULT_SITES = 6

_CLOCK_RE = re.compile(r"^clock(\d+)$")


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------


def basis_from_spec(spec: str) -> UnitaryErrorBasis:
    """``pauli``, ``clockN``, ``quaternion``, ``conj:<spec>`` or a basis JSON file."""
    if spec.startswith("conj:"):
        return conjugate_basis(basis_from_spec(spec[5:]))
    if spec == "pauli":
        return pauli_basis()
    if spec == "quaternion":
        return quaternion_transversal_basis()
    if m := _CLOCK_RE.match(spec):
        return clock_basis(int(m.group(1)))
    if Path(spec).suffix == ".json" or Path(spec).exists():
        return load_basis(spec)
    raise ConfigError(f"unknown basis {spec!r}; use pauli, clockN, quaternion, conj:<basis> or a file")


def _weights_tensor(w: SimplexWeights) -> MPSTensor:
    return tetrahedron_tensor(w) if w.chi == 2 else clock_tensor(w)


def _chi_from_count(count: int, what: str) -> int:
    chi = math.isqrt(count)
    if chi < 2 or chi * chi != count:
        raise ConfigError(f"{what} needs chi^2 values for some chi >= 2, got {count}")
    return chi


@dataclass
class Source:
    """A tensor with whatever the descriptor knows about it."""

    tensor: MPSTensor
    weights: SimplexWeights | None = None
    basis: UnitaryErrorBasis | None = None
    extra: dict = field(default_factory=dict)


def resolve_source(cfg: RunConfig) -> Source:
    if cfg.tensor is not None:
        a = load_tensor(cfg.tensor)
        try:
            basis = load_basis(cfg.tensor)
        except FormatError:
            basis = None
        return Source(a, basis=basis)
    if cfg.point is not None:
        w = phase_diagram_point(cfg.point, cfg.beta)
        return Source(tetrahedron_tensor(w), weights=w)
    if cfg.trajectory is not None:
        w = phase_diagram_point(cfg.trajectory, cfg.beta)
        return Source(tetrahedron_tensor(w), weights=w)
    if cfg.lambdas is not None:
        chi = _chi_from_count(len(cfg.lambdas), "--lambda")
        w = SimplexWeights.from_flat(cfg.lambdas, chi=chi)
        return Source(_weights_tensor(w), weights=w)
    if cfg.spectrum is not None:
        chi = _chi_from_count(len(cfg.spectrum), "--spectrum")
        w = spectrum_to_weights(cfg.spectrum, chi)
        return Source(_weights_tensor(w), weights=w)
    if cfg.classes is not None:
        if cfg.basis is None:
            raise ConfigError("--classes needs --basis")
        basis = basis_from_spec(cfg.basis)
        return Source(nice_basis_tensor(basis, cfg.classes), basis=basis)
    if cfg.aklt_random:
        m = random_aklt_deformation(np.random.default_rng(cfg.seed))
        a, basis = aklt_deformed_tensor(m)
        return Source(a, basis=basis, extra={"deformation": encode_complex(m)})
    raise ConfigError("no tensor source given")


def _resolve_basis(cfg: RunConfig, source: Source) -> UnitaryErrorBasis:
    if cfg.basis is not None and cfg.classes is None:
        return basis_from_spec(cfg.basis)
    return source.basis or standard_basis(source.tensor.chi)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _finite_or_none(x: float) -> float | None:
    return None if math.isinf(x) else x


def _csv_with_config(cfg: RunConfig, rows: list[dict]) -> str:
    header = "# config: " + json.dumps(cfg.to_dict(), sort_keys=True)
    return header + "\n" + csv_text(rows)


def _emit(cfg: RunConfig, text: str, summary: str) -> None:
    if cfg.output is None:
        sys.stdout.write(text)
        return
    path = write_text(cfg.output, text)
    print(f"{summary} -> {path}")


def _report_payload(cfg: RunConfig, report: ProtocolReport) -> str:
    if cfg.format == "csv":
        return _csv_with_config(cfg, report.rows())
    return dumps({"config": cfg.to_dict(), "report": report.to_dict()})


def analyze(source: Source, sites: int) -> dict:
    """Transfer spectrum, correlation lengths and entanglement of a source tensor."""
    a = source.tensor
    measured = transfer_matrix(a).eigenvalues()
    out: dict = {"spectrum": encode_complex(measured)}
    if source.weights is not None:
        predicted = flatten_labels(weights_to_spectrum(source.weights))
        out["weights"] = source.weights.flat().tolist()
        out["predictedSpectrum"] = encode_complex(predicted)
        subleading = predicted[1:]
    else:
        subleading = measured[1:]
    out["correlationLengths"] = [_finite_or_none(correlation_length(mu)) for mu in subleading]
    try:
        chain = UniformMPS(tensor=a, sites=sites, boundary="dangling")
        out["entanglement"] = {
            "sites": sites,
            "bond": entanglement_data(chain, sites // 2).tolist(),
            "site": entanglement_data(chain, ("site", 0)).tolist(),
        }
    except ResourceError as exc:
        logger.info("skipping entanglement data: %s", exc)
        out["entanglement"] = None
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_family(cfg: RunConfig) -> int:
    sites = cfg.n or DEFAULT_SITES
    if cfg.trajectory is not None and cfg.beta_grid is not None:
        rows = trajectory_sweep(cfg.trajectory, parse_grid(cfg.beta_grid), sites=sites)
        _emit(cfg, _csv_with_config(cfg, rows), f"{len(rows)} rows along {cfg.trajectory}")
        return EXIT_OK
    source = resolve_source(cfg)
    payload = {
        "config": cfg.to_dict(),
        "tensor": tensor_to_dict(source.tensor),
        "analysis": analyze(source, sites),
    }
    if source.basis is not None:
        payload["basis"] = basis_to_dict(source.basis)
    payload.update(source.extra)
    _emit(cfg, dumps(payload), f"{source.tensor.name} (d={source.tensor.d}, chi={source.tensor.chi})")
    return EXIT_OK


def _protocol_exit(report: ProtocolReport, allow_uncorrectable: bool) -> int:
    ok = report.min_fidelity >= 1 - PREPARE_TOL and (allow_uncorrectable or report.uncorrectable == 0)
    return EXIT_OK if ok else EXIT_NOT_CORRECTABLE


def cmd_prepare(cfg: RunConfig) -> int:
    sites = cfg.n or DEFAULT_SITES
    if cfg.incomplete:
        b = load_tensor(cfg.tensor) if cfg.tensor is not None else None
        if b is None and not cfg.ising:
            raise ConfigError("--incomplete needs --ising --beta or --tensor")
        report = incomplete_protocol(
            b=b, n=sites, beta=cfg.beta, trials=cfg.trials, seed=cfg.seed, workers=cfg.workers
        )
        allow = False
    elif cfg.mpo is not None:
        a = (
            load_tensor(cfg.tensor)
            if cfg.tensor is not None
            else random_tensor(2, 2, np.random.default_rng(cfg.seed))
        )
        psi = UniformMPS(tensor=a, sites=sites, boundary="periodic")
        report = mpo_apply(psi, seed=cfg.seed, resource=cfg.mpo, trials=cfg.trials, workers=cfg.workers)
        allow = False
    else:
        source = resolve_source(cfg)
        basis = _resolve_basis(cfg, source)
        report = run_protocol(
            source.tensor,
            sites,
            basis,
            trials=cfg.trials,
            seed=cfg.seed,
            boundary=cfg.boundary,
            direction=cfg.direction,
            workers=cfg.workers,
        )
        allow = cfg.boundary == "periodic"
    _emit(
        cfg,
        _report_payload(cfg, report),
        f"{report.name}: {len(report.trials)} trials, min fidelity {report.min_fidelity:.12f}",
    )
    return _protocol_exit(report, allow)


def cmd_diagnose(cfg: RunConfig) -> int:
    source = resolve_source(cfg)
    cert = certify_preparable(
        source.tensor,
        restarts=cfg.restarts,
        tol=cfg.tol,
        seed=cfg.seed,
        block=cfg.block,
        workers=cfg.workers,
    )
    payload = {"config": cfg.to_dict(), "certificate": cert.to_dict()}
    _emit(cfg, dumps(payload), f"{source.tensor.name}: {cert.verdict}")
    return EXIT_OK if cert.certified else EXIT_UNKNOWN


def cmd_peps(cfg: RunConfig) -> int:
    lattice = PEPSLattice.parse(cfg.lattice)
    beta = 1.0 if cfg.beta is None else cfg.beta
    report = simulate_peps_protocol(
        cfg.example,
        lattice,
        beta,
        trials=cfg.trials,
        seed=cfg.seed,
        incomplete=cfg.incomplete,
        workers=cfg.workers,
    )
    parity = parity_statistics(cfg.example, lattice, cfg.samples, seed=cfg.seed, beta=beta)
    rules = verify_push_rules(cfg.example, beta)
    if cfg.format == "csv":
        text = _csv_with_config(cfg, report.rows())
    else:
        text = dumps(
            {
                "config": cfg.to_dict(),
                "protocol": report.to_dict(),
                "parity": parity.to_dict(),
                "pushRules": {"residuals": rules.residuals, "maxResidual": rules.max_residual},
            }
        )
    _emit(
        cfg,
        text,
        f"{report.name}: min fidelity {report.min_fidelity:.12f}, "
        f"{parity.total_violations} parity violations",
    )
    ok = report.min_fidelity >= 1 - PEPS_TOL and parity.passed and rules.passed()
    return EXIT_OK if ok else EXIT_NOT_CORRECTABLE


def cmd_selftest(cfg: RunConfig) -> int:
    results = run_selftest(
        Path(cfg.suite) if cfg.suite else None, quick=cfg.quick, seed=cfg.seed, verbose=True
    )
    print(f"\n{'=' * 60}")
    print(f"Checks: {results.total}  Passed: {results.passed}  Failed: {results.failed}")
    if results.failures:
        print("\nFailures:")
        for r in results.failures:
            print(f"  [{r.spec.id}] {r.spec.name}")
            if r.error:
                print(f"    {r.error}")
        return EXIT_INPUT
    print("All checks passed.")
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "family": cmd_family,
    "prepare": cmd_prepare,
    "diagnose": cmd_diagnose,
    "peps": cmd_peps,
    "selftest": cmd_selftest,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_sources(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("tensor source")
    g.add_argument("--point", help="named point: trivial, cluster, aklt, ghz, neel")
    g.add_argument("--trajectory", help="deformedCluster, clusterToGHZ or deformedAKLT (with --beta)")
    g.add_argument("--lambda", dest="lambdas", help="comma-separated weights in label order")
    g.add_argument("--spectrum", help="comma-separated transfer eigenvalues in label order")
    g.add_argument("--classes", help="class weights label=w,... for --basis")
    g.add_argument("--basis", help="pauli, clockN, quaternion, conj:<basis> or a basis JSON file")
    g.add_argument("--tensor", help="tensor JSON file")
    g.add_argument("--aklt-random", action="store_true", help="AKLT with a random deformation")
    g.add_argument("--beta", type=float)
    g.add_argument("--n", type=int, help=f"number of sites (default {DEFAULT_SITES})")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--config", help="key=value file; flags win on conflict")
    common.add_argument("--seed", type=int)
    common.add_argument("-o", "--output", help="write here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--workers", type=int)

    parser = argparse.ArgumentParser(
        prog="mpsprep", description="Measurement-preparable tensor network states."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    family = sub.add_parser("family", parents=[common], help="build a family tensor and analyze it")
    _add_sources(family)
    family.add_argument("--beta-grid", help="inclusive start:stop:step for --trajectory sweeps")

    prepare = sub.add_parser("prepare", parents=[common], help="simulate the measurement protocol")
    _add_sources(prepare)
    prepare.add_argument("--trials", type=int)
    prepare.add_argument("--boundary", choices=["dangling", "periodic"])
    prepare.add_argument("--direction", choices=["right", "left"])
    prepare.add_argument("--incomplete", action="store_true", help="Z-only measurements")
    prepare.add_argument("--ising", action="store_true", help="Ising split tensor (with --incomplete)")
    prepare.add_argument("--mpo", choices=["cluster", "bell"], help="apply an MPO by measurement")

    diagnose = sub.add_parser("diagnose", parents=[common], help="search for an error basis")
    _add_sources(diagnose)
    diagnose.add_argument("--restarts", type=int)
    diagnose.add_argument("--tol", type=float)
    diagnose.add_argument("--block", type=int, help="intersect solution spaces of 1..k-site blocks")

    peps = sub.add_parser("peps", parents=[common], help="2D protocol and parity statistics")
    peps.add_argument("--example", choices=["toric", "ghz"])
    peps.add_argument("--lattice", help="LxxLy-torus or LxxLy-open, e.g. 2x2-torus")
    peps.add_argument("--beta", type=float)
    peps.add_argument("--trials", type=int)
    peps.add_argument("--samples", type=int)
    peps.add_argument("--incomplete", action="store_true", help="ZZ-parity edge measurements")

    selftest = sub.add_parser("selftest", parents=[common], help="run the acceptance suite")
    selftest.add_argument("--quick", action="store_true")
    selftest.add_argument("--suite", help="alternative acceptance YAML")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> None:
    """CLI entry point for ``mpsprep``."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "verbose", "config")}
    try:
        cfg = resolve_config(args.command, flags, args.config)
        code = COMMANDS[cfg.command](cfg)
    except InfeasibleSpectrumError as exc:
        print(f"Error: infeasible spectrum: {exc}", file=sys.stderr)
        if exc.weights is not None:
            print(f"  weights: {np.array2string(np.asarray(exc.weights), precision=6)}", file=sys.stderr)
        code = EXIT_INFEASIBLE
    except NotCorrectable as exc:
        where = ", ".join(
            f"{k} {v}" for k, v in (("site", exc.site), ("bond", exc.bond)) if v is not None
        )
        print(f"Error: not correctable{f' at {where}' if where else ''}: {exc}", file=sys.stderr)
        code = EXIT_NOT_CORRECTABLE
    except ResourceError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        code = EXIT_RESOURCE
    except MpsprepError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    sys.exit(code)


if __name__ == "__main__":  # pragma: no cover
    main()
