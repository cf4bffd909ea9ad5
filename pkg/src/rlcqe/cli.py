"""Command-line entry point: bond scans, time evolution, FCI tables, dumps.

Exit codes: 0 on success, 1 when a run finishes but misses its accuracy
target, 2 for usage errors. Scans and evolutions write CSV plus a JSON
sidecar with the fully resolved configuration, so reruns with the same
flags and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .agent import TrainConfig
from .qubits import exact_eigensystem
from .solvers import (
    EvolutionResult,
    ScanPoint,
    SolverError,
    build_system,
    evolve,
    random_superposition,
    scan,
    write_evolution_csv,
    write_operator_json,
    write_scan_csv,
)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2

ENV_OUTPUT_DIR = "RLCQE_OUTPUT_DIR"
ENV_JOBS = "RLCQE_JOBS"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    molecule: str
    rmin: float = 0.7
    rmax: float = 0.7
    points: int = 1
    k: int = 4
    weights: tuple[float, ...] = (9.0, 9.0, 1.0, 1.0)
    max_steps: int = 5
    episodes: int = 3000
    lam: float = 0.5
    seed: int = 0
    policy: str = "greedy"
    t_max: float = 20.0
    dt: float = 0.05
    tolerance: float = 1e-3
    sz_filter: bool = True
    subspace_diag: bool = False
    jobs: int = 1
    output_dir: str = "."
    bond: float = 0.7
    fidelity_tolerance: float = 1e-6
    version: str = field(default=__version__)

    def validate(self) -> None:
        if self.molecule not in ("h2", "h3p"):
            raise UsageError("--molecule must be h2 or h3p")
        if self.points < 1:
            raise UsageError("--points must be >= 1")
        if self.rmin > self.rmax:
            raise UsageError("--rmin must not exceed --rmax")
        if any(w <= 0 for w in self.weights):
            raise UsageError("--weights entries must be positive")
        if len(self.weights) != self.k:
            raise UsageError("--weights length must equal --k")
        if self.dt <= 0:
            raise UsageError("--dt must be positive")
        if self.max_steps < 1:
            raise UsageError("--max-steps must be >= 1")

    def bond_grid(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.rmin])
        return np.linspace(self.rmin, self.rmax, self.points)


def _parse_weights(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--weights must be comma-separated numbers, got {text!r}") from exc
    if not values:
        raise UsageError("--weights must not be empty")
    return values


def _write_sidecar(config: RunConfig, path: str, command: str) -> None:
    doc = {"command": command, "config": asdict(config)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _output_path(config: RunConfig, name: str) -> str:
    os.makedirs(config.output_dir, exist_ok=True)
    return os.path.join(config.output_dir, name)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_scan(config: RunConfig) -> int:
    config.validate()
    train_config = TrainConfig(
        episodes=config.episodes,
        lam=config.lam,
        seed=config.seed,
        max_steps=config.max_steps,
    )
    points = scan(
        config.molecule,
        config.bond_grid(),
        config.k,
        config.weights,
        step_budget=config.max_steps,
        policy=config.policy,
        lam=config.lam,
        subspace_diag=config.subspace_diag,
        sz_filter=config.sz_filter,
        train_config=train_config,
        jobs=config.jobs,
    )
    csv_path = _output_path(config, "scan.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        write_scan_csv(fh, points)
    with open(_output_path(config, "scan_operators.json"), "w", encoding="utf-8") as fh:
        write_operator_json(fh, points)
    _write_sidecar(config, _output_path(config, "scan_config.json"), "scan")

    failures = []
    for pt in points:
        if pt.result is None:
            failures.append(f"{pt.bond_angstrom:.4f} A: {pt.error}")
        elif pt.result.max_abs_error > config.tolerance:
            failures.append(
                f"{pt.bond_angstrom:.4f} A: max |E - E_exact| = "
                f"{pt.result.max_abs_error:.3e} > {config.tolerance:.1e}"
            )
    if failures:
        print(f"scan: {len(failures)} of {len(points)} geometries failed tolerance:")
        for line in failures:
            print("  " + line)
        return EXIT_TOLERANCE
    print(f"scan: {len(points)} geometries within {config.tolerance:.1e} Hartree -> {csv_path}")
    return EXIT_OK


def cmd_evolve(config: RunConfig) -> int:
    config.validate()
    if config.policy != "greedy":
        raise UsageError("--policy greedy is the only evolution policy wired to the CLI")
    system = build_system(config.molecule, config.bond, sz_filter=config.sz_filter)
    csv_path = _output_path(config, "evolve.csv")
    if config.t_max <= 0:
        with open(csv_path, "w", encoding="utf-8") as fh:
            write_evolution_csv(
                fh,
                EvolutionResult(
                    times=np.array([]), step_counts=[], final_fidelities=[],
                    fidelity_traces=[], energies=[], reference_fidelities=[],
                    failed_steps=0, step_budget=config.max_steps,
                ),
            )
        _write_sidecar(config, _output_path(config, "evolve_config.json"), "evolve")
        print(f"evolve: empty horizon -> {csv_path}")
        return EXIT_OK
    coeffs = random_superposition(system, config.k, config.seed)
    result = evolve(
        system,
        coeffs,
        t_max=config.t_max,
        dt=config.dt,
        step_budget=config.max_steps,
        policy="greedy",
        fidelity_tolerance=config.fidelity_tolerance,
    )
    with open(csv_path, "w", encoding="utf-8") as fh:
        write_evolution_csv(fh, result)
    _write_sidecar(config, _output_path(config, "evolve_config.json"), "evolve")
    if result.failed_steps:
        print(
            f"evolve: {result.failed_steps} of {len(result.step_counts)} steps "
            f"missed fidelity {1 - config.fidelity_tolerance}"
        )
        return EXIT_TOLERANCE
    print(
        f"evolve: {len(result.step_counts)} steps, max operators "
        f"{result.max_step_count} -> {csv_path}"
    )
    return EXIT_OK


def cmd_fci(config: RunConfig) -> int:
    config.validate()
    system = build_system(config.molecule, config.bond)
    vals, _ = exact_eigensystem(system.hamiltonian, system.n_electrons, system.sz)
    print(f"# {config.molecule} at {config.bond} A, sector N={system.n_electrons}, Sz={system.sz}")
    print("index,energy_hartree")
    for i, v in enumerate(vals):
        print(f"{i},{v:.12f}")
    return EXIT_OK


def cmd_dump_integrals(config: RunConfig, hamiltonian: bool, out: str | None) -> int:
    config.validate()
    system = build_system(config.molecule, config.bond)
    ints = system.integrals

    def roundtrip(arr):
        return [float(f"{x:.17g}") for x in np.asarray(arr, dtype=float).ravel()]

    doc = {
        "n_spatial": ints.n_spatial,
        "S": roundtrip(ints.S),
        "T": roundtrip(ints.T),
        "V": roundtrip(ints.V),
        "eri": roundtrip(ints.eri),
        "e_nuc": float(f"{ints.e_nuc:.17g}"),
    }
    if hamiltonian:
        doc["hamiltonian_real"] = roundtrip(system.hamiltonian.matrix.real)
        doc["hamiltonian_imag"] = roundtrip(system.hamiltonian.matrix.imag)
        doc["n_qubits"] = system.hamiltonian.n_qubits
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"dump-integrals -> {out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--molecule", required=True, choices=["h2", "h3p"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--max-steps", type=int, default=5)
    p.add_argument("--policy", choices=["greedy", "dqn"], default="greedy")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--weights", type=str, default="9,9,1,1")
    p.add_argument("--no-sz-filter", action="store_true",
                   help="keep spin-changing operators in the action pool")
    p.add_argument("-o", "--output", type=str, default=None,
                   help=f"output directory (default . or ${ENV_OUTPUT_DIR})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlcqe",
        description="Excited states and real-time dynamics of H2/H3+ via "
        "reinforcement-learning-selected operator sequences",
    )
    parser.add_argument("--version", action="version", version=f"rlcqe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="potential-energy scan over a bond grid")
    _add_common(p)
    p.add_argument("--rmin", type=float, required=True)
    p.add_argument("--rmax", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--episodes", type=int, default=3000)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--subspace-diag", action="store_true")
    p.add_argument("--jobs", type=int, default=None)

    p = sub.add_parser("evolve", help="constant-depth real-time propagation")
    _add_common(p)
    p.add_argument("--bond", type=float, required=True)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--fidelity-tolerance", type=float, default=1e-6)

    p = sub.add_parser("fci", help="exact sector eigenvalues")
    p.add_argument("--molecule", required=True, choices=["h2", "h3p"])
    p.add_argument("--bond", type=float, required=True)

    p = sub.add_parser("dump-integrals", help="emit integral JSON for one geometry")
    p.add_argument("--molecule", required=True, choices=["h2", "h3p"])
    p.add_argument("--bond", type=float, required=True)
    p.add_argument("--hamiltonian", action="store_true",
                   help="include the dense qubit Hamiltonian")
    p.add_argument("-o", "--output", type=str, default=None)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    output_dir = getattr(args, "output", None) or os.environ.get(ENV_OUTPUT_DIR, ".")
    jobs = getattr(args, "jobs", None)
    if jobs is None:
        jobs = int(os.environ.get(ENV_JOBS, "1"))
    cfg = RunConfig(
        molecule=args.molecule,
        seed=getattr(args, "seed", 0),
        lam=getattr(args, "lam", 0.5),
        max_steps=getattr(args, "max_steps", 5),
        policy=getattr(args, "policy", "greedy"),
        k=getattr(args, "k", 4),
        weights=_parse_weights(getattr(args, "weights", "9,9,1,1")),
        sz_filter=not getattr(args, "no_sz_filter", False),
        output_dir=output_dir,
        jobs=jobs,
        rmin=getattr(args, "rmin", getattr(args, "bond", 0.7)),
        rmax=getattr(args, "rmax", getattr(args, "bond", 0.7)),
        points=getattr(args, "points", 1),
        episodes=getattr(args, "episodes", 3000),
        tolerance=getattr(args, "tolerance", 1e-3),
        subspace_diag=getattr(args, "subspace_diag", False),
        bond=getattr(args, "bond", 0.7),
        t_max=getattr(args, "tmax", 20.0),
        dt=getattr(args, "dt", 0.05),
        fidelity_tolerance=getattr(args, "fidelity_tolerance", 1e-6),
    )
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "scan":
            return cmd_scan(config)
        if args.command == "evolve":
            return cmd_evolve(config)
        if args.command == "fci":
            return cmd_fci(config)
        if args.command == "dump-integrals":
            return cmd_dump_integrals(config, args.hamiltonian, args.output)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
