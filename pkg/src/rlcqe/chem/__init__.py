"""Self-contained STO-6G electronic-structure inputs for H2 and linear H3+."""

from __future__ import annotations

import numpy as np

from .basis import (
    ANGSTROM_PER_BOHR,
    BOHR_PER_ANGSTROM,
    BasisError,
    ContractedSOrbital,
    hydrogen_sto6g_shell,
    load_basis_file,
    parse_basis_shells,
    primitive_norm,
)
from .integrals import (
    Geometry,
    GeometryError,
    IntegralSet,
    boys_f0,
    build_integrals,
    nuclear_repulsion,
    primitive_eri,
    primitive_kinetic,
    primitive_nuclear,
    primitive_overlap,
    primitive_s_integrals,
)
from .scf import (
    ScfError,
    ScfResult,
    SpinOrbitalIntegrals,
    hf_energy_from_spin_orbitals,
    run_rhf,
    spin_orbital_integrals,
)

MOLECULES = ("h2", "h3p")


def h2_geometry(bond_angstrom: float) -> Geometry:
    r = bond_angstrom * BOHR_PER_ANGSTROM
    return Geometry(
        atomic_numbers=(1, 1),
        positions=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, r]]),
        charge=0,
    )


def h3p_geometry(bond_angstrom: float) -> Geometry:
    """Linear equidistant H3+ along z with nearest-neighbor spacing ``bond``."""
    r = bond_angstrom * BOHR_PER_ANGSTROM
    return Geometry(
        atomic_numbers=(1, 1, 1),
        positions=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, r], [0.0, 0.0, 2 * r]]),
        charge=1,
    )


def molecule_geometry(molecule: str, bond_angstrom: float) -> Geometry:
    if molecule == "h2":
        return h2_geometry(bond_angstrom)
    if molecule == "h3p":
        return h3p_geometry(bond_angstrom)
    raise ValueError(f"unknown molecule {molecule!r}; expected one of {MOLECULES}")


def sto6g_basis(geometry: Geometry) -> list[ContractedSOrbital]:
    """One contracted s orbital per hydrogen atom."""
    if any(z != 1 for z in geometry.atomic_numbers):
        raise BasisError("packaged STO-6G data covers hydrogen only")
    exps, coefs = hydrogen_sto6g_shell()
    return [
        ContractedSOrbital(center=geometry.positions[i], exponents=exps, coefficients=coefs)
        for i in range(geometry.n_atoms)
    ]
