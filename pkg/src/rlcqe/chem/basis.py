"""Minimal contracted Gaussian s-orbital basis handling.

Only s-type contractions are supported; the shipped data file carries the
published STO-6G parameterization for hydrogen. Exponents are in Bohr^-2 and
contraction coefficients refer to unit-normalized primitives.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

ANGSTROM_PER_BOHR = 0.529177210903  # CODATA
BOHR_PER_ANGSTROM = 1.0 / ANGSTROM_PER_BOHR


class BasisError(ValueError):
    pass


def primitive_norm(alpha: float) -> float:
    """L2 norm constant of exp(-alpha r^2), i.e. (2 alpha / pi)^(3/4)."""
    return (2.0 * alpha / np.pi) ** 0.75


@dataclass(frozen=True)
class ContractedSOrbital:
    """A normalized contraction of s-type Gaussian primitives at one center.

    ``coefficients`` are stored rescaled so that the self-overlap of the
    contraction is exactly 1; they still refer to unit-normalized primitives.
    """

    center: np.ndarray
    exponents: np.ndarray
    coefficients: np.ndarray
    norms: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        exps = np.asarray(self.exponents, dtype=float)
        coefs = np.asarray(self.coefficients, dtype=float)
        if exps.size == 0:
            raise BasisError("contracted orbital needs at least one primitive")
        if exps.shape != coefs.shape:
            raise BasisError("exponent/coefficient length mismatch")
        if np.any(exps <= 0.0):
            raise BasisError("primitive exponents must be strictly positive")
        if not np.all(np.isfinite(center)):
            raise BasisError("orbital center must be finite")
        norms = primitive_norm(exps)
        # Rescale so the contracted self-overlap is exactly 1.
        p = exps[:, None] + exps[None, :]
        s_prim = (np.pi / p) ** 1.5
        cn = coefs * norms
        self_overlap = cn @ s_prim @ cn
        coefs = coefs / np.sqrt(self_overlap)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "norms", norms)

    @property
    def n_primitives(self) -> int:
        return self.exponents.size

    def contraction_weights(self) -> np.ndarray:
        """Coefficient times primitive norm, the weight of each raw Gaussian."""
        return self.coefficients * self.norms


def parse_basis_shells(text: str) -> list[tuple[np.ndarray, np.ndarray]]:
    """Parse the ``exponent coefficient`` shell format.

    Lines starting with ``#`` are comments; blank lines separate shells.
    """
    shells = []
    exps, coefs = [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            if exps:
                shells.append((np.array(exps), np.array(coefs)))
                exps, coefs = [], []
            continue
        parts = line.split()
        if len(parts) != 2:
            raise BasisError(f"malformed basis line: {raw!r}")
        exps.append(float(parts[0]))
        coefs.append(float(parts[1]))
    if exps:
        shells.append((np.array(exps), np.array(coefs)))
    if not shells:
        raise BasisError("basis file contains no shells")
    return shells


def load_basis_file(path) -> list[tuple[np.ndarray, np.ndarray]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_basis_shells(fh.read())


def hydrogen_sto6g_shell() -> tuple[np.ndarray, np.ndarray]:
    """The packaged STO-6G 1s shell for hydrogen."""
    text = (
        importlib.resources.files("rlcqe.chem")
        .joinpath("data/sto6g_h.dat")
        .read_text(encoding="utf-8")
    )
    return parse_basis_shells(text)[0]
