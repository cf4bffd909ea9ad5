"""Gaussian s-function integrals and molecular integral assembly.

All quantities are in atomic units (Bohr, Hartree). Primitive integrals use
the closed forms for s-type Gaussians; four-index integrals are stored in
chemist notation (ij|kl) with the full 8-fold permutation symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .basis import ContractedSOrbital


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Geometry:
    """Nuclear frame: atomic numbers, positions in Bohr and total charge."""

    atomic_numbers: tuple[int, ...]
    positions: np.ndarray
    charge: int = 0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(len(self.atomic_numbers), 3)
        if not np.all(np.isfinite(pos)):
            raise GeometryError("nuclear positions must be finite")
        if self.n_electrons <= 0:
            raise GeometryError("geometry has no electrons")
        if self.n_electrons % 2 != 0:
            raise GeometryError("restricted closed-shell scope: electron count must be even")
        object.__setattr__(self, "atomic_numbers", tuple(int(z) for z in self.atomic_numbers))
        object.__setattr__(self, "positions", pos)

    @property
    def n_atoms(self) -> int:
        return len(self.atomic_numbers)

    @property
    def n_electrons(self) -> int:
        return int(sum(self.atomic_numbers)) - int(self.charge)


@dataclass(frozen=True)
class IntegralSet:
    """AO integrals over contracted s functions plus the nuclear repulsion."""

    S: np.ndarray
    T: np.ndarray
    V: np.ndarray
    eri: np.ndarray  # chemist notation (ij|kl)
    e_nuc: float

    @property
    def n_spatial(self) -> int:
        return self.S.shape[0]

    @property
    def h_core(self) -> np.ndarray:
        return self.T + self.V


_BOYS_SMALL = 1e-3


def boys_f0(x):
    """Boys function F0(x) = (1/2) sqrt(pi/x) erf(sqrt(x)).

    A Taylor series is used below a small-x threshold where the closed form
    loses digits; the two branches agree to ~1e-15 at the switch point.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ValueError("boys_f0 requires x >= 0")
    scalar = x.ndim == 0
    xv = np.atleast_1d(x)
    out = np.empty_like(xv)
    small = xv < _BOYS_SMALL
    xs = xv[small]
    # sum_k (-x)^k / (k! (2k+1)); six terms give < 1e-22 truncation at 1e-3
    acc = np.zeros_like(xs)
    term = np.ones_like(xs)
    for k in range(6):
        acc += term / (2 * k + 1)
        term *= -xs / (k + 1)
    out[small] = acc
    xl = xv[~small]
    out[~small] = 0.5 * np.sqrt(np.pi / xl) * erf(np.sqrt(xl))
    return float(out[0]) if scalar else out


def primitive_overlap(a, b) -> float:
    """Overlap of two unnormalized s primitives ``a = (alpha, center)``."""
    alpha, ca = a
    beta, cb = b
    p = alpha + beta
    d2 = float(np.dot(ca - cb, ca - cb))
    return (np.pi / p) ** 1.5 * np.exp(-alpha * beta * d2 / p)


def primitive_kinetic(a, b) -> float:
    alpha, ca = a
    beta, cb = b
    p = alpha + beta
    mu = alpha * beta / p
    d2 = float(np.dot(ca - cb, ca - cb))
    return mu * (3.0 - 2.0 * mu * d2) * (np.pi / p) ** 1.5 * np.exp(-mu * d2)


def primitive_nuclear(a, b, nucleus_position, nucleus_charge) -> float:
    """Attraction -Z <a| 1/|r-C| |b> for s primitives."""
    alpha, ca = a
    beta, cb = b
    p = alpha + beta
    d2 = float(np.dot(ca - cb, ca - cb))
    centroid = (alpha * ca + beta * cb) / p
    pc2 = float(np.dot(centroid - nucleus_position, centroid - nucleus_position))
    pref = -nucleus_charge * 2.0 * np.pi / p * np.exp(-alpha * beta * d2 / p)
    return pref * boys_f0(p * pc2)


def primitive_eri(a, b, c, d) -> float:
    """Chemist-notation (ab|cd) repulsion for unnormalized s primitives."""
    alpha, ca = a
    beta, cb = b
    gamma, cc = c
    delta, cd = d
    p = alpha + beta
    q = gamma + delta
    pp = (alpha * ca + beta * cb) / p
    qq = (gamma * cc + delta * cd) / q
    d2ab = float(np.dot(ca - cb, ca - cb))
    d2cd = float(np.dot(cc - cd, cc - cd))
    pq2 = float(np.dot(pp - qq, pp - qq))
    pref = (
        2.0
        * np.pi**2.5
        / (p * q * np.sqrt(p + q))
        * np.exp(-alpha * beta * d2ab / p - gamma * delta * d2cd / q)
    )
    return pref * boys_f0(p * q / (p + q) * pq2)


def primitive_s_integrals(a, b, nuclei=None, others=None) -> dict:
    """Bundle of primitive results for one (a, b) pair.

    ``nuclei`` is an optional sequence of (position, charge) for the
    attraction term; ``others`` an optional (c, d) pair for the repulsion
    integral (ab|cd).
    """
    res = {
        "overlap": primitive_overlap(a, b),
        "kinetic": primitive_kinetic(a, b),
    }
    if nuclei is not None:
        res["nuclear_attraction"] = sum(
            primitive_nuclear(a, b, pos, z) for pos, z in nuclei
        )
    if others is not None:
        res["eri"] = primitive_eri(a, b, *others)
    return res


def nuclear_repulsion(geometry: Geometry) -> float:
    e = 0.0
    for i in range(geometry.n_atoms):
        for j in range(i + 1, geometry.n_atoms):
            rij = np.linalg.norm(geometry.positions[i] - geometry.positions[j])
            if rij < 1e-8:
                raise GeometryError(f"coincident nuclei {i} and {j}")
            e += geometry.atomic_numbers[i] * geometry.atomic_numbers[j] / rij
    return e


def build_integrals(geometry: Geometry, basis: list[ContractedSOrbital]) -> IntegralSet:
    """Contract primitive integrals over the given s-orbital basis."""
    n = len(basis)
    nuclei = [
        (geometry.positions[i], float(geometry.atomic_numbers[i]))
        for i in range(geometry.n_atoms)
    ]
    prims = [
        [(float(alpha), orb.center) for alpha in orb.exponents] for orb in basis
    ]
    weights = [orb.contraction_weights() for orb in basis]

    S = np.zeros((n, n))
    T = np.zeros((n, n))
    V = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            s = t = v = 0.0
            for wa, a in zip(weights[i], prims[i]):
                for wb, b in zip(weights[j], prims[j]):
                    w = wa * wb
                    s += w * primitive_overlap(a, b)
                    t += w * primitive_kinetic(a, b)
                    v += w * sum(primitive_nuclear(a, b, pos, z) for pos, z in nuclei)
            S[i, j] = S[j, i] = s
            T[i, j] = T[j, i] = t
            V[i, j] = V[j, i] = v

    eri = np.zeros((n, n, n, n))
    # unique canonical quadruples, then mirror the 8 symmetry images
    for i in range(n):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(n):
                for l in range(k + 1):
                    kl = k * (k + 1) // 2 + l
                    if ij < kl:
                        continue
                    val = 0.0
                    for wa, a in zip(weights[i], prims[i]):
                        for wb, b in zip(weights[j], prims[j]):
                            for wc, c in zip(weights[k], prims[k]):
                                for wd, d in zip(weights[l], prims[l]):
                                    val += wa * wb * wc * wd * primitive_eri(a, b, c, d)
                    for p, q, r, s_ in (
                        (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
                    ):
                        eri[p, q, r, s_] = val

    return IntegralSet(S=S, T=T, V=V, eri=eri, e_nuc=nuclear_repulsion(geometry))
