"""Restricted closed-shell Hartree-Fock and the spin-orbital transform."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrals import IntegralSet


class ScfError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScfResult:
    mo_coefficients: np.ndarray
    orbital_energies: np.ndarray
    e_hf: float
    converged: bool
    iterations: int
    # electronic+nuclear energy after each Roothaan iteration, for diagnostics
    energy_history: tuple[float, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class SpinOrbitalIntegrals:
    """MO-basis integrals over interleaved spin orbitals.

    ``h`` is (2n, 2n); ``g[p, q, r, s]`` is the physicist-notation matrix
    element <pq|rs>, so the two-body Hamiltonian reads
    (1/2) sum_pqrs g[p,q,r,s] c+_p c+_q c_s c_r. Qubit/spin-orbital 2i is the
    alpha and 2i+1 the beta component of spatial orbital i.
    """

    h: np.ndarray
    g: np.ndarray

    @property
    def n_spin_orbitals(self) -> int:
        return self.h.shape[0]


def _sorted_orbitals(eps: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending orbital energies with deterministic resolution of ties.

    Near-degenerate orbitals (within 1e-9 Hartree) are ordered by the index
    of their dominant AO coefficient; each column's sign is fixed so the
    dominant coefficient is positive.
    """
    order = np.argsort(eps, kind="stable")
    eps = eps[order]
    C = C[:, order]
    i = 0
    n = eps.size
    while i < n:
        j = i + 1
        while j < n and eps[j] - eps[i] < 1e-9:
            j += 1
        if j - i > 1:
            block = C[:, i:j]
            dom = np.argmax(np.abs(block), axis=0)
            sub = np.argsort(dom, kind="stable")
            C[:, i:j] = block[:, sub]
            eps[i:j] = eps[i:j][sub]
        i = j
    for col in range(n):
        dom = np.argmax(np.abs(C[:, col]))
        if C[dom, col] < 0:
            C[:, col] = -C[:, col]
    return eps, C


def run_rhf(
    integrals: IntegralSet,
    n_electrons: int,
    max_iterations: int = 200,
    density_tol: float = 1e-10,
    energy_tol: float = 1e-12,
    diis_start: int = 3,
    diis_depth: int = 8,
) -> ScfResult:
    """Closed-shell SCF with DIIS acceleration after the first two iterations.

    Convergence requires both the max density change below ``density_tol``
    and the energy change below ``energy_tol``. Non-convergence is reported
    through ``converged=False``, never silently.
    """
    if n_electrons % 2 != 0:
        raise ScfError("closed-shell SCF requires an even electron count")
    n = integrals.n_spatial
    if n_electrons > 2 * n:
        raise ScfError("more electrons than available spatial orbitals can hold")
    n_occ = n_electrons // 2
    S, h, eri = integrals.S, integrals.h_core, integrals.eri

    s_eps, s_vec = np.linalg.eigh(S)
    if s_eps.min() <= 1e-12:
        raise ScfError("overlap matrix not positive definite")
    X = s_vec @ np.diag(s_eps**-0.5) @ s_vec.T

    def fock(D):
        J = np.einsum("pqrs,rs->pq", eri, D)
        K = np.einsum("prqs,rs->pq", eri, D)
        return h + J - 0.5 * K

    def solve(F):
        eps, Cp = np.linalg.eigh(X.T @ F @ X)
        C = X @ Cp
        eps, C = _sorted_orbitals(eps, C)
        return eps, C

    eps, C = solve(h)
    D = 2.0 * C[:, :n_occ] @ C[:, :n_occ].T
    energy = 0.5 * np.sum(D * (h + fock(D))) + integrals.e_nuc

    history = [energy]
    fock_list: list[np.ndarray] = []
    err_list: list[np.ndarray] = []
    converged = False
    iterations = 0

    for it in range(1, max_iterations + 1):
        iterations = it
        F = fock(D)
        # DIIS error in the orthonormal basis
        err = X.T @ (F @ D @ S - S @ D @ F) @ X
        fock_list.append(F)
        err_list.append(err)
        if len(fock_list) > diis_depth:
            fock_list.pop(0)
            err_list.pop(0)
        if it >= diis_start and len(fock_list) > 1:
            m = len(fock_list)
            B = -np.ones((m + 1, m + 1))
            B[m, m] = 0.0
            for a in range(m):
                for b in range(m):
                    B[a, b] = np.sum(err_list[a] * err_list[b])
            rhs = np.zeros(m + 1)
            rhs[m] = -1.0
            try:
                coef = np.linalg.solve(B, rhs)[:m]
                F = sum(c * f for c, f in zip(coef, fock_list))
            except np.linalg.LinAlgError:
                pass  # singular DIIS system: fall back to the plain Fock matrix

        eps, C = solve(F)
        D_new = 2.0 * C[:, :n_occ] @ C[:, :n_occ].T
        energy_new = 0.5 * np.sum(D_new * (h + fock(D_new))) + integrals.e_nuc
        d_change = np.max(np.abs(D_new - D))
        e_change = abs(energy_new - energy)
        D, energy = D_new, energy_new
        history.append(energy)
        if d_change < density_tol and e_change < energy_tol:
            converged = True
            break

    return ScfResult(
        mo_coefficients=C,
        orbital_energies=eps,
        e_hf=float(energy),
        converged=converged,
        iterations=iterations,
        energy_history=tuple(history),
    )


def spin_orbital_integrals(integrals: IntegralSet, scf: ScfResult) -> SpinOrbitalIntegrals:
    """MO-transform and expand to interleaved spin orbitals."""
    if not scf.converged:
        raise ScfError("spin-orbital transform requires a converged SCF result")
    C = scf.mo_coefficients
    n = C.shape[0]
    h_mo = C.T @ integrals.h_core @ C
    eri_mo = np.einsum(
        "pqrs,pi,qj,rk,sl->ijkl", integrals.eri, C, C, C, C, optimize=True
    )

    m = 2 * n
    h = np.zeros((m, m))
    g = np.zeros((m, m, m, m))
    spatial = np.arange(m) // 2
    spin = np.arange(m) % 2
    for p in range(m):
        for q in range(m):
            if spin[p] == spin[q]:
                h[p, q] = h_mo[spatial[p], spatial[q]]
    # <pq|rs> = (pr|qs) delta(sp,sr) delta(sq,ss)
    for p in range(m):
        for q in range(m):
            for r in range(m):
                if spin[p] != spin[r]:
                    continue
                for s in range(m):
                    if spin[q] != spin[s]:
                        continue
                    g[p, q, r, s] = eri_mo[spatial[p], spatial[r], spatial[q], spatial[s]]
    return SpinOrbitalIntegrals(h=h, g=g)


def hf_energy_from_spin_orbitals(
    so: SpinOrbitalIntegrals, n_electrons: int, e_nuc: float
) -> float:
    """Reassemble the HF energy from occupied spin-orbital integrals."""
    occ = range(n_electrons)
    e = sum(so.h[i, i] for i in occ)
    e += 0.5 * sum(
        so.g[i, j, i, j] - so.g[i, j, j, i] for i in occ for j in occ
    )
    return e + e_nuc
