"""Exact statevector machinery for Jordan-Wigner qubit Hamiltonians.

Statevectors are plain complex128 arrays of length 2**n. Basis-state index b
encodes occupations with qubit q at bit q (qubit 0 is the least significant
bit). Spin orbitals map to qubits in interleaved order: qubit 2i is the alpha
and qubit 2i+1 the beta component of spatial orbital i, so the Sz of a basis
state is (popcount of even bits - popcount of odd bits)/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_QUBITS = 12

StateVector = np.ndarray


class SimulatorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# basis-state bookkeeping
# ---------------------------------------------------------------------------

def _popcount(labels: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(labels)
    vals = labels.copy()
    while np.any(vals):
        counts += vals & 1
        vals >>= 1
    return counts


def basis_occupations(n_qubits: int) -> np.ndarray:
    """(2^n, n) array of occupation bits; column q is qubit q."""
    labels = np.arange(2**n_qubits)
    return (labels[:, None] >> np.arange(n_qubits)[None, :]) & 1


def basis_sz(n_qubits: int) -> np.ndarray:
    """Total Sz of every basis state under the interleaved spin convention."""
    occ = basis_occupations(n_qubits)
    alpha = occ[:, 0::2].sum(axis=1)
    beta = occ[:, 1::2].sum(axis=1)
    return (alpha - beta) / 2.0


def sector_basis_states(n_qubits: int, n_electrons: int, sz: float) -> np.ndarray:
    """Ascending integer labels of the (N, Sz) sector."""
    labels = np.arange(2**n_qubits)
    n_ok = _popcount(labels) == n_electrons
    sz_ok = np.abs(basis_sz(n_qubits) - sz) < 1e-9
    return labels[n_ok & sz_ok]


def basis_state(n_qubits: int, label: int) -> StateVector:
    v = np.zeros(2**n_qubits, dtype=complex)
    v[label] = 1.0
    return v


# ---------------------------------------------------------------------------
# Jordan-Wigner construction
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _annihilation_operators(n_qubits: int) -> tuple[np.ndarray, ...]:
    """Dense JW annihilation matrices c_p = (prod_{q<p} Z_q) a_p."""
    a = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    ops = []
    for p in range(n_qubits):
        # qubit n-1 is the slowest index in the kron chain, qubit 0 the fastest
        mat = np.array([[1.0]])
        for q in range(n_qubits - 1, -1, -1):
            if q == p:
                factor = a
            elif q < p:
                factor = z
            else:
                factor = eye
            mat = np.kron(mat, factor)
        ops.append(mat)
    return tuple(ops)


class QubitHamiltonian:
    """Dense Hermitian qubit Hamiltonian with cached spectral data."""

    def __init__(self, n_qubits: int, matrix: np.ndarray):
        if n_qubits > MAX_QUBITS:
            raise SimulatorError(f"dense simulator ceiling is {MAX_QUBITS} qubits")
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (2**n_qubits, 2**n_qubits):
            raise SimulatorError("Hamiltonian dimension does not match qubit count")
        self.n_qubits = n_qubits
        self.matrix = matrix
        self._diagonal = None
        self._full_eig = None
        self._sector_eig: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def diagonal(self) -> np.ndarray:
        if self._diagonal is None:
            self._diagonal = np.real(np.diag(self.matrix)).copy()
        return self._diagonal

    def expectation(self, state: StateVector) -> float:
        return float(np.real(np.vdot(state, self.matrix @ state)))

    def full_eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        if self._full_eig is None:
            vals, vecs = np.linalg.eigh(self.matrix)
            self._full_eig = (vals, vecs)
        return self._full_eig

    def sector_eigensystem(self, n_electrons: int, sz: float):
        key = (int(n_electrons), float(sz))
        if key not in self._sector_eig:
            labels = sector_basis_states(self.n_qubits, n_electrons, sz)
            block = self.matrix[np.ix_(labels, labels)]
            vals, vecs = np.linalg.eigh(block)
            self._sector_eig[key] = (labels, vals, vecs)
        return self._sector_eig[key]


def jw_hamiltonian(h: np.ndarray, g: np.ndarray, e_nuc: float) -> QubitHamiltonian:
    """Assemble sum h_pq c+_p c_q + 1/2 sum g_pqrs c+_p c+_q c_s c_r + e_nuc.

    ``g`` is the physicist-notation spin-orbital tensor <pq|rs>; qubit p is
    spin orbital p (interleaved order fixed upstream).
    """
    h = np.asarray(h, dtype=float)
    m = h.shape[0]
    if h.shape != (m, m) or g.shape != (m, m, m, m):
        raise SimulatorError("integral dimension mismatch")
    if np.abs(h - h.T).max() > 1e-10:
        raise SimulatorError("one-body integrals must be Hermitian")
    n_qubits = m
    dim = 2**n_qubits
    ann = _annihilation_operators(n_qubits)
    cre = tuple(op.T for op in ann)

    mat = np.zeros((dim, dim), dtype=complex)
    # one-body terms via cached pair products
    pair = {}
    for p in range(m):
        for q in range(m):
            if abs(h[p, q]) < 1e-14:
                continue
            pair[(p, q)] = cre[p] @ ann[q]
            mat += h[p, q] * pair[(p, q)]
    # two-body terms: c+_p c+_q c_s c_r grouped as (c+_p c+_q)(c_s c_r)
    kill = {}
    for s in range(m):
        for r in range(m):
            if s == r:
                continue
            kill[(s, r)] = ann[s] @ ann[r]
    for p in range(m):
        for q in range(m):
            if p == q:
                continue
            create_pq = cre[p] @ cre[q]
            for r in range(m):
                for s in range(m):
                    if r == s:
                        continue
                    val = g[p, q, r, s]
                    if abs(val) < 1e-14:
                        continue
                    mat += 0.5 * val * (create_pq @ kill[(s, r)])
    mat += e_nuc * np.eye(dim)
    return QubitHamiltonian(n_qubits, mat)


# ---------------------------------------------------------------------------
# reference determinants and eigensystems
# ---------------------------------------------------------------------------

def hf_reference_states(
    H: QubitHamiltonian, n_electrons: int, sz: float, K: int
) -> list[StateVector]:
    """The K sector determinants of lowest diagonal energy, ascending.

    Ties in the diagonal energy are broken by the basis-state integer label.
    """
    labels = sector_basis_states(H.n_qubits, n_electrons, sz)
    if labels.size < K:
        raise SimulatorError(
            f"sector (N={n_electrons}, Sz={sz}) holds only {labels.size} "
            f"determinants, {K} requested"
        )
    diag = H.diagonal()[labels]
    order = np.lexsort((labels, diag))
    chosen = labels[order[:K]]
    return [basis_state(H.n_qubits, int(b)) for b in chosen]


def exact_eigensystem(
    H: QubitHamiltonian, n_electrons: int, sz: float
) -> tuple[np.ndarray, list[StateVector]]:
    """Dense diagonalization restricted to the (N, Sz) sector."""
    labels, vals, vecs = H.sector_eigensystem(n_electrons, sz)
    states = []
    for j in range(vals.size):
        full = np.zeros(H.dim, dtype=complex)
        full[labels] = vecs[:, j]
        states.append(full)
    return vals.copy(), states


def exact_propagate(H: QubitHamiltonian, state: StateVector, dt: float) -> StateVector:
    """exp(-i H dt) |state> through the cached eigendecomposition."""
    vals, vecs = H.full_eigensystem()
    amps = vecs.conj().T @ state
    return vecs @ (np.exp(-1j * vals * dt) * amps)


# ---------------------------------------------------------------------------
# sign-free two-qubit operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class QubitOperatorAction:
    """Index quadruple of a sign-free pair excitation.

    The operator raises qubits (p, q) and lowers (k, l) with no parity
    string; overlapping indices contribute number-operator factors.
    """

    p: int
    q: int
    k: int
    l: int

    def __post_init__(self):
        if not (0 <= self.p < self.q and 0 <= self.k < self.l):
            raise ValueError("action indices must satisfy p < q and k < l")
        if (self.p, self.q) == (self.k, self.l):
            raise ValueError("raising and lowering pairs must differ")

    @property
    def raise_mask(self) -> int:
        return (1 << self.p) | (1 << self.q)

    @property
    def lower_mask(self) -> int:
        return (1 << self.k) | (1 << self.l)

    def conjugate(self) -> "QubitOperatorAction":
        return QubitOperatorAction(self.k, self.l, self.p, self.q)

    def canonical(self) -> "QubitOperatorAction":
        """The lexicographically smaller of self and its Hermitian conjugate."""
        other = (self.k, self.l, self.p, self.q)
        mine = (self.p, self.q, self.k, self.l)
        return self if mine <= other else self.conjugate()

    def sz_change(self) -> float:
        """Net Sz raised: +1/2 per even raised index, -1/2 per odd, minus lowered."""
        spin = lambda x: 0.5 if x % 2 == 0 else -0.5
        return spin(self.p) + spin(self.q) - spin(self.k) - spin(self.l)

    def validate_for(self, n_qubits: int) -> None:
        if self.q >= n_qubits or self.l >= n_qubits:
            raise ValueError(f"action {self} exceeds {n_qubits} qubits")


def action_index_pairs(action: QubitOperatorAction, n_qubits: int):
    """(domain, range) basis labels paired by the operator.

    The operator maps |domain[i]> to |range[i]>; its adjoint maps back. The
    domain requires the lowered bits set and the raised-only bits clear; the
    range is the domain with the symmetric-difference bits flipped.
    """
    action.validate_for(n_qubits)
    raise_mask, lower_mask = action.raise_mask, action.lower_mask
    raise_only = raise_mask & ~lower_mask
    flip = raise_mask ^ lower_mask
    labels = np.arange(2**n_qubits)
    dom = labels[((labels & lower_mask) == lower_mask) & ((labels & raise_only) == 0)]
    return dom, dom ^ flip


def apply_sign_free_exponential(
    state: StateVector,
    action: QubitOperatorAction,
    theta: float,
    phase: float = 0.0,
) -> StateVector:
    """Apply exp(theta * A) with A = e^{i phase} G - e^{-i phase} G+.

    G is the sign-free pair operator of ``action``. Because G^2 = 0 and
    G G+ G = G, A satisfies A^3 = -A and the exponential closes to
    1 + sin(theta) A - (1 - cos(theta)) (G G+ + G+ G), which reduces to a
    rotation between the paired amplitudes. ``phase=0`` recovers the plain
    real rotation used by the energy solver.
    """
    n_qubits = int(np.log2(state.size))
    dom, rng = action_index_pairs(action, n_qubits)
    out = np.array(state, dtype=complex, copy=True)
    if theta == 0.0:
        return out
    c, s = np.cos(theta), np.sin(theta)
    ph = np.exp(1j * phase) if phase != 0.0 else 1.0
    d_amp = state[dom]
    r_amp = state[rng]
    out[rng] = c * r_amp + s * ph * d_amp
    out[dom] = c * d_amp - s * np.conj(ph) * r_amp
    return out


def dense_pair_operator(action: QubitOperatorAction, n_qubits: int) -> np.ndarray:
    """Dense matrix of the sign-free operator, for oracles and diagnostics."""
    dom, rng = action_index_pairs(action, n_qubits)
    mat = np.zeros((2**n_qubits, 2**n_qubits))
    mat[rng, dom] = 1.0
    return mat


def residual_entry(
    members: list[StateVector],
    weights: np.ndarray,
    H: QubitHamiltonian,
    action: QubitOperatorAction,
    h_members: list[StateVector] | None = None,
) -> complex:
    """Weighted expectation of the commutator of the pair operator with H.

    Computed per member as <psi|G(H psi)> - <H psi|G psi>; ``h_members`` may
    carry precomputed H|psi> vectors.
    """
    dom, rng = action_index_pairs(action, H.n_qubits)
    total = 0.0 + 0.0j
    for idx, (w, psi) in enumerate(zip(weights, members)):
        hpsi = h_members[idx] if h_members is not None else H.matrix @ psi
        total += w * (np.vdot(psi[rng], hpsi[dom]) - np.vdot(hpsi[rng], psi[dom]))
    return complex(total)
