"""Markov-decision-process environment around the ensemble eigensolver.

The environment owns a weighted ensemble of orthonormal statevectors, a pool
of sign-free pair operators, and the residual-feature construction that
serves as the RL state. Stepping applies one exponential rotation with the
scalar found by one-dimensional line search (energy mode) or a two-parameter
magnitude/phase search (fidelity mode, where targets are complex).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import minimize_scalar

from .qubits import (
    QubitHamiltonian,
    QubitOperatorAction,
    StateVector,
    action_index_pairs,
    hf_reference_states,
)

DEFAULT_RESIDUAL_TOL = 1e-8
DEFAULT_FIDELITY_TOL = 1e-6
_THETA_GRID = 64
_PHASE_GRID = 32


class EnvironmentError_(ValueError):
    pass


# ---------------------------------------------------------------------------
# ensemble and pool containers
# ---------------------------------------------------------------------------

class EnsembleState:
    """K orthonormal statevectors with a normalized, non-increasing weight vector."""

    def __init__(self, members, weights, validate: bool = True):
        self.members = [np.asarray(m, dtype=complex) for m in members]
        w = np.asarray(weights, dtype=float)
        if w.size != len(self.members):
            raise EnvironmentError_("one weight per ensemble member required")
        if np.any(w <= 0):
            raise EnvironmentError_("ensemble weights must be positive")
        if np.any(np.diff(w) > 1e-12 * max(1.0, w.max())):
            raise EnvironmentError_("ensemble weights must be non-increasing")
        self.weights = w / w.sum()
        if validate:
            gram = np.array(
                [[np.vdot(a, b) for b in self.members] for a in self.members]
            )
            if np.abs(gram - np.eye(len(self.members))).max() > 1e-10:
                raise EnvironmentError_("ensemble members must be orthonormal")

    @property
    def K(self) -> int:
        return len(self.members)

    def apply(self, action: QubitOperatorAction, theta: float, phase: float = 0.0):
        from .qubits import apply_sign_free_exponential

        rotated = [
            apply_sign_free_exponential(m, action, theta, phase) for m in self.members
        ]
        return EnsembleState(rotated, self.weights, validate=False)


def make_hf_ensemble(
    H: QubitHamiltonian, n_electrons: int, sz: float, weights
) -> EnsembleState:
    """Ensemble of the K lowest-diagonal sector determinants."""
    weights = np.asarray(weights, dtype=float)
    members = hf_reference_states(H, n_electrons, sz, weights.size)
    return EnsembleState(members, weights, validate=False)


class ActionPool:
    """Deterministic, conjugate-deduplicated pool of pair operators."""

    def __init__(self, n_qubits: int, actions):
        self.n_qubits = n_qubits
        self.actions = tuple(actions)
        self.index = {a: i for i, a in enumerate(self.actions)}
        if len(self.index) != len(self.actions):
            raise EnvironmentError_("duplicate actions in pool")
        self._stacked = None

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __contains__(self, action: QubitOperatorAction) -> bool:
        return action.canonical() in self.index

    def index_of(self, action: QubitOperatorAction) -> int:
        return self.index[action.canonical()]

    def stacked_pairs(self):
        """Padded (domain, range, valid) index matrices over the whole pool."""
        if self._stacked is None:
            doms, rngs = [], []
            width = 0
            for a in self.actions:
                d, r = action_index_pairs(a, self.n_qubits)
                doms.append(d)
                rngs.append(r)
                width = max(width, d.size)
            A = len(self.actions)
            dom = np.zeros((A, width), dtype=np.intp)
            rng = np.zeros((A, width), dtype=np.intp)
            valid = np.zeros((A, width))
            for i, (d, r) in enumerate(zip(doms, rngs)):
                dom[i, : d.size] = d
                rng[i, : r.size] = r
                valid[i, : d.size] = 1.0
            self._stacked = (dom, rng, valid)
        return self._stacked


def build_action_pool(n_qubits: int, sz_filter: bool = False) -> ActionPool:
    """All quadruples p<q, k<l with (p,q) < (k,l); conjugates appear once.

    ``sz_filter`` keeps only actions whose raised and lowered spin labels
    balance under the interleaved ordering. Spin-changing operators carry
    identically zero residuals on Sz eigenstates yet can lower the ensemble
    energy by rotating members into degenerate states of neighboring Sz
    sectors, so the solvers enable the filter when targeting one sector.
    """
    if n_qubits < 4:
        raise EnvironmentError_("pool requires at least 4 qubits")
    pairs = list(combinations(range(n_qubits), 2))
    actions = []
    for i, pq in enumerate(pairs):
        for kl in pairs[i + 1 :]:
            a = QubitOperatorAction(pq[0], pq[1], kl[0], kl[1])
            if sz_filter and a.sz_change() != 0.0:
                continue
            actions.append(a)
    return ActionPool(n_qubits, actions)


# ---------------------------------------------------------------------------
# residual features
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RLState:
    """Residual features: real parts of all pool entries, then imaginary parts."""

    features: np.ndarray
    residual_norm: float

    def __len__(self) -> int:
        return self.features.size


def residual_vector(
    ensemble: EnsembleState,
    H: QubitHamiltonian,
    pool: ActionPool,
    h_members=None,
) -> np.ndarray:
    """Complex residual entry for every pool action."""
    dom, rng, valid = pool.stacked_pairs()
    r = np.zeros(len(pool), dtype=complex)
    for idx, (w, psi) in enumerate(zip(ensemble.weights, ensemble.members)):
        hpsi = h_members[idx] if h_members is not None else H.matrix @ psi
        term = np.sum(np.conj(psi[rng]) * hpsi[dom] * valid, axis=1)
        term -= np.sum(np.conj(hpsi[rng]) * psi[dom] * valid, axis=1)
        r += w * term
    return r


def compute_rl_state(
    ensemble: EnsembleState,
    H: QubitHamiltonian,
    pool: ActionPool,
    h_members=None,
) -> RLState:
    r = residual_vector(ensemble, H, pool, h_members)
    features = np.concatenate([r.real, r.imag])
    return RLState(features=features, residual_norm=float(np.linalg.norm(r)))


def ensemble_energy(ensemble: EnsembleState, H: QubitHamiltonian) -> float:
    return float(
        sum(w * H.expectation(m) for w, m in zip(ensemble.weights, ensemble.members))
    )


# ---------------------------------------------------------------------------
# line searches
# ---------------------------------------------------------------------------

def _energy_poly(ensemble, H, action, h_members=None):
    """Coefficients of f(theta) = a0 + as*s + ac*(1-c) + ass*s^2 + asc*s(1-c) + acc*(1-c)^2.

    Derives from psi(theta) = psi + s*A psi + (1-c)*A^2 psi with A^2 = -P.
    Only two restricted matvecs per member are needed.
    """
    dom, rng = action_index_pairs(action, H.n_qubits)
    cols_d = H.matrix[:, dom]
    cols_r = H.matrix[:, rng]
    coef = np.zeros(6)
    for idx, (w, u) in enumerate(zip(ensemble.weights, ensemble.members)):
        hu = h_members[idx] if h_members is not None else H.matrix @ u
        ud, ur = u[dom], u[rng]
        # v = A u lives on dom+rng: v[rng] = ud, v[dom] = -ur
        hv = cols_r @ ud - cols_d @ ur
        # w2 = A^2 u = -(projection of u onto dom+rng)
        hw = -(cols_d @ ud + cols_r @ ur)
        v_dot_hv = np.vdot(ud, hv[rng]) - np.vdot(ur, hv[dom])
        coef += w * np.array(
            [
                np.vdot(u, hu).real,
                2.0 * (np.vdot(hu[rng], ud) - np.vdot(hu[dom], ur)).real,
                2.0 * (-(np.vdot(hu[dom], ud) + np.vdot(hu[rng], ur))).real,
                v_dot_hv.real,
                2.0 * (-(np.conj(hv[dom]) @ ud + np.conj(hv[rng]) @ ur)).real,
                (-(np.conj(hw[dom]) @ ud + np.conj(hw[rng]) @ ur)).real,
            ]
        )
    return coef


def _energy_objective(coef):
    a0, a_s, a_c, a_ss, a_sc, a_cc = coef

    def f(theta):
        s = np.sin(theta)
        omc = 1.0 - np.cos(theta)
        return a0 + a_s * s + a_c * omc + a_ss * s * s + a_sc * s * omc + a_cc * omc * omc

    return f


def _refine_min(f, grid):
    """Coarse sample then bounded golden/parabolic refinement."""
    vals = f(grid)
    best = int(np.argmin(vals))
    lo = grid[best] - (grid[1] - grid[0])
    hi = grid[best] + (grid[1] - grid[0])
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-11})
    cand = [(float(vals[best]), float(grid[best]))]
    if np.isfinite(res.fun):
        cand.append((float(res.fun), float(res.x)))
    fx, x = min(cand)
    x = float((x + np.pi) % (2 * np.pi) - np.pi)
    return x, fx


def optimize_theta(
    ensemble: EnsembleState,
    H: QubitHamiltonian,
    action: QubitOperatorAction,
    h_members=None,
):
    """Minimize the weighted ensemble energy along one rotation.

    Returns (theta, energy_at_theta); theta = 0 is returned whenever no
    strict descent is found, so the result never exceeds the incoming energy.
    """
    coef = _energy_poly(ensemble, H, action, h_members)
    f = _energy_objective(coef)
    grid = np.linspace(-np.pi, np.pi, _THETA_GRID, endpoint=False)
    theta, f_theta = _refine_min(f, grid)
    f0 = float(f(0.0))
    if f_theta >= f0 - 1e-14 * max(1.0, abs(f0)):
        return 0.0, f0
    return theta, float(f_theta)


def _fidelity_objective(current, target, action, n_qubits):
    dom, rng = action_index_pairs(action, n_qubits)
    z0 = np.vdot(target, current)
    zg = np.vdot(target[rng], current[dom])
    zgd = np.vdot(target[dom], current[rng])
    zp = np.vdot(target[dom], current[dom]) + np.vdot(target[rng], current[rng])

    def g(theta, phase):
        s = np.sin(theta)
        omc = 1.0 - np.cos(theta)
        ph = np.exp(1j * np.asarray(phase))
        return np.abs(z0 + s * (ph * zg - np.conj(ph) * zgd) - omc * zp) ** 2

    return g


def optimize_fidelity_rotation(
    current: StateVector,
    target: StateVector,
    action: QubitOperatorAction,
):
    """Maximize |<target| exp(theta A_phase) |current>|^2 over (theta, phase).

    Time-evolved targets are genuinely complex, so the rotation carries a
    phase degree of freedom; a magnitude-only rotation maps real states to
    real states and cannot align with a complex target. Returns
    (theta, phase, fidelity); (0, 0) whenever no improvement exists.
    """
    n_qubits = int(np.log2(current.size))
    g = _fidelity_objective(current, target, action, n_qubits)
    thetas = np.linspace(-np.pi, np.pi, _THETA_GRID, endpoint=False)
    phases = np.linspace(0.0, 2 * np.pi, _PHASE_GRID, endpoint=False)
    surface = g(thetas[:, None], phases[None, :])
    it, ip = np.unravel_index(np.argmax(surface), surface.shape)
    theta, phase = float(thetas[it]), float(phases[ip])
    best = float(surface[it, ip])
    dt = float(thetas[1] - thetas[0])
    dp = float(phases[1] - phases[0])
    for _ in range(3):
        res = minimize_scalar(
            lambda t: -g(t, phase),
            bounds=(theta - dt, theta + dt),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if -res.fun > best:
            best, theta = float(-res.fun), float(res.x)
        res = minimize_scalar(
            lambda p: -g(theta, p),
            bounds=(phase - dp, phase + dp),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if -res.fun > best:
            best, phase = float(-res.fun), float(res.x)
        dt /= 8.0
        dp /= 8.0
    g0 = float(g(0.0, 0.0))
    if best <= g0 + 1e-15:
        return 0.0, 0.0, g0
    theta = float((theta + np.pi) % (2 * np.pi) - np.pi)
    return theta, float(phase % (2 * np.pi)), best


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepOutcome:
    next_rl_state: RLState
    reward: float
    theta: float
    terminal: bool
    ensemble_energy: float
    residual_norm: float
    fidelity: float | None = None
    phase: float | None = None


def step_energy_mode(
    ensemble: EnsembleState,
    H: QubitHamiltonian,
    pool: ActionPool,
    action_index: int,
    lam: float,
    residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
):
    """One rotation with optimal magnitude; reward is -energy - lam * |r|.

    Returns (new_ensemble, StepOutcome); terminal signals residual
    convergence only, budget accounting lives in the episode driver.
    """
    if not 0 <= action_index < len(pool):
        raise EnvironmentError_(f"action index {action_index} outside pool")
    if lam < 0:
        raise EnvironmentError_("lambda must be non-negative")
    action = pool.actions[action_index]
    theta, energy = optimize_theta(ensemble, H, action)
    new_ensemble = ensemble.apply(action, theta)
    h_members = [H.matrix @ m for m in new_ensemble.members]
    rl = compute_rl_state(new_ensemble, H, pool, h_members)
    reward = -energy - lam * rl.residual_norm
    outcome = StepOutcome(
        next_rl_state=rl,
        reward=float(reward),
        theta=float(theta),
        terminal=rl.residual_norm < residual_tolerance,
        ensemble_energy=float(energy),
        residual_norm=rl.residual_norm,
    )
    return new_ensemble, outcome


def step_fidelity_mode(
    current: StateVector,
    target_chi: StateVector,
    H: QubitHamiltonian,
    pool: ActionPool,
    action_index: int,
    fidelity_tolerance: float = DEFAULT_FIDELITY_TOL,
    theta: float | None = None,
    phase: float | None = None,
):
    """One rotation toward the target; reward is the resulting fidelity.

    With ``theta`` unset the rotation parameters maximize the one-step
    fidelity. Callers may prescribe (theta, phase) instead: exact multi-step
    synthesis needs partial rotations that a one-step maximizer would not
    pick (it converges only linearly near the target).
    """
    if not 0 <= action_index < len(pool):
        raise EnvironmentError_(f"action index {action_index} outside pool")
    action = pool.actions[action_index]
    from .qubits import apply_sign_free_exponential

    if theta is None:
        theta, phase, fidelity = optimize_fidelity_rotation(current, target_chi, action)
        new_state = apply_sign_free_exponential(current, action, theta, phase)
    else:
        phase = 0.0 if phase is None else float(phase)
        new_state = apply_sign_free_exponential(current, action, theta, phase)
        fidelity = float(np.abs(np.vdot(target_chi, new_state)) ** 2)
    single = EnsembleState([new_state], [1.0], validate=False)
    h_members = [H.matrix @ new_state]
    rl = compute_rl_state(single, H, pool, h_members)
    outcome = StepOutcome(
        next_rl_state=rl,
        reward=float(fidelity),
        theta=float(theta),
        terminal=fidelity >= 1.0 - fidelity_tolerance,
        ensemble_energy=float(np.real(np.vdot(new_state, h_members[0]))),
        residual_norm=rl.residual_norm,
        fidelity=float(fidelity),
        phase=float(phase),
    )
    return new_state, outcome


# ---------------------------------------------------------------------------
# episode lifecycle
# ---------------------------------------------------------------------------

TRACE_HEADER = "step,p,q,k,l,theta,ensemble_energy,residual_norm,reward,fidelity"


class EnergyEpisode:
    """Owns one ensemble trajectory; steps until residual convergence or budget."""

    def __init__(
        self,
        H: QubitHamiltonian,
        pool: ActionPool,
        initial: EnsembleState,
        lam: float = 0.5,
        max_steps: int = 5,
        residual_tolerance: float = DEFAULT_RESIDUAL_TOL,
    ):
        self.H = H
        self.pool = pool
        self.initial = initial
        self.lam = lam
        self.max_steps = max_steps
        self.residual_tolerance = residual_tolerance
        self.reset()

    def reset(self) -> RLState:
        self.ensemble = self.initial
        self.steps_taken = 0
        self.trace: list[tuple] = []
        self.operator_sequence: list[tuple[QubitOperatorAction, float]] = []
        self._rl = compute_rl_state(self.ensemble, self.H, self.pool)
        self.done = self._rl.residual_norm < self.residual_tolerance
        return self._rl

    @property
    def rl_state(self) -> RLState:
        return self._rl

    @property
    def energy(self) -> float:
        return ensemble_energy(self.ensemble, self.H)

    def step(self, action_index: int) -> StepOutcome:
        if self.done:
            raise EnvironmentError_("episode already terminal")
        self.ensemble, outcome = step_energy_mode(
            self.ensemble,
            self.H,
            self.pool,
            action_index,
            self.lam,
            self.residual_tolerance,
        )
        self.steps_taken += 1
        self._rl = outcome.next_rl_state
        budget_exhausted = self.steps_taken >= self.max_steps
        self.done = outcome.terminal or budget_exhausted
        action = self.pool.actions[action_index]
        self.operator_sequence.append((action, outcome.theta))
        self.trace.append(
            (
                self.steps_taken,
                action.p,
                action.q,
                action.k,
                action.l,
                outcome.theta,
                outcome.ensemble_energy,
                outcome.residual_norm,
                outcome.reward,
                "",
            )
        )
        if budget_exhausted and not outcome.terminal:
            outcome = StepOutcome(
                next_rl_state=outcome.next_rl_state,
                reward=outcome.reward,
                theta=outcome.theta,
                terminal=True,
                ensemble_energy=outcome.ensemble_energy,
                residual_norm=outcome.residual_norm,
            )
        return outcome


class FidelityEpisode:
    """Prepares a target state from a fixed reference, one rotation per step."""

    def __init__(
        self,
        H: QubitHamiltonian,
        pool: ActionPool,
        reference: StateVector,
        target: StateVector,
        max_steps: int = 5,
        fidelity_tolerance: float = DEFAULT_FIDELITY_TOL,
    ):
        self.H = H
        self.pool = pool
        self.reference = np.asarray(reference, dtype=complex)
        self.target = np.asarray(target, dtype=complex)
        self.max_steps = max_steps
        self.fidelity_tolerance = fidelity_tolerance
        self.reset()

    def reset(self) -> RLState:
        self.state = self.reference.copy()
        self.steps_taken = 0
        self.trace: list[tuple] = []
        self.fidelity_trace: list[float] = [self.fidelity]
        single = EnsembleState([self.state], [1.0], validate=False)
        self._rl = compute_rl_state(single, self.H, self.pool)
        self.done = self.fidelity >= 1.0 - self.fidelity_tolerance
        return self._rl

    @property
    def rl_state(self) -> RLState:
        return self._rl

    @property
    def fidelity(self) -> float:
        return float(np.abs(np.vdot(self.target, self.state)) ** 2)

    def step(
        self,
        action_index: int,
        theta: float | None = None,
        phase: float | None = None,
    ) -> StepOutcome:
        if self.done:
            raise EnvironmentError_("episode already terminal")
        self.state, outcome = step_fidelity_mode(
            self.state,
            self.target,
            self.H,
            self.pool,
            action_index,
            self.fidelity_tolerance,
            theta=theta,
            phase=phase,
        )
        self.steps_taken += 1
        self._rl = outcome.next_rl_state
        self.fidelity_trace.append(outcome.fidelity)
        self.done = outcome.terminal or self.steps_taken >= self.max_steps
        action = self.pool.actions[action_index]
        self.trace.append(
            (
                self.steps_taken,
                action.p,
                action.q,
                action.k,
                action.l,
                outcome.theta,
                outcome.ensemble_energy,
                outcome.residual_norm,
                outcome.reward,
                outcome.fidelity,
            )
        )
        return outcome


def write_episode_trace(fh, trace) -> None:
    """CSV rows in the documented step/action/theta/energy/residual layout."""
    fh.write(TRACE_HEADER + "\n")
    for row in trace:
        fh.write(",".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in row))
        fh.write("\n")
