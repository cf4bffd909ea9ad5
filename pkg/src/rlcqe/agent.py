"""Value-based policies: a from-scratch deep Q-network and a greedy baseline.

The network is a plain feedforward stack of 8 affine layers with GELU
activations, trained on the mean-squared Bellman error with decoupled
weight decay. Everything runs on numpy; no autograd framework involved.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .environment import (
    ActionPool,
    EnsembleState,
    RLState,
    optimize_fidelity_rotation,
    step_energy_mode,
)
from .qubits import QubitHamiltonian, StateVector

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

CHECKPOINT_MAGIC = b"RLCQEDQN"
CHECKPOINT_VERSION = 1


class AgentError(RuntimeError):
    pass


class CheckpointError(AgentError):
    pass


def gelu(x: np.ndarray) -> np.ndarray:
    return x * _gauss_cdf(x)


def gelu_grad(x: np.ndarray, cdf: np.ndarray | None = None) -> np.ndarray:
    if cdf is None:
        cdf = _gauss_cdf(x)
    return cdf + x * np.exp(-0.5 * x * x) * _INV_SQRT_2PI


def _gauss_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT2))


@dataclass
class TrainConfig:
    discount: float = 0.99
    learning_rate: float = 2e-4
    batch_size: int = 256
    episodes: int = 3000
    lam: float = 0.5
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5
    target_sync_period: int = 100
    seed: int = 0
    max_steps: int = 5
    buffer_capacity: int = 10**6
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.01
    residual_tolerance: float = 1e-8
    eval_every: int = 50
    early_stop_tolerance: float | None = 1e-3

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise AgentError("discount factor must lie strictly between 0 and 1")
        if self.batch_size < 1 or self.episodes < 1 or self.max_steps < 1:
            raise AgentError("batch size, episodes and max_steps must be positive")

    def epsilon(self, episode: int) -> float:
        """Linear decay over the first ``epsilon_decay_fraction`` of episodes."""
        horizon = max(1, int(self.episodes * self.epsilon_decay_fraction))
        frac = min(1.0, episode / horizon)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


class QNetwork:
    """8 affine layers, GELU between them, none after the last."""

    N_LAYERS = 8

    def __init__(self, input_width: int, pool_size: int, hidden: int = 512, seed: int = 0):
        self.input_width = input_width
        self.pool_size = pool_size
        self.hidden = hidden
        rng = np.random.default_rng(seed)
        widths = [input_width] + [hidden] * (self.N_LAYERS - 1) + [pool_size]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self._init_optimizer_state()

    def _init_optimizer_state(self):
        self.opt_step = 0
        self.opt_m = [np.zeros_like(p) for p in self._params()]
        self.opt_v = [np.zeros_like(p) for p in self._params()]

    def _params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward_batch(self, X: np.ndarray, keep_cache: bool = False):
        """Batched forward pass; optionally returns pre-activation cache."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.input_width:
            raise AgentError(
                f"input width {X.shape[-1]} does not match network width {self.input_width}"
            )
        act = X
        cache = [act]
        cdfs = []
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = act @ w.T + b
            if i < n - 1:
                cdf = _gauss_cdf(z)
                act = z * cdf
                if keep_cache:
                    cdfs.append((z, cdf))
            else:
                act = z
            cache.append(act)
        if keep_cache:
            return act, (cache, cdfs)
        return act

    def clone(self) -> "QNetwork":
        other = QNetwork.__new__(QNetwork)
        other.input_width = self.input_width
        other.pool_size = self.pool_size
        other.hidden = self.hidden
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        other._init_optimizer_state()
        return other


def forward(net: QNetwork, state: RLState | np.ndarray) -> np.ndarray:
    """Q-values for a single RL state."""
    x = state.features if isinstance(state, RLState) else np.asarray(state, dtype=float)
    return net.forward_batch(x[None, :])[0]


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action_index: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayBuffer:
    """FIFO ring of transitions with uniform without-replacement sampling."""

    def __init__(self, capacity: int = 10**6):
        self.capacity = capacity
        self._data: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, transition: Transition) -> None:
        if len(self._data) < self.capacity:
            self._data.append(transition)
        else:
            self._data[self._cursor] = transition
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        idx = rng.choice(len(self._data), size=batch_size, replace=False)
        return [self._data[i] for i in idx]


def _batch_arrays(minibatch: list[Transition]):
    states = np.stack([t.state for t in minibatch])
    actions = np.array([t.action_index for t in minibatch])
    rewards = np.array([t.reward for t in minibatch])
    next_states = np.stack([t.next_state for t in minibatch])
    terminals = np.array([t.terminal for t in minibatch], dtype=bool)
    return states, actions, rewards, next_states, terminals


def backward_and_update(
    net: QNetwork,
    minibatch: list[Transition],
    target_net: QNetwork,
    config: TrainConfig,
) -> float:
    """One AdamW step on the mean-squared Bellman error of the minibatch.

    Targets y = r + discount * max_a Q_target(s', a), clamped to y = r on
    terminal transitions; gradients flow only through Q(s, a).
    """
    if not minibatch:
        raise AgentError("minibatch must be non-empty")
    states, actions, rewards, next_states, terminals = _batch_arrays(minibatch)
    B = states.shape[0]

    q_next = target_net.forward_batch(next_states).max(axis=1)
    y = rewards + config.discount * np.where(terminals, 0.0, q_next)

    q_all, (cache, cdfs) = net.forward_batch(states, keep_cache=True)
    q_sel = q_all[np.arange(B), actions]
    err = q_sel - y
    loss = float(np.mean(err**2))

    # backprop: dL/dQ is nonzero only at the taken actions
    grad_out = np.zeros_like(q_all)
    grad_out[np.arange(B), actions] = 2.0 * err / B

    n = len(net.weights)
    grads_w = [None] * n
    grads_b = [None] * n
    delta = grad_out
    for i in range(n - 1, -1, -1):
        a_prev = cache[i]
        grads_w[i] = delta.T @ a_prev
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            z, cdf = cdfs[i - 1]
            delta = (delta @ net.weights[i]) * gelu_grad(z, cdf)

    # AdamW: decoupled weight decay applied directly to parameters
    net.opt_step += 1
    t = net.opt_step
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    lr, wd = config.learning_rate, config.weight_decay
    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.append(gw)
        grads.append(gb)
    for p, g, m, v in zip(net._params(), grads, net.opt_m, net.opt_v):
        p *= 1.0 - lr * wd
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return loss


def select_action(
    net: QNetwork,
    state: RLState | np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy; greedy ties resolve to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise AgentError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(net.pool_size))
    return int(np.argmax(forward(net, state)))


def sync_target(net: QNetwork, target_net: QNetwork) -> QNetwork:
    """Hard parameter copy into the target network."""
    for src, dst in zip(net.weights, target_net.weights):
        dst[...] = src
    for src, dst in zip(net.biases, target_net.biases):
        dst[...] = src
    return target_net


def greedy_lookahead_select(
    snapshot,
    H: QubitHamiltonian,
    pool: ActionPool,
    mode: str = "energy",
    lam: float = 0.5,
    target: StateVector | None = None,
) -> int:
    """Training-free baseline: best one-step reward over the whole pool.

    ``snapshot`` is the current EnsembleState in energy mode or the current
    statevector in fidelity mode (with ``target`` the state to match). Ties
    resolve to the lowest index.
    """
    if mode == "energy":
        if not isinstance(snapshot, EnsembleState):
            raise AgentError("energy mode expects an EnsembleState snapshot")
        best_idx, best_reward = 0, -np.inf
        for i in range(len(pool)):
            _, outcome = step_energy_mode(snapshot, H, pool, i, lam)
            if outcome.reward > best_reward:
                best_reward, best_idx = outcome.reward, i
        return best_idx
    if mode == "fidelity":
        if target is None:
            raise AgentError("fidelity mode requires a target state")
        best_idx, best_reward = 0, -np.inf
        for i, action in enumerate(pool.actions):
            _, _, fid = optimize_fidelity_rotation(snapshot, target, action)
            if fid > best_reward:
                best_reward, best_idx = fid, i
        return best_idx
    raise AgentError(f"unknown lookahead mode {mode!r}")


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

def checkpoint_save(net: QNetwork, path) -> None:
    """Versioned little-endian binary dump of parameters and Adam moments."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IIIII", CHECKPOINT_VERSION, net.input_width,
                             net.pool_size, net.hidden, len(net.weights)))
        fh.write(struct.pack("<Q", net.opt_step))
        for w in net._params():
            fh.write(struct.pack("<I", w.ndim))
            fh.write(struct.pack(f"<{w.ndim}I", *w.shape))
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        for group in (net.opt_m, net.opt_v):
            for m in group:
                fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CheckpointError("truncated checkpoint file")
    return data


def checkpoint_load(path, expected_pool_size: int | None = None) -> QNetwork:
    with open(path, "rb") as fh:
        if _read_exact(fh, len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise CheckpointError("not a recognized checkpoint file")
        version, input_width, pool_size, hidden, n_layers = struct.unpack(
            "<IIIII", _read_exact(fh, 20)
        )
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        if expected_pool_size is not None and pool_size != expected_pool_size:
            raise CheckpointError(
                f"checkpoint pool size {pool_size} does not match expected "
                f"{expected_pool_size}"
            )
        (opt_step,) = struct.unpack("<Q", _read_exact(fh, 8))
        net = QNetwork.__new__(QNetwork)
        net.input_width = input_width
        net.pool_size = pool_size
        net.hidden = hidden
        params = []
        for _ in range(2 * n_layers):
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim))
            count = int(np.prod(shape))
            arr = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").reshape(shape)
            params.append(arr.astype(float))
        net.weights = params[0::2]
        net.biases = params[1::2]
        net.opt_step = opt_step
        net.opt_m = []
        net.opt_v = []
        for group in (net.opt_m, net.opt_v):
            for p in params:
                arr = np.frombuffer(_read_exact(fh, 8 * p.size), dtype="<f8")
                group.append(arr.reshape(p.shape).astype(float))
        if net.weights[0].shape[1] != input_width or net.weights[-1].shape[0] != pool_size:
            raise CheckpointError("checkpoint layer shapes are inconsistent")
    return net
