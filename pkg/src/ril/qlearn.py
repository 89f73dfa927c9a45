"""Q-learning core: replay memory, Q-functions, targets, SGD, target sync.

Two Q-function variants share one interface: ``TabularQ`` (rows keyed by the
exact feature vector) and ``MLPQ`` (one ReLU hidden layer, kernels in
``ril.kernels``).
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .interpose import Source


class NonFiniteLossError(FloatingPointError):
    """Raised when a gradient step produces a non-finite loss or gradient."""


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


@dataclass(frozen=True)
class HyperParams:
    discount: float = 0.99
    learning_rate: float = 0.01
    batch_size: int = 32
    capacity: int = 10_000
    sync_period: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_steps: int = 10_000

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        for name in ("batch_size", "capacity", "sync_period"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not (0 <= self.eps_end <= 1 and 0 <= self.eps_start <= 1):
            raise ValueError("epsilon bounds must lie in [0, 1]")
        if self.eps_steps < 0:
            raise ValueError("eps_steps must be non-negative")

    def epsilon(self, global_step: int) -> float:
        """Linear anneal from eps_start to eps_end over eps_steps steps."""
        if self.eps_steps == 0 or global_step >= self.eps_steps:
            return self.eps_end
        frac = global_step / self.eps_steps
        return self.eps_start + frac * (self.eps_end - self.eps_start)


class ReplayMemory:
    """FIFO ring of transitions backed by preallocated arrays."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.terminals = np.zeros(capacity, dtype=np.uint8)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, state, action, reward, next_state, terminal):
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.terminals[i] = terminal
        self._next = (i + 1) % self.capacity
        if self._size < self.capacity:
            self._size += 1

    def __getitem__(self, i) -> Transition:
        return Transition(self.states[i].copy(), int(self.actions[i]), float(self.rewards[i]),
                          self.next_states[i].copy(), bool(self.terminals[i]))

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        start = self._next if self._size == self.capacity else 0
        return [self[(start + k) % self.capacity] for k in range(self._size)]

    def sample_indices(self, batch_size: int, rng) -> np.ndarray:
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay memory")
        return rng.indices(self._size, batch_size)


def sample_batch(mem: ReplayMemory, batch_size: int, rng) -> list[Transition]:
    """Uniform sample with replacement."""
    return [mem[int(i)] for i in mem.sample_indices(batch_size, rng)]


def _stack(batch):
    S = np.array([t.state for t in batch], dtype=np.float64)
    A = np.array([t.action for t in batch], dtype=np.int64)
    R = np.array([t.reward for t in batch], dtype=np.float64)
    S2 = np.array([t.next_state for t in batch], dtype=np.float64)
    D = np.array([t.terminal for t in batch], dtype=np.uint8)
    return S, A, R, S2, D


class TabularQ:
    variant = "tabular"

    def __init__(self, n_inputs: int, n_actions: int):
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.table: dict[bytes, np.ndarray] = {}
        self._zeros = np.zeros(n_actions)

    def _key(self, x) -> bytes:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_inputs,):
            raise ValueError(f"expected state of dim {self.n_inputs}, got shape {x.shape}")
        return x.tobytes()

    def values(self, x) -> np.ndarray:
        row = self.table.get(self._key(x))
        return self._zeros.copy() if row is None else row.copy()

    def values_batch(self, X) -> np.ndarray:
        return np.array([self.values(x) for x in X]).reshape(len(X), self.n_actions)

    def greedy(self, x) -> tuple[int, float]:
        row = self.table.get(self._key(x), self._zeros)
        a = int(row.argmax())
        return a, float(row[a])

    def sgd_step(self, X, actions, targets, lr) -> float:
        """Per-entry update ``Q(s,a) += lr * (y - Q(s,a))``, applied in batch order.

        Returns the mean squared error measured before any update."""
        keys = [self._key(x) for x in X]
        errs = [targets[j] - self.table.get(k, self._zeros)[actions[j]] for j, k in enumerate(keys)]
        loss = float(np.mean(np.square(errs)))
        if not math.isfinite(loss):
            return loss
        for j, k in enumerate(keys):
            row = self.table.get(k)
            if row is None:
                row = self.table[k] = np.zeros(self.n_actions)
            a = actions[j]
            row[a] += lr * (targets[j] - row[a])
        return loss

    def replay_update(self, target: TabularQ, mem: ReplayMemory, idx, discount, lr) -> float:
        R, S2, D = mem.rewards[idx], mem.next_states[idx], mem.terminals[idx]
        y = R.copy()
        for j in range(len(idx)):
            if not D[j]:
                y[j] += discount * target.table.get(S2[j].tobytes(), self._zeros).max()
        return self.sgd_step(mem.states[idx], mem.actions[idx], y, lr)

    def copy(self) -> TabularQ:
        out = TabularQ(self.n_inputs, self.n_actions)
        out.table = {k: v.copy() for k, v in self.table.items()}
        return out

    def copy_from(self, other: TabularQ):
        self.table = {k: v.copy() for k, v in other.table.items()}

    def flat(self) -> np.ndarray:
        """Rows of ``[features..., values...]`` in sorted-key order, flattened."""
        rows = [np.concatenate([np.frombuffer(k, dtype=np.float64), self.table[k]])
                for k in sorted(self.table)]
        if not rows:
            return np.zeros(0)
        return np.concatenate(rows)

    def set_flat(self, flat):
        width = self.n_inputs + self.n_actions
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size % width:
            raise ValueError("tabular payload is not a whole number of rows")
        self.table = {}
        for row in flat.reshape(-1, width):
            self.table[np.ascontiguousarray(row[: self.n_inputs]).tobytes()] = row[self.n_inputs:].copy()


class MLPQ:
    variant = "mlp"

    def __init__(self, n_inputs: int, n_actions: int, hidden: int = 32, rng=None):
        self.n_inputs = n_inputs
        self.n_actions = n_actions
        self.hidden = hidden
        self.W1 = np.zeros((hidden, n_inputs))
        self.b1 = np.zeros(hidden)
        self.W2 = np.zeros((n_actions, hidden))
        self.b2 = np.zeros(n_actions)
        if rng is not None:
            self.init_uniform(rng)

    def init_uniform(self, rng: np.random.Generator):
        """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
        for arr, fan_in in ((self.W1, self.n_inputs), (self.b1, self.n_inputs),
                            (self.W2, self.hidden), (self.b2, self.hidden)):
            lim = 1.0 / math.sqrt(fan_in)
            arr[...] = rng.uniform(-lim, lim, size=arr.shape)

    @property
    def params(self):
        return self.W1, self.b1, self.W2, self.b2

    def _check(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_inputs:
            raise ValueError(f"expected state of dim {self.n_inputs}, got shape {x.shape}")
        return x

    def values(self, x) -> np.ndarray:
        return kernels.q_forward(*self.params, self._check(x))

    def values_batch(self, X) -> np.ndarray:
        return kernels.q_forward_batch(*self.params, self._check(np.atleast_2d(X)))

    def greedy(self, x) -> tuple[int, float]:
        return kernels.greedy(*self.params, x)

    def loss_and_grad(self, X, actions, targets):
        return kernels.loss_and_grad(*self.params, self._check(np.atleast_2d(X)),
                                     np.asarray(actions, dtype=np.int64),
                                     np.asarray(targets, dtype=np.float64))

    def sgd_step(self, X, actions, targets, lr) -> float:
        return kernels.sgd_step(*self.params, self._check(np.atleast_2d(X)),
                                np.asarray(actions, dtype=np.int64),
                                np.asarray(targets, dtype=np.float64), float(lr))

    def replay_update(self, target: MLPQ, mem: ReplayMemory, idx, discount, lr) -> float:
        return kernels.dqn_update(*self.params, *target.params, mem.states, mem.actions,
                                  mem.rewards, mem.next_states, mem.terminals, idx,
                                  float(discount), float(lr))

    def copy(self) -> MLPQ:
        out = MLPQ(self.n_inputs, self.n_actions, self.hidden)
        out.copy_from(self)
        return out

    def copy_from(self, other: MLPQ):
        for dst, src in zip(self.params, other.params):
            np.copyto(dst, src)

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        sizes = [p.size for p in self.params]
        if flat.size != sum(sizes):
            raise ValueError(f"expected {sum(sizes)} parameters, got {flat.size}")
        off = 0
        for p, n in zip(self.params, sizes):
            p[...] = flat[off: off + n].reshape(p.shape)
            off += n


def make_q(variant: str, n_inputs: int, n_actions: int, hidden: int = 32, seed: int = 0):
    if variant == "tabular":
        return TabularQ(n_inputs, n_actions)
    if variant == "mlp":
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x0A1]))
        return MLPQ(n_inputs, n_actions, hidden, rng)
    raise ValueError(f"unknown Q-function variant {variant!r}; expected 'tabular' or 'mlp'")


class TargetNetwork:
    """Frozen copy of a Q-function, refreshed every ``sync_period`` steps."""

    def __init__(self, q, sync_period: int):
        if sync_period < 1:
            raise ValueError("sync_period must be positive")
        self.q = q.copy()
        self.sync_period = sync_period

    def maybe_sync(self, q, global_step: int) -> bool:
        if global_step % self.sync_period == 0:
            self.q.copy_from(q)
            return True
        return False


def maybe_sync(target: TargetNetwork, q, global_step: int) -> bool:
    return target.maybe_sync(q, global_step)


def q_values(q, state) -> np.ndarray:
    return q.values(state)


def greedy_action(q, state) -> int:
    """Argmax of the Q-values; ties go to the lowest action id."""
    return q.greedy(np.ascontiguousarray(state, dtype=np.float64))[0]


def epsilon_greedy(q, state, epsilon: float, rng) -> tuple[int, Source]:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return rng.randbelow(q.n_actions), Source.RANDOM_EXPLORATION
    return greedy_action(q, state), Source.NETWORK_GREEDY


def bellman_target(batch: list[Transition], target, discount: float) -> np.ndarray:
    if not batch:
        raise ValueError("empty batch")
    tq = target.q if isinstance(target, TargetNetwork) else target
    _, _, R, S2, D = _stack(batch)
    nxt = tq.values_batch(S2).max(axis=1)
    return np.where(D.astype(bool), R, R + discount * nxt)


def gradient_step(q, batch: list[Transition], targets, lr: float) -> float:
    """One SGD step on the batch; returns the pre-update loss."""
    if len(batch) != len(targets):
        raise ValueError("batch and targets differ in length")
    S, A, _, _, _ = _stack(batch)
    loss = q.sgd_step(S, A, np.asarray(targets, dtype=np.float64), lr)
    if not math.isfinite(loss):
        raise NonFiniteLossError(f"non-finite loss {loss!r}; parameters left unchanged")
    return loss


# Checkpoint layout, little-endian:
#   magic "RILQ" | u16 version | u8 variant (0 tabular, 1 mlp) | u8 reserved
#   | u32 n_inputs | u32 hidden | u32 n_actions | i64 seed | u64 n_floats
#   | u32 crc32(payload) | payload: n_floats float64
_HEADER = struct.Struct("<4sHBBIIIqQI")
_MAGIC = b"RILQ"
_VERSION = 1
_VARIANTS = {"tabular": 0, "mlp": 1}


class CheckpointError(ValueError):
    pass


def checkpoint_bytes(q, seed: int = 0) -> bytes:
    payload = np.ascontiguousarray(q.flat(), dtype="<f8").tobytes()
    hidden = getattr(q, "hidden", 0)
    header = _HEADER.pack(_MAGIC, _VERSION, _VARIANTS[q.variant], 0, q.n_inputs, hidden,
                          q.n_actions, int(seed), len(payload) // 8, zlib.crc32(payload))
    return header + payload


def load_checkpoint_bytes(data: bytes):
    """Returns ``(q, seed)``; raises CheckpointError on any header mismatch."""
    if len(data) < _HEADER.size:
        raise CheckpointError("checkpoint truncated: shorter than header")
    magic, version, variant, _, n_in, hidden, n_act, seed, n, crc = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise CheckpointError(f"bad magic {magic!r}; not a checkpoint")
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    payload = data[_HEADER.size:]
    if len(payload) != 8 * n:
        raise CheckpointError(f"payload has {len(payload)} bytes, header says {8 * n}")
    if zlib.crc32(payload) != crc:
        raise CheckpointError("payload checksum mismatch")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if variant == 0:
        q = TabularQ(n_in, n_act)
    elif variant == 1:
        q = MLPQ(n_in, n_act, hidden)
    else:
        raise CheckpointError(f"unknown variant code {variant}")
    q.set_flat(flat)
    return q, seed
