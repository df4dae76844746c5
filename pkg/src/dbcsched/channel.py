"""Finite-alphabet degraded broadcast channels.

The channel is the Markov chain

    X_J -> X_{J-1} -> ... -> X_1 -> Y_1 -> Y_2 -> ... -> Y_J

described by a top input law q_J(x_J), prefix kernels q_l(x_l | x_{l+1}),
a base kernel p(y_1 | x_1) and degrading kernels p_l(y_l | y_{l-1}).
All kernels are row-stochastic numpy arrays (rows index the conditioning
letter). Receiver indices are 1-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import IndexOutOfRange, InvalidParameter

ROW_TOL = 1e-12
COMPOSED_ROW_TOL = 1e-10


def stochastic_matrix(probs, tol: float = ROW_TOL) -> np.ndarray:
    """Validate ``probs`` as a row-stochastic matrix and return a read-only copy."""
    a = np.array(probs, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidParameter(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if np.any(a < 0) or np.any(a > 1):
        raise InvalidParameter("matrix entries must lie in [0, 1]")
    dev = np.max(np.abs(a.sum(axis=1) - 1.0))
    if dev > tol:
        raise InvalidParameter(f"rows must sum to 1 (max deviation {dev:.3g})")
    a.setflags(write=False)
    return a


def probability_vector(probs, tol: float = ROW_TOL) -> np.ndarray:
    v = np.array(probs, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise InvalidParameter("expected a non-empty probability vector")
    if np.any(v < 0) or np.any(v > 1):
        raise InvalidParameter("probabilities must lie in [0, 1]")
    if abs(v.sum() - 1.0) > tol:
        raise InvalidParameter(f"probabilities sum to {v.sum()!r}, not 1")
    v.setflags(write=False)
    return v


def bsc(eps: float) -> np.ndarray:
    return stochastic_matrix([[1 - eps, eps], [eps, 1 - eps]])


@dataclass(frozen=True)
class DegradedBroadcastChannel:
    """A J-receiver degraded broadcast channel with a fixed input distribution.

    ``prefixes`` runs from q_{J-1} down to q_1 and ``degraders`` from p_2 up to
    p_J, i.e. both lists are in the order the signal flows through them.
    """

    top_input: np.ndarray
    prefixes: tuple[np.ndarray, ...]
    base: np.ndarray
    degraders: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "top_input", probability_vector(self.top_input))
        object.__setattr__(self, "prefixes", tuple(stochastic_matrix(m) for m in self.prefixes))
        object.__setattr__(self, "base", stochastic_matrix(self.base))
        object.__setattr__(self, "degraders", tuple(stochastic_matrix(m) for m in self.degraders))
        if len(self.prefixes) != len(self.degraders):
            raise InvalidParameter(
                f"need J-1 prefixes and J-1 degraders, got {len(self.prefixes)} and {len(self.degraders)}"
            )
        stages = [self.top_input[None, :], *self.prefixes, self.base, *self.degraders]
        for i, (a, b) in enumerate(zip(stages, stages[1:])):
            if a.shape[1] != b.shape[0]:
                raise InvalidParameter(
                    f"stage {i} has {a.shape[1]} outputs but stage {i + 1} has {b.shape[0]} inputs"
                )

    @property
    def J(self) -> int:
        return len(self.degraders) + 1

    def _check(self, *idx: int) -> None:
        for i in idx:
            if not 1 <= i <= self.J:
                raise IndexOutOfRange(f"receiver index {i} outside 1..{self.J}")

    def prefix(self, l: int) -> np.ndarray:
        """q_l(x_l | x_{l+1}) for 1 <= l <= J-1 (rows indexed by x_{l+1})."""
        if not 1 <= l <= self.J - 1:
            raise IndexOutOfRange(f"prefix index {l} outside 1..{self.J - 1}")
        return self.prefixes[self.J - 1 - l]

    def degrader(self, l: int) -> np.ndarray:
        """p_l(y_l | y_{l-1}) for 2 <= l <= J."""
        if not 2 <= l <= self.J:
            raise IndexOutOfRange(f"degrader index {l} outside 2..{self.J}")
        return self.degraders[l - 2]

    def input_size(self, k: int) -> int:
        self._check(k)
        return self.base.shape[0] if k == 1 else self.prefix(k - 1).shape[0]

    def output_size(self, j: int) -> int:
        self._check(j)
        return self.base.shape[1] if j == 1 else self.degrader(j).shape[1]


def effective_channel(ch: DegradedBroadcastChannel, k: int, j: int) -> np.ndarray:
    """Transition law from X_k to Y_j: q_{k-1} ... q_1, then p, then p_2 ... p_j."""
    ch._check(k, j)
    mats = [ch.prefix(l) for l in range(k - 1, 0, -1)]
    mats.append(ch.base)
    mats.extend(ch.degrader(l) for l in range(2, j + 1))
    out = reduce(np.matmul, mats)
    # accumulated round-off only; anything larger is a bug upstream
    assert np.max(np.abs(out.sum(axis=1) - 1.0)) <= COMPOSED_ROW_TOL
    out.setflags(write=False)
    return out


def marginal_input(ch: DegradedBroadcastChannel, k: int) -> np.ndarray:
    ch._check(k)
    q = np.asarray(ch.top_input)
    for l in range(ch.J - 1, k - 1, -1):
        q = q @ ch.prefix(l)
    return q


def entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def mutual_information(q: np.ndarray, W: np.ndarray) -> float:
    """I(X;Y) in nats for input law ``q`` and channel ``W`` (0 ln 0 = 0)."""
    q = np.asarray(q, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    joint = q[:, None] * W
    py = joint.sum(axis=0)
    denom = q[:, None] * py[None, :]
    mask = joint > 0
    val = float(np.sum(joint[mask] * np.log(joint[mask] / denom[mask])))
    return max(val, 0.0)


def conditional_mutual_information(ch: DegradedBroadcastChannel, k: int, j: int) -> float:
    """I(X_k; Y_j | X_{k+1}) for k < J, or I(X_J; Y_j) for k = J."""
    ch._check(k, j)
    W = effective_channel(ch, k, j)
    if k == ch.J:
        return mutual_information(ch.top_input, W)
    cond = ch.prefix(k)
    weights = marginal_input(ch, k + 1)
    return float(sum(w * mutual_information(cond[x], W) for x, w in enumerate(weights) if w > 0))


def mutual_information_vector(ch: DegradedBroadcastChannel) -> np.ndarray:
    """Per-receiver rate limits (I(X_1;Y_1|X_2), ..., I(X_J;Y_J)) in nats, index j-1."""
    return np.array([conditional_mutual_information(ch, j, j) for j in range(1, ch.J + 1)])


def build_bsc_cascade(
    eps: Sequence[float],
    prefixes: Sequence | None = None,
    top_input: Sequence[float] | None = None,
) -> DegradedBroadcastChannel:
    """Binary cascade: base BSC(eps[0]) followed by degraders BSC(eps[1]), ..."""
    for e in eps:
        if not 0.0 <= e <= 0.5:
            raise InvalidParameter(f"crossover probability {e} outside [0, 1/2]")
    J = len(eps)
    if J < 1:
        raise InvalidParameter("need at least one receiver")
    if prefixes is None:
        prefixes = [np.eye(2)] * (J - 1)
    if top_input is None:
        top_input = [0.5, 0.5]
    for m in prefixes:
        if np.shape(m) != (2, 2):
            raise InvalidParameter("bsc_cascade prefixes must be 2x2")
    return DegradedBroadcastChannel(
        top_input=top_input,
        prefixes=tuple(prefixes),
        base=bsc(eps[0]),
        degraders=tuple(bsc(e) for e in eps[1:]),
    )


def random_channel(
    rng: np.random.Generator, J: int, max_alphabet: int = 4, min_alphabet: int = 2
) -> DegradedBroadcastChannel:
    """Random degraded chain with Dirichlet(1) rows; alphabet sizes drawn per stage."""
    sizes = rng.integers(min_alphabet, max_alphabet + 1, size=2 * J)

    def kernel(r, c):
        m = rng.dirichlet(np.ones(c), size=r)
        return m / m.sum(axis=1, keepdims=True)

    top = rng.dirichlet(np.ones(sizes[0]))
    top = top / top.sum()
    prefixes = [kernel(sizes[i], sizes[i + 1]) for i in range(J - 1)]
    base = kernel(sizes[J - 1], sizes[J])
    degraders = [kernel(sizes[J + i], sizes[J + i + 1]) for i in range(J - 1)]
    return DegradedBroadcastChannel(top, tuple(prefixes), base, tuple(degraders))
