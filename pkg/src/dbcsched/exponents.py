"""Gallager random-coding exponents for superposition coding with successive decoding."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .channel import DegradedBroadcastChannel, effective_channel, marginal_input
from .errors import DegenerateChannel, InvalidParameter, InvalidSchedule

CLAMP = 1e-12
ORDER_TOL = 1e-9
DEFAULT_RHO_GRID = tuple(round(0.05 * i, 2) for i in range(1, 21))


def gallager_sum(q: np.ndarray, W: np.ndarray, rho: float) -> float:
    """sum_y (sum_x q(x) W(y|x)^(1/(1+rho)))^(1+rho)."""
    inner = np.asarray(q) @ np.power(W, 1.0 / (1.0 + rho))
    return float(np.sum(np.power(inner, 1.0 + rho)))


def e0(ch: DegradedBroadcastChannel, k: int, j: int, rho: float) -> float:
    """E_o for decoding the receiver-k cloud at receiver j (nats), 1 <= j <= k <= J.

    For k < J the inner input law is q_k(. | x_{k+1}) and the Gallager sum is
    averaged over x_{k+1} inside the logarithm. The weight of each x_{k+1} is
    the product q_J q_{J-1} ... q_{k+1} summed over the upper letters, which is
    just the marginal of X_{k+1}.
    """
    ch._check(k, j)
    if j > k:
        raise InvalidParameter(f"need j <= k, got j={j}, k={k}")
    if not 0.0 <= rho <= 1.0:
        raise InvalidParameter(f"rho={rho} outside [0, 1]")
    W = effective_channel(ch, k, j)
    if k == ch.J:
        total = gallager_sum(ch.top_input, W, rho)
    else:
        cond = ch.prefix(k)
        weights = marginal_input(ch, k + 1)
        total = sum(w * gallager_sum(cond[x], W, rho) for x, w in enumerate(weights) if w > 0)
    val = -math.log(total)
    return 0.0 if val < CLAMP else val


@dataclass(frozen=True)
class ExponentTable:
    rho: float
    values: np.ndarray  # values[k-1, j-1] for j <= k, NaN above the diagonal

    @property
    def J(self) -> int:
        return self.values.shape[0]

    def __call__(self, k: int, j: int) -> float:
        if not 1 <= j <= k <= self.J:
            raise InvalidParameter(f"no exponent stored for (k={k}, j={j})")
        return float(self.values[k - 1, j - 1])

    def pairs(self) -> Iterable[tuple[int, int]]:
        for k in range(1, self.J + 1):
            for j in range(1, k + 1):
                yield k, j


def exponent_table(
    ch: DegradedBroadcastChannel, rho: float, active: Iterable[int] | None = None
) -> ExponentTable:
    """Evaluate e0 for every j <= k.

    ``active`` lists receivers whose messages will carry positive rate; every
    exponent those receivers' clouds depend on must be strictly positive.
    """
    if not 0.0 < rho <= 1.0:
        raise InvalidParameter(f"rho={rho} outside (0, 1]")
    J = ch.J
    vals = np.full((J, J), np.nan)
    for k in range(1, J + 1):
        for j in range(1, k + 1):
            vals[k - 1, j - 1] = e0(ch, k, j, rho)
    for k in range(1, J + 1):
        for j in range(1, k):
            if vals[k - 1, j - 1] < vals[k - 1, k - 1] - ORDER_TOL:
                raise AssertionError(
                    f"degradation order violated: E({k},{j})={vals[k - 1, j - 1]} < E({k},{k})={vals[k - 1, k - 1]}"
                )
    vals.setflags(write=False)
    tab = ExponentTable(rho=float(rho), values=vals)
    for k in active or ():
        for j in range(1, k + 1):
            if tab(k, j) <= CLAMP:
                raise DegenerateChannel(f"E_o(k={k}, j={j}) = {tab(k, j):.3g} at rho={rho}")
    return tab


def asymptotic_rate_r1(tab: ExponentTable, s: Sequence[int], i: int) -> float:
    """Limit of R_i(s) as the common alphabet size grows (regime R1).

    Cloud indices k with s_k = 0 carry no codeword and are left out of the min.
    """
    if not any(s):
        raise InvalidSchedule("schedule must be nonzero")
    if s[i - 1] == 0:
        return 0.0
    return min(
        s[i - 1] / s[k - 1] * tab(k, j) / tab.rho
        for k, j in tab.pairs()
        if s[k - 1] > 0
    )


def asymptotic_rate_r2(tab: ExponentTable, M: Sequence[int], i: int) -> float:
    """Limit of R_i(s) for s = (t, ..., t), t -> infinity (regime R2)."""
    if any(m < 2 for m in M):
        raise InvalidParameter(f"alphabet sizes must be >= 2, got {list(M)}")
    logs = [math.log(m) for m in M]
    return min(logs[i - 1] / logs[k - 1] * tab(k, j) / tab.rho for k, j in tab.pairs())


def r1_vector(tab: ExponentTable, s: Sequence[int]) -> np.ndarray:
    return np.array([asymptotic_rate_r1(tab, s, i) for i in range(1, tab.J + 1)])


def r2_vector(tab: ExponentTable, M: Sequence[int]) -> np.ndarray:
    return np.array([asymptotic_rate_r2(tab, M, i) for i in range(1, tab.J + 1)])


def find_dominating_schedule(
    tab: ExponentTable, target: Sequence[float], max_total: int
) -> tuple[int, ...] | None:
    """Smallest-total schedule whose R1 rate vector dominates ``target``."""
    J = tab.J
    target = np.asarray(target)
    for total in range(1, max_total + 1):
        for s in _compositions(total, J):
            if np.all(r1_vector(tab, s) >= target):
                return s
    return None


def find_dominating_alphabets(
    tab: ExponentTable, target: Sequence[float], max_log2: int = 16
) -> tuple[int, ...] | None:
    """Search M over powers of two up to 2**max_log2 for an R2 vector dominating ``target``."""
    target = np.asarray(target)
    for exps in itertools.product(range(1, max_log2 + 1), repeat=tab.J):
        M = tuple(2**e for e in exps)
        if np.all(r2_vector(tab, M) >= target):
            return M
    return None


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def rho_sweep(
    ch: DegradedBroadcastChannel,
    rates: Sequence[float],
    grid: Sequence[float] = DEFAULT_RHO_GRID,
) -> tuple[float, list[tuple[float, float]]]:
    """Random-coding margin min_{j<=k} (E_o(k,j,rho) - rho R_k) over a rho grid.

    Returns the maximizing rho and the (rho, margin) pairs. Only a report:
    downstream length and stability calculations use the configured rho.
    """
    rows = []
    for rho in grid:
        tab = exponent_table(ch, rho)
        margin = min(tab(k, j) - rho * rates[k - 1] for k, j in tab.pairs())
        rows.append((float(rho), margin))
    best = max(rows, key=lambda r: r[1])[0]
    return best, rows
