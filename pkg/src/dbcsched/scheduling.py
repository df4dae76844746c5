"""Schedules, random-coding error bounds and minimal codeword lengths."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import Infeasible, InvalidParameter, InvalidSchedule
from .exponents import CLAMP, ExponentTable, _compositions

Schedule = tuple[int, ...]


@dataclass(frozen=True)
class CodingConfig:
    M: tuple[int, ...]
    p_e: tuple[float, ...]
    rho: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(int(m) for m in self.M))
        object.__setattr__(self, "p_e", tuple(float(p) for p in self.p_e))
        if len(self.M) != len(self.p_e):
            raise InvalidParameter("M and p_e must have one entry per receiver")
        if any(m < 2 for m in self.M):
            raise InvalidParameter(f"alphabet sizes must be >= 2, got {self.M}")
        if any(not 0.0 < p < 1.0 for p in self.p_e):
            raise InvalidParameter(f"error targets must lie in (0, 1), got {self.p_e}")
        if not 0.0 < self.rho <= 1.0:
            raise InvalidParameter(f"rho={self.rho} outside (0, 1]")

    @property
    def J(self) -> int:
        return len(self.M)


def enumerate_schedules(J: int, K: int) -> list[Schedule]:
    """All s in Z_+^J with sum(s) <= K, ordered by total then descending lex."""
    if J < 1 or K < 1:
        raise InvalidParameter(f"need J >= 1 and K >= 1, got J={J}, K={K}")
    return [s for total in range(K + 1) for s in _compositions(total, J)]


def subsets(s: Sequence[int]) -> list[Schedule]:
    """Every nonzero s' <= s componentwise."""
    if not any(s):
        raise InvalidSchedule("schedule must be nonzero")
    out = [t for t in itertools.product(*(range(n + 1) for n in s)) if any(t)]
    return sorted(out, key=lambda t: (sum(t), [-x for x in t]))


def _active(s: Sequence[int], j: int) -> list[int]:
    return [k for k in range(j, len(s) + 1) if s[k - 1] > 0]


def chi(s: Sequence[int], N: int, j: int, cfg: CodingConfig, tab: ExponentTable) -> float:
    """Random-coding bound on receiver j's error probability at length N.

    Sum over the nonempty clouds k >= j of exp(-(N E_o(k,j) - rho s_k ln M_k)).
    """
    rho = tab.rho
    return sum(
        math.exp(-(N * tab(k, j) - rho * s[k - 1] * math.log(cfg.M[k - 1])))
        for k in _active(s, j)
    )


def ceil_q(x: float, q: float) -> float:
    """Smallest multiple n*q (n >= 1) with x <= n*q."""
    return _ceil_count(x, q) * q


def _ceil_count(x: float, q: float) -> int:
    n = max(1, math.ceil(x / q))
    while n > 1 and x <= (n - 1) * q:
        n -= 1
    while x > n * q:
        n += 1
    return n


def _require_positive(s, j, tab):
    for k in _active(s, j):
        if tab(k, j) <= CLAMP:
            raise Infeasible(f"E_o(k={k}, j={j}) is zero; no finite codeword length for schedule {tuple(s)}")


def length_bounds(s: Sequence[int], j: int, cfg: CodingConfig, tab: ExponentTable) -> tuple[int, int]:
    """Integer sandwich lower <= N_j(s) <= upper.

    The upper bound splits p_ej evenly over the a_j active clouds rather than
    over all J-j+1 candidates; with a_j = 1 the two bounds coincide.
    """
    _require_positive(s, j, tab)
    act = _active(s, j)
    if not act:
        return 0, 0
    rho, p = tab.rho, cfg.p_e[j - 1]

    def bound(target):
        return max(
            _ceil_count(-math.log(target) + rho * s[k - 1] * math.log(cfg.M[k - 1]), tab(k, j))
            for k in act
        )

    return bound(p), bound(p / len(act))


def codeword_length_rx(s: Sequence[int], j: int, cfg: CodingConfig, tab: ExponentTable) -> int:
    """Smallest N >= 1 with chi(s, N, j) <= p_ej; 0 when receiver j decodes nothing."""
    lo, hi = length_bounds(s, j, cfg, tab)
    if hi == 0:
        return 0
    p = cfg.p_e[j - 1]
    # the upper bound is exact in real arithmetic; round-off can push it by a step
    while chi(s, hi, j, cfg, tab) > p:
        hi += 1
    while lo < hi:
        mid = (lo + hi) // 2
        if chi(s, mid, j, cfg, tab) <= p:
            hi = mid
        else:
            lo = mid + 1
    n = hi
    while n > 1 and chi(s, n - 1, j, cfg, tab) <= p:
        n -= 1
    return n


def codeword_length(s: Sequence[int], cfg: CodingConfig, tab: ExponentTable) -> int:
    if not any(s):
        raise InvalidSchedule("schedule must be nonzero")
    return max(codeword_length_rx(s, j, cfg, tab) for j in range(1, len(s) + 1))


@dataclass(frozen=True)
class ScheduleEntry:
    s: Schedule
    N_rx: tuple[int, ...]
    N: int
    rates: tuple[float, ...]  # nats per channel use, R_k(s) = s_k ln M_k / N(s)
    bounds: tuple[tuple[int, int], ...]

    @property
    def service(self) -> np.ndarray:
        """Messages per slot credited to each receiver, s_j / N(s)."""
        return np.array([sj / self.N for sj in self.s])


@dataclass
class ScheduleTable:
    K: int
    cfg: CodingConfig
    rho: float
    entries: dict[Schedule, ScheduleEntry] = field(default_factory=dict)

    @property
    def J(self) -> int:
        return self.cfg.J

    def __getitem__(self, s: Sequence[int]) -> ScheduleEntry:
        return self.entries[tuple(s)]

    def __contains__(self, s) -> bool:
        return tuple(s) in self.entries

    def __iter__(self) -> Iterator[Schedule]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def N(self, s: Sequence[int]) -> int:
        return self.entries[tuple(s)].N

    def schedules(self) -> list[Schedule]:
        return list(self.entries)

    def service_matrix(self) -> np.ndarray:
        """Rows v(s) = s / N(s), in table order."""
        return np.array([e.service for e in self.entries.values()])


def build_schedule_table(K: int, cfg: CodingConfig, tab: ExponentTable) -> ScheduleTable:
    if tab.J != cfg.J:
        raise InvalidParameter("exponent table and coding config disagree on J")
    if abs(tab.rho - cfg.rho) > 0:
        raise InvalidParameter(f"exponent table rho={tab.rho} but coding config rho={cfg.rho}")
    table = ScheduleTable(K=K, cfg=cfg, rho=tab.rho)
    for s in enumerate_schedules(cfg.J, K):
        if not any(s):
            continue
        n_rx = tuple(codeword_length_rx(s, j, cfg, tab) for j in range(1, cfg.J + 1))
        N = max(n_rx)
        rates = tuple(sk * math.log(m) / N for sk, m in zip(s, cfg.M))
        bounds = tuple(length_bounds(s, j, cfg, tab) for j in range(1, cfg.J + 1))
        table.entries[s] = ScheduleEntry(s=s, N_rx=n_rx, N=N, rates=rates, bounds=bounds)
    return table
