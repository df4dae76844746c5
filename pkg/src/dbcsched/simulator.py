"""Slotted-time simulation of scheduled message transmission.

Each slot, in order:

1. every receiver j draws a batch A_j from its ArrivalSpec, and each message
   independently joins class (j, s) with probability mu_js;
2. one schedule s* is drawn with probability p(s*), independently of state;
3. if s* has an ongoing transmission its remaining time drops by one (and
   its messages depart when it reaches zero); otherwise, if any class of s*
   holds fresh messages, a new joint codeword starts with min(n_js*, s*_j)
   messages per receiver and N(s*) - 1 slots still to go.

Randomness comes from three independent PCG64 streams spawned from the seed:
``arrivals`` (one uniform per (slot, receiver), slot-major), ``classes`` (one
uniform per arriving message in slot, receiver, arrival order) and
``schedules`` (one uniform per slot). Every quantity is drawn by inverse CDF
from its own stream, so traces do not depend on the chunk size.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidParameter, TraceTooShort
from .scheduling import Schedule, ScheduleTable
from .stability import ClassKey, Policy, SplittingMatrix, lyapunov_V

CHUNK = 1 << 16


@dataclass(frozen=True)
class ArrivalSpec:
    """Batch-size pmf over {0, ..., len(pmf) - 1} for one receiver."""

    pmf: tuple[float, ...]

    def __post_init__(self):
        pmf = tuple(float(p) for p in self.pmf)
        if not pmf or any(p < 0 for p in pmf):
            raise InvalidParameter("arrival pmf must be a nonempty list of nonnegative numbers")
        if abs(math.fsum(pmf) - 1.0) > 1e-12:
            raise InvalidParameter(f"arrival pmf sums to {math.fsum(pmf)!r}, not 1")
        object.__setattr__(self, "pmf", pmf)

    @property
    def mean(self) -> float:
        return math.fsum(k * p for k, p in enumerate(self.pmf))

    @property
    def second_moment(self) -> float:
        return math.fsum(k * k * p for k, p in enumerate(self.pmf))

    @classmethod
    def with_mean(cls, mean: float) -> "ArrivalSpec":
        """Two-point law on floor(mean) and floor(mean) + 1 (Bernoulli when mean < 1)."""
        if mean < 0:
            raise InvalidParameter("arrival mean must be nonnegative")
        lo = math.floor(mean)
        frac = mean - lo
        pmf = [0.0] * (lo + 2)
        pmf[lo] = 1.0 - frac
        pmf[lo + 1] = frac
        return cls(tuple(pmf))

    @classmethod
    def none(cls) -> "ArrivalSpec":
        return cls((1.0,))


@dataclass(frozen=True)
class OngoingRecord:
    x: tuple[int, ...]  # messages in flight per receiver
    t: int  # selected slots still to go


@dataclass
class SystemState:
    fresh: dict[ClassKey, int] = field(default_factory=dict)
    ongoing: dict[Schedule, OngoingRecord] = field(default_factory=dict)

    def copy(self) -> "SystemState":
        return SystemState(dict(self.fresh), dict(self.ongoing))


@dataclass
class SimConfig:
    policy: Policy
    split: SplittingMatrix
    table: ScheduleTable
    arrivals: Sequence[ArrivalSpec]
    horizon: int
    seed: int = 0
    stride: int = 1
    W: float = 1.0
    initial_fresh: Mapping[ClassKey, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon < 0:
            raise InvalidParameter("horizon must be nonnegative")
        if self.stride < 1:
            raise InvalidParameter("sampling stride must be >= 1")
        if len(self.arrivals) != self.policy.J:
            raise InvalidParameter("need one ArrivalSpec per receiver")
        for s in self.policy.support():
            if any(s) and s not in self.table:
                raise InvalidParameter(f"policy schedule {s} missing from the schedule table")

    @property
    def J(self) -> int:
        return self.policy.J

    @property
    def classes(self) -> list[ClassKey]:
        keys = set(self.split.classes()) | {k for k, n in self.initial_fresh.items() if n > 0}
        return sorted(keys, key=lambda k: (k[0], sum(k[1]), [-x for x in k[1]]))

    @property
    def schedules(self) -> list[Schedule]:
        # canonical order, so traces do not depend on how the policy mapping was written
        support = (s for s, p in self.policy.probs.items() if p > 0)
        return sorted(support, key=lambda s: (sum(s), [-x for x in s]))


class Streams:
    """Independent generators for arrivals, class assignment and schedule draws."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        a, c, s = np.random.SeedSequence(self.seed).spawn(3)
        self.arrivals = np.random.Generator(np.random.PCG64(a))
        self.classes = np.random.Generator(np.random.PCG64(c))
        self.schedules = np.random.Generator(np.random.PCG64(s))


def _inverse_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


def draw_slots(cfg: SimConfig, streams: Streams, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class arrival counts (n, C) and drawn schedule indices (n,) into cfg.schedules."""
    classes = cfg.classes
    cidx = {k: i for i, k in enumerate(classes)}
    J = cfg.J
    u = streams.arrivals.random((n, J))
    A = np.empty((n, J), dtype=np.int64)
    for j, spec in enumerate(cfg.arrivals):
        A[:, j] = _inverse_cdf(np.cumsum(spec.pmf), u[:, j])

    counts = np.zeros((n, len(classes)), dtype=np.int64)
    owner = np.repeat(np.arange(n * J), A.ravel())
    if owner.size:
        um = streams.classes.random(owner.size)
        slot, recv = np.divmod(owner, J)
        for j in range(1, J + 1):
            row = cfg.split.row(j)
            keys = [s for s, m in row.items() if m > 0]
            sel = recv == j - 1
            if not sel.any():
                continue
            if not keys:
                raise InvalidParameter(f"receiver {j} has arrivals but no class to join")
            cdf = np.cumsum([row[s] for s in keys])
            pick = _inverse_cdf(cdf / cdf[-1], um[sel])
            col = np.array([cidx[(j, s)] for s in keys])[pick]
            np.add.at(counts, (slot[sel], col), 1)

    scheds = cfg.schedules
    pcdf = np.cumsum([cfg.policy.p(s) for s in scheds])
    sidx = _inverse_cdf(pcdf / pcdf[-1], streams.schedules.random(n))
    return counts, sidx


def apply_slot(
    state: SystemState, class_arrivals: Mapping[ClassKey, int], s: Schedule, table: ScheduleTable
) -> tuple[SystemState, dict[ClassKey, int]]:
    """One slot of dynamics given the slot's arrivals and drawn schedule."""
    new = state.copy()
    for k, a in class_arrivals.items():
        if a:
            new.fresh[k] = new.fresh.get(k, 0) + a
    departed: dict[ClassKey, int] = {}
    if not any(s):
        return new, departed
    rec = new.ongoing.get(s)
    if rec is not None:
        if rec.t - 1 == 0:
            del new.ongoing[s]
            departed = {(j, s): x for j, x in enumerate(rec.x, start=1) if x > 0}
        else:
            new.ongoing[s] = OngoingRecord(rec.x, rec.t - 1)
        return new, departed
    x = tuple(min(new.fresh.get((j, s), 0), sj) for j, sj in enumerate(s, start=1))
    if not any(x):
        return new, departed
    for j, xj in enumerate(x, start=1):
        if xj:
            new.fresh[(j, s)] -= xj
    N = table.N(s)
    if N == 1:
        departed = {(j, s): xj for j, xj in enumerate(x, start=1) if xj > 0}
    else:
        new.ongoing[s] = OngoingRecord(x, N - 1)
    return new, departed


def step(state: SystemState, streams: Streams, cfg: SimConfig) -> SystemState:
    counts, sidx = draw_slots(cfg, streams, 1)
    arrivals = {k: int(a) for k, a in zip(cfg.classes, counts[0])}
    new, _ = apply_slot(state, arrivals, cfg.schedules[int(sidx[0])], cfg.table)
    return new


@dataclass
class SimTrace:
    """Per-class series sampled at ``slots`` (state after the slot's actions)."""

    seed: int
    horizon: int
    stride: int
    classes: list[ClassKey]
    N: np.ndarray  # codeword length of each class's schedule
    s_j: np.ndarray  # s_j of each class
    slots: np.ndarray
    arrivals: np.ndarray  # cumulative, (samples, C)
    departures: np.ndarray
    fresh: np.ndarray
    in_flight: np.ndarray
    t_rem: np.ndarray  # t_js
    initial: np.ndarray  # initial backlog per class
    W: float = 1.0

    @property
    def class_costs(self) -> np.ndarray:
        return self.N * self.fresh + self.s_j * self.t_rem

    @property
    def c_alpha(self) -> np.ndarray:
        return 1.0 + self.class_costs.sum(axis=1)

    def __len__(self) -> int:
        return self.slots.size

    def states(self, rows: Sequence[int] | None = None) -> list[SystemState]:
        """Rebuild SystemState objects (schedule t_rem recovered from any class in flight)."""
        out = []
        rows = range(len(self)) if rows is None else rows
        for r in rows:
            st = SystemState()
            flight: dict[Schedule, dict[int, int]] = {}
            tt: dict[Schedule, int] = {}
            for c, (j, s) in enumerate(self.classes):
                if self.fresh[r, c]:
                    st.fresh[(j, s)] = int(self.fresh[r, c])
                if self.in_flight[r, c]:
                    flight.setdefault(s, {})[j] = int(self.in_flight[r, c])
                    tt[s] = int(self.t_rem[r, c])
            for s, xs in flight.items():
                st.ongoing[s] = OngoingRecord(tuple(xs.get(j, 0) for j in range(1, len(s) + 1)), tt[s])
            out.append(st)
        return out


def _step_series(events: list[tuple[int, int]], samples: np.ndarray, initial: int = 0) -> np.ndarray:
    if not events:
        return np.full(samples.size, initial, dtype=np.int64)
    ev = np.array(events, dtype=np.int64)
    pos = np.searchsorted(ev[:, 0], samples, side="right") - 1
    vals = np.concatenate([[initial], ev[:, 1]])
    return vals[pos + 1]


def run(cfg: SimConfig) -> SimTrace:
    """Simulate ``cfg.horizon`` slots from the empty state (plus any initial backlog)."""
    classes = cfg.classes
    C = len(classes)
    cidx = {k: i for i, k in enumerate(classes)}
    scheds = cfg.schedules
    members = []  # per drawn-schedule index: [(class idx, j, s_j)]
    lengths = []
    for s in scheds:
        members.append([(cidx[(j, s)], j, sj) for j, sj in enumerate(s, start=1) if sj > 0 and (j, s) in cidx])
        lengths.append(cfg.table.N(s) if any(s) else 0)

    initial = np.array([cfg.initial_fresh.get(k, 0) for k in classes], dtype=np.int64)
    samples = np.arange(cfg.stride - 1, cfg.horizon, cfg.stride, dtype=np.int64)
    streams = Streams(cfg.seed)

    taken = [0] * C
    departed = [0] * C
    taken_ev: list[list] = [[] for _ in range(C)]
    dep_ev: list[list] = [[] for _ in range(C)]
    flight_ev: list[list] = [[] for _ in range(C)]
    t_ev: list[list] = [[] for _ in range(C)]
    rem = [0] * len(scheds)
    flight = [None] * len(scheds)
    cum_samples = []
    base = initial.copy()

    for start in range(0, cfg.horizon, CHUNK):
        n = min(CHUNK, cfg.horizon - start)
        counts, sidx = draw_slots(cfg, streams, n)
        cum = base + np.cumsum(counts, axis=0)
        base = cum[-1].copy()
        in_chunk = samples[(samples >= start) & (samples < start + n)] - start
        cum_samples.append(cum[in_chunk] - initial)
        cum_rows = cum.tolist()
        active = [i for i, m in enumerate(members) if m]
        busy = np.isin(sidx, active)
        for t in np.flatnonzero(busy).tolist():
            slot = start + t
            si = int(sidx[t])
            if rem[si]:
                rem[si] -= 1
                r = rem[si]
                x = flight[si]
                for c, xc in x:
                    t_ev[c].append((slot, r))
                    if r == 0:
                        departed[c] += xc
                        dep_ev[c].append((slot, departed[c]))
                        flight_ev[c].append((slot, 0))
                if r == 0:
                    flight[si] = None
                continue
            row = cum_rows[t]
            x = []
            for c, j, sj in members[si]:
                avail = row[c] - taken[c]
                if avail > 0:
                    take = avail if avail < sj else sj
                    taken[c] += take
                    taken_ev[c].append((slot, taken[c]))
                    x.append((c, take))
            if not x:
                continue
            N = lengths[si]
            if N == 1:
                for c, xc in x:
                    departed[c] += xc
                    dep_ev[c].append((slot, departed[c]))
            else:
                rem[si] = N - 1
                flight[si] = x
                for c, xc in x:
                    t_ev[c].append((slot, N - 1))
                    flight_ev[c].append((slot, xc))

    arrivals = np.vstack(cum_samples) if cum_samples else np.zeros((0, C), dtype=np.int64)
    def cols(evs):
        return np.column_stack([_step_series(e, samples) for e in evs]) if C else np.zeros((samples.size, 0), np.int64)

    tk = cols(taken_ev)
    fresh = (arrivals + initial - tk) if C else arrivals
    return SimTrace(
        seed=cfg.seed,
        horizon=cfg.horizon,
        stride=cfg.stride,
        classes=classes,
        N=np.array([cfg.table.N(s) for _, s in classes], dtype=np.int64),
        s_j=np.array([s[j - 1] for j, s in classes], dtype=np.int64),
        slots=samples,
        arrivals=arrivals.reshape(samples.size, C),
        departures=cols(dep_ev),
        fresh=fresh.reshape(samples.size, C),
        in_flight=cols(flight_ev),
        t_rem=cols(t_ev),
        initial=initial,
        W=cfg.W,
    )


def run_reference(cfg: SimConfig) -> SimTrace:
    """Same chain as ``run`` but advanced one ``apply_slot`` at a time (slow; for checking)."""
    classes = cfg.classes
    C = len(classes)
    streams = Streams(cfg.seed)
    state = SystemState(fresh={k: int(n) for k, n in cfg.initial_fresh.items() if n > 0})
    arr = np.zeros(C, dtype=np.int64)
    dep = np.zeros(C, dtype=np.int64)
    rows = {name: [] for name in ("arrivals", "departures", "fresh", "in_flight", "t_rem")}
    samples = []
    for start in range(0, cfg.horizon, CHUNK):
        n = min(CHUNK, cfg.horizon - start)
        counts, sidx = draw_slots(cfg, streams, n)
        for t in range(n):
            arr += counts[t]
            a = {k: int(v) for k, v in zip(classes, counts[t])}
            state, gone = apply_slot(state, a, cfg.schedules[int(sidx[t])], cfg.table)
            for k, v in gone.items():
                dep[classes.index(k)] += v
            slot = start + t
            if (slot + 1) % cfg.stride:
                continue
            samples.append(slot)
            rows["arrivals"].append(arr.copy())
            rows["departures"].append(dep.copy())
            rows["fresh"].append([state.fresh.get(k, 0) for k in classes])
            fl, tr = [], []
            for j, s in classes:
                rec = state.ongoing.get(s)
                xj = rec.x[j - 1] if rec else 0
                fl.append(xj)
                tr.append(rec.t if xj else 0)
            rows["in_flight"].append(fl)
            rows["t_rem"].append(tr)
    m = len(samples)
    arrays = {k: np.array(v, dtype=np.int64).reshape(m, C) for k, v in rows.items()}
    return SimTrace(
        seed=cfg.seed,
        horizon=cfg.horizon,
        stride=cfg.stride,
        classes=classes,
        N=np.array([cfg.table.N(s) for _, s in classes], dtype=np.int64),
        s_j=np.array([s[j - 1] for j, s in classes], dtype=np.int64),
        slots=np.array(samples, dtype=np.int64),
        initial=np.array([cfg.initial_fresh.get(k, 0) for k in classes], dtype=np.int64),
        W=cfg.W,
        **arrays,
    )


class Empirical(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class StabilityEstimate:
    verdict: Empirical
    slope: float  # c-units per slot over the second half
    mean_second_half: float
    mean_third_quarter: float


MIN_SAMPLES = 10_000


def estimate_stability(trace: SimTrace, eps_s: float = 1e-3) -> StabilityEstimate:
    """Classify a trace from the growth of c(alpha) over its second half."""
    n = len(trace)
    if n < MIN_SAMPLES:
        raise TraceTooShort(f"need at least {MIN_SAMPLES} samples, got {n}")
    c = trace.c_alpha
    x = trace.slots.astype(np.float64)
    half, q3 = n // 2, (3 * n) // 4
    xs, cs = x[half:], c[half:]
    slope = float(np.polyfit(xs, cs, 1)[0])
    m_half = float(cs.mean())
    m_q3 = float(c[half:q3].mean())
    if slope <= eps_s and abs(m_half - m_q3) <= 0.2 * m_q3:
        verdict = Empirical.STABLE
    elif slope >= 5 * eps_s:
        verdict = Empirical.UNSTABLE
    else:
        verdict = Empirical.INCONCLUSIVE
    return StabilityEstimate(verdict, slope, m_half, m_q3)


@dataclass
class DriftBucket:
    lo: float
    hi: float
    count: int
    mean_c: float
    mean_drift: float  # mean of V(next) - V(state)
    mean_drift_plus_c: float  # mean of V(next) - V(state) + c(state)
    stderr: float  # standard error of mean_drift (i.i.d. approximation)


@dataclass
class DriftReport:
    buckets: list[DriftBucket]
    quantile_edges: dict[float, float]

    def above(self, q: float) -> list[DriftBucket]:
        edge = self.quantile_edges[q]
        return [b for b in self.buckets if b.lo >= edge and b.count > 0]


DEFAULT_QUANTILES = (0.0, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 1.0)


def lyapunov_series(
    trace: SimTrace, pol: Policy, table: ScheduleTable, class_means: Mapping[ClassKey, float]
) -> tuple[np.ndarray, np.ndarray]:
    """V(alpha) and c(alpha) at every sample.

    Vectorized form of ``stability.lyapunov_V``; a class only needs a positive
    denominator when it is ever nonzero in the trace.
    """
    costs = trace.class_costs.astype(np.float64)
    denom = np.array(
        [pol.p(s) * s[j - 1] - class_means.get((j, s), 0.0) * table.N(s) for j, s in trace.classes]
    )
    used = costs.any(axis=0) if len(trace) else np.zeros(len(trace.classes), dtype=bool)
    if np.any(denom[used] <= 0):
        # delegate to the scalar routine for its diagnostic
        row = int(np.flatnonzero((costs[:, used & (denom <= 0)] > 0).any(axis=1))[0])
        lyapunov_V(trace.states([row])[0], pol, table, class_means)
    safe = np.where(used, denom, 1.0)
    V = (costs**2 / (2.0 * safe)).sum(axis=1)
    return V, 1.0 + costs.sum(axis=1)


def empirical_drift_check(
    trace: SimTrace,
    pol: Policy,
    table: ScheduleTable,
    class_means: Mapping[ClassKey, float],
    quantiles: Sequence[float] = DEFAULT_QUANTILES,
) -> DriftReport:
    """Mean one-step change of V, grouped by c(state) quantile buckets."""
    if trace.stride != 1:
        raise InvalidParameter("drift check needs every slot sampled (stride 1)")
    V, c = lyapunov_series(trace, pol, table, class_means)
    dV = V[1:] - V[:-1]
    c0 = c[:-1]
    edges = {q: float(np.quantile(c0, q)) for q in quantiles}
    cuts = sorted(set(edges.values()))
    if len(cuts) == 1:
        cuts.append(cuts[0])
    buckets = []
    for i, (lo, hi) in enumerate(zip(cuts, cuts[1:])):
        last = i == len(cuts) - 2
        sel = (c0 >= lo) & ((c0 <= hi) if last else (c0 < hi))
        k = int(sel.sum())
        if k == 0:
            buckets.append(DriftBucket(lo, hi, 0, math.nan, math.nan, math.nan, math.nan))
            continue
        d = dV[sel]
        buckets.append(
            DriftBucket(
                lo=lo,
                hi=hi,
                count=k,
                mean_c=float(c0[sel].mean()),
                mean_drift=float(d.mean()),
                mean_drift_plus_c=float((d + c0[sel]).mean()),
                stderr=float(d.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan,
            )
        )
    return DriftReport(buckets=buckets, quantile_edges=edges)


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, seed=seed)
