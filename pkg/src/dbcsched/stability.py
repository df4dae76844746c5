"""Service rates, the stability outer bound, and state-independent policies.

A message class is a pair (j, s): a receiver-j message that will only ever
be sent inside a joint codeword of schedule s.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import lp
from .errors import (
    Infeasible,
    InvalidParameter,
    InvalidSchedule,
    MissingLength,
    NotInDriftRegion,
    UnservedReceiver,
)
from .scheduling import CodingConfig, Schedule, ScheduleTable

PROB_TOL = 1e-12
SLACK_TOL = 1e-9
BOUNDARY_TOL = 1e-12

ClassKey = tuple[int, Schedule]


@dataclass(frozen=True)
class Policy:
    """Probability p(s) of drawing schedule s in every slot, regardless of state."""

    probs: Mapping[Schedule, float]

    def __post_init__(self):
        probs = {tuple(int(x) for x in s): float(p) for s, p in self.probs.items()}
        if not probs:
            raise InvalidParameter("policy has no schedules")
        J = {len(s) for s in probs}
        if len(J) != 1:
            raise InvalidParameter("policy schedules have inconsistent lengths")
        if any(p < 0 for p in probs.values()):
            raise InvalidParameter("policy probabilities must be nonnegative")
        total = math.fsum(probs.values())
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidParameter(f"policy probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @property
    def J(self) -> int:
        return len(next(iter(self.probs)))

    def p(self, s: Sequence[int]) -> float:
        return self.probs.get(tuple(s), 0.0)

    def support(self) -> list[Schedule]:
        return [s for s, p in self.probs.items() if p > 0]

    @classmethod
    def uniform(cls, schedules: Sequence[Schedule]) -> "Policy":
        n = len(schedules)
        return cls({tuple(s): 1.0 / n for s in schedules})

    @classmethod
    def from_weights(cls, weights: Mapping[Schedule, float]) -> "Policy":
        """Normalize nonnegative weights (tiny negatives from LP round-off are dropped)."""
        w = {tuple(s): max(float(v), 0.0) for s, v in weights.items()}
        total = math.fsum(w.values())
        return cls({s: v / total for s, v in w.items() if v > 0})


def _N(tbl: ScheduleTable, s: Schedule) -> int:
    if s not in tbl:
        raise MissingLength(f"no codeword length for schedule {s}")
    return tbl.N(s)


def class_rate(pol: Policy, tbl: ScheduleTable, j: int, s: Schedule) -> float:
    """p(s) s_j / N(s): the long-run service rate of class (j, s) in messages/slot."""
    p = pol.p(s)
    if p == 0 or s[j - 1] == 0:
        return 0.0
    return p * s[j - 1] / _N(tbl, s)


def service_rates(pol: Policy, tbl: ScheduleTable) -> np.ndarray:
    """psi_j = sum over s with s_j > 0 of p(s) s_j / N(s)."""
    psi = np.zeros(pol.J)
    for s in pol.support():
        if not any(s):
            continue
        N = _N(tbl, s)
        for j, sj in enumerate(s):
            if sj > 0:
                psi[j] += pol.p(s) * sj / N
    return psi


@dataclass
class RegionQuery:
    """Outcome of the max-slack LP for a rate vector beta.

    ``slack`` is max over measures pi of min_j (sum_s pi(s) v_j(s) - beta_j).
    """

    beta: np.ndarray
    slack: float
    witness: Policy | None

    @property
    def contains(self) -> bool:
        return self.slack >= -SLACK_TOL

    @property
    def interior(self) -> bool:
        return self.slack > SLACK_TOL


def max_slack(beta: Sequence[float], tbl: ScheduleTable) -> RegionQuery:
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (tbl.J,):
        raise InvalidParameter(f"beta must have {tbl.J} entries")
    if np.any(beta < 0):
        raise InvalidParameter("beta must be componentwise nonnegative")
    scheds = [(0,) * tbl.J, *tbl.schedules()]
    V = np.array([np.zeros(tbl.J), *(tbl[s].service for s in scheds[1:])])  # (n, J)
    n = len(scheds)
    # t = tau - shift keeps the free slack variable nonnegative
    shift = float(beta.max()) + 1.0
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([-V.T, np.ones((tbl.J, 1))])
    b_ub = shift - beta
    A_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    res = lp.maximize(c, A_ub, b_ub, A_eq, [1.0])
    assert res.status == "optimal", res.status
    pi = res.x[:n]
    witness = Policy.from_weights({s: w for s, w in zip(scheds, pi)})
    return RegionQuery(beta=beta, slack=res.value - shift, witness=witness)


def outer_bound_contains(beta: Sequence[float], tbl: ScheduleTable) -> RegionQuery:
    """Membership of beta in the closed outer bound; truthiness via ``.contains``."""
    return max_slack(beta, tbl)


def synthesize_policy(EA: Sequence[float], tbl: ScheduleTable) -> Policy:
    """A state-independent policy whose service rates strictly exceed EA."""
    EA = np.asarray(EA, dtype=np.float64)
    if np.any(EA < 0):
        raise InvalidParameter("arrival means must be nonnegative")
    if not np.any(EA > 0):
        return Policy.uniform(tbl.schedules())
    q = max_slack(EA, tbl)
    if not q.interior:
        raise Infeasible(
            f"arrival vector {EA.tolist()} is not inside the stability region (max slack {q.slack:.3g})"
        )
    psi = service_rates(q.witness, tbl)
    assert np.all(psi[EA > 0] > EA[EA > 0])
    return q.witness


@dataclass(frozen=True)
class SplittingMatrix:
    """mu[(j, s)]: probability that a receiver-j arrival joins class (j, s)."""

    mu: Mapping[ClassKey, float]
    J: int

    def row(self, j: int) -> dict[Schedule, float]:
        return {s: m for (jj, s), m in self.mu.items() if jj == j}

    def classes(self) -> list[ClassKey]:
        return [key for key, m in self.mu.items() if m > 0]

    def class_means(self, EA: Sequence[float]) -> dict[ClassKey, float]:
        return {(j, s): EA[j - 1] * m for (j, s), m in self.mu.items()}


def splitting(pol: Policy, tbl: ScheduleTable, EA: Sequence[float] | None = None) -> SplittingMatrix:
    """Split each receiver's arrivals in proportion to its classes' service rates."""
    mu: dict[ClassKey, float] = {}
    for j in range(1, pol.J + 1):
        weights = {s: class_rate(pol, tbl, j, s) for s in pol.support() if s[j - 1] > 0}
        total = math.fsum(weights.values())
        if total <= 0:
            if EA is not None and EA[j - 1] > 0:
                raise UnservedReceiver(f"receiver {j} has arrivals but no schedule in the policy serves it")
            continue
        for s, w in weights.items():
            if w > 0:
                mu[(j, s)] = w / total
    return SplittingMatrix(mu=mu, J=pol.J)


def splitting_for_class_means(
    targets: Mapping[ClassKey, float], J: int
) -> tuple[np.ndarray, SplittingMatrix]:
    """Receiver means and a splitting matrix that realize given per-class means."""
    EA = np.zeros(J)
    for (j, _), m in targets.items():
        EA[j - 1] += m
    mu = {(j, s): m / EA[j - 1] for (j, s), m in targets.items() if m > 0}
    return EA, SplittingMatrix(mu=mu, J=J)


def class_costs(state, tbl: ScheduleTable) -> dict[ClassKey, int]:
    """c_js = N(s) n_js + s_j t_js for every class present in ``state``.

    t_js is the remaining time of schedule s's ongoing transmission when class
    (j, s) has messages in it, and 0 otherwise.
    """
    out: dict[ClassKey, int] = {}
    for (j, s), n in state.fresh.items():
        out[(j, s)] = _N(tbl, s) * n
    for s, rec in state.ongoing.items():
        for j, x in enumerate(rec.x, start=1):
            if x > 0:
                out[(j, s)] = out.get((j, s), 0) + s[j - 1] * rec.t
    return out


def lyapunov_V(
    state, pol: Policy, tbl: ScheduleTable, class_means: Mapping[ClassKey, float]
) -> tuple[float, float]:
    """Quadratic Lyapunov function V and cost c = 1 + sum c_js."""
    V = 0.0
    c = 1.0
    for (j, s), cjs in class_costs(state, tbl).items():
        if cjs == 0:
            continue
        denom = pol.p(s) * s[j - 1] - class_means.get((j, s), 0.0) * _N(tbl, s)
        if denom <= 0:
            raise NotInDriftRegion(f"class ({j}, {s}) has p(s)s_j - EA_js N(s) = {denom:.3g} <= 0")
        V += cjs * cjs / (2.0 * denom)
        c += cjs
    return V, c


class Verdict(enum.Enum):
    STABLE = "Stable"
    TRANSIENT = "Transient"
    BOUNDARY = "Boundary"


@dataclass
class Classification:
    verdict: Verdict
    per_class: dict[ClassKey, Verdict] = field(default_factory=dict)
    margins: dict[ClassKey, float] = field(default_factory=dict)  # p(s)s_j/N(s) - EA_js


def classify(class_means: Mapping[ClassKey, float], pol: Policy, tbl: ScheduleTable) -> Classification:
    keys = {k for k, m in class_means.items() if m > 0}
    keys |= {(j, s) for s in pol.support() if any(s) for j in range(1, pol.J + 1) if s[j - 1] > 0}
    out = Classification(verdict=Verdict.STABLE)
    for j, s in sorted(keys, key=lambda k: (k[0], sum(k[1]), k[1])):
        margin = class_rate(pol, tbl, j, s) - class_means.get((j, s), 0.0)
        if margin > BOUNDARY_TOL:
            v = Verdict.STABLE
        elif margin < -BOUNDARY_TOL:
            v = Verdict.TRANSIENT
        else:
            v = Verdict.BOUNDARY
        out.per_class[(j, s)] = v
        out.margins[(j, s)] = margin
    verdicts = set(out.per_class.values())
    if Verdict.TRANSIENT in verdicts:
        out.verdict = Verdict.TRANSIENT
    elif Verdict.BOUNDARY in verdicts:
        out.verdict = Verdict.BOUNDARY
    return out


def nat_rate_check(s: Sequence[int], EA_nats: Sequence[float], cfg: CodingConfig, tbl: ScheduleTable) -> bool:
    """Whether nat arrival rates fit strictly under R_j(s) = s_j ln M_j / N(s)."""
    s = tuple(s)
    if not any(s):
        raise InvalidSchedule("schedule must be nonzero")
    N = _N(tbl, s)
    for sj, m, a in zip(s, cfg.M, EA_nats):
        if sj > 0:
            if not a < sj * math.log(m) / N:
                return False
        elif a != 0:
            return False
    return True
