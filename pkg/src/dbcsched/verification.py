"""Property checks run by ``dbcsched verify``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DegradedBroadcastChannel
from .errors import Infeasible
from .exponents import ORDER_TOL, exponent_table
from .scheduling import (
    CodingConfig,
    ScheduleTable,
    chi,
    codeword_length_rx,
    length_bounds,
    subsets,
)
from .simulator import ArrivalSpec, SimConfig, run
from .stability import (
    Policy,
    class_rate,
    max_slack,
    splitting,
    synthesize_policy,
)


@dataclass
class PropertyResult:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}: {self.detail}"


def scan_length(s, j, cfg: CodingConfig, tab, limit: int = 1_000_000) -> int:
    """N_j(s) by plain linear scan N = 1, 2, 3, ..."""
    if not any(s[k - 1] for k in range(j, len(s) + 1)):
        return 0
    p = cfg.p_e[j - 1]
    for N in range(1, limit + 1):
        if chi(s, N, j, cfg, tab) <= p:
            return N
    raise RuntimeError(f"no length <= {limit} for schedule {s}, receiver {j}")


def check_subset_monotonicity(tbl: ScheduleTable, tab) -> PropertyResult:
    bad, pairs = [], 0
    for s in tbl:
        for sub in subsets(s):
            for j in range(1, tbl.J + 1):
                pairs += 1
                if tbl[sub].N_rx[j - 1] > tbl[s].N_rx[j - 1]:
                    bad.append((sub, s, j))
    return PropertyResult("subset monotonicity of N_j", not bad, f"{pairs} (s', s, j) triples, {len(bad)} violations")


def check_length_bounds(tbl: ScheduleTable, tab) -> PropertyResult:
    bad, n = [], 0
    for s in tbl:
        for j in range(1, tbl.J + 1):
            n += 1
            lo, hi = length_bounds(s, j, tbl.cfg, tab)
            scan = scan_length(s, j, tbl.cfg, tab)
            if not (lo <= scan <= hi and scan == codeword_length_rx(s, j, tbl.cfg, tab)):
                bad.append((s, j, lo, scan, hi))
    return PropertyResult("length sandwich bounds", not bad, f"{n} (s, j) pairs, {len(bad)} violations")


def check_degradation_order(ch: DegradedBroadcastChannel, rhos=(0.25, 0.5, 1.0)) -> PropertyResult:
    worst = np.inf
    for rho in rhos:
        tab = exponent_table(ch, rho)
        for k, j in tab.pairs():
            worst = min(worst, tab(k, j) - tab(k, k))
    return PropertyResult(
        "exponent degradation order", worst >= -ORDER_TOL, f"min E(k,j) - E(k,k) = {worst:.3g}"
    )


def check_region_identity(tbl: ScheduleTable, samples: int = 200, seed: int = 0) -> PropertyResult:
    rng = np.random.default_rng(seed)
    box = tbl.service_matrix().max(axis=0)
    disagree = 0
    inside = 0
    for _ in range(samples):
        beta = rng.uniform(0.0, box)
        interior = max_slack(beta, tbl).interior
        try:
            synthesize_policy(beta, tbl)
            ok = True
        except Infeasible:
            ok = False
        inside += interior
        disagree += interior != ok
    return PropertyResult(
        "outer-bound interior == synthesizable",
        disagree == 0,
        f"{samples} samples, {inside} interior, {disagree} disagreements",
    )


def check_saturation(
    tbl: ScheduleTable, pol: Policy, horizon: int = 1_000_000, seed: int = 0, rtol: float = 0.02
) -> PropertyResult:
    split = splitting(pol, tbl)
    backlog = {k: horizon for k in split.classes()}
    cfg = SimConfig(
        policy=pol,
        split=split,
        table=tbl,
        arrivals=[ArrivalSpec.none()] * tbl.J,
        horizon=horizon,
        seed=seed,
        stride=max(1, horizon // 1000),
        initial_fresh=backlog,
    )
    tr = run(cfg)
    worst = 0.0
    for c, (j, s) in enumerate(tr.classes):
        rate = tr.departures[-1, c] / (tr.slots[-1] + 1)
        worst = max(worst, abs(rate / class_rate(pol, tbl, j, s) - 1.0))
    return PropertyResult(
        "saturation throughput", worst <= rtol, f"max relative error {worst:.4f} over {len(tr.classes)} classes"
    )


def run_all(ch, tbl: ScheduleTable, tab, pol: Policy, region_samples=200, seed=0, saturation_horizon=1_000_000):
    return [
        check_subset_monotonicity(tbl, tab),
        check_length_bounds(tbl, tab),
        check_degradation_order(ch),
        check_region_identity(tbl, region_samples, seed),
        check_saturation(tbl, pol, saturation_horizon, seed),
    ]
