import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbcsched.channel import bsc, build_bsc_cascade
from dbcsched.errors import Infeasible, InvalidParameter, InvalidSchedule
from dbcsched.exponents import exponent_table
from dbcsched.scheduling import (
    CodingConfig,
    build_schedule_table,
    ceil_q,
    chi,
    codeword_length,
    codeword_length_rx,
    enumerate_schedules,
    length_bounds,
    subsets,
)
from dbcsched.verification import scan_length

REFERENCE_N = {
    (1, 0): 102,
    (0, 1): 80,
    (2, 0): 111,
    (1, 1): 102,
    (0, 2): 87,
    (3, 0): 121,
    (2, 1): 112,
    (1, 2): 102,
    (0, 3): 94,
}


def test_enumerate_two_receivers_one_cloud():
    assert enumerate_schedules(2, 1) == [(0, 0), (1, 0), (0, 1)]


def test_enumerate_counts():
    for J in (1, 2, 3, 4):
        for K in (1, 2, 3):
            assert len(enumerate_schedules(J, K)) == math.comb(K + J, J)


def test_enumerate_rejects():
    with pytest.raises(InvalidParameter):
        enumerate_schedules(0, 2)
    with pytest.raises(InvalidParameter):
        enumerate_schedules(2, 0)


def test_subsets_example():
    assert subsets((1, 1)) == [(1, 0), (0, 1), (1, 1)]
    assert len(subsets((2, 1, 1))) == 3 * 2 * 2 - 1
    with pytest.raises(InvalidSchedule):
        subsets((0, 0))


def test_chi_single_cloud_closed_form(ref_tab, ref_coding):
    # s = (0, 2), j = 2: one term exp(-(N E22 - 2 ln 2))
    for N in (10, 50, 87):
        assert chi((0, 2), N, 2, ref_coding, ref_tab) == pytest.approx(math.exp(-(N * ref_tab(2, 2) - 2 * math.log(2))))


def test_chi_two_clouds(ref_tab, ref_coding):
    N = 40
    expected = math.exp(-(N * ref_tab(1, 1) - math.log(2))) + math.exp(-(N * ref_tab(2, 1) - 2 * math.log(2)))
    assert chi((1, 2), N, 1, ref_coding, ref_tab) == pytest.approx(expected)


def test_chi_empty_clouds_contribute_nothing(ref_tab, ref_coding):
    assert chi((2, 0), 30, 2, ref_coding, ref_tab) == 0.0


def test_ceil_q():
    assert ceil_q(2.5, 1.0) == 3.0
    assert ceil_q(3.0, 1.0) == 3.0
    assert ceil_q(0.0, 0.5) == 0.5
    assert ceil_q(1.0, 0.25) == 1.0


def test_single_receiver_length_formula():
    ch = build_bsc_cascade([0.11])
    tab = exponent_table(ch, 0.6)
    cfg = CodingConfig(M=(4,), p_e=(1e-4,), rho=0.6)
    for t in (1, 2, 5):
        need = -math.log(1e-4) + 0.6 * t * math.log(4)
        assert codeword_length_rx((t,), 1, cfg, tab) == math.ceil(need / tab(1, 1))
        lo, hi = length_bounds((t,), 1, cfg, tab)
        assert lo == hi == codeword_length_rx((t,), 1, cfg, tab)


def test_reference_table_frozen(ref_table):
    assert {s: ref_table.N(s) for s in ref_table} == REFERENCE_N
    assert ref_table.schedules()[0] == (1, 0)


def test_reference_table_rates(ref_table):
    for s in ref_table:
        e = ref_table[s]
        assert e.N == max(e.N_rx)
        for k, r in enumerate(e.rates):
            assert r == pytest.approx(s[k] * math.log(2) / e.N)


def test_receiver_without_active_cloud(ref_tab, ref_coding):
    assert codeword_length_rx((2, 0), 2, ref_coding, ref_tab) == 0
    assert length_bounds((2, 0), 2, ref_coding, ref_tab) == (0, 0)


def test_zero_schedule_rejected(ref_tab, ref_coding):
    with pytest.raises(InvalidSchedule):
        codeword_length((0, 0), ref_coding, ref_tab)


def test_zero_exponent_is_infeasible():
    ch = build_bsc_cascade([0.5])
    tab = exponent_table(ch, 1.0)
    with pytest.raises(Infeasible):
        codeword_length((1,), CodingConfig((2,), (1e-3,)), tab)


def test_coding_config_validation():
    with pytest.raises(InvalidParameter):
        CodingConfig((2, 1), (1e-3, 1e-3))
    with pytest.raises(InvalidParameter):
        CodingConfig((2,), (1.0,))
    with pytest.raises(InvalidParameter):
        CodingConfig((2, 2), (1e-3,))
    with pytest.raises(InvalidParameter):
        CodingConfig((2,), (1e-3,), rho=0.0)


def test_table_rho_mismatch(ref_channel):
    tab = exponent_table(ref_channel, 0.5)
    with pytest.raises(InvalidParameter):
        build_schedule_table(2, CodingConfig((2, 2), (1e-3, 1e-3), rho=1.0), tab)


def _random_setup(seed, J):
    # BSC cascades with small crossovers keep exponents large enough for a linear scan
    rng = np.random.default_rng(seed)
    eps = rng.uniform(0.0, 0.12, J)
    prefixes = [bsc(e) for e in rng.uniform(0.02, 0.2, J - 1)]
    ch = build_bsc_cascade(eps, prefixes)
    rho = float(rng.uniform(0.2, 1.0))
    tab = exponent_table(ch, rho)
    M = tuple(int(m) for m in rng.integers(2, 9, J))
    p_e = tuple(float(p) for p in 10.0 ** rng.uniform(-4, -1, J))
    return CodingConfig(M, p_e, rho), tab


@pytest.mark.parametrize("J,K", [(1, 3), (2, 3), (3, 2), (3, 3)])
def test_lengths_agree_with_linear_scan(J, K):
    for seed in range(10):
        cfg, tab = _random_setup(seed, J)
        for s in enumerate_schedules(J, K)[1:]:
            for j in range(1, J + 1):
                assert codeword_length_rx(s, j, cfg, tab) == scan_length(s, j, cfg, tab)


@pytest.mark.parametrize("J,K", [(1, 3), (2, 3), (3, 2), (3, 3)])
def test_subset_monotonicity_exhaustive(J, K):
    for seed in range(8):
        cfg, tab = _random_setup(100 + seed, J)
        tbl = build_schedule_table(K, cfg, tab)
        for s in tbl:
            for sub in subsets(s):
                for j in range(J):
                    assert tbl[sub].N_rx[j] <= tbl[s].N_rx[j]
                assert tbl.N(sub) <= tbl.N(s)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_sandwich_bounds(seed, J, K):
    cfg, tab = _random_setup(seed, J)
    for s in enumerate_schedules(J, K)[1:]:
        for j in range(1, J + 1):
            lo, hi = length_bounds(s, j, cfg, tab)
            assert lo <= codeword_length_rx(s, j, cfg, tab) <= hi


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_length_meets_target_minimally(seed, J):
    cfg, tab = _random_setup(seed, J)
    for s in enumerate_schedules(J, 2)[1:]:
        for j in range(1, J + 1):
            n = codeword_length_rx(s, j, cfg, tab)
            if n == 0:
                continue
            assert chi(s, n, j, cfg, tab) <= cfg.p_e[j - 1]
            if n > 1:
                assert chi(s, n - 1, j, cfg, tab) > cfg.p_e[j - 1]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_chi_decreasing_in_length(seed, J):
    cfg, tab = _random_setup(seed, J)
    s = tuple([1] * J)
    for j in range(1, J + 1):
        vals = [chi(s, n, j, cfg, tab) for n in range(1, 200, 7)]
        assert all(b < a for a, b in zip(vals, vals[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_rates_consistent_with_lengths(seed, J):
    cfg, tab = _random_setup(seed, J)
    tbl = build_schedule_table(2, cfg, tab)
    for s in tbl:
        e = tbl[s]
        np.testing.assert_allclose(np.array(e.rates) * e.N, [sk * math.log(m) for sk, m in zip(s, cfg.M)])
        np.testing.assert_allclose(e.service, np.array(s) / e.N)
