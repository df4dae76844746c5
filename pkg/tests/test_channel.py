import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbcsched.channel import (
    DegradedBroadcastChannel,
    bsc,
    build_bsc_cascade,
    conditional_mutual_information,
    effective_channel,
    marginal_input,
    mutual_information,
    mutual_information_vector,
    random_channel,
)
from dbcsched.errors import IndexOutOfRange, InvalidParameter


def binary_entropy(e):
    return -sum(p * math.log(p) for p in (e, 1 - e) if p > 0)


def test_effective_channel_k1_j1_is_base(ref_channel):
    assert np.array_equal(effective_channel(ref_channel, 1, 1), ref_channel.base)


@pytest.mark.parametrize("e1,e2", [(0.1, 0.05), (0.0, 0.3), (0.25, 0.25), (0.5, 0.1)])
def test_bsc_composition(e1, e2):
    ch = build_bsc_cascade([e1, e2], [bsc(0.2)])
    # 2x2 product worked out by hand
    flip = e1 * (1 - e2) + e2 * (1 - e1)
    np.testing.assert_allclose(effective_channel(ch, 1, 2), [[1 - flip, flip], [flip, 1 - flip]], atol=1e-15)


def test_identity_degrader_leaves_channel_unchanged():
    ch = build_bsc_cascade([0.1, 0.0], [bsc(0.3)])
    np.testing.assert_array_equal(effective_channel(ch, 1, 2), effective_channel(ch, 1, 1))


def test_effective_channel_through_prefix():
    ch = build_bsc_cascade([0.1, 0.05], [bsc(0.2)])
    expected = bsc(0.2) @ bsc(0.1) @ bsc(0.05)
    np.testing.assert_allclose(effective_channel(ch, 2, 2), expected)


def test_effective_channel_index_errors(ref_channel):
    with pytest.raises(IndexOutOfRange):
        effective_channel(ref_channel, 3, 1)
    with pytest.raises(IndexOutOfRange):
        effective_channel(ref_channel, 1, 0)


def test_marginal_input_top_is_unchanged(ref_channel):
    np.testing.assert_array_equal(marginal_input(ref_channel, 2), ref_channel.top_input)


def test_marginal_input_uniform_through_doubly_stochastic():
    ch = build_bsc_cascade([0.1, 0.1, 0.1], [bsc(0.3), bsc(0.2)], [0.5, 0.5])
    np.testing.assert_allclose(marginal_input(ch, 1), [0.5, 0.5])


def test_marginal_input_identity_prefix():
    ch = build_bsc_cascade([0.1, 0.1], [np.eye(2)], [0.3, 0.7])
    np.testing.assert_allclose(marginal_input(ch, 1), [0.3, 0.7])


def test_marginal_input_index_error(ref_channel):
    with pytest.raises(IndexOutOfRange):
        marginal_input(ref_channel, 3)


def test_useless_channel_has_zero_information():
    ch = DegradedBroadcastChannel(
        top_input=[0.5, 0.5],
        prefixes=(bsc(0.2),),
        base=[[0.3, 0.7], [0.3, 0.7]],
        degraders=(bsc(0.1),),
    )
    assert np.all(mutual_information_vector(ch) == 0.0)


@pytest.mark.parametrize("eps", [0.0, 0.01, 0.11, 0.3, 0.5])
def test_bsc_mutual_information(eps):
    ch = build_bsc_cascade([eps])
    assert mutual_information_vector(ch)[0] == pytest.approx(math.log(2) - binary_entropy(eps), abs=1e-14)


def test_identity_channel_carries_ln2():
    ch = build_bsc_cascade([0.0])
    assert mutual_information_vector(ch)[0] == pytest.approx(math.log(2), abs=1e-15)


def test_bsc_cascade_construction():
    ch = build_bsc_cascade([0.1, 0.05])
    np.testing.assert_array_equal(ch.base, bsc(0.1))
    np.testing.assert_array_equal(ch.degrader(2), bsc(0.05))
    zero = build_bsc_cascade([0.0, 0.0, 0.0])
    for m in (zero.base, *zero.degraders):
        np.testing.assert_array_equal(m, np.eye(2))


def test_bsc_cascade_half_is_useless():
    assert mutual_information_vector(build_bsc_cascade([0.5]))[0] == 0.0


@pytest.mark.parametrize("bad", [-0.1, 0.51, 1.0])
def test_bsc_cascade_rejects_eps(bad):
    with pytest.raises(InvalidParameter):
        build_bsc_cascade([0.1, bad])


def test_construction_rejects_bad_matrices():
    with pytest.raises(InvalidParameter):
        DegradedBroadcastChannel([0.5, 0.5], (), [[0.5, 0.6], [0.5, 0.5]], ())
    with pytest.raises(InvalidParameter):
        DegradedBroadcastChannel([0.5, 0.4], (), bsc(0.1), ())
    with pytest.raises(InvalidParameter, match="outputs"):
        # 2-letter base followed by a 3-input degrader
        DegradedBroadcastChannel([0.5, 0.5], (bsc(0.1),), bsc(0.1), (np.full((3, 2), 0.5),))


def test_conditional_information_by_joint_enumeration(ref_channel):
    """I(X_1;Y_1|X_2) = H(Y_1|X_2) - H(Y_1|X_1,X_2) from the explicit joint law."""
    q2 = ref_channel.top_input
    q1 = ref_channel.prefix(1)
    p = ref_channel.base
    joint = q2[:, None, None] * q1[:, :, None] * p[None, :, :]  # (x2, x1, y1)

    def H(a):
        a = a[a > 0]
        return -np.sum(a * np.log(a))

    h_y_given_x2 = H(joint.sum(axis=1)) - H(joint.sum(axis=(1, 2)))
    h_y_given_x1x2 = H(joint) - H(joint.sum(axis=2))
    assert conditional_mutual_information(ref_channel, 1, 1) == pytest.approx(h_y_given_x2 - h_y_given_x1x2, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_composed_rows_are_stochastic(seed, J):
    ch = random_channel(np.random.default_rng(seed), J)
    for k in range(1, J + 1):
        for j in range(1, J + 1):
            W = effective_channel(ch, k, j)
            assert np.max(np.abs(W.sum(axis=1) - 1)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_data_processing_along_receivers(seed, J):
    ch = random_channel(np.random.default_rng(seed), J)
    q1 = marginal_input(ch, 1)
    info = [mutual_information(q1, effective_channel(ch, 1, j)) for j in range(1, J + 1)]
    assert all(b <= a + 1e-9 for a, b in zip(info, info[1:]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_information_vector_bounds(seed, J):
    ch = random_channel(np.random.default_rng(seed), J)
    iv = mutual_information_vector(ch)
    assert np.all(iv >= 0)
    for j in range(1, J + 1):
        assert iv[j - 1] <= math.log(ch.input_size(j)) + 1e-9
