import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cafire.errors import DataError
from cafire.verification import ContingencyTable, gss, naive_rps, per_state_gss, rps, score

THIRDS = np.full(3, 1 / 3)


def test_gss_examples():
    assert gss(ContingencyTable(5, 0, 0, 7)) == 1.0
    assert abs(gss(ContingencyTable(2, 1, 1, 6)) - 1.1 / 3.1) < 1e-12
    assert gss(ContingencyTable(0, 0, 4, 6)) <= 0


def test_gss_undefined_is_nan():
    # nothing predicted and nothing observed: zero denominator
    assert math.isnan(gss(ContingencyTable(0, 0, 0, 5)))
    with pytest.raises(DataError):
        ContingencyTable(0, 0, 0, 0)
    with pytest.raises(DataError):
        ContingencyTable(-1, 0, 0, 3)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(1, 9))
def test_gss_scale_invariant_and_bounded(a, b, c, d, k):
    if a + b + c + d == 0:
        return
    g = gss(ContingencyTable(a, b, c, d))
    h = gss(ContingencyTable(k * a, k * b, k * c, k * d))
    if math.isnan(g):
        assert math.isnan(h)
    else:
        assert g <= 1 + 1e-12
        assert h == pytest.approx(g, abs=1e-12)


def test_per_state_gss():
    truth = np.array([1, 1, 2, 3, 3, 2])
    for j in (1, 2, 3):
        assert per_state_gss(truth, truth, j) == 1.0
    pred = np.ones_like(truth)
    # no state-2 predictions: a = b = 0
    assert per_state_gss(pred, truth, 2) == pytest.approx(0.0)
    with pytest.raises(DataError):
        per_state_gss(pred[:3], truth, 1)


def test_rps_examples():
    assert abs(rps(THIRDS[None], np.array([1])) - 5 / 18) < 1e-12
    assert abs(rps(THIRDS[None], np.array([2])) - 1 / 9) < 1e-12
    assert rps(np.eye(3), np.array([1, 2, 3])) == 0.0


def test_naive_rps_examples():
    assert abs(naive_rps(np.full(7, 2)) - 1 / 9) < 1e-12
    assert abs(naive_rps(np.full(7, 1)) - 5 / 18) < 1e-12
    assert abs(naive_rps(np.full(7, 3)) - 5 / 18) < 1e-12
    with pytest.raises(DataError):
        naive_rps(np.array([]))


@given(arrays(np.float64, (12, 3), elements=st.floats(0.01, 1)),
       arrays(np.int64, 12, elements=st.integers(1, 3)))
def test_rps_bounds(raw, truth):
    p = raw / raw.sum(axis=1, keepdims=True)
    value = rps(p, truth)
    assert 0 <= value <= 1
    assert rps(np.eye(3)[truth - 1], truth) == 0.0
    # an equal-probability forecast scores exactly the naive baseline
    assert rps(np.tile(THIRDS, (12, 1)), truth) == naive_rps(truth)


def test_rps_validation():
    with pytest.raises(DataError):
        rps(np.full((2, 3), 0.5), np.array([1, 2]))
    with pytest.raises(DataError):
        rps(np.full((2, 3), 1 / 3), np.array([1, 2, 3]))


def test_score_report():
    truth = np.array([[1, 1, 2, 3], [1, 2, 3, 3]])
    rep = score(truth, truth, np.eye(3)[truth - 1])
    assert rep.rps == 0.0
    assert all(rep.gss[j] == 1.0 for j in (1, 2, 3))
    assert rep.correct == {1: 3, 2: 2, 3: 3} and rep.incorrect == {1: 0, 2: 0, 3: 0}
    rows = list(rep.rows())
    assert ("all", "rps", 0.0) in rows and len(rows) == 11
    pred = np.ones_like(truth)
    rep = score(pred, truth)
    assert rep.correct[1] == 3 and rep.incorrect[1] == 5
    assert rep.gss[2] == 0.0
    assert rep.rps is None
    # state 2 neither predicted nor observed
    rep = score(np.array([1, 3, 3]), np.array([1, 1, 3]))
    assert math.isnan(rep.gss[2])
    assert "undefined" in rep.table()
