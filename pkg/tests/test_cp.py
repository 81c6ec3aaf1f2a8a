import numpy as np
import pytest
from hypothesis import given, settings

from curtail.cp import (
    ThetaSet,
    cp_closed_form,
    cp_matrix,
    cp_matrix_nsc,
    cp_matrix_sc,
    dedupe_sorted,
    search_theta_set,
    theta_pairs,
    theta_set,
)
from curtail.design import DesignFamily, DesignRealisation, PointStatus

from strategies import P1, designs


@settings(max_examples=60, deadline=None)
@given(designs())
def test_recursion_consistency(d):
    cpm = cp_matrix(d, P1)
    N = d.N
    for m in range(N + 1):
        for s in range(m + 1):
            k = cpm.status[s, m]
            if k == PointStatus.STOP_GO:
                assert cpm.cp[s, m] == 1.0
            elif k == PointStatus.STOP_NOGO:
                assert cpm.cp[s, m] == 0.0
            else:
                assert m < N
                expect = P1 * cpm.cp[s + 1, m + 1] + (1 - P1) * cpm.cp[s, m + 1]
                assert cpm.cp[s, m] == pytest.approx(expect, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(designs(max_n=20, families=(DesignFamily.NSC, DesignFamily.SIMON, DesignFamily.SIMON_GO)))
def test_closed_form_matches_recursion(d):
    cpm = cp_matrix_nsc(d, P1) if d.family is DesignFamily.NSC else cp_matrix(d, P1)
    for s, m in cpm.points():
        if cpm.reachable[s, m] and cpm.status[s, m] == PointStatus.CONTINUE:
            if d.family is not DesignFamily.NSC and m < (d.n1 or 0):
                continue
            assert cp_closed_form(d, (s, m), P1) == pytest.approx(cpm.cp[s, m], abs=1e-12)


def test_single_stage_cp_is_binomial_tail(table3):
    # conditional power of the N=54, r=15 single-stage design where Simon's design stops
    d = DesignRealisation(DesignFamily.NSC, 15, 54, 4, 19)
    got = [cp_closed_form(d.__class__(DesignFamily.MSTAGE, 15, 54), (s, 19), 0.4) for s in range(5)]
    assert np.round(got, 2).tolist() == [0.30, 0.43, 0.56, 0.69, 0.80]


def test_sc_thresholds_are_strict():
    d = DesignRealisation(DesignFamily.MSTAGE, 5, 20)
    # one response short with one participant left: CP is p1 whatever happens upstream
    s, m = 5, 19
    assert cp_matrix_nsc(d, P1).cp[s, m] == pytest.approx(P1)
    assert cp_matrix_sc(d.with_thresholds(P1, 1.0), P1).status[s, m] == PointStatus.CONTINUE
    assert cp_matrix_sc(d.with_thresholds(P1 + 1e-9, 1.0), P1).status[s, m] == PointStatus.STOP_NOGO
    assert cp_matrix_sc(d.with_thresholds(0.0, P1), P1).status[s, m] == PointStatus.CONTINUE
    assert cp_matrix_sc(d.with_thresholds(0.0, P1 - 1e-9), P1).status[s, m] == PointStatus.STOP_GO


def test_theta_set_contains_endpoints():
    d = DesignRealisation(DesignFamily.NSC, 5, 20, 1, 10)
    ts = theta_set(cp_matrix(d, P1))
    assert ts.values[0] == 0.0 and ts.values[-1] == 1.0
    assert np.all(np.diff(ts.values) > 0)
    assert np.allclose(ts.values, search_theta_set(d, P1).values, atol=1e-12, rtol=0)
    assert len(ts.interior) == len(ts) - 2


def test_dedupe_and_pairs():
    assert dedupe_sorted([0.3, 0.1, 0.1 + 1e-14, 0.2]).tolist() == [0.1, 0.2, 0.3]
    ts = ThetaSet(np.array([0.0, 0.1, 0.5, 0.96, 1.0]))
    assert len(theta_pairs(ts)) == 10
    assert len(theta_pairs(ts, p1=0.3)) == 7
    assert len(theta_pairs(ts, p1=0.3, theta_e_min=0.95)) == 4


def test_sc_matrix_requires_thresholds():
    with pytest.raises(ValueError):
        cp_matrix_sc(DesignRealisation(DesignFamily.NSC, 5, 20, 1, 10), P1)
