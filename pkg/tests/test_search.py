import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curtail import _kernels as K
from curtail.design import DesignFamily, DesignParams
from curtail.exact import OperatingCharacteristics, operating_characteristics
from curtail.search import (
    C,
    COLUMNS,
    SearchConfig,
    ahern_boundary,
    feasible_front,
    loss,
    omni_grid,
    pareto_reduce,
    r_bounds,
    search_family,
    select_index,
    weight_grid,
)

PARAMS = DesignParams(0.05, 0.15, 0.1, 0.3)
SMALL = SearchConfig(PARAMS, n_max=(("nsc", 32), ("mstage", 32), ("sc", 30), ("block", 32)))


def _row(N, e0, e1, r=1):
    row = np.zeros(len(COLUMNS))
    row[C["N"]], row[C["r"]], row[C["ess0"]], row[C["ess1"]] = N, r, e0, e1
    row[C["r1"]] = row[C["n1"]] = row[C["e1"]] = -1
    row[C["theta_e"]] = 1.0
    return row


def test_ahern_boundary_inside_search_range():
    for N in (20, 40, 80):
        lo, hi = r_bounds(N, PARAMS)
        assert lo <= ahern_boundary(N, PARAMS) <= hi


def test_r_bounds():
    assert r_bounds(40, PARAMS) == (4, 12)
    lo, hi = r_bounds(40, PARAMS, "wald")
    assert 4 <= lo <= hi <= 12
    with pytest.raises(ValueError):
        r_bounds(40, PARAMS, "other")


@pytest.mark.parametrize("N,r,r1,n1", [(27, 5, -1, -1), (41, 7, 4, 27), (30, 6, 1, 12), (33, 6, 0, 9)])
def test_pruned_sweep_equals_exhaustive(N, r, r1, n1):
    th = K.theta_values(N, r, r1, n1, PARAMS.p1, 1)
    F, E = th[th < PARAMS.p1], th[th >= 0.9]
    fast = K.sweep(N, r, r1, n1, PARAMS.p0, PARAMS.p1, 1, F, E, PARAMS.alpha, 0.85, False)
    full = K.sweep(N, r, r1, n1, PARAMS.p0, PARAMS.p1, 1, F, E, PARAMS.alpha, 0.85, True)
    key = lambda a: a[np.lexsort((a[:, 1], a[:, 0]))]
    assert np.array_equal(key(fast), key(full))


def test_sweep_rows_are_exact():
    N, r = 27, 5
    th = K.theta_values(N, r, -1, -1, PARAMS.p1, 1)
    F, E = th[th < PARAMS.p1], th[th >= 0.95]
    res = K.sweep(N, r, -1, -1, PARAMS.p0, PARAMS.p1, 1, F, E, PARAMS.alpha, 0.85, False)
    from curtail.design import DesignRealisation

    for i, j, a, pw, e0, e1 in res[:5]:
        d = DesignRealisation(DesignFamily.MSTAGE, r, N, theta_f=F[int(i)], theta_e=E[int(j)])
        oc = operating_characteristics(d, PARAMS)
        assert (oc.alpha, oc.power, oc.ess0, oc.ess1) == pytest.approx((a, pw, e0, e1), abs=1e-13)
        assert oc.feasible(PARAMS)


rows_strategy = st.lists(
    st.tuples(st.integers(10, 14), st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=40
)


@settings(max_examples=100, deadline=None)
@given(rows_strategy)
def test_pareto_reduce_exact(raw):
    rows = np.array([_row(N, a / 10, b / 10, r=k) for k, (N, a, b) in enumerate(raw)])
    kept = pareto_reduce(rows, "exact")
    keys = lambda x: (x[C["ess0"]], x[C["ess1"]], x[C["N"]])
    kk = [keys(x) for x in kept]
    assert len(set(kk)) == len(kk)
    for x in kept:
        for y in rows:
            dominated = all(b <= a for a, b in zip(keys(x), keys(y))) and keys(x) != keys(y)
            assert not dominated
    for y in rows:
        assert any(all(a <= b for a, b in zip(keys(x), keys(y))) for x in kept)


def test_pareto_rounded_merges_near_ties():
    rows = np.array([_row(20, 14.04, 15.0), _row(20, 14.01, 15.04, r=2)])
    assert len(pareto_reduce(rows, "exact")) == 2
    assert len(pareto_reduce(rows, "rounded")) == 1


def test_select_index_criteria():
    rows = np.array([_row(30, 14.0, 16.0), _row(27, 18.0, 15.0), _row(27, 17.0, 15.5), _row(40, 15.0, 14.0)])
    assert select_index(rows, "h0opt") == 0
    assert select_index(rows, "h1opt") == 3
    assert select_index(rows, "h0minimax") == 2
    assert select_index(rows, "h1minimax") == 1
    assert select_index(rows[:0], "h0opt") is None
    with pytest.raises(ValueError):
        select_index(rows, "best")


def test_loss_validation():
    oc = OperatingCharacteristics(0.05, 0.85, 14.0, 16.0, 30)
    assert loss(oc, 1, 0) == 14.0
    assert loss(oc, 0, 0) == 30
    with pytest.raises(ValueError):
        loss(oc, 0.7, 0.7)


def test_weight_grid():
    q0, q1 = weight_grid(0.1)
    assert len(q0) == 66
    assert np.all(q0 + q1 <= 1 + 1e-12)
    with pytest.raises(ValueError):
        weight_grid(0.3)


def test_search_deterministic_across_workers(tmp_path):
    a = feasible_front(SMALL, DesignFamily.MSTAGE, workers=1)
    b = feasible_front(SMALL, DesignFamily.MSTAGE, workers=2)
    assert a.tobytes() == b.tobytes()
    assert len(a) > 0
    c = feasible_front(SMALL, DesignFamily.SC, n_hi=30, workers=1)
    d = feasible_front(SMALL, DesignFamily.SC, n_hi=30, workers=3)
    assert c.tobytes() == d.tobytes()


def test_search_cache_roundtrip(tmp_path):
    a = search_family(SMALL, DesignFamily.NSC, cache_dir=tmp_path)
    assert not a.meta["cached"]
    b = search_family(SMALL, DesignFamily.NSC, cache_dir=tmp_path)
    assert b.meta["cached"]
    assert a.rows.tobytes() == b.rows.tobytes()


def test_admissible_members_are_feasible():
    aset = search_family(SMALL, DesignFamily.MSTAGE)
    assert len(aset) > 0
    for design, oc in aset.members:
        exact = operating_characteristics(design, PARAMS)
        assert exact.feasible(PARAMS)
        assert exact.ess0 == pytest.approx(oc.ess0, abs=1e-12)


def test_block_designs_recruit_whole_blocks():
    aset = search_family(SMALL, DesignFamily.BLOCK_SC, block=4)
    assert np.all(aset.rows[:, C["N"]] % 4 == 0)


def test_omni_grid_winner_is_minimum():
    sets = {k: search_family(SMALL, f) for k, f in (("nsc", DesignFamily.NSC), ("mstage", DesignFamily.MSTAGE))}
    grid = omni_grid(sets, 0.05)
    best = grid.best.min(axis=0)
    assert np.array_equal(best, grid.best[grid.winner, np.arange(len(grid.q0))])
    assert np.all(grid.difference("mstage", "mstage") == 0.0)
    d = grid.difference("mstage", "nsc")
    assert np.array_equal(d, grid.best[1] - grid.best[0])


def test_omni_ties_prefer_smaller_expected_sizes():
    a = search_family(SMALL, DesignFamily.NSC)
    b = search_family(SMALL, DesignFamily.MSTAGE)
    grid = omni_grid({"nsc": a, "mstage": b}, 0.5)
    i = int(np.flatnonzero((grid.q0 == 0) & (grid.q1 == 0))[0])
    # both families reach N = 27; m-stage has the smaller expected sizes
    assert grid.best[0, i] == grid.best[1, i] == 27.0
    assert grid.names[grid.winner[i]] == "mstage"
