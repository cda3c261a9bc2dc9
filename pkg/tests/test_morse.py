import json
import math
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvheat.errors import DegeneracyWarning
from curvheat.geometry import load_sampled, make_cp1, make_torus
from curvheat.morse import (
    Check,
    classify,
    degenerate_fraction,
    strong_bound,
    u_bound,
    u_bound_trajectory,
    verify_inequalities,
    weak_bound,
)
from curvheat.spectra import exact_hq

TWO_PI = 2 * math.pi


def test_weak_bound_examples():
    assert weak_bound(make_cp1(), 0) == pytest.approx(1.0)
    assert weak_bound(make_cp1(), 1) == 0.0
    assert weak_bound(make_torus([-1], [1.0]), 1) == pytest.approx(1.0)
    assert weak_bound(make_torus([1, -2], [1.0, 1.0]), 1) == pytest.approx(2.0)
    assert weak_bound(make_cp1(rank_e=3), 0) == pytest.approx(3.0)


def test_strong_bound_examples():
    assert strong_bound(make_cp1(), 0) == pytest.approx(1.0)
    assert strong_bound(make_cp1(), 1) == pytest.approx(-1.0)


@pytest.mark.parametrize(
    "geom", [make_cp1(), make_torus([1], [1.0]), make_torus([-1], [1.0]), make_torus([1, -1], [1.0, 1.0])]
)
def test_u_bound_converges_to_strong_bound(geom):
    for q in range(geom.n + 1):
        assert u_bound(geom, q, 50.0) == pytest.approx(strong_bound(geom, q), abs=1e-6)


def test_u_bound_cp1_tends_to_one():
    # degree 0 on CP^1 reduces to 1/(1 - exp(-4 pi u))
    for u in (0.1, 1.0, 5.0, 50.0):
        assert u_bound(make_cp1(), 0, u) == pytest.approx(1 / -math.expm1(-4 * math.pi * u), rel=1e-13)


def test_u_bound_torus_empty_index_set_decays():
    assert u_bound(make_torus([1], [1.0]), 1, 5.0) < 1e-10


@pytest.mark.parametrize("d", [1, -1, -2, 3])
def test_torus_equality_case(d):
    geom = make_torus([d], [1.0])
    for p in (8, 16, 50):
        for q in (0, 1):
            assert abs(exact_hq(geom, p, q) / p - weak_bound(geom, q)) <= 2.0 / p


def test_verify_examples():
    rep = verify_inequalities(make_torus([1], [1.0]), 10, 1.0)
    q0 = rep.reports[0]
    assert q0.exact_dims[0] == 10
    assert q0.traces[1.0] == pytest.approx(10 / (1 - math.exp(-4 * math.pi)), rel=1e-13)
    cp = verify_inequalities(make_cp1(), 5, 1.0)
    last = [c for c in cp.reports[1].checks if c.kind == "alternating"][0]
    assert last.equality and last.lhs == -6 and last.rhs == pytest.approx(-6.0, abs=1e-8)
    neg = verify_inequalities(make_torus([-1], [1.0]), 8, 0.5)
    assert neg.reports[0].exact_dims[0] == 0 and neg.reports[0].traces[0.5] > 0


@pytest.mark.parametrize("geom", [make_torus([1], [1.0]), make_torus([-2], [1.0]), make_cp1(), make_torus([1, -1], [1.0, 2.0])])
@pytest.mark.parametrize("p", [5, 20])
@pytest.mark.parametrize("u", [0.5, 1.0])
def test_verify_passes(geom, p, u):
    res = verify_inequalities(geom, p, u)
    assert res.passed
    d = res.to_dict()
    assert len(d["degrees"]) == geom.n + 1
    rows = res.csv_rows()
    assert all(len(r) == 8 for r in rows)


def test_check_margins():
    assert Check("trace", 1.0, 2.0, 0.0).passed
    assert not Check("trace", 2.0, 1.0, 0.5).passed
    assert Check("alternating", 1.0, 1.0 + 1e-10, 1e-8, equality=True).passed
    assert not Check("alternating", 1.0, 1.1, 1e-8, equality=True).passed


def test_classify():
    assert classify([1.0, -1.0]) == 1
    sig = classify([1.0, 0.0])
    assert sig.degenerate and sig.n_zero == 1


def _manifest(points):
    return load_sampled(json.dumps({"n": len(points[0][0]), "points": [{"alphas": a, "weight": w} for a, w in points]}))


def test_degenerate_points_warn_and_contribute_nothing():
    geom = _manifest([([1.0, 0.0], 0.5), ([1.0, 2.0], 0.5)])
    assert degenerate_fraction(geom) == pytest.approx(0.5)
    with pytest.warns(DegeneracyWarning):
        wb = weak_bound(geom, 0)
    assert wb == pytest.approx(0.5 * 2.0 / TWO_PI**2)
    small = _manifest([([1.0, 0.0], 0.05), ([1.0, 2.0], 0.95)])
    with warnings.catch_warnings():
        warnings.simplefilter("error", DegeneracyWarning)
        weak_bound(small, 0)


point_lists = st.lists(
    st.tuples(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.floats(0.01, 2)), min_size=1, max_size=10
)


@settings(max_examples=100)
@given(point_lists)
def test_bound_invariants(points):
    geom = _manifest(points)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneracyWarning)
        for q in range(3):
            assert weak_bound(geom, q) >= 0.0
        det = math.fsum(math.prod(a / TWO_PI for a in pt.alphas) * pt.weight for pt in geom.points
                        if all(abs(a) > 1e-9 for a in pt.alphas))
        assert strong_bound(geom, 2) == pytest.approx(det, abs=1e-12 * max(1.0, abs(det)))
        # strong bounds telescope: S(q) + S(q-1) = W(q)
        for q in (1, 2):
            assert strong_bound(geom, q) + strong_bound(geom, q - 1) == pytest.approx(weak_bound(geom, q), abs=1e-9)


def test_u_bound_trajectory_tabulates():
    rows = u_bound_trajectory(make_cp1(), 0, [(p, math.log(p)) for p in (4, 16, 64)])
    assert [r[0] for r in rows] == [4, 16, 64]
    assert rows[-1][2] == pytest.approx(u_bound(make_cp1(), 0, math.log(64)))
