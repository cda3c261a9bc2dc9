import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from curvheat.errors import DomainError, ParseError, ValidationError
from curvheat.geometry import (
    CP1,
    TORUS,
    CurvaturePoint,
    dump_sampled,
    integrate,
    load_sampled,
    make_cp1,
    make_torus,
    parse_geometry_spec,
)


def test_torus_curvature_from_degree():
    g = make_torus([1, -2], [1.0, 2.0])
    assert g.kind == TORUS and g.n == 2
    assert g.volume == 2.0
    pt = g.points[0]
    assert sorted(pt.alphas) == pytest.approx(sorted([2 * math.pi, -2 * math.pi]))
    assert pt.scalar_curvature == 0.0
    assert g.label() == "torus:d=1,-2,A=1.0,2.0"


def test_cp1_model():
    g = make_cp1()
    assert g.kind == CP1 and g.volume == 1.0
    assert g.points[0].alphas == (2 * math.pi,)
    assert g.points[0].scalar_curvature == pytest.approx(8 * math.pi)


def test_torus_validation():
    with pytest.raises(DomainError):
        make_torus([1, 1], [1.0])
    with pytest.raises(DomainError):
        make_torus([1], [0.0])
    with pytest.raises(DomainError):
        make_torus([], [])


def test_point_validation():
    with pytest.raises(ValidationError):
        CurvaturePoint((1.0,), 0.0)
    with pytest.raises(ValidationError):
        CurvaturePoint((float("inf"),), 1.0)
    with pytest.raises(ValidationError):
        CurvaturePoint((), 1.0)


MANIFEST = """{
 "n": 2,
 "points": [
  {"alphas": [1.0, -3.0], "weight": 0.25, "scalar_curvature": 2.0},
  {"alphas": [0.5, 0.5], "weight": 0.75}
 ]
}"""


def test_load_manifest():
    g = load_sampled(MANIFEST)
    assert g.n == 2 and len(g.points) == 2 and g.rank_e == 1
    assert g.volume == 1.0
    assert g.points[0].alphas == (-3.0, 1.0)
    assert integrate(g, lambda pt: sum(pt.alphas)) == pytest.approx(0.25 * -2.0 + 0.75 * 1.0)


def test_manifest_roundtrip():
    g = load_sampled(MANIFEST)
    assert load_sampled(dump_sampled(g)) == g


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(1e-3, 10)), min_size=1, max_size=8))
def test_manifest_roundtrip_property(pts):
    doc = {"n": 1, "points": [{"alphas": [a], "weight": w} for a, w in pts]}
    g = load_sampled(json.dumps(doc))
    assert load_sampled(dump_sampled(g)) == g
    assert g.volume == pytest.approx(math.fsum(w for _, w in pts))


def test_parse_error_reports_location():
    with pytest.raises(ParseError, match="line 3"):
        load_sampled('{\n "n": 1,\n "points": [,]\n}')


@pytest.mark.parametrize(
    "text,exc",
    [
        ('{"n": 1, "points": [{"alphas": [NaN], "weight": 1}]}', ValidationError),
        ('{"n": 2, "points": [{"alphas": [1.0], "weight": 1}]}', ValidationError),
        ('{"n": 1, "points": [{"alphas": [1.0], "weight": 0}]}', ValidationError),
        ('{"n": 1, "points": [{"alphas": [1.0], "weight": -2}]}', ValidationError),
        ('{"n": 1, "points": []}', ValidationError),
        ('{"n": 1, "points": [{"alphas": ["x"], "weight": 1}]}', ParseError),
        ('{"points": []}', ParseError),
        ("[1, 2]", ParseError),
    ],
)
def test_manifest_rejections(text, exc):
    with pytest.raises(exc):
        load_sampled(text)


def test_geometry_specs(tmp_path):
    assert parse_geometry_spec("cp1").kind == CP1
    g = parse_geometry_spec("torus:d=1,-1,A=1")
    assert g.degrees == (1, -1) and g.areas == (1.0, 1.0)
    path = tmp_path / "m.json"
    path.write_text(MANIFEST)
    assert parse_geometry_spec(f"file:{path}").n == 2
    for bad in ("sphere", "torus:1", "torus:d=x,A=1", f"file:{tmp_path / 'missing.json'}"):
        with pytest.raises(ParseError):
            parse_geometry_spec(bad)


def test_integrate_rejects_nonfinite():
    with pytest.raises(ValidationError):
        integrate(make_cp1(), lambda pt: float("nan"))


def test_integrate_constant_gives_volume():
    assert integrate(make_torus([1], [2.0]), lambda pt: 1.0) == 2.0
    assert integrate(make_cp1(), lambda pt: 3.5) == 3.5
    g = load_sampled(MANIFEST)
    assert abs(integrate(g, lambda pt: 1.0) - g.volume) <= 1e-12
    torus = make_torus([1, -3], [1.0, 2.0])
    assert len({pt.alphas for pt in torus.points}) == 1


def test_roundtrip_keeps_17_digit_decimals():
    text = '{"n": 1, "points": [{"alphas": [0.12345678901234567], "weight": 0.30000000000000004}]}'
    g = load_sampled(text)
    again = load_sampled(dump_sampled(g))
    assert again.points[0].alphas == (0.12345678901234567,)
    assert again.points[0].weight == 0.30000000000000004
