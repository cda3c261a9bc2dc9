"""Curvature data model: exactly solvable geometries and sampled manifests.

Every geometry is a list of :class:`CurvaturePoint` quadrature nodes.  The
built-in models have constant curvature, so they are a single node whose
weight is the total volume and the quadrature is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .analytic import MAX_DIM
from .errors import DomainError, ParseError, ValidationError

TORUS = "TorusDiag"
CP1 = "CP1FubiniStudy"
SAMPLED = "Sampled"

CP1_SCALAR_CURVATURE = 8.0 * math.pi  # r = 2K, K = 4*pi on a sphere of area 1


@dataclass(frozen=True)
class CurvaturePoint:
    alphas: tuple[float, ...]
    weight: float
    scalar_curvature: Optional[float] = None
    rank_e: int = 1

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise ValidationError("a curvature point needs at least one eigenvalue")
        if not all(math.isfinite(a) for a in alphas):
            raise ValidationError(f"non-finite curvature eigenvalue in {alphas}")
        if not (math.isfinite(self.weight) and self.weight > 0):
            raise ValidationError(f"quadrature weight must be positive and finite, got {self.weight!r}")
        if self.scalar_curvature is not None and not math.isfinite(self.scalar_curvature):
            raise ValidationError("scalar curvature must be finite")
        if int(self.rank_e) != self.rank_e or self.rank_e < 1:
            raise ValidationError(f"rank_e must be a positive integer, got {self.rank_e!r}")
        object.__setattr__(self, "alphas", tuple(sorted(alphas)))

    @property
    def n(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True)
class ModelGeometry:
    kind: str
    n: int
    points: tuple[CurvaturePoint, ...]
    degrees: tuple[int, ...] = ()
    areas: tuple[float, ...] = ()
    rank_e: int = 1
    name: str = field(default="", compare=False)

    @property
    def volume(self) -> float:
        return math.fsum(pt.weight for pt in self.points)

    @property
    def is_model(self) -> bool:
        return self.kind in (TORUS, CP1)

    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == TORUS:
            d = ",".join(str(x) for x in self.degrees)
            a = ",".join(repr(x) for x in self.areas)
            return f"torus:d={d},A={a}"
        if self.kind == CP1:
            return "cp1"
        return "sampled"


def make_torus(degrees: Sequence[int], areas: Sequence[float], rank_e: int = 1) -> ModelGeometry:
    """Product of flat 2-tori with line bundles of the given degrees.

    Factor j has area ``areas[j]`` and curvature eigenvalue
    ``2*pi*degrees[j]/areas[j]`` (fixed by the first Chern number).
    """
    degrees = tuple(int(d) for d in degrees)
    areas = tuple(float(a) for a in areas)
    if not degrees:
        raise DomainError("torus needs at least one factor")
    if len(degrees) != len(areas):
        raise DomainError(f"{len(degrees)} degrees but {len(areas)} areas")
    if len(degrees) > MAX_DIM:
        raise DomainError(f"at most {MAX_DIM} factors supported")
    if not all(math.isfinite(a) and a > 0 for a in areas):
        raise DomainError(f"areas must be positive, got {areas}")
    alphas = [2.0 * math.pi * d / a for d, a in zip(degrees, areas)]
    vol = math.prod(areas)
    pt = CurvaturePoint(tuple(alphas), vol, scalar_curvature=0.0, rank_e=rank_e)
    return ModelGeometry(TORUS, len(degrees), (pt,), degrees, areas, rank_e)


def make_cp1(rank_e: int = 1) -> ModelGeometry:
    """O(1) over the round sphere of area 1 with the Kähler-quantized metric."""
    pt = CurvaturePoint((2.0 * math.pi,), 1.0, scalar_curvature=CP1_SCALAR_CURVATURE, rank_e=rank_e)
    return ModelGeometry(CP1, 1, (pt,), (1,), (1.0,), rank_e)


def _field(obj, key, kind, where):
    if key not in obj:
        raise ParseError(f"{where}: missing field '{key}'")
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"{where}.{key}: expected a number, got {type(value).__name__}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(f"{where}.{key}: expected an integer, got {value!r}")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ParseError(f"{where}.{key}: expected a list")
        return value
    raise AssertionError(kind)


def load_sampled(text: str) -> ModelGeometry:
    """Parse a sampled-curvature manifest (JSON tree).

    Schema: ``{"n": int, "rank_e": int, "points": [{"alphas": [...],
    "weight": w, "scalar_curvature": r?}, ...]}``; ``rank_e`` defaults to 1.
    """
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("manifest root must be an object")
    n = _field(doc, "n", int, "manifest")
    if not 1 <= n <= MAX_DIM:
        raise ValidationError(f"manifest.n must be in 1..{MAX_DIM}, got {n}")
    rank_e = _field(doc, "rank_e", int, "manifest") if "rank_e" in doc else 1
    raw_points = _field(doc, "points", list, "manifest")
    if not raw_points:
        raise ValidationError("manifest.points is empty")
    points = []
    for i, raw in enumerate(raw_points):
        where = f"points[{i}]"
        if not isinstance(raw, dict):
            raise ParseError(f"{where}: expected an object")
        alphas = _field(raw, "alphas", list, where)
        for j, a in enumerate(alphas):
            if isinstance(a, bool) or not isinstance(a, (int, float)):
                raise ParseError(f"{where}.alphas[{j}]: expected a number")
        if len(alphas) != n:
            raise ValidationError(f"{where}.alphas has length {len(alphas)}, expected n={n}")
        weight = _field(raw, "weight", float, where)
        scal = _field(raw, "scalar_curvature", float, where) if "scalar_curvature" in raw else None
        try:
            points.append(CurvaturePoint(tuple(alphas), weight, scal, rank_e))
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    return ModelGeometry(SAMPLED, n, tuple(points), rank_e=rank_e)


def _reject_constant(name):
    raise ValidationError(f"non-finite literal {name} is not allowed")


def dump_sampled(geom: ModelGeometry) -> str:
    """Serialize any geometry's quadrature nodes in manifest form."""
    pts = []
    for pt in geom.points:
        entry = {"alphas": list(pt.alphas), "weight": pt.weight}
        if pt.scalar_curvature is not None:
            entry["scalar_curvature"] = pt.scalar_curvature
        pts.append(entry)
    return json.dumps({"n": geom.n, "rank_e": geom.rank_e, "points": pts}, indent=1)


def integrate(geom: ModelGeometry, f: Callable[[CurvaturePoint], float]) -> float:
    """Quadrature sum ``sum_x f(x) * weight(x)``."""
    terms = []
    for i, pt in enumerate(geom.points):
        value = f(pt)
        if not math.isfinite(value):
            raise ValidationError(f"integrand is not finite at point {i}: {value!r}")
        terms.append(value * pt.weight)
    return math.fsum(terms)


def parse_geometry_spec(spec: str) -> ModelGeometry:
    """Parse ``torus:d=1,-2,A=1,1``, ``cp1`` or ``file:<path>``."""
    spec = spec.strip()
    if spec == "cp1":
        return make_cp1()
    if spec.startswith("file:"):
        path = spec[5:]
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read manifest {path!r}: {exc.strerror}") from None
        return load_sampled(text)
    if spec.startswith("torus:"):
        body = spec[6:]
        if not body.startswith("d=") or ",A=" not in body:
            raise ParseError(f"torus spec must look like torus:d=<ints>,A=<reals>, got {spec!r}")
        d_part, a_part = body[2:].split(",A=", 1)
        try:
            degrees = [int(x) for x in d_part.split(",")]
            areas = [float(x) for x in a_part.split(",")]
        except ValueError:
            raise ParseError(f"bad number in torus spec {spec!r}") from None
        if len(areas) == 1 and len(degrees) > 1:
            areas = areas * len(degrees)
        return make_torus(degrees, areas)
    raise ParseError(f"unknown geometry {spec!r}; expected torus:..., cp1 or file:<path>")
