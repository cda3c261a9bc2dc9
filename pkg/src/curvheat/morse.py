"""Holomorphic Morse inequalities: curvature integrals and their spectral verification."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

from .coefficients import DEFAULT_ZERO_TOL, Signature, e0_trace, eigenvalue_signature
from .errors import DegeneracyWarning, VerificationError
from .geometry import CurvaturePoint, ModelGeometry, integrate
from .spectra import exact_hq, graded_heat_trace

TWO_PI = 2.0 * math.pi
DEGENERATE_WEIGHT_WARNING = 0.10
COMPARE_SLACK = 1e-12

Classification = Union[int, Signature]


def classify(alphas, zero_tol: float = DEFAULT_ZERO_TOL) -> Classification:
    """Number of negative eigenvalues, or the full Signature when some eigenvalue vanishes."""
    sig = eigenvalue_signature(alphas, zero_tol)
    return sig if sig.degenerate else sig.n_minus


def degenerate_fraction(geom: ModelGeometry, zero_tol: float = DEFAULT_ZERO_TOL) -> float:
    bad = math.fsum(pt.weight for pt in geom.points if eigenvalue_signature(pt.alphas, zero_tol).degenerate)
    return bad / geom.volume


def _warn_degenerate(geom, zero_tol):
    frac = degenerate_fraction(geom, zero_tol)
    if frac > DEGENERATE_WEIGHT_WARNING:
        warnings.warn(
            f"{100 * frac:.1f}% of the volume has degenerate curvature; "
            "those points contribute nothing to M(q) integrals",
            DegeneracyWarning,
            stacklevel=3,
        )


def _det_density(pt: CurvaturePoint) -> float:
    return math.prod(a / TWO_PI for a in pt.alphas)


def weak_bound(geom: ModelGeometry, q: int, zero_tol: float = DEFAULT_ZERO_TOL) -> float:
    """rank(E) * integral over M(q) of (-1)^q det(R/2pi) dv, i.e. the weak bound on p^-n h^q."""
    _warn_degenerate(geom, zero_tol)

    def f(pt):
        return (-1) ** q * _det_density(pt) if classify(pt.alphas, zero_tol) == q else 0.0

    return geom.rank_e * integrate(geom, f)


def strong_bound(geom: ModelGeometry, q: int, zero_tol: float = DEFAULT_ZERO_TOL) -> float:
    """rank(E) * integral over M(<=q) of (-1)^q det(R/2pi) dv."""
    _warn_degenerate(geom, zero_tol)

    def f(pt):
        c = classify(pt.alphas, zero_tol)
        return (-1) ** q * _det_density(pt) if isinstance(c, int) and c <= q else 0.0

    return geom.rank_e * integrate(geom, f)


def u_bound(geom: ModelGeometry, q: int, u: float) -> float:
    """rank(E) * integral of u^-n sum_{j<=q} (-1)^(q-j) e0_trace_j: the heat bound at fixed u."""
    n = geom.n

    def f(pt):
        return u**-n * math.fsum((-1) ** (q - j) * e0_trace(pt.alphas, u, j, 1) for j in range(q + 1))

    return geom.rank_e * integrate(geom, f)


def o1_band(p: int, scale: float) -> float:
    """Tolerance used for the o(1) remainder of the finite-p heat bound."""
    return 2.0 / p * max(1.0, abs(scale))


@dataclass
class Check:
    kind: str
    lhs: float
    rhs: float
    slack: float
    equality: bool = False

    @property
    def margin(self) -> float:
        if self.equality:
            return self.slack - abs(self.lhs - self.rhs)
        return self.rhs + self.slack - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0


@dataclass
class MorseReport:
    q: int
    weak_bound: float
    strong_bound: float
    u_bound: dict[float, float]
    exact_dims: Optional[list[int]] = None
    traces: dict[float, float] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    degenerate_fraction: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class MorseVerification:
    geometry: str
    p: int
    u: float
    reports: list[MorseReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def failures(self) -> list[tuple[int, Check]]:
        return [(r.q, c) for r in self.reports for c in r.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "geometry": self.geometry,
            "p": self.p,
            "u": self.u,
            "passed": self.passed,
            "degrees": [
                {
                    "q": r.q,
                    "weak_bound": r.weak_bound,
                    "strong_bound": r.strong_bound,
                    "u_bound": r.u_bound[self.u],
                    "exact_dims": r.exact_dims,
                    "trace": r.traces[self.u],
                    "checks": [
                        {"kind": c.kind, "lhs": c.lhs, "rhs": c.rhs, "margin": c.margin, "passed": c.passed}
                        for c in r.checks
                    ],
                }
                for r in self.reports
            ],
        }

    def csv_rows(self) -> list[tuple]:
        """Rows (geom, q, p, u, kind, value, margin, verdict)."""
        rows = []
        for r in self.reports:
            rows.append((self.geometry, r.q, self.p, self.u, "weak_bound", r.weak_bound, "", ""))
            rows.append((self.geometry, r.q, self.p, self.u, "strong_bound", r.strong_bound, "", ""))
            rows.append((self.geometry, r.q, self.p, self.u, "u_bound", r.u_bound[self.u], "", ""))
            for c in r.checks:
                rows.append(
                    (self.geometry, r.q, self.p, self.u, c.kind, c.lhs, c.margin, "pass" if c.passed else "fail")
                )
        return rows


def verify_inequalities(
    geom: ModelGeometry,
    p: int,
    u: float,
    zero_tol: float = DEFAULT_ZERO_TOL,
    strict: bool = True,
    equality_rtol: float = 1e-8,
) -> MorseVerification:
    """Check the Morse inequality chain against exact cohomology and exact heat traces.

    Per degree q:
      trace      h^q <= tr_q exp(-(u/p) D_p^2)
      alternating sum_{j<=q} (-1)^(q-j) h^j <= same sum of traces (equality at q = n)
      heat_bound p^-n * alternating dims <= u_bound(q, u) + o(1) band
    """
    n = geom.n
    dims = [exact_hq(geom, p, q) for q in range(n + 1)]
    samples = [graded_heat_trace(geom, p, q, u) for q in range(n + 1)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneracyWarning)
        frac = degenerate_fraction(geom, zero_tol)
        reports = []
        for q in range(n + 1):
            s = samples[q]
            ub = u_bound(geom, q, u)
            rep = MorseReport(
                q=q,
                weak_bound=weak_bound(geom, q, zero_tol),
                strong_bound=strong_bound(geom, q, zero_tol),
                u_bound={u: ub},
                exact_dims=dims,
                traces={u: s.value},
                degenerate_fraction=frac,
            )
            rep.checks.append(Check("trace", dims[q], s.value, s.truncation_bound + COMPARE_SLACK))
            alt_dims = sum((-1) ** (q - j) * dims[j] for j in range(q + 1))
            alt_tr = math.fsum((-1) ** (q - j) * samples[j].value for j in range(q + 1))
            bound = sum(samples[j].truncation_bound for j in range(q + 1)) + COMPARE_SLACK
            if q == n:
                slack = bound + equality_rtol * max(1.0, abs(alt_dims))
                rep.checks.append(Check("alternating", alt_dims, alt_tr, slack, equality=True))
            else:
                rep.checks.append(Check("alternating", alt_dims, alt_tr, bound))
            rep.checks.append(Check("heat_bound", alt_dims / p**n, ub, o1_band(p, ub) + COMPARE_SLACK))
            reports.append(rep)
    result = MorseVerification(geom.label(), p, u, reports)
    if strict and not result.passed:
        q, c = result.failures()[0]
        raise VerificationError(
            f"{c.kind} inequality fails at q={q}, p={p}, u={u}: lhs={c.lhs!r}, rhs={c.rhs!r}, margin={c.margin!r}"
        )
    return result


def u_bound_trajectory(geom: ModelGeometry, q: int, pairs) -> list[tuple[int, float, float]]:
    """Tabulate (p, u(p), u_bound) along a user-chosen u(p); no limit is asserted."""
    return [(p, u, u_bound(geom, q, u)) for p, u in pairs]
