"""Closed-form local heat coefficients.

All coefficients depend on a point only through the curvature eigenvalues
``alphas`` (relative to the metric).  Conventions:

* ``e0_endo`` is the principal coefficient of the Kodaira heat kernel
  diagonal, diagonal in the basis ``wbar^J`` of the antiholomorphic
  exterior algebra.
* ``e0_trace`` is its trace on degree-q forms, times rank(E).
* ``e0_bochner`` is the Bochner-Laplacian analogue on functions.
* ``phi0`` is the leading Hadamard coefficient of the circle bundle,
  evaluated at a complex fiber argument.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analytic import (
    MultiIndex,
    all_subsets,
    landau_factor,
    log_landau_factor,
    log_sinhc_inv,
    subsets_of_size,
)
from .errors import DomainError, PreconditionError, RangeError

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi
DEFAULT_ZERO_TOL = 1e-9
POLE_MARGIN = 1e-6

NONDEGENERATE = "Nondegenerate"
DEGENERATE = "Degenerate"
VANISHING = "Vanishing"


def _alphas(alphas) -> tuple[float, ...]:
    out = tuple(float(a) for a in alphas)
    if not out:
        raise DomainError("need at least one curvature eigenvalue")
    if not all(math.isfinite(a) for a in out):
        raise DomainError(f"non-finite curvature eigenvalue in {out}")
    return out


def _check_q(q: int, n: int):
    if not 0 <= q <= n:
        raise DomainError(f"degree q={q} outside 0..{n}")


def _exp_checked(x: float, what: str) -> float:
    if x > 709.0:
        raise RangeError(f"{what} overflows (log-magnitude {x:.1f})")
    return math.exp(x)


@dataclass(frozen=True)
class EndoCoefficient:
    """Diagonal endomorphism of the antiholomorphic exterior algebra."""

    n: int
    values: dict[MultiIndex, float]

    def __getitem__(self, J: MultiIndex) -> float:
        return self.values[J]

    def entry(self, *members: int) -> float:
        bits = 0
        for j in members:
            bits |= 1 << (j - 1)
        return self.values[MultiIndex(bits, self.n)]

    def degree_trace(self, q: int) -> float:
        _check_q(q, self.n)
        return math.fsum(self.values[J] for J in subsets_of_size(self.n, q))

    def supertrace(self) -> float:
        return math.fsum((-1) ** len(J) * v for J, v in self.values.items())


def exp_omega_trace(alphas: Sequence[float], u: float, q: int) -> float:
    """Trace over degree-q forms of exp(2u * omega_d): sum over |J|=q of exp(-2u alpha_J)."""
    a = _alphas(alphas)
    _check_q(q, len(a))
    if u <= 0:
        raise DomainError(f"u must be positive, got {u!r}")
    return math.fsum(
        _exp_checked(-2.0 * u * J.sum_over(a), "exp(-2u alpha_J)") for J in subsets_of_size(len(a), q)
    )


def e0_endo(alphas: Sequence[float], u: float) -> EndoCoefficient:
    """Principal coefficient e_{inf,0}(u) as a diagonal endomorphism (rank(E) not applied).

    Entry J is ``(2pi)^-n prod_j L(alpha_j) exp(-2u alpha_J)`` with
    ``L = landau_factor``.  The factor for j in J is folded as
    ``L(a) exp(-2ua) = L(-a)`` so nothing overflows.
    """
    a = _alphas(alphas)
    n = len(a)
    log_plus = [log_landau_factor(x, u) for x in a]
    log_minus = [log_landau_factor(-x, u) for x in a]
    base = -n * math.log(TWO_PI)
    values = {}
    for J in all_subsets(n):
        s = base + sum(log_minus[j] if J.bits >> j & 1 else log_plus[j] for j in range(n))
        values[J] = _exp_checked(s, "e0_endo entry")
    return EndoCoefficient(n, values)


def e0_trace(alphas: Sequence[float], u: float, q: int, rank_e: int = 1) -> float:
    """Degree-q trace of the principal coefficient.

    ``rank_e (4pi)^-n sum_{|J|=q} exp(u(alpha_{J^c} - alpha_J)) prod_j u a_j / sinh(u a_j)``,
    evaluated in log space.
    """
    a = _alphas(alphas)
    n = len(a)
    _check_q(q, n)
    if u <= 0:
        raise DomainError(f"u must be positive, got {u!r}")
    log_sinhc = sum(log_sinhc_inv(u * x) for x in a)
    total = math.fsum(a)
    terms = []
    for J in subsets_of_size(n, q):
        a_J = J.sum_over(a)
        terms.append(_exp_checked(u * ((total - a_J) - a_J) + log_sinhc, "e0_trace term"))
    return rank_e * FOUR_PI**-n * math.fsum(terms)


def e0_bochner(alphas: Sequence[float], u: float) -> float:
    """Principal coefficient of the Bochner Laplacian: ``(2pi)^-n exp(-u tau) prod_j L(alpha_j)``."""
    a = _alphas(alphas)
    tau = math.fsum(a)
    s = -len(a) * math.log(TWO_PI) - u * tau + sum(log_landau_factor(x, u) for x in a)
    return _exp_checked(s, "e0_bochner")


# 1/w - coth(w) = sum_k _LOGDER[k] w^(2k+1)
_LOGDER = (
    -1.0 / 3.0,
    1.0 / 45.0,
    -2.0 / 945.0,
    1.0 / 4725.0,
    -2.0 / 93555.0,
    1382.0 / 638512875.0,
)
_SMALL_W = 0.1


def _w_over_sinh(w: complex) -> complex:
    if abs(w) < 1e-3:
        w2 = w * w
        return 1.0 - w2 / 6.0 + 7.0 * w2 * w2 / 360.0 - 31.0 * w2**3 / 15120.0
    if w.real > 20.0:
        return 2.0 * w * cmath.exp(-w) / (1.0 - cmath.exp(-2.0 * w))
    if w.real < -20.0:
        return -2.0 * w * cmath.exp(w) / (1.0 - cmath.exp(2.0 * w))
    return w / cmath.sinh(w)


def _check_pole(w: complex, j: int):
    k = round(w.imag / math.pi)
    if k != 0 and abs(w - 1j * math.pi * k) < POLE_MARGIN:
        raise DomainError(f"fiber argument is within {POLE_MARGIN} of a pole of 1/sinh for eigenvalue index {j}")


def phi0(alphas: Sequence[float], z: complex) -> complex:
    """Leading Hadamard coefficient ``prod_j (z a_j/2) / sinh(z a_j/2)``.

    At real ``z = 2u`` this is det^{-1/2} of the Jacobi map of the
    Kaluza-Klein exponential map.
    """
    a = _alphas(alphas)
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"non-finite fiber argument {z!r}")
    out = 1.0 + 0j
    for j, x in enumerate(a, start=1):
        w = 0.5 * z * x
        _check_pole(w, j)
        out *= _w_over_sinh(w)
    return out


def _log_f_derivs(w: float) -> tuple[float, float]:
    """First and second derivatives in w of log(w / sinh w)."""
    if abs(w) < _SMALL_W:
        w2 = w * w
        d1 = sum(c * w ** (2 * k + 1) for k, c in enumerate(_LOGDER))
        d2 = sum((2 * k + 1) * c * w2**k for k, c in enumerate(_LOGDER))
        return d1, d2
    csch2 = 4.0 * math.exp(-2.0 * abs(w)) if abs(w) > 20.0 else 1.0 / math.sinh(w) ** 2
    return 1.0 / w - 1.0 / math.tanh(w), -1.0 / (w * w) + csch2


def phi0_dtheta2(alphas: Sequence[float], u: float) -> float:
    """Second theta-derivative at theta=0 of ``phi0(alphas, i*theta + 2u)``.

    With l_j = log f_j and d/dtheta = i d/dz:
    ``Phi'' = -Phi * [(sum_j l_j')^2 + sum_j l_j'']`` at z = 2u.
    """
    a = _alphas(alphas)
    if u <= 0:
        raise DomainError(f"u must be positive, got {u!r}")
    first = 0.0
    second = 0.0
    for x in a:
        d1, d2 = _log_f_derivs(u * x)
        first += 0.5 * x * d1
        second += 0.25 * x * x * d2
    value = phi0(a, 2.0 * u).real
    return -value * (first * first + second)


def bochner_e1_partial(alphas: Sequence[float], u: float) -> float:
    """Partial subleading (Bochner): the Phi0'' part of the (p/u)^(n-1) coefficient, ``(4pi)^-n Phi0''``.

    The transport coefficient Phi1 is not included.  On flat tori the exact
    Bochner trace has no subleading term, so there Phi1 cancels this value
    exactly rather than vanishing.
    """
    a = _alphas(alphas)
    return FOUR_PI ** -len(a) * phi0_dtheta2(a, u)


# G(x) = B/u expanded in x = 2 pi u, where B is the bracket of the Kähler e1 formula
_E1_SERIES = (0.5, -1.0 / 15.0, 1.0 / 105.0, -2.0 / 1575.0, 1.0 / 6237.0, -1382.0 / 70945875.0, 2.0 / 868725.0)


def _e1_bracket_over_u(u: float) -> float:
    x = TWO_PI * u
    if x < 0.25:
        return sum(c * x ** (2 * k) for k, c in enumerate(_E1_SERIES))
    # sinh(2x)/sinh(x)^2 = 2 coth(x); no overflow at any u
    coth = 1.0 / math.tanh(x)
    csch2 = 4.0 * math.exp(-2.0 * x) if x > 20.0 else 1.0 / math.sinh(x) ** 2
    return 0.5 - 0.5 * coth * coth + 3.0 / (8.0 * math.pi * u) * coth - 0.25 * csch2


def e1_kahler(
    u: float,
    scalar_curvature: float,
    n: int = 1,
    alphas: Optional[Sequence[float]] = None,
) -> float:
    """Subleading coefficient e_{inf,1}(u) for a Kähler-quantized bundle (all alphas = 2pi).

    ``(u^(n-1) / (3 (1 - e^{-4 pi u})^n)) * B(u) * r`` with
    ``B = u/2 - u/(2 tanh^2(2 pi u)) - (2/sinh^2(2 pi u)) (-(3/(32 pi)) sinh(4 pi u) + u/8)``.

    The overall sign is fixed by the small-u heat invariant r/(24 pi) and
    the large-u Bergman coefficient r/(8 pi) (see ``e1_kahler_printed``).
    """
    if u <= 0 or not math.isfinite(u):
        raise DomainError(f"u must be positive, got {u!r}")
    if alphas is not None:
        a = _alphas(alphas)
        if len(a) != n:
            raise PreconditionError(f"got {len(a)} eigenvalues for n={n}")
        if any(abs(x - TWO_PI) > 1e-9 * TWO_PI for x in a):
            raise PreconditionError(f"geometry is not Kähler-quantized: alphas={a}, expected all 2*pi")
    # u^(n-1)/(1-e^{-4 pi u})^n * B = (u/(1-e^{-4 pi u}))^n * (B/u)
    lead = (landau_factor(TWO_PI, u) / TWO_PI) ** n
    return lead * _e1_bracket_over_u(u) * scalar_curvature / 3.0


def e1_kahler_printed(u: float, scalar_curvature: float, n: int = 1) -> float:
    """The e1 expression exactly as commonly printed (leading minus sign).

    It equals ``-e1_kahler``; kept to document the sign discrepancy.
    """
    return -e1_kahler(u, scalar_curvature, n)


@dataclass(frozen=True)
class Signature:
    n_minus: int
    n_zero: int
    n_plus: int

    @property
    def degenerate(self) -> bool:
        return self.n_zero > 0


def eigenvalue_signature(alphas: Sequence[float], zero_tol: float = DEFAULT_ZERO_TOL) -> Signature:
    if zero_tol <= 0:
        raise DomainError(f"zero_tol must be positive, got {zero_tol!r}")
    a = _alphas(alphas)
    n_zero = sum(1 for x in a if abs(x) <= zero_tol)
    n_minus = sum(1 for x in a if x < -zero_tol)
    return Signature(n_minus, n_zero, len(a) - n_zero - n_minus)


@dataclass(frozen=True)
class LargeULimit:
    """Limit of ``u^-n e0_trace`` as u -> inf, behaving like ``coefficient * u^-vanishing_exponent``."""

    vanishing_exponent: int
    coefficient: float
    classification: str
    signature: Signature
    q: int

    def predicted(self, u: float) -> float:
        return self.coefficient * u ** (-self.vanishing_exponent)


def large_u_limit(alphas: Sequence[float], q: int, zero_tol: float = DEFAULT_ZERO_TOL) -> LargeULimit:
    a = _alphas(alphas)
    n = len(a)
    _check_q(q, n)
    sig = eigenvalue_signature(a, zero_tol)
    if sig.n_zero == 0:
        if sig.n_minus == q:
            coef = (-1) ** q * math.prod(x / TWO_PI for x in a)
            return LargeULimit(0, coef, NONDEGENERATE, sig, q)
        return LargeULimit(0, 0.0, VANISHING, sig, q)
    if sig.n_minus <= q <= sig.n_minus + sig.n_zero:
        nonzero = [x for x in a if abs(x) > zero_tol]
        coef = (
            math.comb(sig.n_zero, q - sig.n_minus)
            * FOUR_PI**-n
            * (-1) ** sig.n_minus
            * math.prod(2.0 * x for x in nonzero)
        )
        return LargeULimit(sig.n_zero, coef, DEGENERATE, sig, q)
    return LargeULimit(sig.n_zero, 0.0, VANISHING, sig, q)


def u_trend_check(alphas: Sequence[float], q: int, u_grid: Sequence[float]) -> list[tuple[float, float]]:
    """Tabulate ``(u, u^-n e0_trace(alphas, u, q))`` over an increasing grid."""
    a = _alphas(alphas)
    grid = [float(u) for u in u_grid]
    if any(u <= 0 for u in grid) or any(b <= c for b, c in zip(grid[1:], grid[:-1])):
        raise DomainError("u_grid must be positive and strictly increasing")
    n = len(a)
    return [(u, u**-n * e0_trace(a, u, q)) for u in grid]


def model_heat_diag(alphas: Sequence[float], u: float) -> EndoCoefficient:
    """Diagonal of exp(-L) at the origin for the rescaled constant-curvature model operator.

    The model operator's heat kernel diagonal coincides with the principal
    coefficient, so this shares ``e0_endo``'s implementation; the
    Landau-level sum in :mod:`curvheat.spectra` checks it independently.
    """
    return e0_endo(alphas, u)


def mckean_singer_density(alphas: Sequence[float], u: float) -> float:
    """Local supertrace sum_q (-1)^q tr_q e0_endo, which telescopes to (2pi)^-n prod(u a_j)."""
    return e0_endo(alphas, u).supertrace()


def endo_as_array(coef: EndoCoefficient) -> np.ndarray:
    """Entries ordered by bitmask."""
    return np.array([coef.values[J] for J in all_subsets(coef.n)])
