"""Stationary-phase expansion of the circle-bundle fiber integral and
asymptotic fitting of spectral heat traces.

The fiber integral, after the contour shift and the cancellation of the
``e^{pu}`` factor, is

    (p / 4 pi u)^(n + 1/2) * integral_R Phi0(i theta + 2u) exp(-p theta^2 / 4u) dtheta.

Gaussian moments give ``E[theta^(2k)] = (2k)!/k! (u/p)^k`` times the
normalization, so the k-th stationary-phase term is
``(u/p)^k / k! * d^(2k)/dtheta^(2k) Phi0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .coefficients import TWO_PI, _alphas, e0_trace, e1_kahler, phi0
from .errors import ConditioningError, DomainError, VerificationError
from .geometry import CP1, TORUS, ModelGeometry
from .spectra import HeatTraceSample, graded_heat_trace

FOUR_PI = 4.0 * math.pi
MAX_ORDER = 3


# ------------------------------------------------------------ power series


def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: len(a)]


def _series_recip(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for m in range(1, len(a)):
        out[m] = -np.dot(a[1 : m + 1], out[m - 1 :: -1][:m]) / a[0]
    return out


def _sinh_over_w_series(w0: float, order: int) -> np.ndarray:
    """Taylor coefficients in s of sinh(w0 + s)/(w0 + s), for |w0| < 1."""
    coeffs = np.zeros(order + 1)
    for k in range(40):
        c = 1.0 / math.factorial(2 * k + 1)
        # (w0 + s)^(2k) = sum_m C(2k, m) w0^(2k-m) s^m
        for m in range(min(2 * k, order) + 1):
            coeffs[m] += c * math.comb(2 * k, m) * w0 ** (2 * k - m)
    return coeffs


def _w_over_sinh_series(w0: float, order: int) -> np.ndarray:
    """Taylor coefficients in s of (w0 + s)/sinh(w0 + s)."""
    if abs(w0) < 1.0:
        return _series_recip(_sinh_over_w_series(w0, order))
    # (w0 + s)/sinh(w0 + s) = (w0/sinh w0) (1 + s/w0) / S(s), S = sinh(w0+s)/sinh(w0)
    coth = 1.0 / math.tanh(w0)
    S = np.array([(1.0 if m % 2 == 0 else coth) / math.factorial(m) for m in range(order + 1)])
    lin = np.zeros(order + 1)
    lin[0] = 1.0
    if order >= 1:
        lin[1] = 1.0 / w0
    lead = phi0([2.0 * w0], 1.0).real  # w0/sinh(w0), overflow-safe
    return lead * _series_mul(lin, _series_recip(S))


def phi0_theta_derivatives(alphas: Sequence[float], u: float, max_order: int) -> np.ndarray:
    """``d^m/dtheta^m Phi0(i theta + 2u)`` at theta = 0 for m = 0..max_order (complex).

    Built from exact Taylor series of each factor ``f(w0 + a h/2)``,
    ``w0 = u a``, multiplied together; then ``d/dtheta = i d/dz``.
    """
    a = _alphas(alphas)
    if u <= 0:
        raise DomainError(f"u must be positive, got {u!r}")
    total = np.zeros(max_order + 1)
    total[0] = 1.0
    for x in a:
        s = _w_over_sinh_series(u * x, max_order)
        scale = (0.5 * x) ** np.arange(max_order + 1)
        total = _series_mul(total, s * scale)
    m = np.arange(max_order + 1)
    fact = np.array([math.factorial(k) for k in m], dtype=float)
    return total * fact * (1j) ** m


def stationary_expand(alphas: Sequence[float], u: float, p: float, order: int) -> float:
    """Partial stationary-phase sum ``(p/4 pi u)^n sum_{k<=order} (u/p)^k/k! d^(2k)Phi0``."""
    if not 0 <= order <= MAX_ORDER:
        raise DomainError(f"order must be in 0..{MAX_ORDER}, got {order}")
    a = _alphas(alphas)
    n = len(a)
    pref = (p / (FOUR_PI * u)) ** n
    value = pref * phi0(a, 2.0 * u).real
    if order == 0:
        return value
    derivs = phi0_theta_derivatives(a, u, 2 * order)
    for k in range(1, order + 1):
        value += pref * (u / p) ** k / math.factorial(k) * derivs[2 * k].real
    return value


def _phi0_on_line(alphas, u: float, theta: np.ndarray) -> np.ndarray:
    z = 1j * theta + 2.0 * u
    out = np.ones_like(z)
    for x in alphas:
        w = 0.5 * z * x
        small = np.abs(w) < 1e-3
        big = ~small
        f = np.empty_like(w)
        w2 = w[small] ** 2
        f[small] = 1.0 - w2 / 6.0 + 7.0 * w2 * w2 / 360.0
        wb = w[big]
        # w/sinh(w) = 2w e^{-w}/(1 - e^{-2w}) after reflecting to Re w >= 0 (f is even)
        wb = np.where(wb.real < 0, -wb, wb)
        f[big] = 2.0 * wb * np.exp(-wb) / (1.0 - np.exp(-2.0 * wb))
        out = out * f
    return out


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    imag: float
    error: float
    theta_max: float


def gaussian_quadrature(alphas: Sequence[float], u: float, p: float) -> QuadratureResult:
    a = _alphas(alphas)
    if u <= 0 or p <= 0:
        raise DomainError("u and p must be positive")
    n = len(a)
    theta_max = math.sqrt(4.0 * u * 18.0 * math.log(10.0) / p)
    # poles of 1/sinh(w) sit on Re w = 0; the line Re z = 2u keeps Re w = u a away unless a = 0
    for j, x in enumerate(a, start=1):
        if x != 0.0 and abs(u * x) < 1e-12:
            raise DomainError(f"pole of Phi0 too close to the integration window for index {j}")

    def re(th):
        return (_phi0_on_line(a, u, np.array([th]))[0] * math.exp(-p * th * th / (4.0 * u))).real

    def im(th):
        return (_phi0_on_line(a, u, np.array([th]))[0] * math.exp(-p * th * th / (4.0 * u))).imag

    opts = dict(epsabs=0.0, epsrel=2e-14, limit=400)
    v, err = integrate.quad(re, -theta_max, theta_max, **opts)
    with warnings.catch_warnings():
        # the imaginary part is odd in theta; quad flags roundoff on a zero integral
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        vi, _ = integrate.quad(im, -theta_max, theta_max, **opts)
    pref = (p / (FOUR_PI * u)) ** (n + 0.5)
    return QuadratureResult(pref * v, pref * vi, pref * err, theta_max)


def gaussian_reference(alphas: Sequence[float], u: float, p: float) -> float:
    """Numeric value of the shifted fiber integral; raises if the quadrature is not converged to 1e-12."""
    res = gaussian_quadrature(alphas, u, p)
    if res.error > 1e-12 * abs(res.value):
        raise ConditioningError(f"quadrature error estimate {res.error:.2e} exceeds 1e-12 relative")
    return res.value


# ------------------------------------------------------------ fitting


def loglog_slope(x, y) -> float:
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.abs(np.asarray(y, dtype=float)))
    return float(np.polyfit(lx, ly, 1)[0])


def _top_half(seq):
    seq = list(seq)
    return seq[len(seq) // 2 :] if len(seq) >= 4 else seq


@dataclass
class ExpansionReport:
    n: int
    u: float
    p_grid: list[int]
    fitted: list[float]
    predicted: list[Optional[float]]
    residual_order: Optional[float]
    condition: float
    q: int = 0
    residuals: list[float] = field(default_factory=list)
    remainder: list[float] = field(default_factory=list)
    remainder_order: Optional[float] = None
    remainder_exact: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.fitted) - 1

    def rows(self) -> list[dict]:
        out = []
        for r, (c, pr) in enumerate(zip(self.fitted, self.predicted)):
            diff = None if pr is None else abs(c - pr)
            rel = None if pr is None or pr == 0 else diff / abs(pr)
            out.append({"r": r, "fitted": c, "predicted": pr, "abs_diff": diff, "rel_diff": rel})
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "u": self.u,
            "q": self.q,
            "p_grid": list(self.p_grid),
            "coefficients": self.rows(),
            "residual_order": self.residual_order,
            "remainder_order": self.remainder_order,
            "remainder_exact": self.remainder_exact,
            "condition": self.condition,
            "notes": list(self.notes),
        }


def fit_coefficients(
    samples: Sequence[HeatTraceSample],
    n: int,
    k: int,
    predicted: Optional[Sequence[Optional[float]]] = None,
    nuisance: int = 2,
) -> ExpansionReport:
    """Least-squares fit of ``trace(p) ~ sum_r c_r (p/u)^(n-r)``, r = 0..k.

    ``nuisance`` extra higher-order columns absorb the truncated tail of the
    expansion; only c_0..c_k are reported.  Samples must share u and q and
    be normalized per unit volume.
    """
    if not samples:
        raise DomainError("no samples to fit")
    u = samples[0].u
    q = samples[0].q
    if any(s.u != u or s.q != q for s in samples):
        raise DomainError("samples must share u and q")
    ps = np.array([s.p for s in samples], dtype=float)
    if len(set(ps.tolist())) < k + 3:
        raise ConditioningError(f"need at least {k + 3} distinct p values for k={k}, got {len(set(ps.tolist()))}")
    order = np.argsort(ps)
    ps = ps[order]
    y = np.array([samples[i].value for i in order])
    ncols = k + 1 + max(0, min(nuisance, len(ps) - (k + 2)))
    x = ps / u
    design = np.column_stack([x ** (n - r) for r in range(ncols)])
    norms = np.linalg.norm(design, axis=0)
    scaled = design / norms
    sol, _, rank, sv = np.linalg.lstsq(scaled, y, rcond=None)
    condition = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    if rank < ncols or condition > 1e12:
        raise ConditioningError(f"design matrix is rank deficient (condition {condition:.2e}); widen the p grid")
    coefs = sol / norms
    fitted = [float(c) for c in coefs[: k + 1]]
    residual = y - design[:, : k + 1] @ coefs[: k + 1]
    top = _top_half(range(len(ps)))
    r_top = np.abs(residual[top])
    residual_order = None
    if np.all(r_top > 0) and np.all(np.diff(r_top) <= 0):
        residual_order = loglog_slope(x[top], r_top)
    pred = list(predicted) if predicted is not None else [None] * (k + 1)
    pred = (pred + [None] * (k + 1))[: k + 1]
    return ExpansionReport(
        n=n,
        u=u,
        p_grid=[int(p) for p in ps],
        fitted=fitted,
        predicted=pred,
        residual_order=residual_order,
        condition=condition,
        q=q,
        residuals=[float(r) for r in residual],
    )


def _kahler_quantized(geom: ModelGeometry) -> bool:
    return all(
        pt.scalar_curvature is not None and all(abs(a - TWO_PI) <= 1e-9 * TWO_PI for a in pt.alphas)
        for pt in geom.points
    )


def predicted_coefficients(geom: ModelGeometry, u: float, q: int, k: int) -> list[Optional[float]]:
    """Closed-form per-volume coefficients: e0 always, e1 for Kähler-quantized degree 0."""
    vol = geom.volume
    preds: list[Optional[float]] = []
    e0 = math.fsum(e0_trace(pt.alphas, u, q, geom.rank_e) * pt.weight for pt in geom.points) / vol
    preds.append(e0)
    if k >= 1:
        if q == 0 and _kahler_quantized(geom):
            e1 = math.fsum(
                geom.rank_e * e1_kahler(u, pt.scalar_curvature, geom.n, pt.alphas) * pt.weight for pt in geom.points
            )
            preds.append(e1 / vol)
        else:
            preds.append(None)
    preds.extend([None] * (k - 1))
    return preds[: k + 1]


def trace_samples(geom: ModelGeometry, u: float, p_grid: Sequence[int], q: int = 0) -> list[HeatTraceSample]:
    """Spectral heat traces per unit volume."""
    vol = geom.volume
    out = []
    for p in p_grid:
        s = graded_heat_trace(geom, int(p), q, u)
        out.append(HeatTraceSample(u, int(p), q, s.value / vol, s.truncation_bound / vol))
    return out


def expansion_report(
    model: ModelGeometry,
    u: float,
    p_grid: Sequence[int],
    k: int,
    q: int = 0,
    strict: bool = True,
    nuisance: int = 2,
) -> ExpansionReport:
    """Fit the heat-trace expansion of a model geometry and check the remainder order.

    The remainder subtracts the closed-form coefficients where they exist
    (fitted ones otherwise) and must decay like ``(p/u)^(n-k-1)``; a
    remainder already at roundoff level counts as exact.
    """
    if model.kind not in (TORUS, CP1):
        raise DomainError(f"no spectra for geometry kind {model.kind}")
    samples = trace_samples(model, u, p_grid, q)
    preds = predicted_coefficients(model, u, q, k)
    report = fit_coefficients(samples, model.n, k, preds, nuisance=nuisance)
    n = model.n
    ps = np.array(report.p_grid, dtype=float)
    x = ps / u
    y = np.array([s.value for s in sorted(samples, key=lambda s: s.p)])
    coefs = [pr if pr is not None else c for c, pr in zip(report.fitted, report.predicted)]
    rem = y - sum(c * x ** (n - r) for r, c in enumerate(coefs))
    report.remainder = [float(v) for v in rem]
    leading = np.abs(coefs[0] * x**n)
    if np.all(np.abs(rem) <= 1e-12 * leading):
        report.remainder_exact = True
        report.notes.append("remainder at roundoff level: expansion terminates")
        return report
    top = _top_half(range(len(ps)))
    report.remainder_order = loglog_slope(x[top], rem[top])
    target = n - k - 1
    if abs(report.remainder_order - target) > 0.3:
        msg = (
            f"remainder exponent {report.remainder_order:.3f} for degree q={q} at u={u} "
            f"is not within 0.3 of {target}"
        )
        report.notes.append(msg)
        if strict:
            raise VerificationError(msg)
    return report
