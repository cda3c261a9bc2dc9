"""Numerical substrate: removable-singularity kernels, multi-indices and
curvature eigenvalues of a Hermitian pair."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import ConditioningError, DomainError, RangeError

MAX_DIM = 16
SERIES_SWITCH = 1e-3

# x/sinh(x) = sum c_k x^{2k}
_SINHC_SERIES = (1.0, -1.0 / 6.0, 7.0 / 360.0, -31.0 / 15120.0, 127.0 / 604800.0)
# x/(1 - exp(-2x)) = 1/2 + x/2 + sum d_k x^{2k}
_LANDAU_EVEN_SERIES = (0.5, 1.0 / 6.0, -1.0 / 90.0, 1.0 / 945.0, -1.0 / 9450.0)


def _even_poly(coeffs, x2):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x2 + c
    return acc


def _checked_product(a: float, u: float) -> float:
    if not (math.isfinite(a) and math.isfinite(u)):
        raise DomainError(f"non-finite input a={a!r}, u={u!r}")
    if u <= 0:
        raise DomainError(f"u must be positive, got {u!r}")
    x = u * a
    if not math.isfinite(x):
        raise RangeError(f"u*a overflows for a={a!r}, u={u!r}")
    return x


def sinhc_inv(a: float, u: float) -> float:
    """Return ``u*a / sinh(u*a)``, equal to 1 at ``a == 0``."""
    x = _checked_product(a, u)
    if abs(x) < SERIES_SWITCH:
        return _even_poly(_SINHC_SERIES, x * x)
    if abs(x) > 700.0:
        return math.exp(log_sinhc_inv(x))
    return x / math.sinh(x)


def log_sinhc_inv(x: float) -> float:
    """``log(x / sinh(x))`` without overflow for large ``|x|``."""
    ax = abs(x)
    if ax < SERIES_SWITCH:
        return math.log(_even_poly(_SINHC_SERIES, x * x))
    if ax < 20.0:
        return math.log(ax / math.sinh(ax))
    return math.log(2.0 * ax) - ax - math.log1p(-math.exp(-2.0 * ax))


def landau_factor(a: float, u: float) -> float:
    """Return ``u*a / (1 - exp(-2*u*a))``; the value at ``a == 0`` is 1/2.

    This is the per-eigenvalue factor of the principal heat coefficient,
    i.e. the Landau-level sum ``u|a| sum_k exp(-u(|a|(2k+1) - a))``.
    """
    x = _checked_product(a, u)
    if abs(x) < SERIES_SWITCH:
        return _even_poly(_LANDAU_EVEN_SERIES, x * x) + 0.5 * x
    if x > 0:
        return x / -math.expm1(-2.0 * x)
    # x < 0: |x| e^{2x} / (1 - e^{2x}) keeps everything bounded
    return -x * math.exp(2.0 * x) / -math.expm1(2.0 * x)


def log_landau_factor(a: float, u: float) -> float:
    """``log(landau_factor(a, u))`` valid far beyond the overflow range."""
    x = _checked_product(a, u)
    if abs(x) < SERIES_SWITCH:
        return math.log(_even_poly(_LANDAU_EVEN_SERIES, x * x) + 0.5 * x)
    if x > 0:
        return math.log(x) - math.log(-math.expm1(-2.0 * x))
    return math.log(-x) + 2.0 * x - math.log(-math.expm1(2.0 * x))


@dataclass(frozen=True, order=True)
class MultiIndex:
    """A subset J of {1..n}, stored as an n-bit mask (bit j-1 <-> index j)."""

    bits: int
    n: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_DIM:
            raise DomainError(f"dimension must be in 1..{MAX_DIM}, got {self.n}")
        if not 0 <= self.bits < (1 << self.n):
            raise DomainError(f"mask {self.bits:#x} does not fit in {self.n} bits")

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __contains__(self, j: int) -> bool:
        return bool(self.bits >> (j - 1) & 1)

    def members(self) -> tuple[int, ...]:
        return tuple(j + 1 for j in range(self.n) if self.bits >> j & 1)

    def complement(self) -> MultiIndex:
        return MultiIndex(((1 << self.n) - 1) ^ self.bits, self.n)

    def mask(self) -> np.ndarray:
        """Boolean membership vector of length n."""
        return np.array([bool(self.bits >> j & 1) for j in range(self.n)])

    def sum_over(self, values) -> float:
        """alpha_J = sum of ``values[j-1]`` over members j."""
        return float(sum(values[j - 1] for j in self.members()))

    def __repr__(self) -> str:
        return "{" + ",".join(map(str, self.members())) + "}"


@lru_cache(maxsize=None)
def subsets_of_size(n: int, q: int) -> tuple[MultiIndex, ...]:
    """All C(n, q) subsets of {1..n} of cardinality q, ascending by bitmask."""
    if not 1 <= n <= MAX_DIM:
        raise DomainError(f"dimension must be in 1..{MAX_DIM}, got {n}")
    if not 0 <= q <= n:
        raise DomainError(f"need 0 <= q <= n, got q={q}, n={n}")
    return tuple(MultiIndex(b, n) for b in range(1 << n) if b.bit_count() == q)


def all_subsets(n: int) -> tuple[MultiIndex, ...]:
    return tuple(MultiIndex(b, n) for b in range(1 << n))


@dataclass(frozen=True)
class HermitianPair:
    """Curvature form ``R`` in a holomorphic frame and the Gram matrix ``G`` of that frame."""

    R: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=complex)
        G = np.asarray(self.G, dtype=complex)
        if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape != G.shape:
            raise DomainError(f"R and G must be equal square matrices, got {R.shape} and {G.shape}")
        if not 1 <= R.shape[0] <= MAX_DIM:
            raise DomainError(f"dimension must be in 1..{MAX_DIM}")
        for name, m in (("R", R), ("G", G)):
            scale = max(1.0, float(np.abs(m).max()))
            if np.abs(m - m.conj().T).max() > 1e-12 * scale:
                raise DomainError(f"{name} is not Hermitian")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "G", G)

    @property
    def n(self) -> int:
        return self.R.shape[0]


def curvature_eigenvalues(pair: HermitianPair) -> np.ndarray:
    """Generalized eigenvalues of (R, G), ascending.

    These are the eigenvalues of the curvature relative to the metric.
    """
    g_eigs = np.linalg.eigvalsh(pair.G)
    if g_eigs[0] <= 1e-12 * abs(g_eigs[-1]):
        raise ConditioningError(
            f"Gram matrix is not positive definite: smallest eigenvalue {g_eigs[0]:.3e}, "
            f"largest {g_eigs[-1]:.3e}"
        )
    # Cholesky reduction G = L L*, then a Hermitian eigensolve of L^{-1} R L^{-*}
    return scipy.linalg.eigh(pair.R, pair.G, eigvals_only=True)


def richardson(values, ratio: float) -> float:
    """Richardson-extrapolate ``values`` to zero step size.

    ``values[i]`` must carry an error series in powers of ``e_i, e_i^2, ...``
    where ``e_{i+1} = e_i / ratio`` (``ratio=4`` for an O(h^2) scheme with
    the step halved each time).
    """
    level = [float(v) for v in values]
    m = 1
    while len(level) > 1:
        f = ratio**m
        level = [(f * hi - lo) / (f - 1.0) for lo, hi in zip(level[:-1], level[1:])]
        m += 1
    return level[0]
