import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvheat.analytic import (
    HermitianPair,
    MultiIndex,
    all_subsets,
    curvature_eigenvalues,
    landau_factor,
    log_landau_factor,
    log_sinhc_inv,
    richardson,
    sinhc_inv,
    subsets_of_size,
)
from curvheat.errors import ConditioningError, DomainError, RangeError

reals = st.floats(-30, 30, allow_nan=False)


def mp_sinhc_inv(a, u):
    x = mp.mpf(a) * u
    return mp.mpf(1) if x == 0 else x / mp.sinh(x)


def mp_landau(a, u):
    x = 2 * mp.mpf(a) * u
    return mp.mpf(0.5) if x == 0 else mp.mpf(a) * u / (-mp.expm1(-x))


@given(a=reals, u=st.floats(1e-6, 5))
def test_sinhc_inv_matches_mpmath(a, u):
    ref = mp_sinhc_inv(a, u)
    assert sinhc_inv(a, u) == pytest.approx(float(ref), rel=1e-13, abs=1e-300)


@given(a=reals, u=st.floats(1e-6, 5))
def test_landau_factor_matches_mpmath(a, u):
    assert landau_factor(a, u) == pytest.approx(float(mp_landau(a, u)), rel=1e-13, abs=1e-300)


@given(x=st.floats(-700, 700))
def test_log_sinhc_inv_consistent(x):
    ref = mp.log(mp_sinhc_inv(x, 1))
    assert log_sinhc_inv(x) == pytest.approx(float(ref), rel=1e-12, abs=1e-14)


@given(a=st.floats(-200, 200), u=st.floats(0.01, 5))
def test_log_landau_factor_consistent(a, u):
    assert log_landau_factor(a, u) == pytest.approx(float(mp.log(mp_landau(a, u))), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("x", [1e-3 * (1 - 1e-12), 1e-3 * (1 + 1e-12)])
def test_series_switch_is_continuous(x):
    assert sinhc_inv(x, 1.0) == pytest.approx(float(mp_sinhc_inv(x, 1)), rel=1e-15)
    assert landau_factor(x, 1.0) == pytest.approx(float(mp_landau(x, 1)), rel=1e-15)


def test_zero_limits():
    assert sinhc_inv(0.0, 1.0) == 1.0
    assert landau_factor(0.0, 3.0) == 0.5


def test_landau_factor_reflection():
    # L(a) - L(-a) = u a
    for a in (0.3, 2.0, 17.0):
        assert landau_factor(a, 0.7) - landau_factor(-a, 0.7) == pytest.approx(0.7 * a, rel=1e-14)


def test_sinhc_overflow_and_domain():
    assert sinhc_inv(100.0, 1.0) > 0.0
    assert sinhc_inv(1000.0, 1.0) == 0.0  # underflows without raising
    with pytest.raises(DomainError):
        sinhc_inv(float("nan"), 1.0)
    with pytest.raises(DomainError):
        landau_factor(1.0, -1.0)
    with pytest.raises(RangeError):
        landau_factor(1e308, 1e308)


def test_multi_index_basics():
    J = MultiIndex(0b101, 4)
    assert len(J) == 2
    assert 1 in J and 3 in J and 2 not in J
    assert J.members() == (1, 3)
    assert J.complement().members() == (2, 4)
    assert J.sum_over([1.0, 10.0, 100.0, 1000.0]) == 101.0
    assert repr(J) == "{1,3}"
    with pytest.raises(DomainError):
        MultiIndex(0b10000, 4)


@pytest.mark.parametrize("n", range(1, 7))
def test_subsets_enumeration(n):
    total = 0
    for q in range(n + 1):
        subs = subsets_of_size(n, q)
        assert len(subs) == math.comb(n, q)
        assert all(len(J) == q for J in subs)
        assert [J.bits for J in subs] == sorted(J.bits for J in subs)
        total += len(subs)
    assert total == 2**n == len(all_subsets(n))


def test_subsets_rejects_bad_degree():
    with pytest.raises(DomainError):
        subsets_of_size(3, 4)


@settings(max_examples=50)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_curvature_eigenvalues_match_congruence(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    g = a @ a.conj().T + n * np.eye(n)
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    r = b + b.conj().T
    got = curvature_eigenvalues(HermitianPair(r, g))
    # oracle: eigenvalues of L^-1 R L^-H with G = L L^H
    L = np.linalg.cholesky(g)
    Li = np.linalg.inv(L)
    ref = np.sort(np.linalg.eigvalsh(Li @ r @ Li.conj().T))
    np.testing.assert_allclose(got, ref, rtol=1e-10, atol=1e-10)


def test_curvature_eigenvalues_examples():
    got = curvature_eigenvalues(HermitianPair(np.diag([1.0, -2.0]), np.diag([2.0, 1.0])))
    np.testing.assert_allclose(got, [-2.0, 0.5])


def test_hermitian_pair_validation():
    with pytest.raises(DomainError):
        HermitianPair(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2))
    with pytest.raises(ConditioningError):
        curvature_eigenvalues(HermitianPair(np.eye(2), np.diag([1.0, 1e-14])))


def test_richardson_removes_quadratic_error():
    exact = 3.0
    vals = [exact + 2.0 * h**2 + 5.0 * h**4 for h in (0.1, 0.05, 0.025)]
    assert richardson(vals, 4.0) == pytest.approx(exact, abs=1e-12)
