import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss

from floquet_waveguide import BCKind, BoundaryCondition, build_basis, evaluate_psi, sobolev_weight

widths = st.floats(min_value=0.3, max_value=5.0)
betas = st.floats(min_value=0.0, max_value=2 * math.pi, exclude_max=True)


def any_bc():
    return st.one_of(
        st.just(BoundaryCondition.dirichlet()),
        st.just(BoundaryCondition.neumann()),
        st.just(BoundaryCondition.mixed()),
        betas.map(BoundaryCondition.quasi_periodic),
    )


def gauss(L, n=200):
    t, w = leggauss(n)
    return 0.5 * L * (t + 1), 0.5 * L * w


def test_dirichlet_kappas_on_pi_strip():
    b = build_basis(BoundaryCondition.dirichlet(), math.pi, 5)
    np.testing.assert_allclose(b.kappas, [1, 2, 3, 4, 5])
    assert b.delta_gamma == pytest.approx(0.5)


def test_neumann_starts_with_constant_mode():
    L = 2.0
    b = build_basis(BoundaryCondition.neumann(), L, 3)
    assert b.kappas[0] == 0.0
    np.testing.assert_allclose(evaluate_psi(b, 0, np.linspace(0, L, 5)), 1 / math.sqrt(L))


def test_mixed_kappas_are_odd_half_multiples():
    b = build_basis(BoundaryCondition.mixed(), 1.0, 3)
    np.testing.assert_allclose(b.kappas, [math.pi / 2, 3 * math.pi / 2, 5 * math.pi / 2])


def test_periodic_ties_ordered_by_raw_index():
    b = build_basis(BoundaryCondition.quasi_periodic(0.0), 1.0, 5)
    np.testing.assert_allclose(b.kappas, [0, 2 * math.pi, 2 * math.pi, 4 * math.pi, 4 * math.pi])
    assert list(b.raw_index) == [0, -1, 1, -2, 2]


def test_quasi_periodic_kappas_sorted_and_nonnegative():
    b = build_basis(BoundaryCondition.quasi_periodic(4.0), 1.3, 8)
    assert np.all(np.diff(b.kappas) >= 0) and np.all(b.kappas >= 0)
    np.testing.assert_allclose(np.sort(np.abs(4.0 + 2 * math.pi * b.raw_index) / 1.3), b.kappas)


@settings(max_examples=40, deadline=None)
@given(any_bc(), widths)
def test_orthonormal(bc, L):
    b = build_basis(bc, L, 6)
    x, w = gauss(L)
    P = b.psi(x)
    G = P.conj().T @ (w[:, None] * P)
    np.testing.assert_allclose(G, np.eye(6), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(any_bc(), widths)
def test_eigenfunction_equation(bc, L):
    b = build_basis(bc, L, 6)
    x = np.linspace(0, L, 17)
    np.testing.assert_allclose(-b.psi(x, 2), b.kappas**2 * b.psi(x), atol=1e-9 * (1 + b.kappas.max() ** 2))


@settings(max_examples=30, deadline=None)
@given(widths)
def test_boundary_traces(L):
    ends = np.array([0.0, L])
    d = build_basis(BoundaryCondition.dirichlet(), L, 5).psi(ends)
    n = build_basis(BoundaryCondition.neumann(), L, 5).psi(ends, 1)
    m = build_basis(BoundaryCondition.mixed(), L, 5)
    np.testing.assert_allclose(d, 0, atol=1e-12)
    np.testing.assert_allclose(n, 0, atol=1e-10)
    np.testing.assert_allclose(m.psi(0.0), 0, atol=1e-12)
    np.testing.assert_allclose(m.psi(L, 1), 0, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(betas, widths)
def test_quasi_periodic_relation(beta, L):
    b = build_basis(BoundaryCondition.quasi_periodic(beta), L, 6)
    for d in (0, 1):
        np.testing.assert_allclose(b.psi(L, d), np.exp(1j * beta) * b.psi(0.0, d), atol=1e-10 * (1 + b.kappas.max()))


@settings(max_examples=50, deadline=None)
@given(any_bc(), widths)
def test_half_gap_positive_and_below_gaps(bc, L):
    b = build_basis(bc, L, 10)
    assert b.delta_gamma > 0
    gaps = np.diff(np.unique(np.round(b.kappas, 10)))
    assert np.all(gaps >= 2 * b.delta_gamma - 1e-9)


def test_sobolev_weight():
    b = build_basis(BoundaryCondition.dirichlet(), math.pi, 3)
    assert sobolev_weight(b, 1, 0.5) == pytest.approx(math.sqrt(5))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        BoundaryCondition(BCKind.QUASI_PERIODIC)
    with pytest.raises(ValueError):
        BoundaryCondition.quasi_periodic(7.0)
    with pytest.raises(ValueError):
        BoundaryCondition(BCKind.DIRICHLET, 1.0)
    b = build_basis(BoundaryCondition.dirichlet(), 1.0, 3)
    with pytest.raises(IndexError):
        evaluate_psi(b, 3, 0.5)
