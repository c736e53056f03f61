import math

import numpy as np
import pytest

from floquet_waveguide import (
    BoundaryCondition,
    ModeClass,
    PermittivityCell,
    Problem,
    analyze,
    check_estimates,
    evaluate_mode,
    flux,
    group_velocity,
    modes_from_chain,
    translation_matrix,
)
from floquet_waveguide.modes import NormTag, cell_flux, mode_to_dict, pde_residual, trace_coefficients


def test_propagating_pair_is_flux_normalized(an1):
    fam = an1.family
    assert fam.n_bar == 1 and len(fam.minus) == 1
    vp, vm = fam.plus[0], fam.minus[0]
    assert vp.xi == pytest.approx(1.0) and vm.xi == pytest.approx(-1.0)
    assert flux(vp, vp) == pytest.approx(1j, abs=1e-12)
    assert flux(vm, vm) == pytest.approx(-1j, abs=1e-12)
    assert abs(flux(vp, vm)) < 1e-12
    assert vp.kind is ModeClass.RIGHT_PROPAGATING and vm.kind is ModeClass.LEFT_PROPAGATING


def test_group_velocity_sign_matches_flux(an1, an_smooth):
    for fam in (an1.family, an_smooth.family):
        for v in fam.propagating:
            dlam, domega = group_velocity(v)
            assert np.sign(dlam) == v.flux_sign
            assert domega == pytest.approx(dlam / (2 * math.sqrt(v.cell.omega2)))
    assert group_velocity(an1.family.plus[0])[0] == pytest.approx(2.0)


def test_family_order_and_tail_scaling(an1):
    fam = an1.family
    assert len(fam.family) == 6
    ims = [v.xi.imag for v in fam.family[fam.n_bar:]]
    assert ims == sorted(ims) and all(x > 0 for x in ims)
    kap = an1.cell.basis.kappas
    for n, v in enumerate(fam.family[fam.n_bar:], start=fam.n_bar):
        assert v.norm_tag is NormTag.L2_SCALED_TAIL
        assert np.linalg.norm(v.top) ** 2 == pytest.approx((1 + kap[n] ** 2) ** -0.5)


def test_exact_modes_of_uniform_strip(an1):
    # the mode at xi = i sqrt(2) is exp(-sqrt(2) x1) psi_2 up to scaling
    v = an1.family.family[1]
    assert v.xi == pytest.approx(1j * math.sqrt(2))
    x1, x2 = np.meshgrid(np.linspace(0, 2, 5), np.linspace(0.1, 3.0, 6), indexing="ij")
    ratio = evaluate_mode(v, x1, x2) / (np.exp(-math.sqrt(2) * x1) * np.sin(2 * x2))
    np.testing.assert_allclose(ratio, ratio.flat[0], rtol=1e-10)


def test_smooth_medium_solves_helmholtz(an_smooth):
    x1, x2 = np.meshgrid(np.linspace(0, 2, 9), np.linspace(0, math.pi, 9), indexing="ij")
    for v in an_smooth.family.family[:4]:
        scale = np.max(np.abs(evaluate_mode(v, x1, x2)))
        assert np.max(np.abs(pde_residual(v, x1, x2))) < 1e-10 * max(1.0, scale)


def test_laplacian_by_finite_differences(an_smooth):
    v = an_smooth.family.family[0]
    h = 1e-3
    x1, x2 = np.meshgrid(np.linspace(0.2, 1.8, 7), np.linspace(0.3, 2.8, 7), indexing="ij")
    f = lambda a, b: evaluate_mode(v, a, b)
    lap = (f(x1 + h, x2) + f(x1 - h, x2) + f(x1, x2 + h) + f(x1, x2 - h) - 4 * f(x1, x2)) / h**2
    res = lap + 1.5 * v.cell.eps.evaluate(x1, x2) * f(x1, x2)
    assert np.max(np.abs(res)) < 1e-4 * np.max(np.abs(f(x1, x2)))


def test_flux_is_independent_of_position(an_smooth):
    vp = an_smooth.family.plus[0]
    vals = [flux(vp, vp, x) for x in np.linspace(0, 3, 7)]
    np.testing.assert_allclose(vals, vals[0], atol=1e-8)
    assert cell_flux(vp, vp) == pytest.approx(1j, abs=1e-10)


def test_quasi_periodicity_of_simple_modes(an3):
    x1, x2 = np.meshgrid(np.linspace(0, 1, 4), np.linspace(0.2, 3, 4), indexing="ij")
    for v in an3.family.family[:4]:
        np.testing.assert_allclose(
            evaluate_mode(v, x1 + 1, x2), np.exp(1j * v.xi_raw) * evaluate_mode(v, x1, x2), atol=1e-12
        )


def test_band_edge_translation_and_slope(an2):
    cv, chains = next(p for p in an2.charvals if abs(p[0].xi) < 1e-6)
    modes = modes_from_chain(cv, chains, an2.cell)
    T = translation_matrix(modes)
    np.testing.assert_allclose(T.raw, [[1, 1j], [0, 1]], atol=1e-12)
    np.testing.assert_allclose(T.jordan, [[1, 1], [0, 1]], atol=1e-12)
    assert T.block_sizes == (2,)
    assert abs(group_velocity(modes[0])[0]) < 1e-6
    assert all(v.kind is ModeClass.DEGENERATE_PROPAGATING for v in an2.family.propagating)
    G = np.array([[flux(b, a) for a in an2.family.propagating] for b in an2.family.propagating])
    np.testing.assert_allclose(G, np.diag([1j, -1j]), atol=1e-10)


def test_linear_growth_of_generalized_mode(an2):
    cv, chains = next(p for p in an2.charvals if abs(p[0].xi) < 1e-6)
    v0, v1 = modes_from_chain(cv, chains, an2.cell)
    assert v1.order == 1
    # v1(x1 + 1) - v1(x1) = i v0(x1) for the chain at xi = 0
    x1, x2 = np.meshgrid([0.0, 0.4], [0.5, 1.5], indexing="ij")
    np.testing.assert_allclose(evaluate_mode(v1, x1 + 1, x2) - evaluate_mode(v1, x1, x2),
                               1j * evaluate_mode(v0, x1, x2), atol=1e-12)


def test_trace_coefficients_match_field(an3):
    v = an3.family.family[2]
    a, b = trace_coefficients(v, 0.3)
    x2 = np.linspace(0.1, 3.0, 5)
    psi = v.cell.basis.psi(x2, count=v.cell.trunc.M2)
    np.testing.assert_allclose(psi @ a, evaluate_mode(v, 0.3, x2), atol=1e-12)
    np.testing.assert_allclose(psi @ b, evaluate_mode(v, 0.3, x2, d1=1), atol=1e-12)


def test_estimates_hold_in_layered_medium(an3):
    rep = check_estimates(an3.family, an3.cover, count=5)
    assert len(rep.rows) == 5 and rep.ok()
    assert [r["n"] for r in rep.rows] == [3, 4, 5, 6, 7]


def test_band_gap_has_no_propagating_modes(an3):
    assert an3.family.n_bar == 0 and an3.family.real_mode_count == 0
    assert len(an3.family.left_growing) == len(an3.family.evanescent)


def test_quasi_periodic_family_classifies():
    p = Problem(L=1.0, bc=BoundaryCondition.quasi_periodic(0.7), eps=PermittivityCell.grid([[1.0, 2.0]], 1.0),
                omega2=3.0, M1=3, M2=6)
    fam = analyze(p).family
    assert fam.real_mode_count == 2 * fam.n_bar
    for v in fam.propagating:
        assert cell_flux(v, v) == pytest.approx(1j * v.flux_sign, abs=1e-9)


def test_mode_export(an1):
    d = mode_to_dict(an1.family.plus[0])
    assert d["re_xi"] == pytest.approx(1.0) and d["order"] == 0 and d["class"] == "right_propagating"
    assert {"power", "l1", "l2", "re", "im"} <= set(d["coefficients"][0])
