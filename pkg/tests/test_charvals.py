import math
import warnings

import numpy as np
import pytest
import scipy.linalg as sla
from conftest import cached_analysis, dispersion_roots, fold, layered_transfer_roots

from floquet_waveguide import (
    BoundaryCondition,
    Circle,
    ContourError,
    PermittivityCell,
    Problem,
    Rectangle,
    Tolerances,
    analyze,
    band_rectangle,
    build_disk_cover,
    count_by_contour,
    desk1,
    solve_all_charvals,
)


def companion_eigs(cell):
    n = cell.dim
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    A[:n, n:] = np.eye(n)
    A[n:, :n] = cell.omega2 * cell.E - np.diag(cell.K)
    A[n:, n:] = -np.diag(cell.C)
    return sla.eigvals(A)


def xis(an):
    return np.array([cv.xi for cv, _ in an.charvals for _ in range(cv.algebraic_multiplicity)])


def assert_same_set(got, want, tol):
    got, want = list(got), list(want)
    assert len(got) == len(want)
    for z in got:
        d = np.abs(np.array(want) - z)
        j = int(np.argmin(d))
        assert d[j] < tol, (z, want[j])
        want.pop(j)


def test_constant_dirichlet_matches_dispersion(an1):
    cell = an1.cell
    h = an1.problem.strip_height(cell)
    want = fold(dispersion_roots(cell.basis.kappas[: cell.trunc.M2], 2.0, 1.0, 0))
    want = [z for z in np.unique(np.round(want, 12)) if abs(z.imag) <= h]
    assert_same_set(xis(an1), want, 1e-10)


def test_constant_neumann_matches_dispersion():
    p = desk1(bc=BoundaryCondition.neumann(), M2=5)
    an = analyze(p, modes=False)
    kap = an.cell.basis.kappas[:5]
    want = fold(dispersion_roots(kap, 2.0, 1.0, 0))
    assert_same_set(xis(an), [z for z in want if abs(z.imag) <= p.strip_height(an.cell)], 1e-10)


def test_layered_medium_matches_transfer_matrix(an3):
    cell = an3.cell
    want = np.concatenate([layered_transfer_roots([1.0, 4.0], 0.3, k) for k in cell.basis.kappas[: cell.trunc.M2]])
    got = xis(an3)
    for z in got:
        assert np.min(np.abs(want - z)) < 1e-5


def test_band_edge_has_chain_of_length_two(an2):
    zero = [cv for cv, _ in an2.charvals if abs(cv.xi) < 1e-6]
    assert len(zero) == 1
    cv = zero[0]
    assert cv.partial_null_multiplicities == (2,) and cv.kernel_dim == 1 and cv.cluster_size == 2
    assert cv.chain_residual < 1e-10


def test_periodic_ties_give_semisimple_values():
    # beta = 0 strip of width 1: kappa = 2 pi appears twice, so each xi has two independent modes
    p = Problem(L=1.0, bc=BoundaryCondition.quasi_periodic(0.0), eps=PermittivityCell.constant(1.0, 1.0),
                omega2=45.0, M1=2, M2=5)
    an = analyze(p, modes=False)
    s = math.sqrt(45.0 - 4 * math.pi**2)
    hit = [cv for cv, _ in an.charvals if abs(abs(cv.xi.real) - s) < 1e-8 and abs(cv.xi.imag) < 1e-8]
    assert len(hit) == 2
    assert all(cv.partial_null_multiplicities == (1, 1) for cv in hit)


def test_random_circles_match_linearization_count(an_smooth):
    cell = an_smooth.cell
    eigs = companion_eigs(cell)
    rng = np.random.default_rng(7)
    done = 0
    while done < 20:
        c = complex(rng.uniform(-3, 3), rng.uniform(-6, 6))
        r = rng.uniform(0.3, 2.0)
        circ = Circle(c, r)
        if np.min(circ.distance(eigs)) < 0.05:
            continue
        got = count_by_contour(cell, circ, n_quad=512)
        assert got.count == int(np.sum(circ.contains(eigs)))
        assert got.defect < 1e-3
        done += 1


def test_rectangle_count_homotopy(an1):
    rect, expected, gap_ok = band_rectangle(an1.cell, an1.cover)
    assert gap_ok and expected == 8
    for mu in (0.0, 0.5, 1.0):
        assert count_by_contour(an1.cell, rect, omega2=2.0 * mu).count == 8


def test_contour_through_value_raises(an1):
    with pytest.raises(ContourError):
        count_by_contour(an1.cell, Rectangle(0.5, 1.0 + 1e-13, -0.5, 0.5), n_quad=64)


def test_disk_cover_layout(an1):
    cover = an1.cover
    assert cover.N == 4 and cover.bound == pytest.approx(2.0)
    np.testing.assert_allclose([d.center.imag for d in cover.disks], [4, 5, 6])
    np.testing.assert_allclose([d.radius for d in cover.disks], [0.5, 0.4, 1 / 3])
    assert cover.in_strip and cover.at_most_one_neighbor


def test_disk_cover_of_layered_medium(an3):
    cover = an3.cover
    assert cover.N == 3 and len(cover.components) == 10
    assert all(comp.expected_count == 1 for comp in cover.components)


def test_tolerance_overrides_are_respected():
    tol = Tolerances(cluster=1e-3)
    assert tol.as_dict()["cluster"] == 1e-3
    with pytest.raises(ValueError):
        Tolerances(cluster=-1.0)


def test_warns_beyond_validated_strip(an1):
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        solve_all_charvals(an1.cell, 50.0)
    assert any("beyond" in str(w.message) for w in rec)


def test_raw_values_sorted_and_unit_vectors(an3):
    ims = [r.xi.imag for r in an3.raws]
    assert ims == sorted(ims)
    assert all(abs(np.linalg.norm(r.vector) - 1) < 1e-12 for r in an3.raws)
    assert all(-math.pi <= r.xi.real < math.pi for r in an3.raws)


def test_small_circles_around_known_roots(an1, an2):
    assert count_by_contour(an1.cell, Circle(1j * math.sqrt(2), 0.3)).count == 1
    assert count_by_contour(an2.cell, Circle(0.0, 0.5)).count == 2


def test_cover_margin_of_uniform_strip(an1):
    comp = an1.cover.components[0]
    assert comp.margin(1j * math.sqrt(14)) == pytest.approx(0.5 - (4 - math.sqrt(14)))


def test_zone_edge_copies_are_merged():
    # inside a gap at the zone edge the truncated copies fall on both sides of Re xi = +-pi
    an = cached_analysis("desk3", omega2=5.55)
    kap = an.cell.basis.kappas[: an.cell.trunc.M2]
    want = np.concatenate([layered_transfer_roots([1.0, 4.0], 5.55, k) for k in kap])
    got = [cv.xi for cv, _ in an.charvals if abs(cv.xi.imag) < 2.0]
    ref = [z for z in want if abs(z.imag) < 2.0]
    assert len(got) == len(ref)
    for z in got:
        assert np.min(np.abs(fold(want - z))) < 1e-3
