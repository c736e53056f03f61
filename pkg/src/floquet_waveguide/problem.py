"""Problem definitions, preset cases and the standard analysis pipeline."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .cell import CellMatrices, PermittivityCell, PlaneTruncation, assemble_epsilon
from .charvals import (
    DEFAULT_TOL,
    DiskCover,
    Tolerances,
    build_disk_cover,
    cluster_charvals,
    resolve_multiplicity,
    solve_all_charvals,
)
from .cross_section import BoundaryCondition, build_basis
from .modes import ModeFamily, classify_and_normalize

__all__ = ["Problem", "Analysis", "analyze", "desk1", "desk2", "desk3", "smooth_case", "PRESETS"]


@dataclass(frozen=True)
class Problem:
    """A periodic waveguide at one frequency with its truncation.

    ``im_max`` defaults to the top of the disk cover, the largest imaginary
    part for which the truncated spectrum is validated.
    """

    L: float
    bc: BoundaryCondition
    eps: PermittivityCell
    omega2: float
    M1: int
    M2: int
    im_max: float | None = None
    name: str = ""
    tol: Tolerances = field(default=DEFAULT_TOL)

    def __post_init__(self):
        if self.bc.symmetric_beta:
            self.eps.check_mirror_symmetry()
        if not self.omega2 > 0:
            raise ValueError(f"omega2 must be positive, got {self.omega2}")

    @property
    def truncation(self) -> PlaneTruncation:
        return PlaneTruncation(self.M1, self.M2)

    def basis(self):
        # two spare modes so that kappa_{N+1} is always available
        return build_basis(self.bc, self.L, self.M2 + 2)

    def cell(self) -> CellMatrices:
        return assemble_epsilon(self.eps, self.truncation, self.basis(), omega2=self.omega2)

    def strip_height(self, cell: CellMatrices | None = None) -> float:
        if self.im_max is not None:
            return self.im_max
        k = (cell or self.cell()).basis.kappas[self.M2 - 1]
        return float(k + self.omega2 * self.eps.eps_max / k)

    def with_omega2(self, omega2: float) -> Problem:
        return replace(self, omega2=float(omega2))


@dataclass(frozen=True)
class Analysis:
    """Everything the standard pipeline computes for a problem."""

    problem: Problem
    cell: CellMatrices
    raws: list
    charvals: list
    cover: DiskCover | None
    family: ModeFamily | None


def analyze(problem: Problem, modes: bool = True, n_family: int | None = None) -> Analysis:
    """Assemble, solve, resolve multiplicities, build the cover and the mode family."""
    cell = problem.cell()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        raws = solve_all_charvals(cell, problem.strip_height(cell), problem.tol)
    charvals = [resolve_multiplicity(c, cell, problem.tol) for c in cluster_charvals(raws, problem.tol)]
    charvals.sort(key=lambda p: (round(p[0].xi.imag, 9), round(p[0].xi.real, 9)))
    try:
        cover = build_disk_cover(cell)
    except ValueError:
        cover = None
    family = classify_and_normalize(charvals, cell, problem.tol, n_family) if modes else None
    return Analysis(problem=problem, cell=cell, raws=raws, charvals=charvals, cover=cover, family=family)


def desk1(**kw) -> Problem:
    """Dirichlet strip of width pi, eps = 1, omega2 = 2: one propagating pair."""
    L = math.pi
    args = dict(L=L, bc=BoundaryCondition.dirichlet(), eps=PermittivityCell.constant(1.0, L), omega2=2.0,
                M1=3, M2=6, name="DESK-1")
    args.update(kw)
    return Problem(**args)


def desk2(**kw) -> Problem:
    """DESK-1 at omega2 = 1: band edge with a double root at xi = 0."""
    args = dict(omega2=1.0, name="DESK-2")
    args.update(kw)
    return desk1(**args)


def desk3(**kw) -> Problem:
    """Layered medium, eps = 1 on x1 in [0, 1/2) and 4 on [1/2, 1), at omega2 = 0.3.

    This frequency lies below the first band, so there is no propagating
    mode and every solution decays.
    """
    L = math.pi
    args = dict(L=L, bc=BoundaryCondition.dirichlet(), eps=PermittivityCell.grid([[1.0, 4.0]], L), omega2=0.3,
                M1=6, M2=12, name="DESK-3")
    args.update(kw)
    return Problem(**args)


def smooth_case(**kw) -> Problem:
    """Smooth medium ``eps = 2 + 0.5 cos(2 pi x1)`` in a Dirichlet strip of width pi."""
    L = math.pi
    coeffs = np.zeros((3, 1))
    coeffs[:, 0] = [0.25, 2.0, 0.25]
    args = dict(L=L, bc=BoundaryCondition.dirichlet(), eps=PermittivityCell.separable_fourier(coeffs, L),
                omega2=1.5, M1=5, M2=8, name="smooth")
    args.update(kw)
    return Problem(**args)


PRESETS = {"desk1": desk1, "desk2": desk2, "desk3": desk3, "smooth": smooth_case}
