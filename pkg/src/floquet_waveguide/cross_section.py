"""Closed-form eigenbases of the cross-sectional operator ``-d^2/dx2^2`` on (0, L).

Four boundary conditions are supported on the top and bottom of the strip:
Dirichlet, Neumann, mixed (Dirichlet at 0, Neumann at L) and
beta-quasi-periodic.  For each, the eigenpairs are known explicitly and are
stored here sorted by increasing ``kappa`` (the square root of the
eigenvalue).  All positional indices in this package are zero-based: ``n = 0``
is the mode with the smallest ``kappa``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BCKind",
    "BoundaryCondition",
    "CrossSectionBasis",
    "build_basis",
    "evaluate_psi",
    "sobolev_weight",
    "half_min_gap",
]

TWO_PI = 2.0 * math.pi


class BCKind(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    MIXED = "mixed"
    QUASI_PERIODIC = "quasi_periodic"


@dataclass(frozen=True)
class BoundaryCondition:
    """Top/bottom boundary condition of the waveguide.

    ``beta`` is the Bloch phase across the cross section and must be given
    exactly when ``kind`` is quasi-periodic.
    """

    kind: BCKind
    beta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", BCKind(self.kind))
        if self.kind is BCKind.QUASI_PERIODIC:
            if self.beta is None:
                raise ValueError("quasi-periodic boundary condition requires beta")
            if not (0.0 <= self.beta < TWO_PI):
                raise ValueError(f"beta={self.beta!r} outside [0, 2*pi)")
        elif self.beta is not None:
            raise ValueError(f"beta is only meaningful for quasi-periodic conditions, got kind={self.kind.value}")

    @property
    def symmetric_beta(self) -> bool:
        """True for quasi-periodic conditions with beta in {0, pi}."""
        if self.kind is not BCKind.QUASI_PERIODIC:
            return False
        return math.isclose(self.beta, 0.0, abs_tol=1e-14) or math.isclose(self.beta, math.pi, abs_tol=1e-14)

    @classmethod
    def dirichlet(cls):
        return cls(BCKind.DIRICHLET)

    @classmethod
    def neumann(cls):
        return cls(BCKind.NEUMANN)

    @classmethod
    def mixed(cls):
        return cls(BCKind.MIXED)

    @classmethod
    def quasi_periodic(cls, beta):
        return cls(BCKind.QUASI_PERIODIC, float(beta))


def half_min_gap(bc: BoundaryCondition, L: float) -> float:
    """Half of the smallest distance between neighbouring distinct kappas."""
    if bc.kind is not BCKind.QUASI_PERIODIC:
        return math.pi / (2.0 * L)
    if bc.symmetric_beta:
        return math.pi / L
    # distinct kappas are |beta + 2 pi k| / L; their half gaps are |l pi - beta| / L
    return min(abs(l * math.pi - bc.beta) for l in range(3)) / L


def _raw_kappa(bc: BoundaryCondition, L: float, k: np.ndarray) -> np.ndarray:
    """Signed table value kappa~_k for raw indices ``k``."""
    k = np.asarray(k, dtype=float)
    if bc.kind in (BCKind.DIRICHLET, BCKind.NEUMANN):
        return math.pi * k / L
    if bc.kind is BCKind.MIXED:
        return math.pi * (2.0 * k - 1.0) / (2.0 * L)
    return (bc.beta + TWO_PI * k) / L


@dataclass(frozen=True)
class CrossSectionBasis:
    """Sorted orthonormal eigenbasis psi_n of the cross-sectional operator.

    Attributes
    ----------
    L : float
        Width of the waveguide.
    bc : BoundaryCondition
    kappas : ndarray, shape (count,)
        Nonnegative, nondecreasing square roots of the eigenvalues.
    raw_index : ndarray of int, shape (count,)
        Table index k of each sorted mode (integers; may be negative for
        quasi-periodic conditions).
    delta_gamma : float
        Half of the minimal gap between distinct kappas.
    """

    L: float
    bc: BoundaryCondition
    kappas: np.ndarray
    raw_index: np.ndarray
    delta_gamma: float

    def __len__(self):
        return len(self.kappas)

    @property
    def signed_kappas(self) -> np.ndarray:
        return _raw_kappa(self.bc, self.L, self.raw_index)

    @property
    def is_complex(self) -> bool:
        return self.bc.kind is BCKind.QUASI_PERIODIC

    def psi(self, x2, derivative: int = 0, count: int | None = None) -> np.ndarray:
        """Values of psi_0..psi_{count-1} (or a derivative) at points ``x2``.

        Returns an array of shape ``x2.shape + (count,)``.
        """
        count = len(self) if count is None else count
        if count > len(self):
            raise IndexError(f"basis has {len(self)} modes, {count} requested")
        x2 = np.asarray(x2, dtype=float)[..., None]
        k = self.raw_index[:count]
        a = _raw_kappa(self.bc, self.L, k)
        d = derivative
        kind = self.bc.kind
        if kind is BCKind.QUASI_PERIODIC:
            return (1j * a) ** d * np.exp(1j * a * x2) / math.sqrt(self.L)
        amp = np.full(count, math.sqrt(2.0 / self.L))
        if kind is BCKind.NEUMANN:
            # constant mode: the sqrt(2/L) prefactor is only right for k >= 1
            amp = np.where(k == 0, math.sqrt(1.0 / self.L), amp)
            phase = d * math.pi / 2.0
            return amp * a**d * np.cos(a * x2 + phase)
        phase = d * math.pi / 2.0
        return amp * a**d * np.sin(a * x2 + phase)


def build_basis(bc: BoundaryCondition, L: float, count: int) -> CrossSectionBasis:
    """First ``count`` eigenpairs of the cross-sectional operator, sorted by kappa.

    Equal kappas (the +-k pairs of quasi-periodic conditions with beta in
    {0, pi}) are ordered by increasing raw index.

    Examples
    --------
    >>> build_basis(BoundaryCondition.dirichlet(), math.pi, 4).kappas
    array([1., 2., 3., 4.])
    """
    if count < 2:
        raise ValueError(f"count must be >= 2, got {count}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    if bc.kind is BCKind.NEUMANN:
        raw = np.arange(0, count)
    elif bc.kind is BCKind.QUASI_PERIODIC:
        cand = np.arange(-count, count + 1)
        mag = np.abs(bc.beta / TWO_PI + cand)
        # round so that exact ties (beta in {0, pi}) compare equal
        order = np.lexsort((cand, np.round(mag, 12)))
        raw = cand[order[:count]]
    else:
        raw = np.arange(1, count + 1)
    kappas = np.abs(_raw_kappa(bc, L, raw))
    return CrossSectionBasis(
        L=float(L),
        bc=bc,
        kappas=kappas,
        raw_index=raw.astype(int),
        delta_gamma=half_min_gap(bc, L),
    )


def evaluate_psi(basis: CrossSectionBasis, n: int, x2, derivative: int = 0):
    """Value of the ``n``-th (zero-based) sorted eigenfunction at ``x2``."""
    if not 0 <= n < len(basis):
        raise IndexError(f"mode index {n} outside built range 0..{len(basis) - 1}")
    vals = basis.psi(x2, derivative=derivative, count=n + 1)[..., n]
    return vals if np.ndim(vals) else vals.item()


def sobolev_weight(basis: CrossSectionBasis, n, s: float):
    """Diagonal weight ``(1 + kappa_n**2)**s`` of the H^s norm in the psi basis."""
    return (1.0 + basis.kappas[n] ** 2) ** s
