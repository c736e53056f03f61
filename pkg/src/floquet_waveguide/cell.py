"""Galerkin matrices of the cell operator in the tensor basis.

The periodicity cell is ``Omega = (0, 1) x (0, L)``.  Functions on it are
expanded in

    phi_l(x1, x2) = exp(2 pi i l1 x1) psi_{l2}(x2),

with ``l1`` in ``-M1..M1`` and ``l2`` in ``0..M2-1`` (zero-based position in
the sorted cross-section basis).  The flat index of ``l`` is
``l2 * (2*M1 + 1) + (l1 + M1)``: ``l2`` is the outer loop and ``l1`` runs
ascending inside it.

In this basis the shifted Laplacian is diagonal and the operator of interest
becomes the quadratic pencil

    B(xi) = -diag((xi + 2 pi l1)**2 + kappa_{l2}**2) + omega2 * E,

where ``E[l, l'] = <eps phi_l', phi_l>`` is the only dense block.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from .cross_section import CrossSectionBasis
from .exceptions import ResolutionError, SymmetryError

__all__ = [
    "EpsKind",
    "PermittivityCell",
    "PlaneTruncation",
    "CellMatrices",
    "assemble_epsilon",
    "assemble_B",
    "assemble_B_derivatives",
]

TWO_PI = 2.0 * math.pi


class EpsKind(str, enum.Enum):
    CONSTANT = "constant"
    GRID = "grid"
    FOURIER = "fourier"


@dataclass(frozen=True)
class PermittivityCell:
    """A 1-periodic (in x1) permittivity on the cell ``(0, 1) x (0, L)``.

    Use one of the constructors :meth:`constant`, :meth:`grid` or
    :meth:`separable_fourier`.

    Attributes
    ----------
    kind : EpsKind
    L : float
        Width of the cell in x2.
    value : float
        Constant value (``kind == CONSTANT`` only).
    values : ndarray, shape (n2, n1)
        Piecewise-constant samples.  Row ``i`` covers ``x2`` in
        ``[i L / n2, (i+1) L / n2)`` and column ``j`` covers ``x1`` in
        ``[j / n1, (j+1) / n1)``, so x1 runs across columns.
    coeffs : ndarray, shape (2*Mf + 1, K)
        Coefficients ``c[m + Mf, k]`` of
        ``sum c[m, k] exp(2 pi i m x1) cos(pi k x2 / L)``.
    eps_min, eps_max : float
        Essential infimum and supremum (exact for constant and grid, sampled
        on a fine grid for Fourier data).
    """

    kind: EpsKind
    L: float
    value: float | None = None
    values: np.ndarray | None = None
    coeffs: np.ndarray | None = None
    eps_min: float = field(default=0.0)
    eps_max: float = field(default=0.0)

    @classmethod
    def constant(cls, value: float, L: float) -> PermittivityCell:
        value = float(value)
        if not value > 0:
            raise ValueError(f"permittivity must be positive, got {value}")
        return cls(EpsKind.CONSTANT, float(L), value=value, eps_min=value, eps_max=value)

    @classmethod
    def grid(cls, values, L: float) -> PermittivityCell:
        values = np.array(values, dtype=float, ndmin=2)
        if values.ndim != 2:
            raise ValueError(f"grid values must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid values must be finite")
        lo, hi = float(values.min()), float(values.max())
        if not lo > 0:
            raise ValueError(f"permittivity must be bounded away from 0, min is {lo}")
        values.setflags(write=False)
        return cls(EpsKind.GRID, float(L), values=values, eps_min=lo, eps_max=hi)

    @classmethod
    def separable_fourier(cls, coeffs, L: float, n_check: int = 257) -> PermittivityCell:
        coeffs = np.array(coeffs, dtype=complex, ndmin=2)
        if coeffs.shape[0] % 2 != 1:
            raise ValueError("first axis of coeffs must have odd length 2*Mf+1")
        if not np.allclose(coeffs, coeffs[::-1].conj(), atol=1e-14):
            raise ValueError("coefficients do not describe a real permittivity (need c[-m] = conj(c[m]))")
        coeffs.setflags(write=False)
        tmp = cls(EpsKind.FOURIER, float(L), coeffs=coeffs, eps_min=1.0, eps_max=1.0)
        x1 = np.linspace(0.0, 1.0, n_check)
        x2 = np.linspace(0.0, float(L), n_check)
        samples = tmp.evaluate(x1[None, :], x2[:, None])
        lo, hi = float(samples.min()), float(samples.max())
        if not lo > 0:
            raise ValueError(f"permittivity must be bounded away from 0, sampled min is {lo}")
        return replace(tmp, eps_min=lo, eps_max=hi)

    def evaluate(self, x1, x2) -> np.ndarray:
        """Pointwise values, broadcasting ``x1`` against ``x2``."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.kind is EpsKind.CONSTANT:
            return np.full(np.broadcast(x1, x2).shape, self.value)
        if self.kind is EpsKind.GRID:
            n2, n1 = self.values.shape
            j = np.clip(np.floor(np.mod(x1, 1.0) * n1).astype(int), 0, n1 - 1)
            i = np.clip(np.floor(x2 / self.L * n2).astype(int), 0, n2 - 1)
            return self.values[i, j]
        Mf = self.coeffs.shape[0] // 2
        m = np.arange(-Mf, Mf + 1)
        k = np.arange(self.coeffs.shape[1])
        e1 = np.exp(TWO_PI * 1j * x1[..., None] * m)
        c2 = np.cos(math.pi * x2[..., None] * k / self.L)
        out = np.einsum("...m,...k,mk->...", *_broadcast_pair(e1, c2), self.coeffs)
        return out.real

    def breakpoints(self):
        """Cell-local breakpoints in x1 and x2 where the data may jump."""
        if self.kind is EpsKind.GRID:
            n2, n1 = self.values.shape
            return np.linspace(0.0, 1.0, n1 + 1), np.linspace(0.0, self.L, n2 + 1)
        return np.array([0.0, 1.0]), np.array([0.0, self.L])

    def bandwidth(self):
        """Highest Fourier frequency in x1 and x2 (0 for piecewise data)."""
        if self.kind is EpsKind.FOURIER:
            return self.coeffs.shape[0] // 2, self.coeffs.shape[1] - 1
        return 0, 0

    def check_mirror_symmetry(self, n_check: int = 64, tol: float = 1e-12):
        """Raise :class:`SymmetryError` unless ``eps(x1, x2) == eps(x1, L - x2)``."""
        x1 = (np.arange(n_check) + 0.5) / n_check
        x2 = (np.arange(n_check) + 0.5) / n_check * self.L
        a = self.evaluate(x1[None, :], x2[:, None])
        b = self.evaluate(x1[None, :], self.L - x2[:, None])
        defect = float(np.max(np.abs(a - b)))
        if defect > tol:
            raise SymmetryError(f"permittivity is not symmetric under x2 -> L - x2 (max defect {defect:.3e})")


def _broadcast_pair(e1, c2):
    shape = np.broadcast_shapes(e1.shape[:-1], c2.shape[:-1])
    return (np.broadcast_to(e1, shape + e1.shape[-1:]), np.broadcast_to(c2, shape + c2.shape[-1:]))


@dataclass(frozen=True)
class PlaneTruncation:
    """Truncation of the tensor basis: ``|l1| <= M1`` and ``M2`` cross-section modes."""

    M1: int
    M2: int

    def __post_init__(self):
        if self.M1 < 0 or self.M2 < 1:
            raise ValueError(f"invalid truncation M1={self.M1}, M2={self.M2}")
        if self.dim < 4:
            raise ValueError(f"truncation dimension {self.dim} < 4")

    @property
    def n1(self) -> int:
        return 2 * self.M1 + 1

    @property
    def dim(self) -> int:
        return self.n1 * self.M2

    def indices(self):
        """Arrays ``(l1, l2)`` in flat enumeration order."""
        l2, l1 = np.divmod(np.arange(self.dim), self.n1)
        return l1 - self.M1, l2

    def flat(self, l1: int, l2: int) -> int:
        return l2 * self.n1 + (l1 + self.M1)


@dataclass(frozen=True)
class CellMatrices:
    """Assembled Galerkin data of the cell problem at a fixed ``omega2``.

    Attributes
    ----------
    E : ndarray, shape (dim, dim)
        Hermitian mass matrix weighted by the permittivity.
    sigma : ndarray, shape (dim,)
        ``2 pi l1 + i kappa_{l2}`` per basis index.
    omega2 : float
    l1, l2 : ndarray of int
        Index pairs in flat enumeration order.
    basis : CrossSectionBasis
    trunc : PlaneTruncation
    eps : PermittivityCell
    """

    E: np.ndarray
    sigma: np.ndarray
    omega2: float
    l1: np.ndarray
    l2: np.ndarray
    basis: CrossSectionBasis
    trunc: PlaneTruncation
    eps: PermittivityCell

    @property
    def dim(self) -> int:
        return self.trunc.dim

    @property
    def kappa(self) -> np.ndarray:
        return self.sigma.imag

    @property
    def eps_min(self) -> float:
        return self.eps.eps_min

    @property
    def eps_max(self) -> float:
        return self.eps.eps_max

    @property
    def C(self) -> np.ndarray:
        return 4.0 * math.pi * self.l1

    @property
    def K(self) -> np.ndarray:
        return np.abs(self.sigma) ** 2

    def with_omega2(self, omega2: float) -> CellMatrices:
        return replace(self, omega2=float(omega2))


def _composite_gauss(breaks, n_total):
    """Composite Gauss-Legendre rule with about ``n_total`` nodes split at ``breaks``."""
    nseg = len(breaks) - 1
    q = max(16, int(math.ceil(n_total / nseg)) + 8)
    t, w = leggauss(q)
    a, b = breaks[:-1, None], breaks[1:, None]
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    return x.ravel(), (0.5 * (b - a) * w).ravel()


def _quadrature_E(eps, trunc, basis, oversample):
    bw1, bw2 = eps.bandwidth()
    b1, b2 = eps.breakpoints()
    # oscillation counts of eps * phi_l * conj(phi_l') across the cell
    x1, w1 = _composite_gauss(b1, oversample * (2 * trunc.M1 + bw1))
    kmax = basis.kappas[trunc.M2 - 1] * basis.L / math.pi
    x2, w2 = _composite_gauss(b2, oversample * (kmax + 0.5 * bw2 + 1))
    W = eps.evaluate(x1[:, None], x2[None, :]) * w1[:, None] * w2[None, :]
    l1 = np.arange(-trunc.M1, trunc.M1 + 1)
    e1 = np.exp(TWO_PI * 1j * np.outer(x1, l1))
    psi = basis.psi(x2, count=trunc.M2)
    E = np.einsum("pa,pc,pq,qb,qd->badc", e1.conj(), e1, W, psi.conj(), psi, optimize=True)
    return E.reshape(trunc.dim, trunc.dim)


def assemble_epsilon(
    eps: PermittivityCell,
    trunc: PlaneTruncation,
    basis: CrossSectionBasis,
    omega2: float = 1.0,
    oversample: int = 4,
    tol_resolution: float = 1e-8,
) -> CellMatrices:
    """Assemble the permittivity-weighted mass matrix ``E``.

    ``E`` is computed by tensor composite Gauss quadrature split at the
    breakpoints of the permittivity, with ``oversample`` times as many nodes
    per direction as the highest frequency present.  For constant
    permittivity ``E`` is set to ``eps * I`` exactly.

    Raises
    ------
    ResolutionError
        If doubling the oversampling changes ``E`` by more than
        ``tol_resolution`` relative to its norm, or the result is not
        Hermitian to the same tolerance.
    """
    if len(basis) < trunc.M2:
        raise ValueError(f"basis has {len(basis)} modes but M2={trunc.M2}")
    if abs(eps.L - basis.L) > 1e-14 * max(1.0, basis.L):
        raise ValueError(f"permittivity width {eps.L} differs from basis width {basis.L}")
    if eps.kind is EpsKind.CONSTANT:
        E = eps.value * np.eye(trunc.dim, dtype=complex)
    else:
        E = _quadrature_E(eps, trunc, basis, oversample)
        fine = _quadrature_E(eps, trunc, basis, 2 * oversample)
        scale = np.linalg.norm(E)
        herm = np.linalg.norm(E - E.conj().T) / scale
        change = np.linalg.norm(E - fine) / scale
        if herm > tol_resolution or change > tol_resolution:
            raise ResolutionError(
                f"permittivity not resolved by quadrature (hermiticity defect {herm:.2e}, refinement change {change:.2e})"
            )
        E = 0.5 * (E + E.conj().T)
    l1, l2 = trunc.indices()
    sigma = TWO_PI * l1 + 1j * basis.kappas[l2]
    return CellMatrices(E=E, sigma=sigma, omega2=float(omega2), l1=l1, l2=l2, basis=basis, trunc=trunc, eps=eps)


def assemble_B(cell: CellMatrices, xi: complex, omega2: float | None = None) -> np.ndarray:
    """Matrix of ``B(xi) = -diag((xi + sigma)(xi + conj(sigma))) + omega2 E``."""
    w2 = cell.omega2 if omega2 is None else omega2
    d = (xi + cell.sigma) * (xi + cell.sigma.conj())
    B = w2 * cell.E
    B[np.diag_indices_from(B)] -= d
    return B


def assemble_B_derivatives(cell: CellMatrices, xi: complex):
    """First and second derivatives of ``B`` with respect to ``xi``.

    Returns
    -------
    dB : ndarray
        ``-diag(2 xi + 4 pi l1)``.
    d2B : ndarray
        ``-2 I``.
    """
    dB = np.diag(-(2.0 * xi + cell.C)).astype(complex)
    d2B = -2.0 * np.eye(cell.dim, dtype=complex)
    return dB, d2B
