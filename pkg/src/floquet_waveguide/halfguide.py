"""Operators on the half-waveguide ``x1 > 0`` built from a mode family.

All trace data are cross-section coefficient vectors in the basis
``psi_0, psi_1, ...``.  The trace operator is

    gamma v = theta_D v(0, .) + theta_N dv/dx1(0, .),

measured in ``H^{1/2}`` when ``theta_N == 0`` and in ``H^{-1/2}`` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import ConsistencyError, NearSingularError
from .modes import FloquetMode, ModeFamily, evaluate_mode, trace_coefficients

__all__ = [
    "TraceOperatorSpec",
    "TraceMatrix",
    "MonodromyForm",
    "SolutionField",
    "trace_of_mode",
    "assemble_F",
    "riesz_conditioning",
    "monodromy",
    "solve_bvp",
    "dtn_matrix",
    "dtn_map",
]


@dataclass(frozen=True)
class TraceOperatorSpec:
    """Coefficients of the boundary trace ``theta_D v + theta_N dv/dx1`` at ``x1 = 0``."""

    theta_D: complex
    theta_N: complex

    def __post_init__(self):
        if abs(self.theta_D) + abs(self.theta_N) == 0:
            raise ValueError("theta_D and theta_N must not both vanish")

    @property
    def target_space_order(self) -> float:
        return 0.5 if self.theta_N == 0 else -0.5

    @classmethod
    def dirichlet(cls):
        return cls(1.0, 0.0)

    @classmethod
    def neumann(cls):
        return cls(0.0, 1.0)

    @classmethod
    def robin(cls, kappa_R: float = 1.0):
        """``i kappa_R v + dv/dx1``, uniquely solvable for ``kappa_R > 0``."""
        return cls(1j * kappa_R, 1.0)

    def weights(self, kappas) -> np.ndarray:
        """Diagonal of the Sobolev norm in the psi basis, as a vector multiplier."""
        return (1.0 + np.asarray(kappas) ** 2) ** (0.5 * self.target_space_order)


def trace_of_mode(v: FloquetMode, spec: TraceOperatorSpec, x1: float = 0.0) -> np.ndarray:
    """Psi coefficients of ``theta_D v(x1, .) + theta_N dv/dx1(x1, .)``."""
    a, b = trace_coefficients(v, x1)
    return spec.theta_D * a + spec.theta_N * b


@dataclass(frozen=True)
class TraceMatrix:
    """Traces of a mode family.

    Attributes
    ----------
    raw : ndarray, shape (M2, N)
        Column ``n`` holds the psi coefficients of ``gamma v_n``.
    weights : ndarray, shape (M2,)
        Sobolev weights of the trace space.
    spec : TraceOperatorSpec
    sigma_min : float
        Smallest singular value of the weighted square block ``F``.
    zero_columns : tuple of int
        Columns with vanishing trace.
    """

    raw: np.ndarray
    weights: np.ndarray
    spec: TraceOperatorSpec
    sigma_min: float
    zero_columns: tuple

    @property
    def n(self) -> int:
        return self.raw.shape[1]

    @property
    def F(self) -> np.ndarray:
        """Square raw trace matrix over the first ``N`` psi modes."""
        return self.raw[: self.n]

    @property
    def weighted(self) -> np.ndarray:
        return self.weights[: self.n, None] * self.F

    @property
    def cond(self) -> float:
        return float(np.linalg.cond(self.weighted))


def assemble_F(modes, spec: TraceOperatorSpec, tol_singular: float = 1e-10) -> TraceMatrix:
    """Trace matrix of ``modes`` (the truncated ``F = gamma T``).

    Raises
    ------
    NearSingularError
        If the smallest singular value of the weighted matrix is below
        ``tol_singular``.
    """
    modes = list(modes)
    cell = modes[0].cell
    if len(modes) > cell.trunc.M2:
        raise ValueError(f"{len(modes)} modes but only {cell.trunc.M2} cross-section modes")
    raw = np.column_stack([trace_of_mode(v, spec) for v in modes])
    w = spec.weights(cell.basis.kappas[: cell.trunc.M2])
    scale = max(1.0, float(np.max(np.abs(raw))))
    zero = tuple(int(j) for j in np.nonzero(np.linalg.norm(raw, axis=0) <= 1e-14 * scale)[0])
    n = len(modes)
    s = np.linalg.svd(w[:n, None] * raw[:n], compute_uv=False)
    tm = TraceMatrix(raw=raw, weights=w, spec=spec, sigma_min=float(s[-1]), zero_columns=zero)
    if s[-1] < tol_singular:
        raise NearSingularError(
            f"trace matrix is numerically singular (sigma_min={s[-1]:.3e}); zero columns: {list(zero)}"
        )
    return tm


def riesz_conditioning(modes, spec: TraceOperatorSpec, sizes) -> list:
    """Condition number of the weighted trace Gram matrix of the first ``N`` modes.

    All retained psi rows enter the Gram matrix, so the value for ``N``
    measures how close ``gamma v_1, ..., gamma v_N`` are to an orthonormal
    system in the trace space.

    Returns
    -------
    list of (N, cond)
    """
    modes = list(modes)
    cell = modes[0].cell
    w = spec.weights(cell.basis.kappas[: cell.trunc.M2])
    X = w[:, None] * np.column_stack([trace_of_mode(v, spec) for v in modes])
    out = []
    for n in sizes:
        G = X[:, :n].conj().T @ X[:, :n]
        out.append((int(n), float(np.linalg.cond(G))))
    return out


@dataclass(frozen=True)
class MonodromyForm:
    """Monodromy (one-cell translation) at the trace level.

    Attributes
    ----------
    jordan_blocks : tuple of (complex, int)
        Eigenvalue ``exp(i xi)`` and block size from the chain structure.
    J : ndarray
        Translation matrix in the family basis; columns of modes whose
        translate leaves the family span are NaN.
    R : ndarray
        ``F J F^{-1}`` restricted to translation-invariant columns
        (equal to the monodromy on their span).
    invariant : ndarray of bool
    spectral_radius_evanescent : float
        Largest eigenvalue modulus of the monodromy on the evanescent span.
    expected_radius : float
        ``exp(-Im xi_{n_bar + 1})``.
    verification_error : float
        Largest relative mismatch between ``R gamma v`` and ``gamma (v(. + 1))``.
    power_norms : tuple of (p, norm, lower, upper)
        ``||R^p||`` on the evanescent span with the bounds
        ``rho^p <= norm <= cond(F_ev) ||J_ev^p||``.
    """

    jordan_blocks: tuple
    J: np.ndarray
    R: np.ndarray
    invariant: np.ndarray
    spectral_radius_evanescent: float
    expected_radius: float
    verification_error: float
    power_norms: tuple

    @property
    def powers_ok(self) -> bool:
        return all(lo * (1 - 1e-8) <= nrm <= up * (1 + 1e-8) for _, nrm, lo, up in self.power_norms)


def _family_translation(family):
    """Translation matrix in the family basis, NaN where the family is not invariant."""
    n = len(family)
    J = np.full((n, n), np.nan, dtype=complex)
    by_chain = {}
    for i, v in enumerate(family):
        if v.chain_pos is not None:
            by_chain.setdefault(id(v.chain), {})[v.chain_pos[1]] = i
    for i, v in enumerate(family):
        lam = np.exp(1j * v.xi_raw)
        if v.order == 0:
            J[:, i] = 0.0
            J[i, i] = lam
            continue
        if v.chain_pos is None:
            continue
        members = by_chain[id(v.chain)]
        k = v.chain_pos[1]
        if not all(p in members for p in range(k + 1)):
            continue
        J[:, i] = 0.0
        for p in range(k + 1):
            m = members[p]
            J[m, i] = lam * 1j ** (k - p) / math.factorial(k - p) * v.scale / family[m].scale
    return J


def monodromy(family: ModeFamily, spec: TraceOperatorSpec, F: TraceMatrix | None = None, n_check: int = 10,
              seed: int = 0, max_power: int = 20) -> MonodromyForm:
    """Monodromy ``R = F J F^{-1}`` with numerical verification.

    ``n_check`` random combinations of translation-invariant family members
    are translated by one cell; their traces at ``x1 = 1`` must equal ``R``
    applied to their traces at ``x1 = 0``.

    Raises
    ------
    ConsistencyError
        If the relative mismatch exceeds ``1e-7``.
    """
    modes = family.family
    F = F or assemble_F(modes, spec)
    Fm = F.F
    J = _family_translation(modes)
    inv = ~np.any(np.isnan(J), axis=0)
    # J restricted to invariant columns maps into invariant columns only
    Jc = np.where(np.isnan(J), 0.0, J)
    R = Fm[:, inv] @ Jc[np.ix_(inv, inv)] @ np.linalg.pinv(Fm[:, inv])

    rng = np.random.default_rng(seed)
    idx = np.nonzero(inv)[0]
    err = 0.0
    for _ in range(n_check):
        c = rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx))
        t0 = sum(ci * trace_of_mode(modes[j], spec, 0.0)[: F.n] for ci, j in zip(c, idx))
        t1 = sum(ci * trace_of_mode(modes[j], spec, 1.0)[: F.n] for ci, j in zip(c, idx))
        err = max(err, float(np.linalg.norm(R @ t0 - t1) / max(np.linalg.norm(t1), np.linalg.norm(t0))))
    if err > 1e-7:
        raise ConsistencyError(f"monodromy does not reproduce translated traces (relative error {err:.3e})")

    blocks = []
    for cv, chains in family.charvals:
        if cv.xi.imag >= -1e-7 and any(abs(v.xi_raw - chains.xi_raw) < 1e-12 for v in modes):
            blocks.extend((complex(np.exp(1j * cv.xi_raw)), r) for r in cv.partial_null_multiplicities)

    ev = np.array([i for i in idx if i >= family.n_bar], dtype=int)
    rho = expected = float("nan")
    powers = []
    if len(ev):
        expected = math.exp(-modes[family.n_bar].xi.imag)
        Fe = Fm[:, ev]
        Q, _ = np.linalg.qr(Fe)
        rho = float(np.max(np.abs(np.linalg.eigvals(Q.conj().T @ R @ Q))))
        Je = Jc[np.ix_(ev, ev)]
        cF = float(np.linalg.cond(Fe))
        Rp, Jp = np.eye(R.shape[0], dtype=complex), np.eye(len(ev), dtype=complex)
        for p in range(1, max_power + 1):
            Rp, Jp = R @ Rp, Je @ Jp
            powers.append((p, float(np.linalg.norm(Rp @ Q, 2)), rho**p, cF * float(np.linalg.norm(Jp, 2))))
    return MonodromyForm(
        jordan_blocks=tuple(blocks),
        J=J,
        R=R,
        invariant=inv,
        spectral_radius_evanescent=rho,
        expected_radius=expected,
        verification_error=err,
        power_norms=tuple(powers),
    )


@dataclass(frozen=True)
class SolutionField:
    """Half-strip solution ``v = sum_n a_n v_n`` of a boundary value problem."""

    modes: tuple
    coeffs: np.ndarray
    n_bar: int
    boundary_residual: float

    @property
    def cell(self):
        return self.modes[0].cell

    def _eval(self, sel, x1, x2, d1=0, d2=0):
        out = 0.0
        for a, v in zip(self.coeffs[sel], self.modes[sel]):
            if a != 0:
                out = out + a * evaluate_mode(v, x1, x2, d1, d2)
        return out

    def evaluate(self, x1, x2, d1: int = 0, d2: int = 0):
        return self._eval(slice(None), x1, x2, d1, d2)

    def propagating_part(self, x1, x2):
        return self._eval(slice(0, self.n_bar), x1, x2)

    def decaying_part(self, x1, x2):
        return self._eval(slice(self.n_bar, None), x1, x2)

    def pde_residual(self, x1, x2):
        """``Laplace v + omega2 eps v`` from analytic derivatives."""
        cell = self.cell
        lap = self.evaluate(x1, x2, d1=2) + self.evaluate(x1, x2, d2=2)
        return lap + cell.omega2 * cell.eps.evaluate(x1, x2) * self.evaluate(x1, x2)

    def trace_coeffs(self, x1: float):
        a = sum(c * trace_coefficients(v, x1)[0] for c, v in zip(self.coeffs, self.modes))
        return a

    def cell_norms(self, starts, n_nodes: int = 24) -> np.ndarray:
        """``L2`` norms over the cells ``(s, s + 1) x (0, L)``, by Parseval in ``x2``."""
        t, w = leggauss(n_nodes)
        out = []
        for s in starts:
            x = s + 0.5 * (t + 1.0)
            val = sum(0.5 * wk * np.sum(np.abs(self.trace_coeffs(xk)) ** 2) for xk, wk in zip(x, w))
            out.append(math.sqrt(val))
        return np.array(out)

    def decay_rate(self, x_min: float = 2.0, x_max: float = 6.0, n: int = 9) -> float:
        """Exponential decay rate from a log-linear fit of cell norms on ``[x_min, x_max]``."""
        starts = np.linspace(x_min, x_max - 1.0, n)
        slope = np.polyfit(starts + 0.5, np.log(self.cell_norms(starts)), 1)[0]
        return float(-slope)


def solve_bvp(f, spec: TraceOperatorSpec, F: TraceMatrix, family: ModeFamily) -> SolutionField:
    """Radiating solution with boundary trace ``f`` (psi coefficients, length ``N``)."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (F.n,):
        raise ValueError(f"boundary data must have length {F.n}, got {f.shape}")
    if F.sigma_min < 1e-10:
        raise NearSingularError(f"trace matrix is numerically singular (sigma_min={F.sigma_min:.3e})")
    a = np.linalg.solve(F.F, f)
    res = float(np.linalg.norm(F.F @ a - f))
    return SolutionField(modes=tuple(family.family[: F.n]), coeffs=a, n_bar=family.n_bar, boundary_residual=res)


def dtn_matrix(family: ModeFamily, inverse: bool = False) -> np.ndarray:
    """Dirichlet-to-Neumann matrix ``F_N F_D^{-1}`` in psi coefficients.

    With ``inverse=True`` returns the Neumann-to-Dirichlet matrix
    ``F_D F_N^{-1}``.
    """
    FD = assemble_F(family.family, TraceOperatorSpec.dirichlet())
    FN = assemble_F(family.family, TraceOperatorSpec.neumann())
    if inverse:
        return np.linalg.solve(FN.F.T, FD.F.T).T
    return np.linalg.solve(FD.F.T, FN.F.T).T


def dtn_map(f, family: ModeFamily) -> np.ndarray:
    """Neumann trace of the radiating solution with Dirichlet trace ``f``."""
    return dtn_matrix(family) @ np.asarray(f, dtype=complex)
