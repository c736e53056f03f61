"""Floquet modes: construction from Jordan chains, evaluation, flux, classification.

A Floquet mode has the form

    v(x) = exp(i xi x1) * sum_{p=0}^{m} x1**p u_p(x1, x2)

with 1-periodic parts ``u_p`` stored as coefficient vectors in the plane
basis of :mod:`floquet_waveguide.cell`.  Evaluation uses ``xi_raw``, the
quasi-momentum in the same coordinates as the coefficients.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from .cell import CellMatrices
from .charvals import DEFAULT_TOL, CharacteristicValue, DiskCover, JordanChainSet, Tolerances
from .exceptions import ConsistencyError, NotApplicableError

__all__ = [
    "ModeClass",
    "NormTag",
    "FloquetMode",
    "TranslationMatrix",
    "ModeFamily",
    "EstimateReport",
    "modes_from_chain",
    "evaluate_mode",
    "pde_residual",
    "trace_coefficients",
    "flux",
    "cell_flux",
    "group_velocity",
    "translation_matrix",
    "classify_and_normalize",
    "check_estimates",
    "mode_to_dict",
]

TWO_PI = 2.0 * math.pi


class ModeClass(str, enum.Enum):
    RIGHT_PROPAGATING = "right_propagating"
    LEFT_PROPAGATING = "left_propagating"
    RIGHT_EVANESCENT = "right_evanescent"
    LEFT_GROWING = "left_growing"
    DEGENERATE_PROPAGATING = "degenerate_propagating"


class NormTag(str, enum.Enum):
    Q_NORMALIZED = "q_normalized"
    L2_SCALED_TAIL = "l2_scaled_tail"
    UNIT = "unit"


@dataclass(frozen=True)
class FloquetMode:
    """A Floquet mode ``exp(i xi x1) sum_p x1**p u_p``.

    Attributes
    ----------
    xi : complex
        Quasi-momentum with ``Re xi`` in ``[-pi, pi)``.
    xi_raw : complex
        Quasi-momentum matching the coefficient vectors.
    parts : tuple of ndarray
        ``u_0, ..., u_m``; the last one is nonzero.
    cell : CellMatrices
    kind : ModeClass or None
    norm_tag : NormTag
    flux_sign : int
        ``+1`` or ``-1`` for propagating modes (sign of ``Im q(v, v)``), else 0.
    chain_pos : tuple or None
        ``(chain index, position k)`` when the mode is the ``k``-th element
        of a Jordan chain, multiplied by ``scale``.
    scale : complex
    chain : tuple or None
        The full chain ``(u_0, ..., u_{r-1})`` this mode was built from.
    """

    xi: complex
    xi_raw: complex
    parts: tuple
    cell: CellMatrices = field(repr=False, compare=False)
    kind: ModeClass | None = None
    norm_tag: NormTag = NormTag.UNIT
    flux_sign: int = 0
    chain_pos: tuple | None = None
    scale: complex = 1.0
    chain: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def order(self) -> int:
        return len(self.parts) - 1

    @property
    def top(self) -> np.ndarray:
        return self.parts[-1]

    def rescaled(self, s: complex, **changes) -> FloquetMode:
        return replace(self, parts=tuple(s * u for u in self.parts), scale=self.scale * s, **changes)


def _chain_parts(chain, k, scale=1.0):
    """Periodic parts of the ``k``-th chain mode: ``u^(p) = i**p / p! u_{k-p}``."""
    return tuple(scale * (1j**p / math.factorial(p)) * chain[k - p] for p in range(k + 1))


def modes_from_chain(cv: CharacteristicValue, chains: JordanChainSet, cell: CellMatrices) -> list:
    """One mode per chain element, ordered chain by chain and by position."""
    out = []
    for j, chain in enumerate(chains.chains):
        for k in range(len(chain)):
            out.append(
                FloquetMode(
                    xi=cv.xi,
                    xi_raw=chains.xi_raw,
                    parts=_chain_parts(chain, k),
                    cell=cell,
                    chain_pos=(j, k),
                    chain=chain,
                )
            )
    return out


def _grid(cell: CellMatrices, u):
    return u.reshape(cell.trunc.M2, cell.trunc.n1)


def _periodic_field(cell, u, x1, x2, d1=0, d2=0):
    """``sum_l u_l d1/dx1 d2/dx2 phi_l`` at broadcast points."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    l1 = np.arange(-cell.trunc.M1, cell.trunc.M1 + 1)
    e1 = (TWO_PI * 1j * l1) ** d1 * np.exp(TWO_PI * 1j * x1[..., None] * l1)
    psi = cell.basis.psi(x2, derivative=d2, count=cell.trunc.M2)
    return np.einsum("...k,kj,...j->...", psi, _grid(cell, u), e1)


def evaluate_mode(v: FloquetMode, x1, x2, d1: int = 0, d2: int = 0):
    """Value (or partial derivative, ``d1, d2 <= 2``) of a mode at ``(x1, x2)``."""
    if d1 > 2 or d2 > 2:
        raise ValueError("derivatives up to second order are supported")
    x1 = np.asarray(x1, dtype=float)
    xi = v.xi_raw
    cell = v.cell
    # P^(q) = d^q/dx1^q sum_p x1^p u_p, by the product rule
    P = []
    for q in range(d1 + 1):
        acc = 0.0
        for p, u in enumerate(v.parts):
            for a in range(min(q, p) + 1):
                coef = math.comb(q, a) * math.perm(p, a)
                acc = acc + coef * x1 ** (p - a) * _periodic_field(cell, u, x1, x2, q - a, d2)
        P.append(acc)
    ph = np.exp(1j * xi * x1)
    if d1 == 0:
        out = ph * P[0]
    elif d1 == 1:
        out = ph * (1j * xi * P[0] + P[1])
    else:
        out = ph * (-(xi**2) * P[0] + 2j * xi * P[1] + P[2])
    return out if np.ndim(out) else complex(out)


def pde_residual(v: FloquetMode, x1, x2):
    """``Laplace v + omega2 eps v`` from analytic derivatives of the expansion."""
    cell = v.cell
    lap = evaluate_mode(v, x1, x2, d1=2) + evaluate_mode(v, x1, x2, d2=2)
    return lap + cell.omega2 * cell.eps.evaluate(x1, x2) * evaluate_mode(v, x1, x2)


def trace_coefficients(v: FloquetMode, x1: float = 0.0):
    """Cross-section coefficients of ``v(x1, .)`` and ``dv/dx1(x1, .)``.

    Returns
    -------
    a, b : ndarray, shape (M2,)
        ``v(x1, .) = sum_n a_n psi_n`` and ``dv/dx1(x1, .) = sum_n b_n psi_n``.
    """
    cell = v.cell
    l1 = np.arange(-cell.trunc.M1, cell.trunc.M1 + 1)
    e = np.exp(TWO_PI * 1j * l1 * x1)
    k = 1j * (v.xi_raw + TWO_PI * l1)
    a = np.zeros(cell.trunc.M2, dtype=complex)
    b = np.zeros(cell.trunc.M2, dtype=complex)
    for p, u in enumerate(v.parts):
        U = _grid(cell, u) * e
        a += x1**p * U.sum(axis=1)
        b += x1**p * (U * k).sum(axis=1)
        if p:
            b += p * x1 ** (p - 1) * U.sum(axis=1)
    ph = np.exp(1j * v.xi_raw * x1)
    return ph * a, ph * b


def flux(v: FloquetMode, w: FloquetMode, x1: float = 0.0) -> complex:
    """Energy flux form ``q(v, w) = int (dv/dx1 conj(w) - v conj(dw/dx1)) dx2`` at ``x1``."""
    av, bv = trace_coefficients(v, x1)
    aw, bw = trace_coefficients(w, x1)
    return complex(np.vdot(aw, bv) - np.vdot(bw, av))


def cell_flux(v: FloquetMode, w: FloquetMode, n_nodes: int | None = None) -> complex:
    """Flux form averaged over one cell ``x1 in (0, 1)``.

    Exact solutions have an ``x1``-independent flux; truncated ones do not
    quite, and the cell average is the variationally consistent value.  For
    two order-0 modes at the same real quasi-momentum it equals
    ``2i sum_l (xi + 2 pi l1) u_l conj(w_l)``.
    """
    n1 = v.cell.trunc.n1
    n = n_nodes or 2 * n1 + 4 * (v.order + w.order) + 16
    t, wt = leggauss(n)
    x = 0.5 * (t + 1.0)
    return complex(sum(0.5 * wk * flux(v, w, xk) for xk, wk in zip(x, wt)))


def group_velocity(v: FloquetMode):
    """Slope ``lambda'`` of the band through ``v`` and ``d omega / d xi``.

    Returns
    -------
    dlam : float
        ``lambda'(xi) = 2 sum (xi + 2 pi l1) |u_l|^2 / (u^H E u)``.
    domega : float
        ``lambda' / (2 omega)``.
    """
    if v.order != 0:
        raise NotApplicableError(f"group velocity needs an order-0 mode, got order {v.order}")
    if abs(v.xi.imag) > DEFAULT_TOL.real:
        raise NotApplicableError(f"group velocity needs a real quasi-momentum, got xi={v.xi}")
    cell = v.cell
    u = v.parts[0]
    num = 2.0 * np.sum((v.xi_raw.real + TWO_PI * cell.l1) * np.abs(u) ** 2)
    den = np.vdot(u, cell.E @ u).real
    dlam = float(num / den)
    return dlam, dlam / (2.0 * math.sqrt(cell.omega2))


@dataclass(frozen=True)
class TranslationMatrix:
    """Action of the unit translation on modes of one characteristic value.

    ``raw[m, k]`` are the coefficients of ``v_k(x1 + 1, .)`` in the modes
    ``v_m``; ``jordan = inv(basis_change) @ raw @ basis_change`` is in Jordan
    normal form with eigenvalue ``exp(i xi)``.
    """

    eigenvalue: complex
    raw: np.ndarray
    jordan: np.ndarray
    basis_change: np.ndarray
    block_sizes: tuple


def translation_matrix(modes) -> TranslationMatrix:
    """Translation matrix of chain modes sharing one quasi-momentum.

    Raw entries are ``exp(i xi) i**(k-m) / (k-m)!`` between positions ``m <= k``
    of the same chain, corrected for the per-mode scale factors.
    """
    if any(v.chain_pos is None for v in modes):
        raise NotApplicableError("translation_matrix needs modes built from Jordan chains")
    xi = modes[0].xi_raw
    if any(abs(v.xi_raw - xi) > 1e-12 * max(1.0, abs(xi)) for v in modes):
        raise ValueError("modes do not share one quasi-momentum")
    lam = np.exp(1j * xi)
    n = len(modes)
    M = np.zeros((n, n), dtype=complex)
    for a, vm in enumerate(modes):
        for b, vk in enumerate(modes):
            (jm, pm), (jk, pk) = vm.chain_pos, vk.chain_pos
            if jm == jk and pm <= pk:
                M[a, b] = lam * 1j ** (pk - pm) / math.factorial(pk - pm) * vk.scale / vm.scale
    S = np.zeros((n, n), dtype=complex)
    sizes = []
    for j in sorted({v.chain_pos[0] for v in modes}):
        idx = sorted((v.chain_pos[1], a) for a, v in enumerate(modes) if v.chain_pos[0] == j)
        pos = [p for p, _ in idx]
        if pos != list(range(len(pos))):
            raise ValueError(f"chain {j} is not a complete prefix (positions {pos})")
        cols = [a for _, a in idx]
        A = M[np.ix_(cols, cols)] - lam * np.eye(len(cols))
        x = np.zeros(len(cols), dtype=complex)
        x[-1] = 1.0
        krylov = [x]
        for _ in range(len(cols) - 1):
            krylov.append(A @ krylov[-1])
        S[np.ix_(cols, cols)] = np.column_stack(krylov[::-1])
        sizes.append(len(cols))
    J = np.linalg.solve(S, M @ S)
    return TranslationMatrix(eigenvalue=complex(lam), raw=M, jordan=J, basis_change=S, block_sizes=tuple(sizes))


@dataclass(frozen=True)
class ModeFamily:
    """Classified and normalized modes.

    Attributes
    ----------
    family : tuple of FloquetMode
        ``v_1, ..., v_Ntr``: right-propagating modes, then right-evanescent
        modes by increasing ``Im xi``.
    n_bar : int
        Number of right-propagating modes.
    plus, minus : tuple of FloquetMode
        q-normalized propagating modes with positive and negative flux.
    evanescent : tuple of FloquetMode
        All right-evanescent modes found.
    left_growing : tuple of FloquetMode
    real_mode_count : int
        Number of real characteristic values counted with multiplicity.
    charvals : tuple
        The ``(CharacteristicValue, JordanChainSet)`` pairs used.
    """

    family: tuple
    n_bar: int
    plus: tuple
    minus: tuple
    evanescent: tuple
    left_growing: tuple
    real_mode_count: int
    charvals: tuple

    @property
    def propagating(self) -> tuple:
        return self.plus + self.minus


def _combine(modes, coef):
    """Mode ``sum_a coef[a] modes[a]`` (same quasi-momentum)."""
    order = max(v.order for v in modes)
    n = modes[0].parts[0].shape[0]
    parts = [np.zeros(n, dtype=complex) for _ in range(order + 1)]
    for c, v in zip(coef, modes):
        for p, u in enumerate(v.parts):
            parts[p] = parts[p] + c * u
    scale = max(np.linalg.norm(u) for u in parts)
    while len(parts) > 1 and np.linalg.norm(parts[-1]) <= 1e-12 * scale:
        parts.pop()
    return replace(modes[0], parts=tuple(parts), chain_pos=None, scale=1.0, chain=None)


def _tail_normalize(v: FloquetMode, kappa_n: float) -> FloquetMode:
    target = (1.0 + kappa_n**2) ** -0.25
    return v.rescaled(target / np.linalg.norm(v.top), norm_tag=NormTag.L2_SCALED_TAIL)


def classify_and_normalize(
    charvals, cell: CellMatrices, tol: Tolerances = DEFAULT_TOL, n_family: int | None = None
) -> ModeFamily:
    """Classify modes and build the ordered family ``v_1, ..., v_Ntr``.

    Propagating modes of each real characteristic value are orthonormalized
    in the indefinite flux form: with ``H[b, a] = -i q(v_a, v_b)`` Hermitian
    and ``H = W diag(lam) W^H``, the modes ``w_k = sum_a v_a W[a, k] / sqrt|lam_k|``
    satisfy ``q(w_k, w_j) = i sign(lam_k) delta_kj``.  Flux values are cell
    averages.

    Right-evanescent modes follow, sorted by ``Im xi``; the ``n``-th family
    member is scaled so that its top-order part has squared norm
    ``(1 + kappa_n**2)**(-1/2)``.
    """
    n_family = cell.trunc.M2 if n_family is None else n_family
    charvals = sorted(charvals, key=lambda p: (round(p[0].xi.imag, 9), round(p[0].xi.real, 9)))
    plus, minus, evan, left = [], [], [], []
    real_count = 0
    for cv, chains in charvals:
        modes = modes_from_chain(cv, chains, cell)
        if abs(cv.xi.imag) <= tol.real:
            real_count += cv.algebraic_multiplicity
            degenerate = max(cv.partial_null_multiplicities) > 1
            H = np.array([[-1j * cell_flux(va, vb) for va in modes] for vb in modes])
            herm_defect = np.max(np.abs(H - H.conj().T))
            if herm_defect > 1e-8 * max(1.0, np.max(np.abs(H))):
                raise ConsistencyError(f"flux Gram at xi={cv.xi:.8g} is not Hermitian (defect {herm_defect:.2e})")
            lam, W = np.linalg.eigh(0.5 * (H + H.conj().T))
            if np.min(np.abs(lam)) <= tol.flux:
                raise ConsistencyError(f"zero-flux direction at real xi={cv.xi:.8g}; cannot normalize")
            for k in np.argsort(-lam):
                sign = 1 if lam[k] > 0 else -1
                w = _combine(modes, W[:, k] / math.sqrt(abs(lam[k])))
                if degenerate:
                    kind = ModeClass.DEGENERATE_PROPAGATING
                else:
                    kind = ModeClass.RIGHT_PROPAGATING if sign > 0 else ModeClass.LEFT_PROPAGATING
                w = replace(w, kind=kind, norm_tag=NormTag.Q_NORMALIZED, flux_sign=sign)
                if len(modes) == 1:
                    # keep chain bookkeeping for a plain simple mode
                    w = replace(w, chain_pos=modes[0].chain_pos, chain=modes[0].chain, scale=W[0, k] / math.sqrt(abs(lam[k])))
                (plus if sign > 0 else minus).append(w)
        elif cv.xi.imag > 0:
            evan.extend(replace(v, kind=ModeClass.RIGHT_EVANESCENT) for v in modes)
        else:
            left.extend(
                v.rescaled(1.0 / np.linalg.norm(v.top), kind=ModeClass.LEFT_GROWING) for v in modes
            )
    plus.sort(key=lambda v: v.xi.real)
    minus.sort(key=lambda v: v.xi.real)
    n_bar = len(plus)
    if len(plus) != len(minus):
        raise ConsistencyError(f"{len(plus)} right- but {len(minus)} left-propagating modes")
    kap = cell.basis.kappas
    evan_scaled = []
    for i, v in enumerate(evan):
        n = n_bar + i  # zero-based family position
        kn = kap[n] if n < len(kap) else kap[-1] + (n - len(kap) + 1) * (kap[-1] - kap[-2])
        evan_scaled.append(_tail_normalize(v, kn))
    need = n_family - n_bar
    if need > len(evan_scaled):
        raise ValueError(f"family of size {n_family} needs {need} evanescent modes, only {len(evan_scaled)} found")
    family = tuple(plus) + tuple(evan_scaled[:need])
    return ModeFamily(
        family=family,
        n_bar=n_bar,
        plus=tuple(plus),
        minus=tuple(minus),
        evanescent=tuple(evan_scaled),
        left_growing=tuple(left),
        real_mode_count=real_count,
        charvals=tuple(charvals),
    )


def _c_prime(delta: float, kmax: int = 10_000):
    """``sum_{l in Z} 1 / (pi^2 l^2 + delta^2)`` truncated at ``|l| <= kmax`` plus a tail bound."""
    l = np.arange(1, kmax + 1, dtype=float)
    partial = 1.0 / delta**2 + 2.0 * np.sum(1.0 / (math.pi**2 * l**2 + delta**2))
    return partial + 2.0 / (math.pi**2 * kmax)


@dataclass(frozen=True)
class EstimateReport:
    """Left and right sides of the eigenvector estimates for each checked mode.

    ``rows`` holds one dict per mode with keys ``xi``, ``n`` and, for each
    estimate name, a ``(lhs, rhs)`` pair.  ``margin`` is the smallest
    ``rhs - lhs`` over all rows and estimates.
    """

    rows: tuple
    constants: dict

    @property
    def margin(self) -> float:
        return min(r[k][1] - r[k][0] for r in self.rows for k in r if k not in ("xi", "n"))

    def ok(self, slack: float = 1e-8) -> bool:
        return self.margin >= -slack


ESTIMATES = ("u_tail", "dx1_u", "trace_tail", "trace_dx1", "scaled_tail", "scaled_trace_tail", "scaled_trace_dx1")


def check_estimates(family: ModeFamily, cover: DiskCover, count: int | None = None) -> EstimateReport:
    """Evaluate the eigenvector estimates for evanescent modes inside the cover.

    For each mode with quasi-momentum in a component ``S`` (projection ``P``
    onto the plane-basis indices with ``sigma_l`` in ``S``, ``kappa_S`` the
    lowest point of ``S``), with ``a = omega2 * eps_max``:

    ``u_tail``       ``||u - P u|| <= a / (min(delta, pi) kappa_S) ||u||``
    ``dx1_u``        ``||du/dx1|| <= 2 a / kappa_S ||u||``
    ``trace_tail``   ``||(u - P u)(0, .)|| <= sqrt(C') a / kappa_S ||u||``
    ``trace_dx1``    ``||du/dx1(0, .)|| <= 2 a / sqrt(3) ||u||``

    with ``C' = sum_l 1 / (pi^2 l^2 + delta^2)``.  The ``scaled_*`` rows are
    the ``kappa_n``-weighted versions for the tail-normalized family, with
    explicit constants equal to the supremum of the scaled right sides over
    the cover.

    Only the first ``count`` modes in the cover are checked when given.
    """
    if not family.evanescent:
        return EstimateReport(rows=(), constants={})
    cell = family.evanescent[0].cell
    a = cell.omega2 * cell.eps_max
    delta = cell.basis.delta_gamma
    cp = _c_prime(delta)
    kap = cell.basis.kappas
    n1 = cell.trunc.n1
    l1 = cell.l1

    # explicit constants of the scaled estimates over the whole cover
    Ca = Cb = 0.0
    for comp in cover.components:
        for d in comp.disks:
            k = d.center.imag
            w = k**1.5 * (1.0 + k**2) ** -0.25
            Ca = max(Ca, w * a / (min(delta, math.pi) * comp.kappa_min))
            Cb = max(Cb, w * math.sqrt(cp) * a / comp.kappa_min)
    Cc = 2.0 * a / math.sqrt(3.0)

    rows = []
    for i, v in enumerate(family.evanescent):
        comps = [c for c in cover.components if c.contains(v.xi)]
        if not comps:
            continue
        comp = comps[0]
        n = family.n_bar + i
        kn = kap[n] if n < len(kap) else float("nan")
        u = v.top
        nu = np.linalg.norm(u)
        rest = u.copy()
        rest[comp.index_set] = 0.0
        du = TWO_PI * 1j * l1 * u
        tr_rest = rest.reshape(-1, n1).sum(axis=1)
        tr_du = du.reshape(-1, n1).sum(axis=1)
        ks = comp.kappa_min
        row = {
            "xi": v.xi,
            "n": n + 1,
            "u_tail": (np.linalg.norm(rest), a / (min(delta, math.pi) * ks) * nu),
            "dx1_u": (np.linalg.norm(du), 2.0 * a / ks * nu),
            "trace_tail": (np.linalg.norm(tr_rest), math.sqrt(cp) * a / ks * nu),
            "trace_dx1": (np.linalg.norm(tr_du), 2.0 * a / math.sqrt(3.0) * nu),
            "scaled_tail": (kn**1.5 * np.linalg.norm(rest), Ca),
            "scaled_trace_tail": (kn**1.5 * np.linalg.norm(tr_rest), Cb),
            "scaled_trace_dx1": (kn**0.5 * np.linalg.norm(tr_du), Cc),
        }
        rows.append({k: (tuple(map(float, val)) if isinstance(val, tuple) else val) for k, val in row.items()})
        if count is not None and len(rows) >= count:
            break
    return EstimateReport(rows=tuple(rows), constants={"C_prime": cp, "C_a": Ca, "C_b": Cb, "C_c": Cc})


def mode_to_dict(v: FloquetMode) -> dict:
    """JSON-ready description: quasi-momentum, order, class and coefficients by ``(l1, l2)``."""
    cell = v.cell
    coeffs = []
    for p, u in enumerate(v.parts):
        for idx in np.nonzero(np.abs(u) > 0)[0]:
            coeffs.append(
                {"power": p, "l1": int(cell.l1[idx]), "l2": int(cell.l2[idx]), "re": float(u[idx].real), "im": float(u[idx].imag)}
            )
    return {
        "re_xi": float(v.xi.real),
        "im_xi": float(v.xi.imag),
        "order": v.order,
        "class": v.kind.value if v.kind else None,
        "norm": v.norm_tag.value,
        "coefficients": coeffs,
    }
