"""Characteristic values of the cell pencil: solve, count, localize, resolve.

A characteristic value is a quasi-momentum ``xi`` where ``B(xi)`` is
singular.  The truncated pencil ``xi**2 I + xi C + (K - omega2 E)`` is solved
by companion linearization.  Contour integrals of ``tr(B^{-1} B')`` give an
independent count, and the disk cover localizes large characteristic values
near ``i kappa``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .cell import CellMatrices, assemble_B, assemble_B_derivatives
from .contour import Arc, ArcPath, Circle, Rectangle
from .exceptions import ContourError, MultiplicityError

__all__ = [
    "Tolerances",
    "RawCharval",
    "CharacteristicValue",
    "JordanChainSet",
    "ContourCount",
    "Disk",
    "DiskComponent",
    "DiskCover",
    "LocalizationReport",
    "solve_all_charvals",
    "cluster_charvals",
    "resolve_multiplicity",
    "compute_charvals",
    "count_by_contour",
    "build_disk_cover",
    "band_rectangle",
    "verify_disk_localization",
    "normalize_re",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by the solvers.

    Attributes
    ----------
    cluster : float
        Raw characteristic values closer than ``cluster * max(1, |xi|)`` are
        treated as one multiple value.
    rank : float
        Singular values below ``rank * s_max`` count as zero.
    chain : float
        Allowed residual of a Jordan chain relative to ``max(1, s_max)``.
    real : float
        ``|Im xi|`` below this counts as real (propagating).
    flux : float
        ``|Im q|`` below this counts as zero flux.
    dedupe : float
        Periodic distance (relative) under which two eigenvalues of the
        linearization are copies of each other shifted by ``2 pi``.
    window : float
        Raw eigenvalues are kept only for ``|Re xi| <= pi + window``.
    contour_defect : float
        Largest accepted distance of a contour integral from an integer.
    """

    cluster: float = 1e-6
    rank: float = 1e-8
    chain: float = 1e-7
    real: float = 1e-7
    flux: float = 1e-10
    dedupe: float = 1e-3
    window: float = 0.1
    contour_defect: float = 0.1

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not v > 0:
                raise ValueError(f"tolerance {k} must be positive, got {v}")

    def as_dict(self) -> dict:
        return dict(self.__dict__)


DEFAULT_TOL = Tolerances()


def normalize_re(xi):
    """Translate ``xi`` by a multiple of ``2 pi`` so that ``Re xi`` is in ``[-pi, pi)``."""
    xi = np.asarray(xi, dtype=complex)
    re = np.mod(xi.real + math.pi, TWO_PI) - math.pi
    out = re + 1j * xi.imag
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class RawCharval:
    """One eigenpair of the linearized pencil.

    ``xi_raw`` is the eigenvalue exactly as it pairs with ``vector``;
    ``xi`` is its representative with real part in ``[-pi, pi)``.
    """

    xi: complex
    xi_raw: complex
    vector: np.ndarray


@dataclass(frozen=True)
class CharacteristicValue:
    """A resolved characteristic value.

    Attributes
    ----------
    xi : complex
        Representative with ``Re xi`` in ``[-pi, pi)``.
    xi_raw : complex
        Cluster mean in the coordinates of the chain vectors.
    cluster_size : int
        Number of raw eigenvalues merged into this value.
    partial_null_multiplicities : tuple of int
        Chain lengths ``r_1 >= r_2 >= ...``.
    kernel_dim : int
    residual : float
        ``||B(xi) u0||`` for the unit leading kernel vector.
    chain_residual : float
        Largest residual of the chain equations.
    """

    xi: complex
    xi_raw: complex
    cluster_size: int
    partial_null_multiplicities: tuple
    kernel_dim: int
    residual: float
    chain_residual: float

    @property
    def algebraic_multiplicity(self) -> int:
        return int(sum(self.partial_null_multiplicities))

    def is_real(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return abs(self.xi.imag) <= tol.real


@dataclass(frozen=True)
class JordanChainSet:
    """Canonical Jordan chains ``chains[j] = (u_0, ..., u_{r_j - 1})``."""

    xi_raw: complex
    chains: tuple

    def leading_vectors(self) -> np.ndarray:
        return np.column_stack([c[0] for c in self.chains])


def _linearization(cell: CellMatrices, omega2=None):
    w2 = cell.omega2 if omega2 is None else omega2
    n = cell.dim
    K0 = -w2 * cell.E
    K0[np.diag_indices(n)] += cell.K
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -K0
    A[n:, n:] = -np.diag(cell.C)
    return A


def _periodic_groups(xi, tol):
    """Union-find over the periodic distance of complex points."""
    n = len(xi)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(n):
        d = xi[a + 1:] - xi[a]
        d = normalize_re(d) if len(d) else d
        close = np.abs(d) <= tol * max(1.0, abs(xi[a]))
        for b in np.nonzero(close)[0] + a + 1:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    return list(groups.values())


def solve_all_charvals(
    cell: CellMatrices, im_max: float, tol: Tolerances = DEFAULT_TOL, omega2=None
) -> list:
    """All characteristic values of the truncated pencil with ``|Im xi| <= im_max``.

    The pencil is linearized to a ``2 dim`` standard eigenproblem.  Truncation
    in ``l1`` makes each value appear several times, shifted by multiples of
    ``2 pi``; one copy is kept, the one closest to the centre of the
    Brillouin zone, which is the best resolved.

    Returns
    -------
    list of RawCharval
        Sorted by imaginary part, then real part.  Vectors have unit norm.
    """
    if im_max <= 0:
        raise ValueError(f"im_max must be positive, got {im_max}")
    if cell.dim < 8:
        raise ValueError(f"truncation dimension {cell.dim} < 8")
    k_top = cell.basis.kappas[cell.trunc.M2 - 1]
    if im_max > k_top + cell.omega2 * cell.eps_max / max(k_top, 1e-300):
        warnings.warn(
            f"im_max={im_max} reaches beyond the top disk of the cover; values there are not validated",
            stacklevel=2,
        )
    n = cell.dim
    vals, vecs = sla.eig(_linearization(cell, omega2))
    keep = (np.abs(vals.imag) <= im_max) & (np.abs(vals.real) <= math.pi + tol.window)
    vals, vecs = vals[keep], vecs[:n, keep]
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    norm = normalize_re(vals)
    out = []
    for grp in _periodic_groups(norm, tol.dedupe):
        grp = np.array(grp)
        # copies differ by multiples of 2 pi in raw coordinates; measuring against one member
        # (not against the folded values) also separates copies straddling Re xi = +-pi
        shift = np.round((vals[grp].real - vals[grp[0]].real) / TWO_PI).astype(int)
        best = min(
            set(shift.tolist()),
            key=lambda s: (round(abs(vals[grp][shift == s].real.mean()), 6), vals[grp][shift == s].real.mean()),
        )
        for a in grp[shift == best]:
            out.append(RawCharval(xi=complex(normalize_re(vals[a])), xi_raw=complex(vals[a]), vector=vecs[:, a]))
    out.sort(key=lambda r: (round(r.xi.imag, 9), round(r.xi.real, 9)))
    return out


def cluster_charvals(raws, tol: Tolerances = DEFAULT_TOL) -> list:
    """Group raw values (by ``xi_raw``) with single linkage at the cluster tolerance."""
    xi = np.array([r.xi_raw for r in raws])
    n = len(xi)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(n):
        for b in range(a + 1, n):
            if abs(xi[a] - xi[b]) <= tol.cluster * max(1.0, abs(xi[a])):
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(raws[a])
    return list(groups.values())


def _block_toeplitz(blocks, k):
    n = blocks[0].shape[0]
    T = np.zeros((k * n, k * n), dtype=complex)
    for i in range(k):
        for j in range(max(0, i - len(blocks) + 1), i + 1):
            T[i * n:(i + 1) * n, j * n:(j + 1) * n] = blocks[i - j]
    return T


def _null_space(T, tol_rank):
    _, s, vh = np.linalg.svd(T)
    rank = int(np.sum(s > tol_rank * s[0]))
    return vh[rank:].conj().T, s[0]


def resolve_multiplicity(cluster, cell: CellMatrices, tol: Tolerances = DEFAULT_TOL):
    """Partial null multiplicities and canonical Jordan chains of a cluster.

    The chain equations ``sum_{j<=2} A_j u_{k-j} = 0`` with ``A_0 = B``,
    ``A_1 = B'`` and ``A_2 = B''/2`` say that ``(u_0, ..., u_{k-1})`` lies in
    the kernel of the block lower-triangular Toeplitz matrix ``T_k``.  With
    ``d_k = dim ker T_k`` the number of chains of length at least ``k`` is
    ``d_k - d_{k-1}``.  Chains are then taken longest first, each new
    leading vector chosen orthogonal to the ones already used.

    Raises
    ------
    MultiplicityError
        If the chain lengths do not add up to the cluster size.
    """
    xi0 = complex(np.mean([r.xi_raw for r in cluster]))
    size = len(cluster)
    n = cell.dim
    B0 = assemble_B(cell, xi0)
    dB, d2B = assemble_B_derivatives(cell, xi0)
    blocks = (B0, dB, 0.5 * d2B)

    nulls, d, smax = {}, [0], 1.0
    k = 1
    while k <= size + 1:
        N, s0 = _null_space(_block_toeplitz(blocks, k), tol.rank)
        smax = max(smax, s0)
        if N.shape[1] - d[-1] <= 0:
            break
        nulls[k] = N
        d.append(N.shape[1])
        k += 1
    at_least = [d[i] - d[i - 1] for i in range(1, len(d))] + [0]
    exactly = {k: at_least[k - 1] - at_least[k] for k in range(1, len(at_least))}
    ranks = tuple(sorted((k for k, c in exactly.items() for _ in range(c)), reverse=True))
    if sum(ranks) != size:
        raise MultiplicityError(
            f"cluster at xi={xi0:.10g} has {size} raw values but chain lengths {ranks} sum to {sum(ranks)}"
        )

    chains, Q = [], np.zeros((n, 0), dtype=complex)
    for k in sorted(exactly, reverse=True):
        c = exactly[k]
        if c == 0:
            continue
        N = nulls[k]
        U = N[:n]
        R = U - Q @ (Q.conj().T @ U)
        _, _, vh = np.linalg.svd(R)
        coef = vh[:c].conj().T
        for col in (N @ coef).T:
            parts = col.reshape(k, n)
            parts = parts / np.linalg.norm(parts[0])
            chains.append(tuple(parts))
            q = parts[0] - Q @ (Q.conj().T @ parts[0])
            Q = np.column_stack([Q, q / np.linalg.norm(q)])

    chain_res = 0.0
    for ch in chains:
        T = _block_toeplitz(blocks, len(ch))
        chain_res = max(chain_res, float(np.linalg.norm(T @ np.concatenate(ch))))
    if chain_res > tol.chain * max(1.0, smax):
        raise MultiplicityError(f"Jordan chain residual {chain_res:.3e} at xi={xi0:.10g} exceeds tolerance")
    residual = float(np.linalg.norm(B0 @ chains[0][0]))
    cv = CharacteristicValue(
        xi=complex(normalize_re(xi0)),
        xi_raw=xi0,
        cluster_size=size,
        partial_null_multiplicities=ranks,
        kernel_dim=len(ranks),
        residual=residual,
        chain_residual=chain_res,
    )
    return cv, JordanChainSet(xi_raw=xi0, chains=tuple(chains))


def compute_charvals(cell: CellMatrices, im_max: float, tol: Tolerances = DEFAULT_TOL):
    """Solve, cluster and resolve: list of ``(CharacteristicValue, JordanChainSet)``."""
    raws = solve_all_charvals(cell, im_max, tol)
    out = [resolve_multiplicity(c, cell, tol) for c in cluster_charvals(raws, tol)]
    out.sort(key=lambda p: (round(p[0].xi.imag, 9), round(p[0].xi.real, 9)))
    return out


@dataclass(frozen=True)
class ContourCount:
    count: int
    value: complex
    defect: float


def count_by_contour(
    cell: CellMatrices, contour, n_quad: int = 256, tol: Tolerances = DEFAULT_TOL, omega2=None
) -> ContourCount:
    """Number of characteristic values inside ``contour`` with multiplicity.

    Evaluates ``(1 / 2 pi i) * integral of tr(B(xi)^{-1} B'(xi))`` along the
    contour.  Since ``B'`` is diagonal only the diagonal of ``B^{-1}`` is
    needed.

    Raises
    ------
    ContourError
        If a node is numerically on a characteristic value or the result is
        farther than ``tol.contour_defect`` from an integer.
    """
    if n_quad < 64:
        raise ValueError(f"n_quad must be >= 64, got {n_quad}")
    z, w = contour.nodes(n_quad)
    total = 0.0 + 0.0j
    for zk, wk in zip(z, w):
        B = assemble_B(cell, zk, omega2)
        dB = -(2.0 * zk + cell.C)
        try:
            inv_diag = np.diag(np.linalg.inv(B))
        except np.linalg.LinAlgError as exc:
            raise ContourError(f"B is singular at contour node {zk:.6g}") from exc
        f = np.dot(inv_diag, dB)
        if not np.isfinite(f) or abs(f) > 1e10:
            raise ContourError(f"contour node {zk:.6g} is too close to a characteristic value")
        total += wk * f
    value = total / (2j * math.pi)
    count = int(round(value.real))
    defect = abs(value - count)
    if defect > tol.contour_defect:
        raise ContourError(f"contour integral {value:.6g} is not close to an integer (defect {defect:.3g})")
    return ContourCount(count=count, value=complex(value), defect=float(defect))


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float
    modes: tuple  # zero-based cross-section indices with this kappa


@dataclass(frozen=True)
class DiskComponent:
    """Connected component of the disk union.

    Attributes
    ----------
    disks : tuple of Disk
    index_set : ndarray of int
        Flat plane-basis indices ``l`` with ``sigma_l`` inside the component.
    kappa_min : float
        Infimum of the imaginary part over the component.
    """

    disks: tuple
    index_set: np.ndarray
    kappa_min: float

    @property
    def expected_count(self) -> int:
        return len(self.index_set)

    def contains(self, z):
        return self.contour().contains(z)

    def margin(self, z) -> float:
        """Largest ``radius - |z - center|`` over the disks (positive inside)."""
        return max(d.radius - abs(z - d.center) for d in self.disks)

    def contour(self):
        if len(self.disks) == 1:
            d = self.disks[0]
            return Circle(d.center, d.radius)
        return _union_boundary(self.disks)


def _union_boundary(disks):
    """Counter-clockwise boundary of a vertical chain of overlapping disks."""
    arcs = []
    for j, d in enumerate(disks):
        up = _crossing_angle(d, disks[j + 1]) if j + 1 < len(disks) else None
        lo = _crossing_angle(d, disks[j - 1]) if j > 0 else None
        if up is None:
            arcs.append(Arc(d.center, d.radius, lo, math.pi - lo))
        elif lo is None:
            arcs.append(Arc(d.center, d.radius, math.pi - up, up + TWO_PI))
        else:
            arcs.append(Arc(d.center, d.radius, lo, up))
            arcs.append(Arc(d.center, d.radius, math.pi - up, math.pi - lo))
    return ArcPath(arcs=tuple(arcs), disks=tuple((d.center, d.radius) for d in disks))


def _crossing_angle(d, other):
    """Angle on ``d`` (right half) where its circle meets the circle of ``other``."""
    y0, y1 = d.center.imag, other.center.imag
    # equal power: r0^2 - (y - y0)^2 = r1^2 - (y - y1)^2
    y = (d.radius**2 - other.radius**2 + y1**2 - y0**2) / (2.0 * (y1 - y0))
    h = y - y0
    x = math.sqrt(max(d.radius**2 - h * h, 0.0))
    return math.atan2(h, x)


@dataclass(frozen=True)
class DiskCover:
    """Disks ``|z - i kappa| < omega2 eps_max / kappa`` for cross-section modes from ``N`` on.

    ``N`` is one-based, as is customary for the cutoff index: disks start at
    the ``N``-th smallest kappa, which is ``basis.kappas[N - 1]``.
    """

    N: int
    bound: float
    disks: tuple
    components: tuple
    in_strip: bool
    at_most_one_neighbor: bool

    @property
    def kappa_N(self) -> float:
        return self.disks[0].center.imag


def build_disk_cover(cell: CellMatrices, depth: int | None = None) -> DiskCover:
    """Disk cover of the large characteristic values.

    ``N`` is the smallest admissible cutoff: one more than the first
    (one-based) index with ``kappa > omega2 * eps_max * max(1, L) / pi``.
    Disks are built for the retained cross-section modes ``N .. M2`` (or
    ``depth`` of them).
    """
    basis, w2, eb = cell.basis, cell.omega2, cell.eps_max
    bound = w2 * eb * max(1.0, basis.L) / math.pi
    kap = basis.kappas[: cell.trunc.M2]
    above = np.nonzero(kap > bound)[0]
    if len(above) == 0:
        raise ValueError("no retained cross-section mode exceeds the cover bound; increase M2")
    N = int(above[0]) + 2
    last = len(kap) if depth is None else min(len(kap), N - 1 + depth)
    if N > last:
        raise ValueError(f"cover cutoff N={N} exceeds the {len(kap)} retained cross-section modes")
    disks = []
    for n in range(N - 1, last):
        if disks and abs(disks[-1].center.imag - kap[n]) < 1e-12:
            d = disks[-1]
            disks[-1] = Disk(d.center, d.radius, d.modes + (n,))
        else:
            disks.append(Disk(complex(0.0, kap[n]), w2 * eb / kap[n], (n,)))
    comps, cur = [], [disks[0]]
    for d in disks[1:]:
        prev = cur[-1]
        if abs(d.center - prev.center) < d.radius + prev.radius:
            cur.append(d)
        else:
            comps.append(cur)
            cur = [d]
    comps.append(cur)
    components = []
    for c in comps:
        inside = np.zeros(cell.dim, dtype=bool)
        for d in c:
            inside |= np.abs(cell.sigma - d.center) < d.radius
        components.append(
            DiskComponent(
                disks=tuple(c),
                index_set=np.nonzero(inside)[0],
                kappa_min=min(d.center.imag - d.radius for d in c),
            )
        )
    return DiskCover(
        N=N,
        bound=bound,
        disks=tuple(disks),
        components=tuple(components),
        in_strip=all(d.radius < math.pi for d in disks),
        at_most_one_neighbor=all(len(c) <= 2 for c in comps),
    )


def band_rectangle(cell: CellMatrices, cover: DiskCover, re_shift: float = 0.0):
    """Rectangle ``Re in [-pi, pi]``, ``|Im| < (kappa_N + kappa_{N+1}) / 2``.

    It contains exactly ``2 N`` characteristic values when the gap
    ``kappa_{N+1} - kappa_N`` is at least ``pi / L``.

    Returns
    -------
    rect : Rectangle
    expected : int
        ``2 N``.
    gap_ok : bool
        Whether the gap condition holds.
    """
    kap = cell.basis.kappas
    if cover.N >= len(kap):
        raise ValueError("basis too short for kappa_{N+1}")
    kN, kN1 = kap[cover.N - 1], kap[cover.N]
    h = 0.5 * (kN + kN1)
    rect = Rectangle(-math.pi + re_shift, math.pi + re_shift, -h, h)
    gap_ok = abs(kN1 - kN) >= math.pi / cell.basis.L - 1e-12
    return rect, 2 * cover.N, gap_ok


@dataclass(frozen=True)
class LocalizationReport:
    """Outcome of checking characteristic values against a disk cover.

    ``margins`` holds ``(xi, margin, required)`` for every value at or above
    the lowest point of the cover, where ``margin`` is the depth inside the
    nearest disk (negative means outside) and ``required`` marks values with
    ``Im xi >= kappa_N`` that must lie inside.  ``counts`` pairs each
    component's contour count with its expected count.
    """

    margins: tuple
    counts: tuple

    @property
    def all_inside(self) -> bool:
        return all(m > 0 for _, m, req in self.margins if req)

    @property
    def counts_match(self) -> bool:
        return all(c == e for c, e in self.counts)

    @property
    def ok(self) -> bool:
        return self.all_inside and self.counts_match


def verify_disk_localization(
    raws, cover: DiskCover, cell: CellMatrices, n_quad: int = 256, tol: Tolerances = DEFAULT_TOL
) -> LocalizationReport:
    """Check that values with ``Im xi >= kappa_N`` sit in the cover and that each
    component holds as many values as it holds ``sigma_l``."""
    kN = cover.kappa_N
    floor = cover.components[0].kappa_min
    margins = []
    for r in raws:
        if r.xi.imag >= floor:
            m = max(comp.margin(r.xi) for comp in cover.components)
            margins.append((r.xi, float(m), bool(r.xi.imag >= kN)))
    counts = []
    for comp in cover.components:
        cnt = count_by_contour(cell, comp.contour(), n_quad, tol)
        counts.append((cnt.count, comp.expected_count))
    return LocalizationReport(margins=tuple(margins), counts=tuple(counts))
