"""Dense complex spectral toolbox: resolvents, contour projectors,
eigenvalue clustering with eigennilpotents.

Projectors come from two independent routes that cross-validate each
other: `contour_projector` (trapezoidal resolvent quadrature on a circle)
and `decompose` (Schur reordering plus a Sylvester solve).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ContourTooClose, GapViolation, NearSingular, NoConvergence

#: entries of an eigennilpotent below this (relative to ||H||) are flushed,
#: so exactly-vanishing nilpotents are recognized as zero matrices
NILPOTENT_FLUSH = 1e-12

#: relative width of the band around a quadrature circle that must stay
#: clear of eigenvalues
EXCLUSION_BAND = 0.15


def as_matrix(m) -> np.ndarray:
    """Validate and return a square finite complex matrix."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def operator_norm(m) -> float:
    """Largest singular value."""
    a = np.asarray(m, dtype=complex)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def resolvent(h, lam: complex, threshold: float | None = None) -> np.ndarray:
    """(H - lam)^-1, refusing when lam sits too close to the spectrum."""
    a = as_matrix(h)
    shifted = a - lam * np.eye(a.shape[0])
    smin = np.linalg.svd(shifted, compute_uv=False)[-1]
    if threshold is None:
        threshold = 1e-10 * max(1.0, operator_norm(a))
    if smin < threshold:
        raise NearSingular(
            f"lambda={lam} is within {smin:.3e} of the spectrum (threshold {threshold:.3e})"
        )
    return np.linalg.solve(shifted, np.eye(a.shape[0], dtype=complex))


@dataclass(frozen=True)
class Contour:
    """Circle used for resolvent quadrature."""

    center: complex
    radius: float
    nodes: int = 16

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("contour radius must be positive")
        if self.nodes < 8 or self.nodes % 2:
            raise ValueError("contour needs an even node count >= 8")


def _circle_quadrature(h: np.ndarray, center: complex, radius: float, m: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(m) / m
    lam = center + radius * np.exp(1j * theta)
    dim = h.shape[0]
    shifted = h[None, :, :] - lam[:, None, None] * np.eye(dim)
    res = np.linalg.solve(shifted, np.broadcast_to(np.eye(dim, dtype=complex), (m, dim, dim)))
    # -1/(2 pi i) * sum R(lam) * i r e^{i theta} * (2 pi / m)
    return -(radius / m) * np.tensordot(np.exp(1j * theta), res, axes=(0, 0))


def contour_projector(h, contour: Contour, tol: float = 1e-12, max_nodes: int = 4096) -> np.ndarray:
    """Riesz projector -1/(2*pi*i) * contour integral of the resolvent.

    Trapezoidal quadrature on the circle, node count doubled until two
    successive results agree to `tol` (exponentially convergent for the
    analytic integrand).
    """
    a = as_matrix(h)
    eig = np.linalg.eigvals(a)
    dist = np.abs(np.abs(eig - contour.center) - contour.radius)
    if np.any(dist < EXCLUSION_BAND * contour.radius):
        raise ContourTooClose(
            f"eigenvalue within {dist.min():.3e} of the circle "
            f"(band {EXCLUSION_BAND * contour.radius:.3e})"
        )
    m = contour.nodes
    prev = _circle_quadrature(a, contour.center, contour.radius, m)
    while 2 * m <= max_nodes:
        m *= 2
        cur = _circle_quadrature(a, contour.center, contour.radius, m)
        if operator_norm(cur - prev) < tol:
            return cur
        prev = cur
    raise NoConvergence(f"quadrature not converged at {m} nodes (cap {max_nodes})")


@dataclass(frozen=True)
class EigenGroup:
    """One eigenvalue cluster with its projector and eigennilpotent."""

    eigenvalue: complex
    multiplicity: int
    projector: np.ndarray
    nilpotent: np.ndarray


@dataclass(frozen=True)
class SpectralDecomposition:
    groups: tuple[EigenGroup, ...]
    complement_projector: np.ndarray
    min_gap: float
    omega: float
    eigenvalues: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.complement_projector.shape[0]


def _cluster(eigs: np.ndarray, link: float) -> list[np.ndarray]:
    """Transitive grouping of eigenvalues at linkage distance `link`."""
    n = len(eigs)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(eigs[i] - eigs[j]) < link:
                parent[find(i)] = find(j)
    roots = {}
    for i in range(n):
        roots.setdefault(find(i), []).append(i)
    clusters = [np.array(ix) for ix in roots.values()]
    clusters.sort(key=lambda ix: (eigs[ix].mean().real, eigs[ix].mean().imag))
    return clusters


def _schur_projector(a: np.ndarray, means: np.ndarray, which: int) -> np.ndarray:
    """Spectral projector of the cluster nearest means[which], via reordered
    Schur form and a Sylvester solve (independent of contour quadrature)."""

    def select(lam):
        return int(np.argmin(np.abs(lam - means))) == which

    t, z, sdim = sla.schur(a, output="complex", sort=select)
    if sdim == 0 or sdim == a.shape[0]:
        return np.eye(a.shape[0], dtype=complex) if sdim else np.zeros_like(a)
    t11, t12, t22 = t[:sdim, :sdim], t[:sdim, sdim:], t[sdim:, sdim:]
    x = sla.solve_sylvester(t11, -t22, -t12)
    p = np.zeros_like(a)
    p[:sdim, :sdim] = np.eye(sdim)
    p[:sdim, sdim:] = -x
    return z @ p @ z.conj().T


def decompose(h, gap_floor: float) -> SpectralDecomposition:
    """Full spectral decomposition into gap-separated eigenvalue groups.

    Clusters are formed by transitive grouping at distance gap_floor/4;
    the cluster eigenvalue is the multiplicity-weighted mean. Raises
    GapViolation when two clusters come closer than gap_floor.
    """
    a = as_matrix(h)
    if gap_floor <= 0:
        raise ValueError("gap_floor must be positive")
    dim = a.shape[0]
    eigs = np.linalg.eigvals(a)
    clusters = _cluster(eigs, gap_floor / 4.0)

    min_gap = np.inf
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            d = np.abs(eigs[clusters[i]][:, None] - eigs[clusters[j]][None, :]).min()
            min_gap = min(min_gap, d)
    if min_gap < gap_floor:
        raise GapViolation(
            f"clusters separated by {min_gap:.3e} < gap floor {gap_floor:.3e}"
        )

    means = np.array([eigs[ix].mean() for ix in clusters])
    scale = max(1.0, operator_norm(a))
    groups = []
    psum = np.zeros_like(a)
    for which, ix in enumerate(clusters):
        proj = _schur_projector(a, means, which)
        nil = (a - means[which] * np.eye(dim)) @ proj
        nil[np.abs(nil) < NILPOTENT_FLUSH * scale] = 0.0
        groups.append(
            EigenGroup(
                eigenvalue=complex(means[which]),
                multiplicity=len(ix),
                projector=proj,
                nilpotent=nil,
            )
        )
        psum += proj
    complement = np.eye(dim, dtype=complex) - psum
    omega = float(eigs.imag.max())
    return SpectralDecomposition(
        groups=tuple(groups),
        complement_projector=complement,
        min_gap=float(min_gap),
        omega=omega,
        eigenvalues=eigs,
    )


def group_circle(decomp: SpectralDecomposition, which: int) -> Contour:
    """Quadrature circle for one group: radius half the distance to the
    nearest foreign eigenvalue, at least twice the cluster diameter."""
    g = decomp.groups[which]
    eigs = decomp.eigenvalues
    own = np.abs(eigs - g.eigenvalue)
    order = np.argsort(own)
    inside = order[: g.multiplicity]
    outside = order[g.multiplicity:]
    diameter = 2.0 * own[inside].max() if g.multiplicity else 0.0
    if outside.size:
        foreign = own[outside].min()
        # half the foreign distance, raised to 2x the cluster diameter but
        # never so far that the circle reaches the foreign eigenvalues
        radius = min(max(0.5 * foreign, 2.0 * diameter), 0.75 * foreign)
    else:
        radius = max(1.0, 2.0 * diameter + 1.0)
    return Contour(center=g.eigenvalue, radius=float(radius))
