"""Evolutions driven by analytic nilpotent families, eps*dY/dt = (N + eps*A) Y.

The spectrum of N(t) is {0}, so no omega rescaling applies; growth comes
entirely from the nilpotent structure and behaves like e^{c/eps^beta}
with beta < 1 (beta = (d-1)/d for a clean index-d family), collapsing to
polynomial growth in 1/eps when N is constant and to uniform boundedness
iff N vanishes identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, NotNilpotent, VerdictConflict
from .families import GeneratorFamily
from .fitting import GrowthFit, fit_power_law, fit_stretched_exp, log_values
from .propagate import EvolutionResult, integrate_matrix_ode
from .spectral import operator_norm

#: relative threshold for the rank collapse of successive powers
INDEX_TOL = 1e-10
#: sampled times used for index detection and the N==0 test
INDEX_SAMPLES = 50


def _detect_index(family: GeneratorFamily, samples: int = INDEX_SAMPLES):
    """Smallest d with N(t)^d == 0 on a sample; d = 0 for N identically 0."""
    ts = np.linspace(0.0, 1.0, samples)
    mats = np.array([family(t) for t in ts])
    norms = np.array([operator_norm(m) for m in mats])
    if norms.max() < 1e-14:
        return 0
    active = np.nonzero(norms > 1e-14)[0]
    power = mats.copy()
    for d in range(1, family.dim + 1):
        rel = max(operator_norm(power[i]) / norms[i] ** d for i in active)
        if rel <= INDEX_TOL:
            return d
        power = np.einsum("nij,njk->nik", power, mats)
    raise NotNilpotent("family is not nilpotent to working precision")


@dataclass(frozen=True)
class NilpotentFamily:
    """Nilpotent family N(t) with optional bounded perturbation A(t)."""

    family: GeneratorFamily
    index: int
    perturbation: GeneratorFamily | None = None

    @property
    def dim(self) -> int:
        return self.family.dim


def nilpotent_family(family: GeneratorFamily,
                     perturbation: GeneratorFamily | None = None) -> NilpotentFamily:
    if perturbation is not None and perturbation.dim != family.dim:
        raise ValueError("perturbation dimension differs from the family")
    return NilpotentFamily(family=family, index=_detect_index(family),
                           perturbation=perturbation)


def evolve_nilpotent(nf: NilpotentFamily, epsilon: float, s: float, t: float,
                     tol: float = 1e-8) -> EvolutionResult:
    """Propagate eps*dY/dt = (N(t) + eps*A(t)) Y; both time orders allowed."""
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise ValueError("times must lie in [0, 1]")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n, a = nf.family, nf.perturbation
    if a is None:
        def rhs(u, y):
            return (n(u) / epsilon) @ y
    else:
        def rhs(u, y):
            return (n(u) / epsilon + a(u)) @ y
    eye = np.eye(nf.dim, dtype=complex)
    y, _, steps, err = integrate_matrix_ode(rhs, s, t, eye, tol)
    return EvolutionResult(epsilon=epsilon, s=s, t=t, matrix=y, log_scale=0.0,
                           steps=steps, est_error=err)


def _sup_norm_grid(nf, epsilon, tol, grid_pts=9):
    """sup over an (s,t) grid of ||Y(t,s)||, refined once at the maximizer."""
    ss = np.linspace(0.0, 1.0, grid_pts)

    def scan(svals, tvals):
        best = (0.0, 0.0, 0.0)
        for s in svals:
            n, a = nf.family, nf.perturbation
            if a is None:
                rhs = lambda u, y: (n(u) / epsilon) @ y
            else:
                rhs = lambda u, y: (n(u) / epsilon + a(u)) @ y
            eye = np.eye(nf.dim, dtype=complex)
            fwd = [t for t in tvals if t >= s]
            bwd = [t for t in tvals if t < s]
            vals = []
            if fwd:
                _, samp, _, _ = integrate_matrix_ode(rhs, s, max(fwd), eye, tol,
                                                     checkpoints=fwd)
                vals += list(zip(fwd, samp))
            if bwd:
                _, samp, _, _ = integrate_matrix_ode(rhs, s, min(bwd), eye, tol,
                                                     checkpoints=sorted(bwd, reverse=True))
                vals += list(zip(sorted(bwd, reverse=True), samp))
            for t, m in vals:
                nv = operator_norm(m)
                if nv > best[0]:
                    best = (nv, s, t)
        return best

    best = scan(ss, ss)
    # one refinement pass around the maximizer
    h = ss[1] - ss[0]
    s0, t0 = best[1], best[2]
    fine_s = np.clip(np.linspace(s0 - h / 2, s0 + h / 2, 3), 0.0, 1.0)
    fine_t = np.clip(np.linspace(t0 - h / 2, t0 + h / 2, 3), 0.0, 1.0)
    refined = scan(fine_s, fine_t)
    return max(best[0], refined[0])


def growth_exponent(nf: NilpotentFamily, epsilon_grid, tol: float = 1e-8) -> GrowthFit:
    """Fit sup_{s,t} ||Y(t,s)|| over an eps grid to the stretched law.

    Returns the bounded verdict (d=0) when the supremum varies by less
    than 10 percent; degenerates to the power-law alternative
    c*(1/eps)^p when that explains the data at least as well (constant
    nilpotents grow like (1/eps)^{d-1}).
    """
    eps = sorted(set(float(e) for e in epsilon_grid), reverse=True)
    if len(eps) < 5:
        raise InsufficientData(f"need >= 5 epsilon values, got {len(eps)}")
    if eps[0] / eps[-1] < 9.0:
        raise InsufficientData("epsilon grid must span a decade")
    sups = [(e, _sup_norm_grid(nf, e, tol), 0.0) for e in eps]
    earr, logv = log_values(sups)
    stretched = fit_stretched_exp(earr, logv)
    if stretched.aux.get("verdict") == "bounded":
        return stretched
    power = fit_power_law(earr, logv)
    if power.r_squared >= stretched.r_squared - 1e-4:
        return GrowthFit(model=power.model, params=power.params,
                         r_squared=power.r_squared,
                         aux={"stretched_r2": stretched.r_squared})
    aux = dict(stretched.aux)
    aux["power_r2"] = power.r_squared
    return GrowthFit(model=stretched.model, params=stretched.params,
                     r_squared=stretched.r_squared, aux=aux)


def boundedness_dichotomy(nf: NilpotentFamily, epsilon_grid, s: float, t: float,
                          tol: float = 1e-8):
    """Verdict {bounded, unbounded} for sup_eps ||Y(t,s)||.

    The numerical scan (max/min ratio over the eps grid below 10) is
    cross-checked against the sup ||N(u)|| < 1e-12 test; the two must
    agree, otherwise the eps grid is too shallow.
    """
    eps = sorted(set(float(e) for e in epsilon_grid), reverse=True)
    norms = [operator_norm(evolve_nilpotent(nf, e, s, t, tol=tol).matrix)
             for e in eps]
    ratio = max(norms) / max(min(norms), 1e-300)
    numerical_bounded = ratio < 10.0
    lo, hi = min(s, t), max(s, t)
    us = np.linspace(lo, hi, 4 * INDEX_SAMPLES + 1)
    n_sup = max(operator_norm(nf.family(u)) for u in us)
    symbolic_bounded = n_sup < 1e-12
    if numerical_bounded != symbolic_bounded:
        raise VerdictConflict(
            f"norm ratio {ratio:.3g} vs sup||N||={n_sup:.3e}: "
            "extend the epsilon grid to smaller values and rerun"
        )
    verdict = "bounded" if numerical_bounded else "unbounded"
    evidence = {"epsilon": eps, "norms": norms, "ratio": float(ratio),
                "sup_n": float(n_sup)}
    return verdict, evidence


def shifted_nilpotent_bound(n_const, delta: float, samples: int = 2001) -> float:
    """sup_{s in [0, 50/delta]} ||e^{(N - delta) s}|| for a constant nilpotent.

    e^{Ns} is the exact polynomial sum_{p<d} (Ns)^p / p!, so the matrix
    exponential needs no ODE solve; the sup is located by dense sampling
    with one refinement pass around the maximizer. Scales like
    delta^{-(d-1)}.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    n = np.asarray(n_const, dtype=complex)
    dim = n.shape[0]
    powers = [np.eye(dim, dtype=complex)]
    d = None
    for p in range(1, dim + 1):
        powers.append(powers[-1] @ n)
        if operator_norm(powers[-1]) <= 1e-12 * max(operator_norm(n) ** p, 1e-300):
            d = p
            break
    if d is None:
        raise NotNilpotent("matrix is not nilpotent to working precision")

    def norm_at(sv):
        m = sum(powers[p] * sv ** p / math.factorial(p) for p in range(d))
        return math.exp(-delta * sv) * operator_norm(m) if delta * sv < 700 else 0.0

    span = 50.0 / delta
    ss = np.linspace(0.0, span, samples)
    vals = np.array([norm_at(sv) for sv in ss])
    i = int(np.argmax(vals))
    lo = ss[max(i - 1, 0)]
    hi = ss[min(i + 1, samples - 1)]
    fine = np.linspace(lo, hi, 201)
    return float(max(vals[i], max(norm_at(sv) for sv in fine)))
