"""Acceptance battery: one check per criterion, shared by pytest and the CLI.

Each criterion runs at its stated tolerance and returns a CriterionResult;
run_all prints one pass/fail line per criterion. Heavy intermediates
(two-level hierarchies and bundles, propagated intro evolutions) are
cached so the battery stays inside its runtime budget.

Criterion 6's >=2x error cascade is a known-unattainable spec target for
this family at eps=0.05 (see the measured analysis in the project notes);
it is asserted as stated and reported honestly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .approximation import build_approximation, dephased_growth
from .chebgrid import TimeGrid
from .errors import VerdictConflict
from .families import (intro_example, intro_rotation, nilpotent_example,
                       polynomial_family, two_level)
from .fitting import fit_exp_inverse_eps
from .hierarchy import build_hierarchy, fit_delta_decay
from .intro_model import IntroParams, closed_form_transition
from .nilpotent import boundedness_dichotomy, evolve_nilpotent, growth_exponent, nilpotent_family
from .propagate import dyson_expand, evolve_sampled
from .runner import closed_form_nilpotent_solution
from .spectral import contour_projector, decompose, group_circle, operator_norm

TWO_LEVEL_EPS = (0.1, 0.07, 0.05, 0.035, 0.025)
INTRO_EPS = (0.04, 0.02, 0.01)
DEPHASED_EPS = (0.04, 0.03, 0.02, 0.01, 0.005)
NILPOTENT_EPS = (0.1, 0.05, 0.02, 0.01, 0.005)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number} ({self.name}): {self.detail} [{self.seconds:.1f}s]"


_cache: dict = {}


def _intro_evolutions(eps: float):
    """Propagated intro evolution sampled at the acceptance times."""
    key = ("intro_u", eps)
    if key not in _cache:
        fam = intro_example(1.0, -1.0)
        _cache[key] = evolve_sampled(fam, eps, [0.0, 0.3, 0.7, 1.0], tol=1e-9)
    return _cache[key]


def _two_level_hierarchy(eps: float):
    key = ("tl_h", eps)
    if key not in _cache:
        fam = two_level(0.2, 1.0)
        _cache[key] = build_hierarchy(fam, eps, 0.5, grid=TimeGrid(129), q_max=30)
    return _cache[key]


def _two_level_bundle(eps: float, q: int):
    key = ("tl_b", eps, q)
    if key not in _cache:
        fam = two_level(0.2, 1.0)
        _cache[key] = build_approximation(fam, _two_level_hierarchy(eps), q, eps,
                                          tol=1e-9)
    return _cache[key]


def _intro_projectors():
    fam = intro_example(1.0, -1.0)
    dec = decompose(fam(0.0), 0.5)
    return dec.groups[0].projector, dec.groups[1].projector


def criterion_1() -> CriterionResult:
    """Transition growth of the intro model against the closed form."""
    t0 = time.time()
    params = IntroParams(1.0, -1.0)
    _, s_inv = intro_rotation(1.0, -1.0)
    p0, p1 = _intro_projectors()
    xs, ys = [], []
    rel_at_001 = None
    for eps in INTRO_EPS:
        u = _intro_evolutions(eps)[-1].matrix
        omega_num = s_inv(1.0) @ u
        tnum = operator_norm(p0 @ omega_num @ p1)
        value, ls = closed_form_transition(params, eps, 1.0)
        if eps == 0.01:
            rel_at_001 = abs(tnum - value * math.exp(ls)) / (value * math.exp(ls))
        xs.append(1.0 / math.sqrt(eps))
        ys.append(math.log(tnum / value))
    slope = float(np.polyfit(xs, ys, 1)[0])
    ok = rel_at_001 <= 0.05 and abs(slope - 1.0) <= 0.05
    detail = f"value off by {100 * rel_at_001:.2f}% at eps=0.01 (budget 5%), exponent {slope:.4f} (budget 1.00+-0.05)"
    return CriterionResult(1, "intro transition growth", ok, detail, time.time() - t0)


def criterion_2() -> CriterionResult:
    """Exact intertwining of the starred projectors vs the instantaneous ones."""
    t0 = time.time()
    from .intro_model import IntroClosedForm
    eps = 0.01
    fam = intro_example(1.0, -1.0)
    cf = IntroClosedForm(IntroParams(1.0, -1.0), eps)
    results = _intro_evolutions(eps)
    worst_starred = 0.0
    worst_instant = 0.0
    for tt, res in zip([0.3, 0.7, 1.0], results[1:]):
        u = res.matrix
        for j in (0, 1):
            r = operator_norm(u @ cf.starred(j, 0.0) - cf.starred(j, tt) @ u)
            worst_starred = max(worst_starred, r)
        dec_t = decompose(fam(tt), 0.5)
        dec_0 = decompose(fam(0.0), 0.5)
        for j in (0, 1):
            r = operator_norm(u @ dec_0.groups[j].projector
                              - dec_t.groups[j].projector @ u)
            worst_instant = max(worst_instant, r)
    ok = worst_starred <= 1e-6 and worst_instant > 1.0
    detail = (f"starred residual {worst_starred:.2e} (budget 1e-6), "
              f"instantaneous residual {worst_instant:.3g} (must exceed 1)")
    return CriterionResult(2, "intro exact intertwining", ok, detail, time.time() - t0)


def criterion_3() -> CriterionResult:
    """Nilpotent closed form and the growth exponent beta ~ 1/2."""
    t0 = time.time()
    nf = nilpotent_family(nilpotent_example())
    eps = 0.01
    y = evolve_nilpotent(nf, eps, 0.0, 1.0, tol=1e-8).matrix
    ref = closed_form_nilpotent_solution(eps, 1.0)
    entry_rel = float(np.max(np.abs(y - ref) / np.abs(ref)))
    key = ("exn_growth",)
    if key not in _cache:
        _cache[key] = growth_exponent(nf, NILPOTENT_EPS, tol=1e-7)
    fit = _cache[key]
    beta = fit.aux.get("beta_loglog", fit.params.get("beta", 0.0))
    ok = entry_rel <= 1e-6 and abs(beta - 0.5) <= 0.03
    detail = (f"closed-form entrywise error {entry_rel:.2e} (budget 1e-6), "
              f"beta {beta:.4f} (budget 0.50+-0.03, scan beta {fit.params.get('beta', float('nan')):.3f})")
    return CriterionResult(3, "nilpotent closed form", ok, detail, time.time() - t0)


def criterion_4() -> CriterionResult:
    """Boundedness dichotomy verdicts with no conflicts."""
    t0 = time.time()
    n = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    rotation = polynomial_family([np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)])
    zero = polynomial_family([np.zeros((2, 2), dtype=complex)])
    cases = [
        ("N=0 plus bounded A", nilpotent_family(zero, rotation), "bounded"),
        ("analytic nilpotent", nilpotent_family(nilpotent_example()), "unbounded"),
        ("t times constant nilpotent",
         nilpotent_family(polynomial_family([np.zeros((2, 2), complex), n])),
         "unbounded"),
    ]
    got = []
    try:
        for name, nf, want in cases:
            verdict, _ = boundedness_dichotomy(nf, NILPOTENT_EPS, 0.0, 1.0, tol=1e-8)
            got.append((name, verdict, want))
    except VerdictConflict as exc:
        return CriterionResult(4, "boundedness dichotomy", False,
                               f"VerdictConflict: {exc}", time.time() - t0)
    ok = all(v == w for _, v, w in got)
    detail = "; ".join(f"{n}: {v} (want {w})" for n, v, w in got)
    return CriterionResult(4, "boundedness dichotomy", ok, detail, time.time() - t0)


def criterion_5() -> CriterionResult:
    """Delta turnover, monotone q_star and the e^{-g/eps} law."""
    t0 = time.time()
    hs = [_two_level_hierarchy(eps) for eps in TWO_LEVEL_EPS]
    shape_ok = True
    notes = []
    for eps, h in zip(TWO_LEVEL_EPS, hs):
        d = h.deltas
        q = h.q_star
        if q < 1 or len(d) <= q:
            shape_ok = False
            notes.append(f"eps={eps}: no turnover recorded")
            continue
        # decreasing up to q_star (10% noise allowance), increasing after
        dec = all(d[i + 1] <= 1.1 * d[i] for i in range(q - 1))
        inc = all(d[i + 1] >= d[i] for i in range(q - 1, len(d) - 1))
        if not (dec and inc):
            shape_ok = False
        notes.append(f"eps={eps}: q*={q}")
    qstars = [h.q_star for h in hs]
    monotone = all(a <= b for a, b in zip(qstars, qstars[1:]))
    fit = fit_delta_decay(hs)
    ok = shape_ok and monotone and fit.r_squared >= 0.97 and fit.params["kappa"] > 0
    detail = (", ".join(notes) + f"; q* monotone={monotone}, "
              f"fit kappa={fit.params['kappa']:.4f} r2={fit.r_squared:.4f} (budget 0.97)")
    return CriterionResult(5, "superadiabatic delta turnover", ok, detail, time.time() - t0)


def criterion_6_cascade() -> CriterionResult:
    """Error contraction by >=2x per level at eps=0.05 (known unattainable)."""
    t0 = time.time()
    eps = 0.05
    h = _two_level_hierarchy(eps)
    errs = {q: _two_level_bundle(eps, q).error_total for q in sorted({0, 1, h.q_star})}
    r01 = errs[0] / errs[1]
    r1s = errs[1] / errs[h.q_star]
    ok = r01 >= 2.0 and r1s >= 2.0
    detail = (f"err(q0)={errs[0]:.3e}, err(q1)={errs[1]:.3e}, "
              f"err(q*={h.q_star})={errs[h.q_star]:.3e}; ratios {r01:.2f}, {r1s:.2f} "
              "(budget >=2 each; see notes: first ratio is structurally ~1.2)")
    return CriterionResult(6, "superadiabatic error cascade", ok, detail, time.time() - t0)


def criterion_6_fit() -> CriterionResult:
    """log error at q_star vs 1/eps follows the exponential law."""
    t0 = time.time()
    eps_arr, errs = [], []
    for eps in TWO_LEVEL_EPS:
        h = _two_level_hierarchy(eps)
        errs.append(_two_level_bundle(eps, h.q_star).error_total)
        eps_arr.append(eps)
    fit = fit_exp_inverse_eps(np.array(eps_arr), np.log(np.array(errs)))
    ok = fit.r_squared >= 0.97 and fit.params["kappa"] > 0
    detail = (f"kappa={fit.params['kappa']:.4f}, r2={fit.r_squared:.4f} "
              f"(budget 0.97, negative slope)")
    return CriterionResult(6, "superadiabatic error law", ok, detail, time.time() - t0)


def _random_well_gapped(rng, dim: int):
    """T J T^-1 with exact multiple eigenvalues, known Jordan structure."""
    n_groups = rng.integers(1, dim + 1)
    cuts = sorted(rng.choice(np.arange(1, dim), size=n_groups - 1, replace=False).tolist())
    sizes = np.diff([0] + cuts + [dim])
    eigs = []
    while True:
        eigs = rng.uniform(-3, 3, n_groups) + 1j * rng.uniform(-3, 3, n_groups)
        ok = all(abs(eigs[i] - eigs[j]) >= 1.2
                 for i in range(n_groups) for j in range(i + 1, n_groups))
        if ok:
            break
    j = np.zeros((dim, dim), dtype=complex)
    pos = 0
    ranks = []
    for lam, m in zip(eigs, sizes):
        for i in range(m):
            j[pos + i, pos + i] = lam
        nil_rank = 0
        if m > 1 and rng.random() < 0.6:
            nil_rank = int(rng.integers(1, m))
            for i in range(nil_rank):
                j[pos + i, pos + i + 1] = 1.0
        ranks.append(nil_rank)
        pos += m
    t = np.eye(dim) + 0.3 * (rng.standard_normal((dim, dim))
                             + 1j * rng.standard_normal((dim, dim)))
    h = t @ j @ np.linalg.inv(t)
    return h, eigs, sizes, ranks


def criterion_7(n_matrices: int = 200) -> CriterionResult:
    """Projector algebra on random well-gapped matrices."""
    t0 = time.time()
    rng = np.random.default_rng(20240811)
    worst = {"idem": 0.0, "orth": 0.0, "complete": 0.0, "recon": 0.0,
             "nilp": 0.0, "contour": 0.0}
    count = 0
    while count < n_matrices:
        dim = int(rng.integers(2, 5))
        h, eigs, sizes, ranks = _random_well_gapped(rng, dim)
        if np.linalg.cond(h) > 1e6:
            continue
        count += 1
        dec = decompose(h, 0.5)
        eye = np.eye(dim)
        psum = sum(g.projector for g in dec.groups) + dec.complement_projector
        worst["complete"] = max(worst["complete"],
                                operator_norm(psum - eye) / dim)
        recon = sum(g.eigenvalue * g.projector + g.nilpotent for g in dec.groups)
        worst["recon"] = max(worst["recon"],
                             operator_norm(recon - h) / max(1.0, operator_norm(h)))
        for a, ga in enumerate(dec.groups):
            worst["idem"] = max(worst["idem"],
                                operator_norm(ga.projector @ ga.projector - ga.projector))
            for b, gb in enumerate(dec.groups):
                prod = ga.projector @ gb.projector
                ref = ga.projector if a == b else 0.0
                worst["orth"] = max(worst["orth"], operator_norm(prod - ref))
            dn = operator_norm(ga.nilpotent)
            if dn > 0:
                power = np.linalg.matrix_power(ga.nilpotent, ga.multiplicity)
                worst["nilp"] = max(worst["nilp"],
                                    operator_norm(power) / (1e-300 + dn ** ga.multiplicity))
            circ = group_circle(dec, a)
            pc = contour_projector(h, circ)
            worst["contour"] = max(worst["contour"],
                                   operator_norm(pc - ga.projector))
    ok = (worst["idem"] <= 1e-10 and worst["orth"] <= 1e-10
          and worst["complete"] <= 1e-10 and worst["recon"] <= 1e-9
          and worst["nilp"] <= 1e-8 and worst["contour"] <= 1e-9)
    detail = (f"{count} matrices; worst: idem {worst['idem']:.1e}, orth {worst['orth']:.1e}, "
              f"complete {worst['complete']:.1e}/dim, recon {worst['recon']:.1e}*||H||, "
              f"D^m {worst['nilp']:.1e}*||D||^m, contour-vs-schur {worst['contour']:.1e}")
    return CriterionResult(7, "projector algebra suite", ok, detail, time.time() - t0)


def criterion_8() -> CriterionResult:
    """Bounded-Psi dichotomy: d=0 without nilpotents, beta ~ 1/2 with them."""
    t0 = time.time()
    tl_bundles = [_two_level_bundle(eps, min(1, _two_level_hierarchy(eps).q_star))
                  for eps in TWO_LEVEL_EPS]
    fits_tl = [dephased_growth(tl_bundles, j) for j in range(2)]
    d_zero = all(f.params["d"] == 0.0 for f in fits_tl)

    key = ("intro_bundles",)
    if key not in _cache:
        fam = intro_example(1.0, -1.0)
        bundles = []
        for eps in DEPHASED_EPS:
            h = build_hierarchy(fam, eps, 0.5, grid=TimeGrid(65), q_max=2)
            bundles.append(build_approximation(fam, h, min(2, h.q_star), eps, tol=1e-7))
        _cache[key] = bundles
    fit0 = dephased_growth(_cache[key], 0)
    beta = fit0.params["beta"]
    ok = d_zero and fit0.params["d"] > 0 and abs(beta - 0.5) <= 0.07
    detail = (f"two_level d={max(f.params['d'] for f in fits_tl):.3g} (want 0); "
              f"intro group-0 d={fit0.params['d']:.3f}, beta={beta:.4f} (budget 0.50+-0.07)")
    return CriterionResult(8, "bounded-Psi dichotomy", ok, detail, time.time() - t0)


def criterion_9() -> CriterionResult:
    """Interaction-series order check."""
    t0 = time.time()
    a = np.array([[0.9, 0.4], [0.1, -0.6]], dtype=complex)
    b = 0.8 * np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex) \
        + np.array([[0.3, 0.0], [0.1, -0.2]], dtype=complex)
    base = polynomial_family([a])
    pert = polynomial_family([b])
    hs = (0.1, 0.05, 0.025)
    ok = True
    parts = []
    for n in (1, 2, 3):
        errs = []
        for h in hs:
            exact = sla.expm(-1j * h * (a + b))
            approx = dyson_expand(base, pert, 1.0, 0.0, h, n, tol=1e-13)
            errs.append(operator_norm(approx - exact))
        slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        parts.append(f"n={n}: slope {slope:.2f}")
        if abs(slope - (n + 1)) > 0.4:
            ok = False
    return CriterionResult(9, "interaction-series order check", ok,
                           "; ".join(parts) + " (budget n+1 +- 0.4)", time.time() - t0)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6_cascade, criterion_6_fit, criterion_7, criterion_8,
            criterion_9)


def run_all(echo=print) -> list[CriterionResult]:
    results = []
    for fn in CRITERIA:
        res = fn()
        results.append(res)
        if echo:
            echo(res.line())
    return results
