"""Propagator for the singularly perturbed evolution i*eps*dU/dt = A(t) U.

The integrator is an explicit Dormand-Prince 5(4) embedded pair with PI
step control. The stiffness here is oscillatory (phases ~ e^{it/eps}),
so step sizes ~ eps are accepted by design; matrices are tiny and
robustness beats sophistication.

Growth control: the rescaled equation i*eps*dU/dt = (A(t) - i*omega(t)) U
is always the one integrated; the removed exponent integral(omega)/eps is
carried separately as `log_scale` so that raw magnitudes never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.integrate

from .chebgrid import TimeGrid
from .errors import NonFinite, OrderTooHigh, PhaseOverflow, StepUnderflow
from .families import GeneratorFamily
from .spectral import operator_norm

#: hard floor for the adaptive step and cap on the materialized exponent
MIN_STEP = 1e-15
MAX_LOG_SCALE = 200.0

# Dormand-Prince 5(4) tableau (FSAL)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4


def _rms(m: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(m) ** 2)))


def integrate_matrix_ode(rhs: Callable, t0: float, t1: float, y0: np.ndarray,
                         tol: float, checkpoints=()):
    """Adaptive DP5(4) for dY/dt = rhs(t, Y) on matrix-valued state.

    Local error is budgeted per unit step (accepted when the scaled
    estimate is below 0.9*tol*|h|/|t1-t0|), which keeps the accumulated
    estimate below tol. Steps never exceed |t1-t0|/16 and integration in
    either time direction is supported.

    Returns (y_final, samples_at_checkpoints, steps, est_error).
    """
    span = t1 - t0
    y = np.array(y0, dtype=complex)
    if span == 0.0:
        return y, [y.copy() for _ in checkpoints], 0, 0.0
    direction = 1.0 if span > 0 else -1.0
    total = abs(span)
    max_step = total / 16.0
    cps = list(checkpoints)
    for c in cps:
        if (c - t0) * direction < -1e-14 or (t1 - c) * direction < -1e-14:
            raise ValueError("checkpoint outside the integration span")
    samples: list = [None] * len(cps)
    order = sorted(range(len(cps)), key=lambda i: (cps[i] - t0) * direction)

    t = t0
    h = direction * min(max_step, total / 64.0)
    k1 = rhs(t, y)
    steps = 0
    est_error = 0.0
    err_prev = 1.0
    pending = [i for i in order]
    # checkpoints exactly at t0
    while pending and abs(cps[pending[0]] - t) < 1e-15:
        samples[pending[0]] = y.copy()
        pending.pop(0)

    while (t1 - t) * direction > 1e-15:
        if abs(h) < MIN_STEP:
            raise StepUnderflow(f"step {abs(h):.3e} below floor at t={t:.6g}")
        if (t + h - t1) * direction > 0:
            h = t1 - t
        # land exactly on the next checkpoint
        if pending and (t + h - cps[pending[0]]) * direction > 0:
            h = cps[pending[0]] - t
        k = [k1]
        for i in range(1, 7):
            yi = y + h * sum(aij * kj for aij, kj in zip(_A[i], k))
            k.append(rhs(t + _C[i] * h, yi))
        ynew = y + h * sum(b * kj for b, kj in zip(_B5, k) if b != 0.0)
        err_mat = h * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
        if not np.all(np.isfinite(ynew.view(float))):
            raise NonFinite(f"state not finite at t={t:.6g}")
        scale = max(1.0, _rms(y), _rms(ynew))
        err = _rms(err_mat) / scale
        budget = 0.9 * tol * abs(h) / total
        ratio = err / budget if budget > 0 else np.inf
        if ratio <= 1.0:
            t = t + h
            y = ynew
            k1 = k[6]  # FSAL
            steps += 1
            est_error += err
            while pending and (cps[pending[0]] - t) * direction < 1e-15:
                samples[pending[0]] = y.copy()
                pending.pop(0)
            # PI controller (budget scales with h, so the error/budget ratio
            # behaves like h^4)
            fac = 0.9 * ratio ** -0.175 * err_prev ** 0.1 if ratio > 0 else 5.0
            err_prev = max(ratio, 1e-10)
            h *= min(5.0, max(0.2, fac))
        else:
            h *= max(0.2, 0.9 * ratio ** -0.25)
        if abs(h) > max_step:
            h = direction * max_step
    for i in pending:
        samples[i] = y.copy()
    return y, samples, steps, est_error


@dataclass(frozen=True)
class OmegaProfile:
    """omega(t) = max_k Im(lambda_k(t)) with an additive integral map."""

    value: Callable = field(repr=False)
    integral: Callable = field(repr=False)

    @classmethod
    def zero(cls) -> "OmegaProfile":
        return cls(value=lambda t: 0.0, integral=lambda s, t: 0.0)

    @classmethod
    def from_family(cls, family: GeneratorFamily, n: int = 65) -> "OmegaProfile":
        grid = TimeGrid(n)
        samples = np.array([np.linalg.eigvals(family(t)).imag.max()
                            for t in grid.nodes])
        return cls.from_samples(grid, samples)

    @classmethod
    def from_samples(cls, grid: TimeGrid, samples: np.ndarray) -> "OmegaProfile":
        samples = np.asarray(samples, dtype=float)
        if np.all(np.abs(samples) < 1e-14):
            return cls.zero()
        coeff = grid.coefficients(samples)
        anti = grid.antiderivative_coefficients(coeff)

        def val(t):
            return float(grid.evaluate_series(coeff, t).real)

        def integ(s, t):
            fs = grid.evaluate_series(anti, s).real
            ft = grid.evaluate_series(anti, t).real
            return float(ft - fs)

        return cls(value=val, integral=integ)


@dataclass(frozen=True)
class EvolutionResult:
    """Rescaled propagator plus the removed exponent.

    The raw propagator is matrix * e^{log_scale}; it is only materialized
    while log_scale stays below MAX_LOG_SCALE.
    """

    epsilon: float
    s: float
    t: float
    matrix: np.ndarray
    log_scale: float
    steps: int
    est_error: float

    def unscaled(self) -> np.ndarray:
        if self.log_scale > MAX_LOG_SCALE:
            raise PhaseOverflow(
                f"log_scale {self.log_scale:.3g} too large to materialize"
            )
        return self.matrix * np.exp(self.log_scale)

    def compose(self, earlier: "EvolutionResult") -> "EvolutionResult":
        """Cocycle composition: (s->t) after (r->s) gives (r->t)."""
        if abs(earlier.t - self.s) > 1e-12:
            raise ValueError("results do not abut in time")
        return EvolutionResult(
            epsilon=self.epsilon, s=earlier.s, t=self.t,
            matrix=self.matrix @ earlier.matrix,
            log_scale=self.log_scale + earlier.log_scale,
            steps=self.steps + earlier.steps,
            est_error=self.est_error + earlier.est_error,
        )


def _schroedinger_rhs(family, epsilon, omega):
    if omega is None:
        def rhs(t, y):
            return (-1j / epsilon) * (family(t) @ y)
    else:
        def rhs(t, y):
            return (-1j / epsilon) * (family(t) @ y) - (omega.value(t) / epsilon) * y
    return rhs


def evolve(family: GeneratorFamily, epsilon: float, s: float, t: float,
           omega: OmegaProfile | None = None, tol: float = 1e-8) -> EvolutionResult:
    """Rescaled propagator of i*eps*dU/dt = A(t) U from s to t (0<=s<=t<=1)."""
    if not 0.0 <= s <= t <= 1.0:
        raise ValueError("times must satisfy 0 <= s <= t <= 1")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    eye = np.eye(family.dim, dtype=complex)
    y, _, steps, err = integrate_matrix_ode(
        _schroedinger_rhs(family, epsilon, omega), s, t, eye, tol)
    ls = 0.0 if omega is None else omega.integral(s, t) / epsilon
    return EvolutionResult(epsilon=epsilon, s=s, t=t, matrix=y,
                           log_scale=ls, steps=steps, est_error=err)


def evolve_sampled(family: GeneratorFamily, epsilon: float, times,
                   omega: OmegaProfile | None = None,
                   tol: float = 1e-8) -> list[EvolutionResult]:
    """Propagator from times[0] sampled at each of the (ascending) times."""
    times = list(times)
    eye = np.eye(family.dim, dtype=complex)
    _, samples, steps, err = integrate_matrix_ode(
        _schroedinger_rhs(family, epsilon, omega),
        times[0], times[-1], eye, tol, checkpoints=times)
    out = []
    for tt, m in zip(times, samples):
        ls = 0.0 if omega is None else omega.integral(times[0], tt) / epsilon
        out.append(EvolutionResult(epsilon=epsilon, s=times[0], t=tt, matrix=m,
                                   log_scale=ls, steps=steps, est_error=err))
    return out


def perturbation_bound_check(m_const: float, omega_fn, b_norm_fn,
                             s: float, t: float) -> float:
    """Evaluate the a-priori bound M * exp(integral of omega + M*||B||)."""
    if m_const < 1:
        raise ValueError("the stability constant M must be >= 1")
    val, _ = scipy.integrate.quad(
        lambda u: omega_fn(u) + m_const * b_norm_fn(u), s, t, limit=200)
    return float(m_const * np.exp(val))


# -- truncated perturbation series -------------------------------------------

def _gl_panels(a: float, b: float, n_panels: int, n_nodes: int):
    xs, ws = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(a, b, n_panels + 1)
    nodes, weights, panel_of = [], [], []
    for p in range(n_panels):
        lo, hi = edges[p], edges[p + 1]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes.append(mid + half * xs)
        weights.append(half * ws)
        panel_of.append(np.full(n_nodes, p))
    return edges, np.concatenate(nodes), np.concatenate(weights), np.concatenate(panel_of)


def _bary_weights(x: np.ndarray) -> np.ndarray:
    w = np.ones_like(x)
    for i in range(len(x)):
        w[i] = 1.0 / np.prod(x[i] - np.delete(x, i))
    return w


def dyson_expand(base: GeneratorFamily, perturbation: GeneratorFamily,
                 epsilon: float, s: float, t: float, order: int,
                 tol: float = 1e-11, n_panels: int = 4,
                 n_nodes: int = 12) -> np.ndarray:
    """Truncated interaction series for i*eps*dS/dt = (A(t) + eps*B(t)) S.

    Term n is the n-fold nested integral (-i)^n int T B T B ... B T; each
    nesting level is integrated with composite Gauss-Legendre panels. The
    unperturbed propagators T(x,u) factor through the endpoint via
    T(x,u) = T(x,s) T(s,u), both obtained from one forward and one
    adjoint solve.
    """
    if order > 6:
        raise OrderTooHigh("series order capped at 6")
    if order < 0:
        raise ValueError("order must be nonnegative")
    if base.dim != perturbation.dim:
        raise ValueError("base and perturbation dimensions differ")
    dim = base.dim
    eye = np.eye(dim, dtype=complex)
    edges, nodes, weights, panel_of = _gl_panels(s, t, n_panels, n_nodes)
    all_pts = np.concatenate([nodes, [t]])

    # forward propagator F(x) = T(x, s) and adjoint G(x) = T(s, x)
    _, f_samp, _, _ = integrate_matrix_ode(
        lambda u, y: (-1j / epsilon) * (base(u) @ y), s, t, eye, tol,
        checkpoints=all_pts)
    _, g_samp, _, _ = integrate_matrix_ode(
        lambda u, y: (1j / epsilon) * (y @ base(u)), s, t, eye, tol,
        checkpoints=all_pts)
    f_nodes, f_end = np.array(f_samp[:-1]), f_samp[-1]
    g_nodes = np.array(g_samp[:-1])
    b_nodes = np.array([perturbation(u) for u in nodes])

    # fresh rule for the partial panel [edge, x]
    xs_in, ws_in = np.polynomial.legendre.leggauss(n_nodes)

    total = f_end.copy()
    level = f_nodes.copy()  # S_0 at the master nodes
    for _ in range(order):
        integrand = np.einsum("nij,njk,nkl->nil", g_nodes, b_nodes, level)
        # prefix sums of complete panels
        panel_sum = np.zeros((n_panels, dim, dim), dtype=complex)
        for p in range(n_panels):
            sel = panel_of == p
            panel_sum[p] = np.tensordot(weights[sel], integrand[sel], axes=(0, 0))
        prefix = np.concatenate([np.zeros((1, dim, dim), dtype=complex),
                                 np.cumsum(panel_sum, axis=0)])
        # cumulative integral at every master node
        cumulative = np.empty_like(level)
        for p in range(n_panels):
            sel = np.nonzero(panel_of == p)[0]
            xloc = nodes[sel]
            wloc = _bary_weights(xloc)
            floc = integrand[sel]
            lo = edges[p]
            for idx in sel:
                x = nodes[idx]
                mid, half = 0.5 * (lo + x), 0.5 * (x - lo)
                pts = mid + half * xs_in
                # barycentric interpolation of the integrand within the panel
                d = pts[:, None] - xloc[None, :]
                near = np.abs(d) < 1e-14
                d[near] = 1.0
                coef = wloc[None, :] / d
                coef[near.any(axis=1)] = 0.0
                coef[near] = 1.0
                coef /= coef.sum(axis=1, keepdims=True)
                vals = np.tensordot(coef, floc, axes=(1, 0))
                cumulative[idx] = prefix[p] + half * np.tensordot(ws_in, vals, axes=(0, 0))
        full = prefix[n_panels]
        level = -1j * np.einsum("nij,njk->nik", f_nodes, cumulative)
        total = total + (-1j) * (f_end @ full)
        # prepare next level: S_{k} at nodes is already in `level`
    return total
