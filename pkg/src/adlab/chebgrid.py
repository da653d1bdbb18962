"""Chebyshev collocation grid on [0,1].

All time-dependent quantities in the hierarchy live as samples on a
Chebyshev-Gauss-Lobatto grid; derivatives are spectral (never finite
differences) and integrals come from the Chebyshev antiderivative, so
that integral(s,t) is additive to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .errors import GridTooCoarse

MIN_NODES = 33


def _diff_matrix(n: int) -> np.ndarray:
    # Trefethen-style differentiation matrix on x_i = cos(pi*i/(n-1)),
    # reindexed to ascending x and rescaled to t = (x+1)/2 in [0,1].
    m = n - 1
    x = np.cos(np.pi * np.arange(n) / m)
    c = np.ones(n)
    c[0] = 2.0
    c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dx = x[:, None] - x[None, :] + np.eye(n)
    d = np.outer(c, 1.0 / c) / dx
    d -= np.diag(d.sum(axis=1))
    d = d[::-1, ::-1]  # ascending node order
    return 2.0 * d  # d/dt = 2 d/dx


@dataclass(frozen=True)
class TimeGrid:
    """Chebyshev-Gauss-Lobatto nodes on [0,1] with spectral calculus."""

    n: int = 65
    nodes: np.ndarray = field(init=False, repr=False)
    diff: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < MIN_NODES:
            raise ValueError(f"grid needs at least {MIN_NODES} nodes, got {self.n}")
        j = np.arange(self.n)
        t = 0.5 * (1.0 - np.cos(np.pi * j / (self.n - 1)))
        t[0], t[-1] = 0.0, 1.0
        object.__setattr__(self, "nodes", t)
        object.__setattr__(self, "diff", _diff_matrix(self.n))

    def refined(self) -> "TimeGrid":
        """Grid with doubled polynomial degree."""
        return TimeGrid(2 * self.n - 1)

    # -- sampling ----------------------------------------------------------

    def sample(self, fn) -> np.ndarray:
        """Stack fn(t) over the nodes along axis 0."""
        return np.array([np.asarray(fn(t)) for t in self.nodes])

    def derivative(self, values: np.ndarray) -> np.ndarray:
        """Spectral derivative along axis 0 of node-sampled values."""
        return np.tensordot(self.diff, np.asarray(values), axes=(1, 0))

    # -- Chebyshev series --------------------------------------------------

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        """Chebyshev coefficients (in x = 2t-1) of the interpolant, axis 0."""
        v = np.asarray(values, dtype=complex)
        m = self.n - 1
        # values are ascending in t, i.e. descending in the classical x_i;
        # build the DCT-I sum explicitly (n is small).
        jj = np.arange(self.n)
        cosmat = np.cos(np.pi * np.outer(jj, jj) / m)
        w = np.ones(self.n)
        w[0] = 0.5
        w[-1] = 0.5
        vx = v[::-1]  # reorder to x_i = cos(pi*i/m)
        coeff = (2.0 / m) * np.tensordot(cosmat * w[None, :], vx, axes=(1, 0))
        coeff[0] *= 0.5
        coeff[-1] *= 0.5
        return coeff

    def evaluate_series(self, coeff: np.ndarray, t) -> np.ndarray:
        x = 2.0 * np.asarray(t) - 1.0
        flat = coeff.reshape(coeff.shape[0], -1)
        out = np.stack([_cheb.chebval(x, flat[:, i]) for i in range(flat.shape[1])], axis=-1)
        return out.reshape(np.shape(x) + coeff.shape[1:])

    def antiderivative_coefficients(self, coeff: np.ndarray) -> np.ndarray:
        """Coefficients of t -> integral_0^t f, same axis convention."""
        flat = coeff.reshape(self.n, -1)
        out = np.zeros((self.n + 1, flat.shape[1]), dtype=complex)
        for i in range(flat.shape[1]):
            # dt = dx/2; fix the constant so the antiderivative vanishes at x=-1
            ci = _cheb.chebint(flat[:, i]) * 0.5
            ci[0] -= _cheb.chebval(-1.0, ci)
            out[: ci.shape[0], i] = ci
        return out.reshape((self.n + 1,) + coeff.shape[1:])

    def cumulative_integral(self, values: np.ndarray) -> np.ndarray:
        """integral_0^{t_j} of the interpolant, sampled at the nodes."""
        anti = self.antiderivative_coefficients(self.coefficients(values))
        x = 2.0 * self.nodes - 1.0
        flat = anti.reshape(self.n + 1, -1)
        out = np.stack([_cheb.chebval(x, flat[:, i]) for i in range(flat.shape[1])], axis=-1)
        return out.reshape((self.n,) + np.asarray(values).shape[1:])

    def integral(self, values: np.ndarray, s: float, t: float):
        """integral_s^t of the interpolant of node-sampled values."""
        anti = self.antiderivative_coefficients(self.coefficients(values))
        flat = anti.reshape(self.n + 1, -1)
        xs, xt = 2.0 * s - 1.0, 2.0 * t - 1.0
        out = np.array([_cheb.chebval(xt, flat[:, i]) - _cheb.chebval(xs, flat[:, i])
                        for i in range(flat.shape[1])])
        return out.reshape(np.asarray(values).shape[1:]) if out.size > 1 else out[0]

    # -- barycentric interpolation ------------------------------------------

    def interpolate(self, values: np.ndarray, t: float) -> np.ndarray:
        """Barycentric evaluation of the interpolant at a single time."""
        v = np.asarray(values)
        diff = t - self.nodes
        hit = np.argmin(np.abs(diff))
        if abs(diff[hit]) < 1e-14:
            return v[hit]
        w = np.ones(self.n)
        w[1::2] = -1.0
        w[0] *= 0.5
        w[-1] *= 0.5
        coef = w / diff
        return np.tensordot(coef, v, axes=(0, 0)) / coef.sum()

    def interpolant(self, values: np.ndarray):
        v = np.asarray(values)
        return lambda t: self.interpolate(v, t)

    # -- resolution diagnostics ----------------------------------------------

    def tail_fraction(self, values: np.ndarray) -> float:
        """Relative size of the trailing Chebyshev coefficients."""
        coeff = self.coefficients(values)
        flat = np.abs(coeff.reshape(self.n, -1)).max(axis=1)
        top = flat.max()
        if top == 0.0:
            return 0.0
        k = max(3, self.n // 16)
        return float(flat[-k:].max() / top)

    def check_resolved(self, values: np.ndarray, rtol: float = 1e-6, what: str = "sampled family"):
        frac = self.tail_fraction(values)
        if frac > rtol:
            raise GridTooCoarse(
                f"{what} unresolved on {self.n}-node grid "
                f"(coefficient tail {frac:.2e} > {rtol:.0e})"
            )
