"""Closed forms of the rotated 3x3 model, used as ground truth.

The constant part H - eps*L is diagonalizable with spectrum
{1, +sqrt(eps*a*k), -sqrt(eps*a*k)}; its projectors are explicit rational
matrices, which gives the full propagator, the transition growth law and
the exactly intertwined ("starred") projectors in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateParams, WrongSignParams
from .families import _intro_matrices, intro_example, intro_rotation
from .propagate import OmegaProfile, evolve_sampled
from .spectral import operator_norm

#: denominators in the printed projectors blow up when eps*a*k -> 1
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class IntroParams:
    a: complex
    k: complex

    def __post_init__(self):
        if self.a == 0 or self.k == 0:
            raise ValueError("parameters a and k must be nonzero")


class IntroClosedForm:
    """All closed-form objects of the model at one (a, k, eps)."""

    def __init__(self, params: IntroParams, epsilon: float):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if abs(1.0 - epsilon * params.a * params.k) < DEGENERACY_TOL:
            raise DegenerateParams("1 - eps*a*k vanishes; projector formulas break down")
        self.params = params
        self.epsilon = epsilon
        self.h, self.l = _intro_matrices(params.a, params.k)
        self._s, self._s_inv = intro_rotation(params.a, params.k)

    # -- spectral data of H - eps*L ------------------------------------------

    @cached_property
    def lambda_plus(self) -> complex:
        # principal branch; for a*k < 0 this is +i*sqrt(eps*|ak|)
        return complex(np.sqrt(complex(self.epsilon * self.params.a * self.params.k)))

    @cached_property
    def p1(self) -> np.ndarray:
        eps, a, k = self.epsilon, self.params.a, self.params.k
        den = 1.0 - eps * a * k
        return np.array([
            [0, 0, eps * k / den],
            [0, 0, eps ** 2 * k ** 2 / den],
            [0, 0, 1.0],
        ], dtype=complex)

    def _p_pm(self, lp: complex, lm: complex) -> np.ndarray:
        eps, a, k = self.epsilon, self.params.a, self.params.k
        d = lp - lm
        return np.array([
            [lp / d, a / d, lp * eps * k / (d * (lp - 1.0))],
            [eps * k / d, lp / d, eps ** 2 * k ** 2 / (d * (lp - 1.0))],
            [0, 0, 0],
        ], dtype=complex)

    @cached_property
    def p_plus(self) -> np.ndarray:
        return self._p_pm(self.lambda_plus, -self.lambda_plus)

    @cached_property
    def p_minus(self) -> np.ndarray:
        return self._p_pm(-self.lambda_plus, self.lambda_plus)

    # -- time-dependent objects ----------------------------------------------

    def rotation(self, t: float) -> np.ndarray:
        return self._s(t)

    def rotation_inv(self, t: float) -> np.ndarray:
        return self._s_inv(t)

    def omega_matrix(self, t: float) -> np.ndarray:
        """Omega(t) = e^{-it(H - eps L)/eps} from the spectral representation."""
        eps = self.epsilon
        lp = self.lambda_plus
        exps = np.array([np.exp(-1j * t / eps),
                         np.exp(-1j * t * lp / eps),
                         np.exp(1j * t * lp / eps)])
        if np.any(~np.isfinite(exps)):
            raise DegenerateParams("dynamical phase overflows double precision")
        return exps[0] * self.p1 + exps[1] * self.p_plus + exps[2] * self.p_minus

    def starred(self, j: int, t: float) -> np.ndarray:
        """Projectors the evolution follows exactly: S(t) P_j(eps) S(t)^-1."""
        if j == 1:
            base = self.p1
        elif j == 0:
            base = self.p_plus + self.p_minus
        else:
            raise ValueError("group index must be 0 or 1")
        return self._s(t) @ base @ self._s_inv(t)


def closed_form_omega(params: IntroParams, epsilon: float, t: float) -> np.ndarray:
    return IntroClosedForm(params, epsilon).omega_matrix(t)


def closed_form_transition(params: IntroParams, epsilon: float, t: float):
    """Leading-order transition norm, as (value, log_scale).

    Valid in the ak < 0 regime where the split eigenvalues are purely
    imaginary and the growing branch dominates.
    """
    ak = params.a * params.k
    if abs(ak.imag) > 1e-14 * abs(ak) or ak.real >= 0:
        raise WrongSignParams("closed-form transition requires real ak < 0")
    eps, k = epsilon, params.k
    root = np.sqrt(abs(ak))
    vec = np.array([-eps * k / 2.0,
                    1j * eps ** 1.5 * k ** 2 / (2.0 * root),
                    0.0])
    value = float(np.linalg.norm(vec))
    log_scale = float(t * root / np.sqrt(eps))
    return value, log_scale


def starred_projector_intertwining(params: IntroParams, epsilon: float,
                                   t: float, tol: float = 1e-9) -> dict:
    """Residuals of U(t,0) P*_j(0) = P*_j(t) U(t,0) with propagated U.

    Returns per-group residuals for the starred projectors (an exact
    identity, so the residual is pure integrator noise) together with the
    residuals for the instantaneous spectral projectors of H(t), which
    grow exponentially instead.
    """
    cf = IntroClosedForm(params, epsilon)
    family = intro_example(params.a, params.k)
    omega = OmegaProfile.from_family(family)
    res = evolve_sampled(family, epsilon, [0.0, t], omega=omega, tol=tol)[-1]
    u = res.matrix  # rescaled frame
    out = {}
    for j in (0, 1):
        star0, start = cf.starred(j, 0.0), cf.starred(j, t)
        out[j] = operator_norm(u @ star0 - start @ u)
    return out
