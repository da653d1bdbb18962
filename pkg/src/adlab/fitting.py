"""Scaling-law fits in the log domain.

Models:
  exp_inverse_eps      v ~ C * exp(-kappa/eps)
  stretched_exp        v ~ c * exp(d/eps^beta), beta scanned then refined
  factorial_geometric  delta_q ~ b * q! * (eps/(e*g))^q at fixed eps
  power_law            v ~ c * (1/eps)^p
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateData, InsufficientData

BETA_GRID = np.arange(0.05, 0.9501, 0.01)
#: relative spread below which a growth series counts as bounded (d = 0)
BOUNDED_SPREAD = math.log(1.1)


@dataclass(frozen=True)
class GrowthFit:
    """Fitted scaling law with goodness-of-fit and secondary outputs."""

    model: str
    params: dict
    r_squared: float
    aux: dict = field(default_factory=dict)


def _linear(x, y):
    """Least-squares line y = m*x + b with r^2; raises on degenerate y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.ptp(y) < 1e-12:
        raise DegenerateData("all fitted values coincide")
    m, b = np.polyfit(x, y, 1)
    resid = y - (m * x + b)
    sstot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / sstot
    return float(m), float(b), float(r2)


def log_values(series) -> tuple[np.ndarray, np.ndarray]:
    """Split (eps, value, log_scale) triples into eps and log(value)+log_scale."""
    eps, logv = [], []
    for e, v, ls in series:
        if v <= 0:
            raise DegenerateData(f"nonpositive value {v} at eps={e}")
        eps.append(float(e))
        logv.append(math.log(v) + float(ls))
    return np.array(eps), np.array(logv)


def fit_exp_inverse_eps(eps, logv) -> GrowthFit:
    """log v = log C - kappa/eps."""
    m, b, r2 = _linear(1.0 / np.asarray(eps), logv)
    return GrowthFit(model="exp_inverse_eps",
                     params={"C": math.exp(min(b, 700.0)), "kappa": -m},
                     r_squared=r2)


def fit_power_law(eps, logv) -> GrowthFit:
    """log v = log c + p * log(1/eps)."""
    m, b, r2 = _linear(np.log(1.0 / np.asarray(eps)), logv)
    return GrowthFit(model="power_law",
                     params={"c": math.exp(min(b, 700.0)), "p": m},
                     r_squared=r2)


def _stretched_r2(eps, logv, beta):
    try:
        m, b, r2 = _linear(eps ** -beta, logv)
    except DegenerateData:
        return -np.inf, 0.0, 0.0
    return r2, m, b


def fit_stretched_exp(eps, logv) -> GrowthFit:
    """log v = log c + d/eps^beta; beta by grid scan plus golden-section
    refinement of r^2 around the best grid point."""
    eps = np.asarray(eps, dtype=float)
    logv = np.asarray(logv, dtype=float)
    if np.ptp(logv) < BOUNDED_SPREAD:
        c = math.exp(float(np.mean(logv)))
        return GrowthFit(model="stretched_exp",
                         params={"c": c, "d": 0.0, "beta": 0.0},
                         r_squared=1.0, aux={"verdict": "bounded"})
    scores = [_stretched_r2(eps, logv, b)[0] for b in BETA_GRID]
    best = int(np.argmax(scores))
    lo = BETA_GRID[max(best - 1, 0)]
    hi = BETA_GRID[min(best + 1, len(BETA_GRID) - 1)]
    # golden-section maximization of r^2(beta)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1 = _stretched_r2(eps, logv, x1)[0]
    f2 = _stretched_r2(eps, logv, x2)[0]
    while hi - lo > 1e-6:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = _stretched_r2(eps, logv, x2)[0]
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = _stretched_r2(eps, logv, x1)[0]
    beta = 0.5 * (lo + hi)
    r2, m, b = _stretched_r2(eps, logv, beta)
    aux = {}
    if np.all(logv > 0):
        # direct exponent estimate log(log v) ~ log d + beta*log(1/eps);
        # immune to the power-law prefactor that biases the scan
        slope, _, r2ll = _linear(np.log(1.0 / eps), np.log(logv))
        aux["beta_loglog"] = slope
        aux["beta_loglog_r2"] = r2ll
    return GrowthFit(model="stretched_exp",
                     params={"c": math.exp(min(b, 700.0)), "d": m, "beta": float(beta)},
                     r_squared=r2, aux=aux)


def fit_factorial_geometric(qs, logdeltas, epsilon: float) -> GrowthFit:
    """log delta_q - log q! = log b + q * log(eps/(e*g))."""
    qs = np.asarray(qs, dtype=float)
    y = np.asarray(logdeltas, dtype=float) - np.array(
        [math.lgamma(q + 1.0) for q in qs])
    m, b, r2 = _linear(qs, y)
    g = epsilon * math.exp(-(m + 1.0))
    return GrowthFit(model="factorial_geometric",
                     params={"b": math.exp(min(b, 700.0)), "g": g},
                     r_squared=r2)


_MODELS = {
    "exp_inverse_eps": fit_exp_inverse_eps,
    "stretched_exp": fit_stretched_exp,
    "power_law": fit_power_law,
}


def fit(series, model: str) -> GrowthFit:
    """Shared fitting entry point on (eps, value, log_scale) triples."""
    if model == "factorial_geometric":
        raise ValueError("factorial_geometric fits level indices, not an eps grid")
    if model not in _MODELS:
        raise ValueError(f"unknown model {model!r}")
    series = list(series)
    if len(series) < 4:
        raise InsufficientData(f"need at least 4 points, got {len(series)}")
    eps, logv = log_values(series)
    if len(set(eps.tolist())) != len(eps):
        raise InsufficientData("epsilon values must be distinct")
    return _MODELS[model](eps, logv)
