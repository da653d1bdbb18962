"""Time-dependent generator families H(t) on [0,1] with exact derivatives.

Every constructor supplies a closed-form derivative; finite differences
are only ever a cross-check (the hierarchy consumes derivatives
repeatedly and error would compound).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, DimensionMismatch


@dataclass(frozen=True)
class GeneratorFamily:
    """Immutable map t -> H(t) with derivative access."""

    dim: int
    kind: str
    params: dict = field(repr=False)
    _eval: Callable = field(repr=False)
    _deriv: Callable = field(repr=False)

    def __call__(self, t: float) -> np.ndarray:
        return self._eval(t)

    def deriv(self, t: float) -> np.ndarray:
        return self._deriv(t)


def _intro_matrices(a: complex, k: complex):
    h = np.array([[0, a, 0], [0, 0, 0], [0, 0, 1]], dtype=complex)
    l = np.array([[0, 0, -k], [-k, 0, 0], [0, 0, 0]], dtype=complex)
    return h, l


def intro_example(a: complex, k: complex) -> GeneratorFamily:
    """Rotated 3x3 model H(t) = e^{-itL} H e^{itL} with a rank-one
    eigennilpotent on the doubly degenerate eigenvalue 0.

    L here is nilpotent (L^3 = 0), so the rotation is an exact quadratic
    polynomial in t.
    """
    if a == 0 or k == 0:
        raise ValueError("parameters a and k must be nonzero")
    h, l = _intro_matrices(a, k)
    l2 = l @ l
    eye = np.eye(3, dtype=complex)

    def s_of(t):
        return eye - 1j * t * l - 0.5 * t * t * l2

    def ev(t):
        return s_of(t) @ h @ s_of(-t)

    def dv(t):
        ht = ev(t)
        return -1j * (l @ ht - ht @ l)

    return GeneratorFamily(dim=3, kind="intro_example",
                           params={"a": complex(a), "k": complex(k)},
                           _eval=ev, _deriv=dv)


def intro_rotation(a: complex, k: complex):
    """The exact rotation S(t)=e^{-itL} of the intro model and its inverse."""
    _, l = _intro_matrices(a, k)
    l2 = l @ l
    eye = np.eye(3, dtype=complex)

    def s_of(t):
        return eye - 1j * t * l - 0.5 * t * t * l2

    return s_of, (lambda t: s_of(-t))


def nilpotent_example() -> GeneratorFamily:
    """2x2 analytic family with N(t)^2 = 0 identically and rank one for t != 0."""

    def ev(t):
        return np.array([[t, -1.0], [t * t, -t]], dtype=complex)

    def dv(t):
        return np.array([[1.0, 0.0], [2.0 * t, -1.0]], dtype=complex)

    return GeneratorFamily(dim=2, kind="nilpotent_example", params={}, _eval=ev, _deriv=dv)


def polynomial_family(coeffs) -> GeneratorFamily:
    """H(t) = sum_p coeffs[p] t^p with the exact derivative."""
    mats = [np.asarray(c, dtype=complex) for c in coeffs]
    if not mats:
        raise DimensionMismatch("polynomial family needs at least one coefficient")
    dim = mats[0].shape[0]
    for m in mats:
        if m.shape != (dim, dim):
            raise DimensionMismatch(
                f"coefficient shapes differ: {m.shape} vs {(dim, dim)}"
            )
    stack = np.array(mats)

    def ev(t):
        out = np.zeros((dim, dim), dtype=complex)
        for m in stack[::-1]:
            out = out * t + m
        return out

    def dv(t):
        out = np.zeros((dim, dim), dtype=complex)
        for p in range(len(stack) - 1, 0, -1):
            out = out * t + p * stack[p]
        return out

    return GeneratorFamily(dim=dim, kind="polynomial",
                           params={"coeffs": stack}, _eval=ev, _deriv=dv)


def two_level(delta: float, coupling: float) -> GeneratorFamily:
    """Real-symmetric avoided crossing: diagonal tanh sweep of width delta
    against a constant off-diagonal coupling; the gap never drops below
    |coupling|."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    c = float(coupling)
    d = float(delta)

    def ev(t):
        th = np.tanh((t - 0.5) / d)
        return 0.5 * np.array([[th, c], [c, -th]], dtype=complex)

    def dv(t):
        sech2 = 1.0 / np.cosh((t - 0.5) / d) ** 2
        return 0.5 * (sech2 / d) * np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

    return GeneratorFamily(dim=2, kind="two_level",
                           params={"delta": d, "coupling": c}, _eval=ev, _deriv=dv)


def rotated_constant(h0, l) -> GeneratorFamily:
    """H(t) = e^{-itL} H0 e^{itL} for arbitrary constant matrices."""
    h0 = np.asarray(h0, dtype=complex)
    l = np.asarray(l, dtype=complex)
    if h0.shape != l.shape or h0.ndim != 2 or h0.shape[0] != h0.shape[1]:
        raise DimensionMismatch("H0 and L must be square matrices of equal size")

    def ev(t):
        s = sla.expm(-1j * t * l)
        return s @ h0 @ sla.expm(1j * t * l)

    def dv(t):
        ht = ev(t)
        return -1j * (l @ ht - ht @ l)

    return GeneratorFamily(dim=h0.shape[0], kind="rotated_constant",
                           params={"h0": h0, "l": l}, _eval=ev, _deriv=dv)


# -- declarative config specs ------------------------------------------------

def _matrix_to_spec(m: np.ndarray):
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def _matrix_from_spec(spec):
    try:
        return np.array([[complex(re, im) for re, im in row] for row in spec])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed matrix entry grid: {exc}") from exc


def family_to_spec(fam: GeneratorFamily) -> dict:
    """Declarative form used in experiment configs (round-trips exactly)."""
    if fam.kind == "intro_example":
        a, k = fam.params["a"], fam.params["k"]
        return {"kind": "intro_example", "a": [a.real, a.imag], "k": [k.real, k.imag]}
    if fam.kind == "nilpotent_example":
        return {"kind": "nilpotent_example"}
    if fam.kind == "two_level":
        return {"kind": "two_level", "delta": fam.params["delta"],
                "coupling": fam.params["coupling"]}
    if fam.kind == "polynomial":
        return {"kind": "polynomial",
                "coeffs": [_matrix_to_spec(c) for c in fam.params["coeffs"]]}
    if fam.kind == "rotated_constant":
        return {"kind": "rotated_constant",
                "h0": _matrix_to_spec(fam.params["h0"]),
                "l": _matrix_to_spec(fam.params["l"])}
    raise ConfigError(f"unknown family kind {fam.kind!r}")


def family_from_spec(spec: dict) -> GeneratorFamily:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("family spec must be an object with a 'kind' field")
    kind = spec["kind"]
    try:
        if kind == "intro_example":
            return intro_example(complex(*spec["a"]), complex(*spec["k"]))
        if kind == "nilpotent_example":
            return nilpotent_example()
        if kind == "two_level":
            return two_level(float(spec["delta"]), float(spec["coupling"]))
        if kind == "polynomial":
            return polynomial_family([_matrix_from_spec(c) for c in spec["coeffs"]])
        if kind == "rotated_constant":
            return rotated_constant(_matrix_from_spec(spec["h0"]),
                                    _matrix_from_spec(spec["l"]))
    except KeyError as exc:
        raise ConfigError(f"family spec for {kind!r} is missing field {exc}") from exc
    raise ConfigError(f"unknown family kind {kind!r}")
