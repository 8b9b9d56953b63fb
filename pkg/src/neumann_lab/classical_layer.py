"""Classical observables on the (x, p) plane and the LD monoid acting on them.

An observable is a black-box vectorized callable ``f(x, p)``. LD maps are
smooth real functions that are diffeomorphisms onto their image (strictly
increasing here, with a positive derivative). Composition ``psi o f`` keeps
observables inside the represented space, which is the action the von Neumann
rule is stated for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError

DEFAULT_HALF_WIDTH = 6.0


@dataclass(frozen=True)
class LDFunction:
    """Smooth increasing real function with ``derivative > 0`` on ``domain``."""

    func: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    domain: tuple = (-math.inf, math.inf)
    image_closure: tuple = (-math.inf, math.inf)
    label: str = "psi"

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def in_domain(self, x) -> np.ndarray:
        lo, hi = self.domain
        x = np.asarray(x, dtype=float)
        return np.isfinite(x) & (x > lo) & (x < hi)

    def then(self, outer: LDFunction) -> LDFunction:
        """``outer o self``; derivative by the chain rule."""
        inner = self

        def f(x):
            return outer.func(inner.func(x))

        def df(x):
            return outer.derivative(inner.func(x)) * inner.derivative(x)

        lo, hi = inner.image_closure
        olo, ohi = outer.image_closure
        image = (outer(lo) if math.isfinite(lo) else olo, outer(hi) if math.isfinite(hi) else ohi)
        return LDFunction(f, df, inner.domain, (float(image[0]), float(image[1])),
                          f"{outer.label}.{inner.label}")

    def is_positive(self) -> bool:
        """Closure of the image lies inside ``(0, inf)``."""
        return self.image_closure[0] > 0

    def monotonicity_scan(self, n: int = 10_000, span: float = 10.0) -> bool:
        lo, hi = self.domain
        a = max(lo, -span) if math.isfinite(lo) else -span
        b = min(hi, span) if math.isfinite(hi) else span
        # stay strictly inside open domains
        pad = 1e-6 * (b - a)
        x = np.linspace(a + pad, b - pad, n)
        return bool(np.all(self.derivative(x) > 0) and np.all(np.diff(self(x)) > 0))


def ld_g() -> LDFunction:
    """``x -> arctan(x) + pi``, image ``(pi/2, 3 pi/2)``."""
    return LDFunction(lambda x: np.arctan(x) + np.pi,
                      lambda x: 1.0 / (1.0 + np.asarray(x, dtype=float) ** 2),
                      image_closure=(math.pi / 2, 3 * math.pi / 2), label="g")


def ld_arctan() -> LDFunction:
    return LDFunction(np.arctan, lambda x: 1.0 / (1.0 + np.asarray(x, dtype=float) ** 2),
                      image_closure=(-math.pi / 2, math.pi / 2), label="arctan")


def ld_affine(a: float, b: float) -> LDFunction:
    """``x -> a x + b`` with ``a > 0``."""
    if not a > 0:
        raise ValueError(f"affine LD map needs a positive slope, got {a}")
    return LDFunction(lambda x: a * np.asarray(x, dtype=float) + b,
                      lambda x: np.full(np.shape(x), float(a)),
                      label=f"affine:{a:g},{b:g}")


def ld_identity() -> LDFunction:
    return LDFunction(lambda x: np.asarray(x, dtype=float),
                      lambda x: np.ones(np.shape(x)), label="id")


def _smoothstep(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 1.0, 1.0, 0.0)
    mid = (u > 0) & (u < 1)
    um = u[mid]
    a = np.exp(-1.0 / um)
    b = np.exp(-1.0 / (1.0 - um))
    out[mid] = a / (a + b)
    return out


def _smoothstep_derivative(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    mid = (u > 0) & (u < 1)
    um = u[mid]
    a = np.exp(-1.0 / um)
    b = np.exp(-1.0 / (1.0 - um))
    da = a / um**2
    db = -b / (1.0 - um) ** 2
    out[mid] = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return out


def ld_q() -> LDFunction:
    """Increasing smooth map equal to ``x**2`` on ``[1/2, inf)``.

    Below 1/2 it blends into the tangent line ``x - 1/4``:
    ``q(x) = x - 1/4 + s(x) (x - 1/2)**2`` with a C-infinity step ``s`` that
    rises on ``(1/4, 1/2)``. Then ``q' >= 1/2`` everywhere.
    """
    def q(x):
        x = np.asarray(x, dtype=float)
        s = _smoothstep(4.0 * x - 1.0)
        return np.where(x >= 0.5, x * x, x - 0.25 + s * (x - 0.5) ** 2)

    def dq(x):
        x = np.asarray(x, dtype=float)
        s = _smoothstep(4.0 * x - 1.0)
        ds = 4.0 * _smoothstep_derivative(4.0 * x - 1.0)
        return np.where(x >= 0.5, 2.0 * x, 1.0 + ds * (x - 0.5) ** 2 + 2.0 * s * (x - 0.5))

    return LDFunction(q, dq, label="q")


@dataclass(frozen=True)
class ClassicalObservable:
    """Real function on phase-space points ``(x, p)``.

    ``positivity_witness`` is an LD map with image closure in ``(0, inf)``
    through which the observable factors; its presence certifies positivity.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str = "f"
    positivity_witness: Optional[LDFunction] = field(default=None, compare=False)

    def __call__(self, x, p):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x, p), dtype=float), np.broadcast(x, p).shape)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            c = float(other)
            return ClassicalObservable(lambda x, p: self(x, p) + c, f"({self.label}+{c:g})")
        return ClassicalObservable(lambda x, p: self(x, p) + other(x, p),
                                   f"({self.label}+{other.label})")

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            c = float(other)
            return ClassicalObservable(lambda x, p: c * self(x, p), f"{c:g}*{self.label}")
        return ClassicalObservable(lambda x, p: self(x, p) * other(x, p),
                                   f"{self.label}*{other.label}")

    __rmul__ = __mul__

    def __pow__(self, k: int):
        return ClassicalObservable(lambda x, p: self(x, p) ** k, f"{self.label}^{k}")

    def sample(self, half_width: float = DEFAULT_HALF_WIDTH, n: int = 101):
        """Values on an ``n x n`` grid over ``[-L, L]^2``."""
        axis = np.linspace(-half_width, half_width, n)
        xx, pp = np.meshgrid(axis, axis, indexing="ij")
        return self(xx, pp)


def constant(c: float) -> ClassicalObservable:
    return ClassicalObservable(lambda x, p: np.full(np.broadcast(x, p).shape, float(c)),
                               "one" if c == 1 else f"{c:g}")


def compose(psi: LDFunction, f: ClassicalObservable, half_width: float = DEFAULT_HALF_WIDTH,
            n: int = 101) -> ClassicalObservable:
    """``psi o f`` after checking that sampled values of ``f`` lie in ``psi``'s domain."""
    axis = np.linspace(-half_width, half_width, n)
    xx, pp = np.meshgrid(axis, axis, indexing="ij")
    vals = f(xx, pp)
    ok = psi.in_domain(vals)
    if not np.all(ok):
        i = np.argwhere(~ok)[0]
        raise DomainError(
            f"{f.label} takes value {vals[tuple(i)]!r} at (x, p) = "
            f"({xx[tuple(i)]:g}, {pp[tuple(i)]:g}), outside the domain {psi.domain} of {psi.label}")
    witness = psi if psi.is_positive() else None
    return ClassicalObservable(lambda x, p: psi(f(x, p)), f"{psi.label}({f.label})", witness)


def lemma_identity_residuals(j: ClassicalObservable, l: ClassicalObservable, x, p):
    """Pointwise residuals of the polarization identities behind ``(jl)^2 = j^2 l^2``.

    Returns ``(r1, r2, scale)`` with
    ``r1 = max |((j+l)^2 - j^2 - l^2)/2 - j l|`` and
    ``r2 = max |((j^2+l^2)^2 - j^4 - l^4)/2 - j^2 l^2|``; ``scale`` is the
    largest sampled ``|j|`` or ``|l|`` (at least 1).
    """
    jv, lv = j(x, p), l(x, p)
    r1 = np.max(np.abs(((jv + lv) ** 2 - jv**2 - lv**2) / 2 - jv * lv))
    j2, l2 = jv**2, lv**2
    r2 = np.max(np.abs(((j2 + l2) ** 2 - j2**2 - l2**2) / 2 - j2 * l2))
    scale = max(1.0, float(np.max(np.abs(jv))), float(np.max(np.abs(lv))))
    return float(r1), float(r2), scale


OBSERVABLES = {
    "x": ClassicalObservable(lambda x, p: x, "x"),
    "p": ClassicalObservable(lambda x, p: p, "p"),
    "xp": ClassicalObservable(lambda x, p: x * p, "xp"),
    "h": ClassicalObservable(lambda x, p: x * x + p * p, "h"),
    "one": constant(1.0),
}


def observable(name: str) -> ClassicalObservable:
    try:
        return OBSERVABLES[name]
    except KeyError:
        raise KeyError(f"unknown observable {name!r}; known: {sorted(OBSERVABLES)}") from None


def ld_map(name: str) -> LDFunction:
    """Look up ``g``, ``q``, ``arctan``, ``id`` or ``affine:a,b``."""
    if name.startswith("affine:"):
        a, b = (float(v) for v in name.split(":", 1)[1].split(","))
        return ld_affine(a, b)
    table = {"g": ld_g, "q": ld_q, "arctan": ld_arctan, "id": ld_identity}
    try:
        return table[name]()
    except KeyError:
        raise KeyError(f"unknown LD map {name!r}; known: {sorted(table)} or affine:a,b") from None
