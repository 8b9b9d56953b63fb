"""Truncated Weyl quantization on the harmonic-oscillator basis.

Matrix elements are phase-space integrals against cross-Wigner kernels,

    <m|Q(f)|m+l> = (-1)^m / (pi hbar) * int f(x, p) ell_m^(l)(2 r^2 / hbar) e^{-i l theta} dx dp,

where ``ell_m^(l)(y) = sqrt(m!/(m+l)!) y^(l/2) e^(-y/2) L_m^(l)(y)`` are
normalized Laguerre functions and ``(r, theta)`` are polar coordinates of
``(x, p)``. Two quadrature engines evaluate the integral:

``"polar"`` (default)
    Gauss-Laguerre in ``r^2 / hbar`` times a uniform angular rule (FFT).
    The kernel's angular dependence is a single Fourier mode, so the cost is
    O(N^2 Q) and arctan-type observables converge quickly.
``"hermite"``
    Tensor Gauss-Hermite in ``(x, p)`` with Hermite-function weights. Cost
    O(N^2 Q^2); fine for N up to about 64.

Both rules are exact for polynomial observables once ``quad_order >= 2N``.
CCR and symmetrization identities only hold on the upper-left block away
from the truncation edge, because ``trace([X, P]) = 0`` at finite N.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal
from scipy.special import gammaln

from .classical_layer import (ClassicalObservable, LDFunction, compose, constant, ld_affine,
                              ld_g, ld_q, observable)
from .errors import QuadratureAccuracyError
from .operator_core import HermitianOperator, commutator, functional_calculus, operator_norm

CONVERGENCE_RTOL = 1e-6
AXIOM_THRESHOLD = 1e-6
DEFAULT_MARGIN = 8


def _scaled_three_term(n, z, start_log, step):
    """Run a three-term recurrence with per-point rescaling.

    Yields ``(j, value, scaled, logscale)`` for ``j = 0..n-1``; ``value`` is
    the true j-th term and equals ``scaled * exp(logscale)``.
    ``step(j, cur, prev)`` returns term ``j+1`` from scaled terms ``j`` and
    ``j-1``.
    """
    prev = np.zeros_like(z)
    cur = np.ones_like(z)
    logscale = np.array(start_log, dtype=float, copy=True)
    for j in range(n):
        with np.errstate(under="ignore", invalid="ignore"):
            yield j, cur * np.exp(logscale), cur, logscale
        nxt = step(j, cur, prev)
        big = np.maximum(np.abs(nxt), np.abs(cur))
        sc = np.where(big > 1e150, big, 1.0)
        prev, cur = cur / sc, nxt / sc
        logscale = logscale + np.log(sc)


def _log_christoffel(n, z, start_log, step):
    logs = np.full_like(z, -np.inf)
    for _, _, cur, logscale in _scaled_three_term(n, z, start_log, step):
        with np.errstate(divide="ignore"):
            logs = np.logaddexp(logs, 2.0 * (np.log(np.abs(cur)) + logscale))
    return logs


@lru_cache(maxsize=32)
def gauss_hermite_function_rule(n: int):
    """Nodes ``t`` and weights ``w e^{t^2}`` of the n-point Gauss-Hermite rule.

    The scaled weights are ``1 / sum_k h_k(t)^2`` over orthonormal Hermite
    functions, which stays finite where the plain weights underflow.
    """
    k = np.arange(1, n, dtype=float)
    t = eigvalsh_tridiagonal(np.zeros(n), np.sqrt(k / 2.0))

    def step(j, cur, prev):
        return np.sqrt(2.0 / (j + 1)) * t * cur - np.sqrt(j / (j + 1)) * prev

    logs = _log_christoffel(n, t, -0.25 * math.log(math.pi) - t**2 / 2, step)
    w = np.exp(-logs)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


@lru_cache(maxsize=32)
def gauss_laguerre_function_rule(n: int):
    """Nodes ``z`` and weights ``w e^{z}`` of the n-point Gauss-Laguerre rule."""
    k = np.arange(1, n, dtype=float)
    z = eigvalsh_tridiagonal(2.0 * np.arange(n) + 1.0, -k)

    def step(j, cur, prev):
        return ((2 * j + 1 - z) * cur - j * prev) / (j + 1)

    logs = _log_christoffel(n, z, -z / 2, step)
    w = np.exp(-logs)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def hermite_functions(t, n: int) -> np.ndarray:
    """Orthonormal Hermite functions ``h_k(t)``, ``k < n``; shape ``(n, len(t))``."""
    t = np.asarray(t, dtype=float)

    def step(j, cur, prev):
        return np.sqrt(2.0 / (j + 1)) * t * cur - np.sqrt(j / (j + 1)) * prev

    out = np.empty((n,) + t.shape)
    for j, val, _, _ in _scaled_three_term(n, t, -0.25 * math.log(math.pi) - t**2 / 2, step):
        out[j] = val
    return out


def laguerre_functions(y, n: int, l: int) -> np.ndarray:
    """Normalized Laguerre functions ``ell_m^(l)(y)`` for ``m < n``; shape ``(n, len(y))``."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        start = 0.5 * l * np.log(y) - 0.5 * y - 0.5 * gammaln(l + 1) if l else -0.5 * y

    def step(m, cur, prev):
        return ((2 * m + 1 + l - y) * cur - math.sqrt(m * (m + l)) * prev) / math.sqrt(
            (m + 1) * (m + 1 + l))

    out = np.empty((n,) + y.shape)
    for m, val, _, _ in _scaled_three_term(n, y, start, step):
        out[m] = val
    return np.nan_to_num(out, nan=0.0)


@dataclass(frozen=True)
class QuantizationContext:
    """Truncation dimension, Planck constant and quadrature settings.

    ``quad_order`` defaults to ``4 N`` and must be at least ``2 N``.
    """

    N: int
    hbar: float = 1.0
    quad_order: int = 0
    method: str = "polar"
    margin: int | None = None
    check_convergence: bool = True

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"N must be at least 2, got {self.N}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if self.quad_order == 0:
            object.__setattr__(self, "quad_order", 4 * self.N)
        if self.margin is None:
            object.__setattr__(self, "margin", min(DEFAULT_MARGIN, self.N - 1))
        if self.quad_order < 2 * self.N:
            raise ValueError(f"quad_order {self.quad_order} is below 2N = {2 * self.N}")
        if self.method not in ("polar", "hermite"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if not 0 <= self.margin < self.N:
            raise ValueError(f"margin must lie in [0, N), got {self.margin}")

    @property
    def block(self) -> int:
        return self.N - self.margin

    @property
    def basis(self) -> np.ndarray:
        """Hermite functions sampled at the Gauss-Hermite nodes, shape ``(quad_order, N)``."""
        t, _ = gauss_hermite_function_rule(self.quad_order)
        return hermite_functions(t, self.N).T

    def basis_orthonormality_error(self) -> float:
        _, w = gauss_hermite_function_rule(self.quad_order)
        b = self.basis
        return float(np.abs((b.T * w) @ b - np.eye(self.N)).max())

    def quantize(self, f: ClassicalObservable) -> HermitianOperator:
        return weyl_quantize(self, f)

    def metadata(self) -> dict:
        return {"N": self.N, "hbar": self.hbar, "quad_order": self.quad_order,
                "margin": self.margin, "method": self.method}


def _weyl_hermite(f, N, hbar, order):
    t, w = gauss_hermite_function_rule(order)
    x = math.sqrt(hbar) * t
    xx, pp = np.meshgrid(x, x, indexing="ij")
    weighted = (f(xx, pp) * (hbar * np.outer(w, w))).ravel()
    y = (2.0 * (t[:, None] ** 2 + t[None, :] ** 2)).ravel()
    theta = np.arctan2(pp, xx).ravel()
    out = np.zeros((N, N), dtype=complex)
    for l in range(N):
        ell = laguerre_functions(y, N - l, l)
        vals = ell @ (np.exp(-1j * l * theta) * weighted)
        _fill_band(out, l, vals / (math.pi * hbar))
    return out


def _weyl_polar(f, N, hbar, order):
    z, w = gauss_laguerre_function_rule(order // 2)
    n_angle = 8 * order
    theta = 2.0 * math.pi * np.arange(n_angle) / n_angle
    r = np.sqrt(hbar * z)
    vals = f(r[:, None] * np.cos(theta), r[:, None] * np.sin(theta))
    modes = np.fft.fft(vals, axis=1) / n_angle
    y = 2.0 * z
    out = np.zeros((N, N), dtype=complex)
    for l in range(N):
        ell = laguerre_functions(y, N - l, l)
        _fill_band(out, l, ell @ (w * modes[:, l]))
    return out


def _fill_band(out, l, vals):
    m = np.arange(vals.size)
    vals = np.where(m % 2, -vals, vals)
    out[m, m + l] = vals
    if l:
        out[m + l, m] = vals.conj()


_ENGINES = {"polar": _weyl_polar, "hermite": _weyl_hermite}


def weyl_quantize(ctx: QuantizationContext, f: ClassicalObservable) -> HermitianOperator:
    """N x N truncation of the Weyl quantization of ``f``.

    With ``ctx.check_convergence`` the integral is repeated at
    ``quad_order + 8``; a relative shift above 1e-6 raises
    ``QuadratureAccuracyError``.
    """
    engine = _ENGINES[ctx.method]
    m = engine(f, ctx.N, ctx.hbar, ctx.quad_order)
    if not np.all(np.isfinite(m)):
        raise QuadratureAccuracyError(f"non-finite matrix elements for {f.label}")
    if ctx.check_convergence:
        ref = engine(f, ctx.N, ctx.hbar, ctx.quad_order + 8)
        shift = float(np.abs(m - ref).max() / max(1.0, np.abs(ref).max()))
        if shift > CONVERGENCE_RTOL:
            raise QuadratureAccuracyError(
                f"quadrature for {f.label} not converged at order {ctx.quad_order}: "
                f"relative shift {shift:.2e} against order {ctx.quad_order + 8}", shift=shift)
    return HermitianOperator._trusted(m)


def _ladder(N):
    return np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1)


def position_operator(ctx: QuantizationContext) -> HermitianOperator:
    """``sqrt(hbar/2) (a + a^dagger)``."""
    a = _ladder(ctx.N)
    return HermitianOperator(math.sqrt(ctx.hbar / 2) * (a + a.T))


def momentum_operator(ctx: QuantizationContext) -> HermitianOperator:
    """``i sqrt(hbar/2) (a^dagger - a)``."""
    a = _ladder(ctx.N)
    return HermitianOperator(1j * math.sqrt(ctx.hbar / 2) * (a.T - a))


def block_norm(m, size: int) -> float:
    m = np.asarray(m)
    return operator_norm(m[:size, :size])


def neumann_deviation(ctx, f: ClassicalObservable, psi: LDFunction,
                      block_margin: int | None = None) -> float:
    """``|| Pi (Q(psi o f) - psi(Q(f))) Pi ||`` on the first ``N - margin`` states."""
    margin = ctx.margin if block_margin is None else block_margin
    if not 0 <= margin < ctx.N:
        raise ValueError(f"block margin must lie in [0, N), got {margin}")
    lhs = ctx.quantize(compose(psi, f))
    rhs = functional_calculus(ctx.quantize(f), psi)
    return block_norm(lhs.entries - rhs.entries, ctx.N - margin)


@dataclass
class MultiplicationQuantizer:
    """Abelian comparison map ``Q(f) = diag(f(x_k, p_k))`` over fixed phase points."""

    N: int
    hbar: float = 1.0
    margin: int = 8
    half_width: float = 3.0
    quad_order: int = 0
    method: str = "multiplication"

    def __post_init__(self):
        if not 0 <= self.margin < self.N:
            raise ValueError(f"margin must lie in [0, N), got {self.margin}")
        angle = np.linspace(0.0, 2.0 * math.pi, self.N, endpoint=False)
        radius = np.linspace(0.1, self.half_width, self.N)
        self.points = (radius * np.cos(3.0 * angle), radius * np.sin(3.0 * angle))

    @property
    def block(self) -> int:
        return self.N - self.margin

    def quantize(self, f: ClassicalObservable) -> HermitianOperator:
        return HermitianOperator.diagonal(f(*self.points))

    def metadata(self) -> dict:
        return {"N": self.N, "hbar": self.hbar, "quad_order": None,
                "margin": self.margin, "method": self.method}


@dataclass
class AxiomResult:
    axiom: str
    residual: float
    threshold: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.residual <= self.threshold)

    def to_dict(self) -> dict:
        return {"axiom": self.axiom, "residual": self.residual,
                "threshold": self.threshold, "pass": self.passed}


@dataclass
class AuditReport:
    context: dict
    results: list

    def __getitem__(self, axiom: str) -> AxiomResult:
        for r in self.results:
            if r.axiom == axiom:
                return r
        raise KeyError(axiom)

    def to_dict(self) -> dict:
        return {"context": self.context, "axioms": [r.to_dict() for r in self.results]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


AXIOMS = ("linearity", "unit", "neumann", "ccr")


def axiom_audit(ctx, observables, ld_maps, n_linear: int = 6, seed: int = 0,
                threshold: float = AXIOM_THRESHOLD) -> AuditReport:
    """Score a quantizer against the four classical quantization axioms.

    1. linearity: ``max ||Q(af + bg) - a Q(f) - b Q(g)||`` over random
       ``a, b in [-2, 2]`` and observable pairs;
    2. unit: ``||Q(1) - I||``;
    3. neumann: largest block deviation over the ``observables x ld_maps`` grid;
    4. ccr: ``||[Q(p), Q(x)] + i hbar I||`` on the margin block.
    """
    observables = list(observables)
    rng = np.random.default_rng(seed)
    cache = {}

    def q(f):
        if id(f) not in cache:
            cache[id(f)] = (f, ctx.quantize(f))
        return cache[id(f)][1]

    lin = 0.0
    for _ in range(n_linear):
        i, j = rng.integers(len(observables), size=2)
        a, b = rng.uniform(-2.0, 2.0, size=2)
        f, g = observables[i], observables[j]
        combo = ClassicalObservable(lambda x, p, f=f, g=g, a=a, b=b: a * f(x, p) + b * g(x, p),
                                    f"{a:.3g}*{f.label}+{b:.3g}*{g.label}")
        resid = ctx.quantize(combo).entries - a * q(f).entries - b * q(g).entries
        lin = max(lin, operator_norm(resid))

    unit = operator_norm(ctx.quantize(constant(1.0)).entries - np.eye(ctx.N))

    neu = 0.0
    for f in observables:
        for psi in ld_maps:
            lhs = ctx.quantize(compose(psi, f))
            rhs = functional_calculus(q(f), psi)
            neu = max(neu, block_norm(lhs.entries - rhs.entries, ctx.block))

    xq, pq = ctx.quantize(observable("x")), ctx.quantize(observable("p"))
    ccr = block_norm(commutator(pq, xq) + 1j * ctx.hbar * np.eye(ctx.N), ctx.block)

    results = [AxiomResult(name, float(r), threshold)
               for name, r in zip(AXIOMS, (lin, unit, neu, ccr))]
    return AuditReport(ctx.metadata(), results)


def default_audit_maps() -> list:
    """``g`` and ``q`` shifted by +1/2 so that ``q`` only sees ``[1/2, inf)`` on ``Q(h)``."""
    return [ld_g(), ld_affine(1.0, 0.5).then(ld_q())]


def deviation_sweep(hbar_grid, n_scale: float = 32.0, margin: int = 8, method: str = "polar"):
    """Neumann deviation of ``q`` (after a +1/2 shift) on ``h = x^2 + p^2`` versus hbar.

    ``N = ceil(n_scale / hbar)``. Returns rows ``(hbar, N, deviation)`` and
    the least-squares log-log slope.
    """
    shifted_q = ld_affine(1.0, 0.5).then(ld_q())
    rows = []
    for hbar in hbar_grid:
        N = int(math.ceil(n_scale / hbar))
        ctx = QuantizationContext(N, hbar=hbar, margin=margin, method=method)
        rows.append((float(hbar), N, neumann_deviation(ctx, observable("h"), shifted_q)))
    hb = np.log([r[0] for r in rows])
    dv = np.log([r[2] for r in rows])
    slope = float(np.polyfit(hb, dv, 1)[0]) if len(rows) > 1 else float("nan")
    return rows, slope


__all__ = [
    "QuantizationContext", "MultiplicationQuantizer", "AuditReport", "AxiomResult",
    "weyl_quantize", "position_operator", "momentum_operator", "neumann_deviation",
    "axiom_audit", "deviation_sweep", "default_audit_maps", "block_norm",
    "gauss_hermite_function_rule", "gauss_laguerre_function_rule", "hermite_functions",
    "laguerre_functions",
]
