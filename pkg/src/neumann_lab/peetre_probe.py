"""Locality probes for black-box operators on uniform 1-D grids.

A support-nonincreasing operator acts, near each point, like a
differential operator of some finite order ``k``. This module checks the
support condition on random bumps and estimates ``k`` from how
``|(L s)(y)|`` scales when ``s`` is a rescaled bump with a zero of order
``m`` at ``y``:

    s_{m,d}(x) = phi(u) u**m,   u = (x - y) / d.

For an order-``k`` operator every ``m <= k`` contributes ``d**(-k)`` (the
``m``-th derivative of ``u**m`` is ``m!`` times ``d**-m``, the remaining
derivatives of ``phi`` supply the rest), so the log-log slope is ``-k``.
At ``m = k + 1`` all derivatives up to order ``k`` vanish at ``y``, the
response drops to zero and the slope pattern breaks. The probe bump is
asymmetric so that no jet coefficient vanishes by parity.

Powers of an order-``k`` operator have order ``m k``; a ``(K+1)``-th root of
an order-``K`` operator would need order ``K/(K+1)``, which is not an integer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._parallel import parallel_map
from .errors import EstimationError

DEFAULT_N = 1024
DEFAULT_DELTAS = tuple(2.0 ** -k for k in range(3, 8))
SUPPORT_RTOL = 1e-12
SLOPE_TOL = 0.2
VANISH_RTOL = 1e-12
MAX_PROBE_ORDER = 10
MIN_PROBE_POINTS = 15


@dataclass(frozen=True)
class GridFunction:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise ValueError("grid functions need a 1-D array of at least 3 values")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def support(self) -> np.ndarray:
        """Indices with ``|value| > 1e-12 * max |value|``."""
        a = np.abs(self.values)
        top = a.max()
        if top == 0:
            return np.array([], dtype=int)
        return np.flatnonzero(a > SUPPORT_RTOL * top)

    @classmethod
    def from_callable(cls, f: Callable[[np.ndarray], np.ndarray], n: int = DEFAULT_N):
        return cls(f(np.linspace(0.0, 1.0, n)))


@dataclass(frozen=True)
class LocalOperator:
    """Black box acting on grid values; ``fn(values, spacing) -> values``."""

    fn: Callable[[np.ndarray, float], np.ndarray]
    label: str = "L"
    stencil_radius_hint: Optional[int] = None

    def apply(self, s: GridFunction) -> GridFunction:
        out = np.asarray(self.fn(np.asarray(s.values), s.spacing), dtype=float)
        if out.shape != s.values.shape:
            raise ValueError(f"{self.label} changed the grid: {s.values.shape} -> {out.shape}")
        return GridFunction(out)

    __call__ = apply

    def __add__(self, other: LocalOperator) -> LocalOperator:
        return LocalOperator(lambda v, h: self.fn(v, h) + other.fn(v, h),
                             f"{self.label}+{other.label}", _radius_max(self, other))

    def __rmul__(self, c: float) -> LocalOperator:
        c = float(c)
        return LocalOperator(lambda v, h: c * self.fn(v, h), f"{c:g}*{self.label}",
                             self.stencil_radius_hint)

    def then(self, outer: LocalOperator) -> LocalOperator:
        """``outer o self``."""
        r = None
        if self.stencil_radius_hint is not None and outer.stencil_radius_hint is not None:
            r = self.stencil_radius_hint + outer.stencil_radius_hint
        return LocalOperator(lambda v, h: outer.fn(self.fn(v, h), h),
                             f"{outer.label}.{self.label}", r)

    def power(self, m: int) -> LocalOperator:
        if m < 1:
            raise ValueError(f"power must be >= 1, got {m}")
        op = self
        for _ in range(m - 1):
            op = op.then(self)
        return LocalOperator(op.fn, f"{self.label}^{m}" if m > 1 else self.label,
                             op.stencil_radius_hint)


def _radius_max(a: LocalOperator, b: LocalOperator):
    if a.stencil_radius_hint is None or b.stencil_radius_hint is None:
        return None
    return max(a.stencil_radius_hint, b.stencil_radius_hint)


# zero padding outside [0, 1]
def _diff1(v, h):
    p = np.pad(v, 1)
    return (p[2:] - p[:-2]) / (2 * h)


def _diff2(v, h):
    p = np.pad(v, 1)
    return (p[2:] - 2 * p[1:-1] + p[:-2]) / h**2


def _shift(k: int):
    def fn(v, h):
        out = np.zeros_like(v)
        if k >= 0:
            out[k:] = v[: v.size - k]
        else:
            out[:k] = v[-k:]
        return out
    return fn


MULTIPLIERS = {
    "x": lambda x: x,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "one": np.ones_like,
}


def identity_operator() -> LocalOperator:
    return LocalOperator(lambda v, h: np.array(v, dtype=float), "identity", 0)


def diff1() -> LocalOperator:
    """Central first difference divided by the spacing."""
    return LocalOperator(_diff1, "diff1", 1)


def diff2() -> LocalOperator:
    return LocalOperator(_diff2, "diff2", 1)


def shift_operator(k: int) -> LocalOperator:
    return LocalOperator(_shift(k), f"shift:{k}", abs(k))


def multiply_operator(fname: str) -> LocalOperator:
    try:
        f = MULTIPLIERS[fname]
    except KeyError:
        raise KeyError(f"unknown multiplier {fname!r}; known: {sorted(MULTIPLIERS)}") from None
    return LocalOperator(lambda v, h: f(np.linspace(0.0, 1.0, v.size)) * v, f"multiply:{fname}", 0)


def operator(name: str) -> LocalOperator:
    """Registry lookup; ``a+b`` sums registered operators."""
    parts = name.split("+")
    if len(parts) > 1:
        op = operator(parts[0])
        for p in parts[1:]:
            op = op + operator(p)
        return op
    if name == "identity":
        return identity_operator()
    if name == "diff1":
        return diff1()
    if name == "diff2":
        return diff2()
    if name.startswith("shift:"):
        return shift_operator(int(name.split(":", 1)[1]))
    if name.startswith("multiply:"):
        return multiply_operator(name.split(":", 1)[1])
    raise KeyError(f"unknown operator {name!r}; known: identity, diff1, diff2, shift:k, "
                   "multiply:fname, and sums a+b")


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


def probe_bump(u):
    """Asymmetric smooth bump on ``(-1, 1)``; all Taylor coefficients at 0 nonzero."""
    return _bump(u) * (1.0 + 0.5 * np.asarray(u, dtype=float))


@dataclass
class SupportReport:
    passed: bool
    trials: int
    max_leakage: float
    max_relative_leakage: float
    failures: int

    def __bool__(self) -> bool:
        return self.passed


def support_nonincrease_check(L: LocalOperator, trials: int = 20, seed=0,
                              n: int = DEFAULT_N, slack: int = 1) -> SupportReport:
    """Apply ``L`` to random bumps and look for output outside the input support.

    A bump is exactly zero outside its known index interval ``[a, b]``.
    Any nonzero output outside ``[a - slack, b + slack]`` counts as leakage;
    C-infinity bumps are too flat near their edges for a relative threshold to
    distinguish small shifts from stencil spread.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, n)
    h = x[1] - x[0]
    worst, worst_rel, failures = 0.0, 0.0, 0
    for _ in range(trials):
        half = rng.uniform(6, 24) * h
        center = rng.uniform(0.25, 0.75)
        amp = rng.uniform(0.5, 2.0)
        s = amp * _bump((x - center) / half)
        idx = np.flatnonzero(s)
        lo, hi = idx[0] - slack, idx[-1] + slack
        out = L(GridFunction(s)).values
        outside = np.ones(n, dtype=bool)
        outside[max(lo, 0): hi + 1] = False
        leak = float(np.max(np.abs(out[outside]), initial=0.0))
        if leak > 0:
            failures += 1
        worst = max(worst, leak)
        worst_rel = max(worst_rel, leak / amp)
    return SupportReport(failures == 0, trials, worst, worst_rel, failures)


@dataclass
class OrderEstimate:
    order: int
    y: float
    deltas: np.ndarray
    slopes: list
    responses: np.ndarray
    vanished: list
    break_reason: str = ""

    def to_rows(self):
        return [(m, float(s) if s is not None else float("nan"), bool(v))
                for m, (s, v) in enumerate(zip(self.slopes, self.vanished))]


def _probe_responses(L: LocalOperator, n: int, iy: int, deltas, m: int):
    x = np.linspace(0.0, 1.0, n)
    y = x[iy]

    def one(d):
        u = (x - y) / d
        return abs(L(GridFunction(probe_bump(u) * u**m)).values[iy])

    return np.array(parallel_map(one, deltas))


def estimate_order(L: LocalOperator, y: float = 0.5, delta_grid=DEFAULT_DELTAS,
                   n: int = DEFAULT_N, tol: float = SLOPE_TOL,
                   max_order: int = MAX_PROBE_ORDER) -> OrderEstimate:
    """Local order of ``L`` at the grid point nearest ``y``.

    ``k = round(-slope_0)``; probes ``m = 1..k`` must share the slope ``-k``
    within ``tol`` and the ``m = k+1`` probe must either vanish or leave that
    slope. Anything else raises ``EstimationError`` carrying the raw data.
    """
    deltas = np.sort(np.asarray(delta_grid, dtype=float))[::-1]
    if deltas.size < 2 or np.any(deltas <= 0):
        raise ValueError("delta_grid needs at least two positive values")
    x = np.linspace(0.0, 1.0, n)
    iy = int(np.argmin(np.abs(x - y)))
    yy = float(x[iy])
    if yy - deltas[0] < 0 or yy + deltas[0] > 1:
        raise ValueError(f"y = {yy} is closer than max delta = {deltas[0]} to the boundary")
    if 2 * deltas[-1] / (x[1] - x[0]) < MIN_PROBE_POINTS:
        raise ValueError(f"smallest delta leaves fewer than {MIN_PROBE_POINTS} grid points across the probe")

    slopes, vanished, resp = [], [], []
    scale = 0.0

    def data():
        return {"y": yy, "deltas": deltas.tolist(), "slopes": list(slopes),
                "vanished": list(vanished), "responses": [r.tolist() for r in resp]}

    def fit(R):
        return float(np.polyfit(np.log(deltas), np.log(R), 1)[0])

    k = None
    for m in range(max_order + 2):
        R = _probe_responses(L, n, iy, deltas, m)
        resp.append(R)
        scale = max(scale, float(R.max()))
        gone = scale == 0 or bool(np.all(R <= VANISH_RTOL * scale))
        vanished.append(gone)
        slopes.append(None if gone or np.any(R == 0) else fit(R))
        if m == 0:
            if slopes[0] is None:
                raise EstimationError("zeroth-order probe gives no stable response", data())
            k = int(round(-slopes[0]))
            if k < 0 or abs(slopes[0] + k) > tol:
                raise EstimationError(f"slope {slopes[0]:.3f} is not near a non-positive integer",
                                      data())
            if k > max_order:
                raise EstimationError(f"order {k} exceeds max_order {max_order}", data())
            continue
        if m <= k:
            if slopes[m] is None or abs(slopes[m] + k) > tol:
                raise EstimationError(f"probe m={m} breaks the slope -{k} pattern before m={k+1}",
                                      data())
            continue
        reason = "vanished" if gone else ("slope broke" if slopes[m] is None
                                          or abs(slopes[m] + k) > tol else "")
        if not reason:
            raise EstimationError(f"probe m={m} still shows slope -{k}; no stable order", data())
        return OrderEstimate(k, yy, deltas, slopes, np.array(resp), vanished, reason)
    raise EstimationError("probe loop ended without a break", data())  # pragma: no cover


@dataclass
class MultiplicativityReport:
    base_order: int
    power: int
    power_order: int
    expected: int
    passed: bool
    note: str
    estimates: list = field(default_factory=list, repr=False)

    def __bool__(self) -> bool:
        return self.passed


def root_obstruction_note(order: int) -> str:
    if order == 0:
        return "order 0 is closed under roots; no obstruction"
    return (f"a root of index {order + 1} of this order-{order} operator would need order "
            f"{order}/{order + 1}; no order-({order}/{order + 1}) operator exists")


def order_multiplicativity_check(L: LocalOperator, m: int, y: float = 0.5,
                                 delta_grid=DEFAULT_DELTAS, n: int = DEFAULT_N
                                 ) -> MultiplicativityReport:
    """Check ``order(L^m) == m * order(L)``."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    base = estimate_order(L, y, delta_grid, n)
    powered = estimate_order(L.power(m), y, delta_grid, n)
    K = powered.order
    return MultiplicativityReport(base.order, m, K, m * base.order, K == m * base.order,
                                  root_obstruction_note(K), [base, powered])


__all__ = [
    "GridFunction", "LocalOperator", "operator", "identity_operator", "diff1", "diff2",
    "shift_operator", "multiply_operator", "probe_bump", "support_nonincrease_check",
    "SupportReport", "estimate_order", "OrderEstimate", "order_multiplicativity_check",
    "MultiplicativityReport", "root_obstruction_note",
]
