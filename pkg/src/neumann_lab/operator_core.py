"""Dense Hermitian linear algebra.

Eigendecomposition-backed functional calculus, spectral projectors over
finite unions of half-open intervals, the S-form, simultaneous
diagonalization of commuting families and commutant dimensions.

Everything is finite-dimensional. ``generating_operator`` is a constructive
finite-dimensional analogue of the generating-operator theorem for commuting
families, not the theorem itself.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, NonCommutingError

HERMITICITY_REJECT = 1e-8
CLUSTER_RTOL = 1e-10
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class HermitianOperator:
    """Immutable N x N complex Hermitian matrix with a cached eigendecomposition.

    Input is symmetrized as ``(M + M^H) / 2``. Raw asymmetry larger than
    ``1e-8 * ||M||`` (Frobenius) is rejected as a caller bug.
    """

    def __init__(self, entries):
        m = np.array(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        size = np.linalg.norm(m)
        skew = np.linalg.norm(m - m.conj().T)
        if skew > HERMITICITY_REJECT * size:
            raise ValueError(
                f"matrix is not Hermitian: ||M - M^H|| = {skew:.3e} exceeds "
                f"{HERMITICITY_REJECT:g} * ||M|| = {HERMITICITY_REJECT * size:.3e}"
            )
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        self._entries = m
        self._eig = None
        self._lock = threading.Lock()

    @classmethod
    def _trusted(cls, m: np.ndarray) -> HermitianOperator:
        """Wrap a matrix that is Hermitian up to roundoff by construction."""
        obj = cls.__new__(cls)
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        obj._entries = m
        obj._eig = None
        obj._lock = threading.Lock()
        return obj

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim))

    @classmethod
    def zeros(cls, dim):
        return cls(np.zeros((dim, dim)))

    @classmethod
    def diagonal(cls, values):
        return cls(np.diag(np.asarray(values, dtype=complex)))

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    def _decomposition(self):
        if self._eig is None:
            with self._lock:
                if self._eig is None:
                    w, v = np.linalg.eigh(self._entries)
                    w.setflags(write=False)
                    v.setflags(write=False)
                    self._eig = (w, v)
        return self._eig

    @property
    def eigenvalues(self) -> np.ndarray:
        """Real eigenvalues in ascending order."""
        return self._decomposition()[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        """Unitary matrix whose columns pair with ``eigenvalues``."""
        return self._decomposition()[1]

    def norm(self) -> float:
        """Spectral norm, the largest absolute eigenvalue."""
        w = self.eigenvalues
        return float(max(abs(w[0]), abs(w[-1])))

    @property
    def scale(self) -> float:
        return max(1.0, self.norm())

    def cluster_tolerance(self) -> float:
        return CLUSTER_RTOL * self.scale

    def __array__(self, dtype=None, copy=None):
        return self._entries if dtype is None else self._entries.astype(dtype)

    def __matmul__(self, other):
        return self._entries @ _as_matrix(other)

    def __rmatmul__(self, other):
        return _as_matrix(other) @ self._entries

    def __add__(self, other):
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        _check_dims(self, other)
        return HermitianOperator(self._entries + other._entries)

    def __sub__(self, other):
        if not isinstance(other, HermitianOperator):
            return NotImplemented
        _check_dims(self, other)
        return HermitianOperator(self._entries - other._entries)

    def __neg__(self):
        return HermitianOperator(-self._entries)

    def __mul__(self, c):
        if isinstance(c, (int, float, np.floating, np.integer)):
            return HermitianOperator(float(c) * self._entries)
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim}, norm={self.norm():.6g})"

    def to_dict(self) -> dict:
        """Row-major ``[re, im]`` pairs under ``"entries"``."""
        pairs = np.stack([self._entries.real, self._entries.imag], axis=-1)
        return {"dim": self.dim, "entries": pairs.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping) -> HermitianOperator:
        arr = np.asarray(data["entries"], dtype=float)
        dim = int(data["dim"])
        if arr.shape != (dim, dim, 2):
            raise ValueError(f"entries shape {arr.shape} does not match dim {dim}")
        return cls(arr[..., 0] + 1j * arr[..., 1])


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, HermitianOperator):
        return a.entries
    return np.asarray(a)


def _check_dims(*ops):
    dims = {_as_matrix(op).shape for op in ops}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")


@dataclass(frozen=True)
class IntervalSet:
    """Finite union of disjoint half-open intervals ``[lo, hi)``.

    Unbounded ends are ``-inf`` / ``inf``. Overlapping or touching intervals
    are merged on construction.
    """

    intervals: tuple = ()

    def __post_init__(self):
        pairs = []
        for lo, hi in self.intervals:
            lo, hi = float(lo), float(hi)
            if math.isnan(lo) or math.isnan(hi) or not lo < hi:
                raise ValueError(f"invalid interval [{lo}, {hi})")
            pairs.append((lo, hi))
        pairs.sort()
        merged = []
        for lo, hi in pairs:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        object.__setattr__(self, "intervals", tuple(merged))

    @classmethod
    def full(cls) -> IntervalSet:
        return cls(((-math.inf, math.inf),))

    @classmethod
    def empty(cls) -> IntervalSet:
        return cls(())

    def contains(self, x, tol: float = 0.0):
        """Half-open membership; a point within ``tol`` below ``hi`` counts as outside."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (x >= lo - tol) & (x < hi - tol)
        return out

    def complement(self) -> IntervalSet:
        edges = [-math.inf]
        for lo, hi in self.intervals:
            edges.extend([lo, hi])
        edges.append(math.inf)
        gaps = [(a, b) for a, b in zip(edges[::2], edges[1::2]) if a < b]
        return IntervalSet(tuple(gaps))

    def indicator(self, tol: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
        return lambda x: self.contains(x, tol).astype(float)

    def to_list(self) -> list:
        """JSON-safe form; unbounded ends become ``None``."""
        return [[None if math.isinf(lo) else lo, None if math.isinf(hi) else hi]
                for lo, hi in self.intervals]

    @classmethod
    def from_list(cls, data) -> IntervalSet:
        return cls(tuple((-math.inf if lo is None else lo, math.inf if hi is None else hi)
                         for lo, hi in data))


def cluster_eigenvalues(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group sorted eigenvalues whose consecutive gaps are at most ``tol``."""
    values = np.asarray(values)
    if values.size == 0:
        return []
    breaks = np.nonzero(np.diff(values) > tol)[0] + 1
    return np.split(np.arange(values.size), breaks)


def _table_function(table: Mapping) -> Callable[[np.ndarray], np.ndarray]:
    keys = np.array(list(table), dtype=float)
    vals = np.array(list(table.values()), dtype=float)

    def lookup(x):
        x = np.asarray(x, dtype=float)
        gap = np.abs(x[..., None] - keys)
        idx = gap.argmin(axis=-1)
        near = np.take_along_axis(gap, idx[..., None], axis=-1)[..., 0]
        return np.where(near <= 1e-6 * np.maximum(1.0, np.abs(x)), vals[idx], np.nan)

    return lookup


def functional_calculus(A: HermitianOperator, psi) -> HermitianOperator:
    """Return ``V diag(psi(lambda)) V^H``.

    ``psi`` is a vectorized real function, or a mapping from eigenvalues to
    values (looked up at the nearest key).
    """
    if isinstance(psi, Mapping):
        psi = _table_function(psi)
    w, v = A.eigenvalues, A.eigenvectors
    with np.errstate(all="ignore"):
        fw = np.asarray(psi(w))
    if fw.shape != w.shape:
        fw = np.broadcast_to(fw, w.shape)
    if np.iscomplexobj(fw):
        if np.any(np.abs(fw.imag) > 0):
            raise DomainError("function returned complex values on the spectrum")
        fw = fw.real
    bad = ~np.isfinite(fw)
    if np.any(bad):
        raise DomainError(f"function is undefined or non-finite at eigenvalue {w[bad][0]!r}")
    return HermitianOperator._trusted((v * fw) @ v.conj().T)


def spectral_projector(A: HermitianOperator, U: IntervalSet) -> HermitianOperator:
    """Orthogonal projector onto the eigenspaces of ``A`` with eigenvalue in ``U``.

    Degenerate clusters are kept whole: membership is decided at the cluster
    mean.
    """
    w, v = A.eigenvalues, A.eigenvectors
    tol = A.cluster_tolerance()
    mask = np.zeros(w.size, dtype=bool)
    for idx in cluster_eigenvalues(w, tol):
        if U.contains(w[idx].mean(), tol):
            mask[idx] = True
    vs = v[:, mask]
    return HermitianOperator._trusted(vs @ vs.conj().T)


def eigenspace_projector(A: HermitianOperator, lam: float, tol: float | None = None):
    """Projector onto the eigenvalue cluster within ``tol`` of ``lam``.

    Returns ``(P, found)``; ``P`` is zero when no cluster matches.
    """
    w, v = A.eigenvalues, A.eigenvectors
    if tol is None:
        tol = A.cluster_tolerance()
    for idx in cluster_eigenvalues(w, tol):
        if abs(w[idx].mean() - lam) <= tol:
            vs = v[:, idx]
            return HermitianOperator._trusted(vs @ vs.conj().T), True
    return HermitianOperator.zeros(A.dim), False


def operator_norm(A) -> float:
    """Spectral norm (largest singular value)."""
    if isinstance(A, HermitianOperator):
        return A.norm()
    m = np.asarray(A)
    if not m.any():
        return 0.0
    return float(np.linalg.norm(m, 2))


def commutator(A, B) -> np.ndarray:
    """``AB - BA`` as a plain (skew-Hermitian for Hermitian inputs) matrix."""
    _check_dims(A, B)
    a, b = _as_matrix(A), _as_matrix(B)
    return a @ b - b @ a


def s_form(E: HermitianOperator, F: HermitianOperator) -> HermitianOperator:
    """``(EF + FE)^2 - 2 (E^2 F^2 + F^2 E^2)``.

    Zero whenever ``E`` and ``F`` commute.
    """
    _check_dims(E, F)
    e, f = _as_matrix(E), _as_matrix(F)
    ef = e @ f
    anti = ef + ef.conj().T
    e2f2 = e @ ef @ f
    return HermitianOperator._trusted(anti @ anti - 2.0 * (e2f2 + e2f2.conj().T))


@dataclass(frozen=True)
class ProjectionReport:
    idempotent: bool
    positive_spectrum: bool
    distance_to_identity: float

    @property
    def is_identity(self) -> bool:
        return self.idempotent and self.positive_spectrum

    def __bool__(self):
        return self.is_identity


def check_projection_is_identity(A: HermitianOperator, tol: float = 1e-10) -> ProjectionReport:
    """Idempotent with strictly positive spectrum forces ``A = I``."""
    m = A.entries
    idempotent = operator_norm(m @ m - m) <= tol * A.scale
    positive = bool(np.all(A.eigenvalues > tol * A.scale))
    dist = operator_norm(m - np.eye(A.dim))
    report = ProjectionReport(bool(idempotent), positive, dist)
    if report.is_identity and dist > tol * A.scale:
        raise AssertionError(
            f"positive idempotent operator is {dist:.3e} away from the identity"
        )
    return report


class GeneratingOperator(NamedTuple):
    S: HermitianOperator
    funcs: list

    def reconstruct(self, k: int) -> HermitianOperator:
        return functional_calculus(self.S, self.funcs[k])


def _split_block(basis, ops, tol):
    """Split ``basis`` (columns) into joint eigenspaces of ``ops`` restricted to it."""
    if not ops:
        return [basis]
    head, rest = ops[0], ops[1:]
    sub = basis.conj().T @ head @ basis
    sub = 0.5 * (sub + sub.conj().T)
    w, u = np.linalg.eigh(sub)
    out = []
    for idx in cluster_eigenvalues(w, tol):
        out.extend(_split_block(basis @ u[:, idx], rest, tol))
    return out


def generating_operator(K: Sequence[HermitianOperator], seed=None,
                        commute_tol: float = 1e-10, max_retries: int = 3) -> GeneratingOperator:
    """Single Hermitian ``S`` with ``K[k] = funcs[k](S)`` for a commuting family.

    A random unit real combination of the family is diagonalized, each of its
    degenerate blocks is split by the members in turn, and the resulting joint
    eigenspaces are numbered ``1..m`` in lexicographic order of the members'
    eigenvalues. ``funcs[k]`` maps those integers to the eigenvalue of
    ``K[k]``.
    """
    K = list(K)
    if not K:
        raise ValueError("generating_operator needs at least one operator")
    _check_dims(*K)
    for i in range(len(K)):
        for j in range(i + 1, len(K)):
            c = operator_norm(commutator(K[i], K[j]))
            if c > commute_tol * K[i].scale * K[j].scale:
                raise NonCommutingError(
                    f"operators {i} and {j} do not commute: ||[K_{i}, K_{j}]|| = {c:.3e}",
                    pair=(i, j), norm=c)
    rng = np.random.default_rng(seed)
    mats = [k.entries for k in K]
    scales = [k.scale for k in K]
    n = K[0].dim
    tol = CLUSTER_RTOL * max(scales)
    for _ in range(max_retries + 1):
        coeff = rng.uniform(-1.0, 1.0, len(K))
        coeff /= np.linalg.norm(coeff)
        combo = sum(c * m / s for c, m, s in zip(coeff, mats, scales))
        w, v = np.linalg.eigh(0.5 * (combo + combo.conj().T))
        spaces = []
        for idx in cluster_eigenvalues(w, tol):
            spaces.extend(_split_block(v[:, idx], mats, tol))
        labelled = []
        ok = True
        for basis in spaces:
            vals = []
            for m in mats:
                mu = float(np.real(np.trace(basis.conj().T @ m @ basis))) / basis.shape[1]
                if np.linalg.norm(m @ basis - mu * basis) > 1e3 * tol * np.sqrt(basis.shape[1]):
                    ok = False
                vals.append(mu)
            labelled.append((tuple(vals), basis))
        if ok:
            break
    else:
        raise RuntimeError("simultaneous diagonalization failed after retries")

    labelled.sort(key=lambda item: item[0])
    merged = []
    for vals, basis in labelled:
        if merged and np.allclose(vals, merged[-1][0], rtol=0, atol=1e3 * tol):
            merged[-1] = (merged[-1][0], np.hstack([merged[-1][1], basis]))
        else:
            merged.append((vals, basis))

    s = np.zeros((n, n), dtype=complex)
    funcs = [dict() for _ in K]
    for label, (vals, basis) in enumerate(merged, start=1):
        s += label * (basis @ basis.conj().T)
        for k, mu in enumerate(vals):
            funcs[k][label] = mu
    return GeneratingOperator(HermitianOperator(s), funcs)


def commutant_dimension(family: Sequence[HermitianOperator], dim: int | None = None,
                         rtol: float = 1e-9) -> int:
    """Dimension of ``{M : MK = KM for all K in family}`` over the complex numbers.

    Equals 1 exactly when the family is irreducible. An empty family has the
    full matrix algebra as commutant, so ``dim`` must then be given.
    """
    family = list(family)
    if not family:
        if dim is None:
            raise ValueError("an empty family needs an explicit dim")
        return dim * dim
    _check_dims(*family)
    n = family[0].dim
    eye = np.eye(n)
    # row-major vec: vec(MK) = (I kron K^T) vec(M), vec(KM) = (K kron I) vec(M)
    blocks = [np.kron(eye, k.entries.T) - np.kron(k.entries, eye) for k in family]
    stacked = np.vstack(blocks)
    sv = np.linalg.svd(stacked, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return n * n
    rank = int(np.sum(sv > rtol * max(sv[0], 1.0)))
    return n * n - rank
