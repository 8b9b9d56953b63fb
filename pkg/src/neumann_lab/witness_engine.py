"""Numerical execution of the linear-Neumannian-implies-Abelian argument.

Given a non-commuting pair ``(A, B)`` with spectra pushed into
``(pi/2, 3 pi/2)`` by ``g = arctan + pi``:

* ``find_witness_set`` picks an interval set ``U`` with ``P_perp A P != 0``
  for ``P`` the spectral projector of ``B`` on ``U``;
* ``scaled_family`` stretches ``B`` off ``U``: ``B_t = h_t(B)`` with
  ``h_t(x) = x (1 + t chi(x not in U))``;
* ``growth_diagnostic`` shows ``||P S(A, B_t) P||`` grows like ``t^2``,
  whereas a linear Neumannian map would force ``S = 0``.

The Born-rule helpers check that eigenspace projectors are transported
unchanged by an injective relabelling of the spectrum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._parallel import parallel_map
from .classical_layer import ld_g
from .errors import AmbiguityError, CommutingOperatorsError
from .operator_core import (HermitianOperator, IntervalSet, cluster_eigenvalues, commutator,
                            eigenspace_projector, functional_calculus, operator_norm, s_form)

COMMUTE_RTOL = 1e-10
BORN_RTOL = 1e-8
DEFAULT_T_GRID = (1e2, 1e3, 1e4, 1e5, 1e6)
T_CAP = 1e8


def g_transform(A0: HermitianOperator) -> HermitianOperator:
    """``arctan(A0) + pi``; spectrum inside ``(pi/2, 3 pi/2)``."""
    return functional_calculus(A0, ld_g())


def g_transform_pair(A0: HermitianOperator, B0: HermitianOperator):
    """Transform both operators and confirm non-commutation survives."""
    A, B = g_transform(A0), g_transform(B0)
    before = operator_norm(commutator(A0, B0))
    after = operator_norm(commutator(A, B))
    if before > COMMUTE_RTOL * A0.scale * B0.scale and after <= COMMUTE_RTOL * A.scale * B.scale:
        raise AssertionError(
            f"g-transform destroyed non-commutation: ||[A0,B0]|| = {before:.3e}, "
            f"||[g(A0),g(B0)]|| = {after:.3e}")
    return A, B


def eigenvector_identity_check(A: HermitianOperator, B: HermitianOperator, v, lam: float):
    """Both sides of ``<S v, v> = |Bw|^2 + 2 lam <Bw, w> - 3 lam^2 |w|^2``, ``w = A v``.

    ``v`` must be a unit eigenvector of ``B`` for ``lam``.
    """
    v = np.asarray(v, dtype=complex)
    resid = np.linalg.norm(B @ v - lam * v)
    if resid > 1e-9 * B.scale or abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError(
            f"v is not a unit eigenvector of B for {lam!r}: ||Bv - lam v|| = {resid:.3e}, "
            f"||v|| = {np.linalg.norm(v):.12g}")
    S = s_form(A, B)
    lhs = np.vdot(v, S @ v)
    if abs(lhs.imag) > 1e-10 * S.scale:
        raise AssertionError(f"<Sv, v> has imaginary part {lhs.imag:.3e}")
    w = A @ v
    bw = B @ w
    rhs = np.vdot(bw, bw).real + 2 * lam * np.vdot(w, bw).real - 3 * lam**2 * np.vdot(w, w).real
    return float(lhs.real), float(rhs)


def _check_noncommuting(A, B):
    c = operator_norm(commutator(A, B))
    if c <= COMMUTE_RTOL * A.scale * B.scale:
        raise CommutingOperatorsError(f"operators commute: S-form vanishes (||[A,B]|| = {c:.3e})")
    return c


def _candidate_sets(B: HermitianOperator):
    """Contiguous runs of B's eigenvalue clusters, cut at midpoints between clusters."""
    w = B.eigenvalues
    clusters = cluster_eigenvalues(w, B.cluster_tolerance())
    centers = [w[idx].mean() for idx in clusters]
    cuts = [-math.inf] + [0.5 * (a + b) for a, b in zip(centers, centers[1:])] + [math.inf]
    k = len(clusters)
    for i in range(k):
        for j in range(i + 1, k + 1):
            if i == 0 and j == k:
                continue
            cols = np.concatenate(clusters[i:j])
            yield IntervalSet(((cuts[i], cuts[j]),)), cols


def _witness_scan(A: HermitianOperator, B: HermitianOperator):
    _check_noncommuting(A, B)
    v = B.eigenvectors
    a_eig = v.conj().T @ A.entries @ v
    best = (None, -1.0)
    for U, cols in _candidate_sets(B):
        mask = np.zeros(B.dim, dtype=bool)
        mask[cols] = True
        val = operator_norm(a_eig[np.ix_(~mask, mask)])
        if val > best[1]:
            best = (U, val)
    return best


def find_witness_set(A: HermitianOperator, B: HermitianOperator) -> IntervalSet:
    """Interval ``U`` maximizing ``||P_perp A P||`` with ``P = mu_B(U)``.

    Raises ``CommutingOperatorsError`` when ``[A, B] = 0``.
    """
    return _witness_scan(A, B)[0]


def _stretch(U: IntervalSet, t: float, tol: float):
    outside = U.complement()
    return lambda x: x * (1.0 + t * outside.contains(x, tol))


def scaled_family(B: HermitianOperator, U: IntervalSet, t: float) -> HermitianOperator:
    """``B_t = h_t(B)`` with ``h_t(x) = x (1 + t chi_{R minus U}(x))``; ``B_0 = B``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0:
        return B
    return functional_calculus(B, _stretch(U, t, B.cluster_tolerance()))


@dataclass
class WitnessReport:
    U: IntervalSet
    offdiag_norm: float
    t_grid: np.ndarray
    psp_norms: np.ndarray
    loglog_slope: float
    lower_bound_curve: np.ndarray
    plus_sign_bound_curve: np.ndarray = field(repr=False)
    monotone_tail: bool = True

    def slope_ok(self, target: float = 2.0, tol: float = 0.1) -> bool:
        return abs(self.loglog_slope - target) <= tol

    def rows(self):
        return [(float(t), float(n), float(b))
                for t, n, b in zip(self.t_grid, self.psp_norms, self.lower_bound_curve)]

    def to_dict(self) -> dict:
        return {
            "U": self.U.to_list(),
            "offdiag_norm": self.offdiag_norm,
            "t_grid": self.t_grid.tolist(),
            "psp_norms": self.psp_norms.tolist(),
            "loglog_slope": self.loglog_slope,
            "lower_bound_curve": self.lower_bound_curve.tolist(),
            "plus_sign_bound_curve": self.plus_sign_bound_curve.tolist(),
            "monotone_tail": self.monotone_tail,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _check_t_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("t_grid needs at least two points")
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be positive and strictly increasing")
    if t[-1] > T_CAP:
        raise ValueError(f"t values above {T_CAP:g} overflow the t^4 block of S_t")
    return t


def growth_diagnostic(A: HermitianOperator, B: HermitianOperator,
                      t_grid=DEFAULT_T_GRID) -> WitnessReport:
    """Track ``||P S(A, B_t) P||`` along ``t_grid``.

    The slope is a least-squares log-log fit over the upper half of the grid
    (at least two points).
    Two comparison curves are kept: ``|B_tAP|^2 - 2|B_tAP||BPA| - 3|BPA|^2``
    (reverse-triangle reading) and the same with ``+2`` in the middle term.
    """
    t = _check_t_grid(t_grid)
    U, offdiag = _witness_scan(A, B)
    # Work in B's eigenbasis so P is an exact 0/1 mask; in the original basis,
    # roundoff in P mixes the t^4-sized P_perp block into P S_t P.
    v = B.eigenvectors
    a_eig = HermitianOperator(v.conj().T @ A.entries @ v)
    w = B.eigenvalues
    tol = B.cluster_tolerance()
    mask = U.contains(w, tol)
    bpa = operator_norm((w[mask, None] * a_eig.entries[mask, :]))

    def at(tv):
        bt_diag = _stretch(U, tv, tol)(w)
        bt = HermitianOperator.diagonal(bt_diag)
        st = s_form(a_eig, bt).entries
        psp = operator_norm(st[np.ix_(mask, mask)])
        btap = operator_norm(bt_diag[:, None] * a_eig.entries[:, mask])
        return psp, btap

    out = parallel_map(at, t)
    psp = np.array([o[0] for o in out])
    btap = np.array([o[1] for o in out])
    lower = btap**2 - 2 * btap * bpa - 3 * bpa**2
    plus = btap**2 + 2 * btap * bpa - 3 * bpa**2
    top = slice(min(t.size // 2, t.size - 2), None)
    with np.errstate(divide="ignore"):
        slope = float(np.polyfit(np.log(t[top]), np.log(psp[top]), 1)[0])
    monotone = bool(np.all(np.diff(psp[top]) > 0))
    return WitnessReport(U, float(offdiag), t, psp, slope, lower, plus, monotone)


class BornOutcome(NamedTuple):
    probability: float
    matched: bool


def born_probability(Qf: HermitianOperator, lam: float, v) -> BornOutcome:
    """``<v, P_lam v>`` for the eigenvalue cluster within ``1e-8 * scale`` of ``lam``.

    An unmatched ``lam`` yields probability 0 with ``matched=False``.
    """
    v = np.asarray(v, dtype=complex)
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise ValueError(f"state must be a unit vector, got norm {np.linalg.norm(v):.12g}")
    P, found = eigenspace_projector(Qf, lam, BORN_RTOL * Qf.scale)
    if not found:
        return BornOutcome(0.0, False)
    prob = float(np.vdot(v, P @ v).real)
    return BornOutcome(min(1.0, max(0.0, prob)), True)


def born_distribution(Qf: HermitianOperator, v):
    """Probabilities over the distinct eigenvalue clusters of ``Qf``."""
    w = Qf.eigenvalues
    out = []
    for idx in cluster_eigenvalues(w, BORN_RTOL * Qf.scale):
        lam = float(w[idx].mean())
        out.append((lam, born_probability(Qf, lam, v).probability))
    return out


def projection_transport_check(A: HermitianOperator, psi, lam: float) -> float:
    """``||P_{A, lam} - P_{psi(A), psi(lam)}||``.

    ``psi`` must be injective on the spectrum of ``A``; merging two clusters
    raises ``AmbiguityError``.
    """
    tol_a = BORN_RTOL * A.scale
    P1, found = eigenspace_projector(A, lam, tol_a)
    if not found:
        raise ValueError(f"{lam!r} is not an eigenvalue of A")
    centers = np.array([A.eigenvalues[idx].mean()
                        for idx in cluster_eigenvalues(A.eigenvalues, tol_a)])
    images = np.sort(np.asarray(psi(centers), dtype=float))
    psi_a = functional_calculus(A, psi)
    gaps = np.diff(images)
    if np.any(gaps <= BORN_RTOL * psi_a.scale):
        raise AmbiguityError(
            f"relabelling is not injective on the spectrum: minimum image gap {gaps.min():.3e}")
    P2, found = eigenspace_projector(psi_a, float(psi(np.array([lam]))[0]), BORN_RTOL * psi_a.scale)
    if not found:
        raise AmbiguityError(f"psi({lam!r}) does not match an eigenvalue of psi(A)")
    return operator_norm(P1.entries - P2.entries)


def random_hermitian(n: int, rng: np.random.Generator) -> HermitianOperator:
    """GUE-style sample scaled to unit entry variance."""
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return HermitianOperator((z + z.conj().T) / 2)


__all__ = [
    "g_transform", "g_transform_pair", "eigenvector_identity_check", "find_witness_set",
    "scaled_family", "growth_diagnostic", "WitnessReport", "born_probability",
    "born_distribution", "BornOutcome", "projection_transport_check", "random_hermitian",
]
