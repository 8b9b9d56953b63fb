"""``neumann-lab`` command line.

Exit codes: 0 all checks passed, 2 negative result (for example commuting
operators, or an operator that is not support-nonincreasing), 3 bad
configuration, 4 numerical accuracy failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import classical_layer as cl
from . import operator_core as oc
from . import peetre_probe as pp
from . import weyl_quantizer as wq
from . import witness_engine as we
from ._report import Table
from .errors import (AmbiguityError, CommutingOperatorsError, DomainError, EstimationError,
                     NonCommutingError, QuadratureAccuracyError)

EXIT_OK, EXIT_NEGATIVE, EXIT_CONFIG, EXIT_ACCURACY = 0, 2, 3, 4
COMMANDS = ("witness", "audit", "deviation-sweep", "peetre", "lemma", "generating-op", "commutant")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _grid(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


@dataclass
class RunConfig:
    command: str
    N: int = 16
    hbar: float = 1.0
    quad_order: int = 0
    margin: int = 8
    t_grid: list = field(default_factory=lambda: list(we.DEFAULT_T_GRID))
    hbar_grid: list = field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])
    delta_grid: list = field(default_factory=lambda: list(pp.DEFAULT_DELTAS))
    seed: int = 0
    output_path: str | None = None
    format: str = "csv"
    pair: str = "pauli"
    operator: str = "diff1"
    power: int = 2
    samples: int = 10_000
    j: str = "g:xp"
    l: str = "g:h"
    input: str | None = None
    method: str = "polar"

    def validate(self):
        if self.N < 1 or self.hbar <= 0 or self.quad_order < 0 or self.margin < 0:
            raise ConfigError("numeric parameters must be positive")
        if self.samples < 1 or self.power < 1:
            raise ConfigError("--samples and --power must be positive")
        for name in ("t_grid", "hbar_grid", "delta_grid"):
            g = np.asarray(getattr(self, name), dtype=float)
            if g.size == 0:
                raise ConfigError(f"{name} is empty")
            if np.any(~np.isfinite(g)) or np.any(g <= 0):
                raise ConfigError(f"{name} must hold positive finite values")
            d = np.diff(g)
            if name == "t_grid" and np.any(d <= 0):
                raise ConfigError("t_grid must be strictly increasing")
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ConfigError(f"{name} must be sorted without repeats")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        return self


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="neumann-lab",
                description="Numerical checks for quantization no-go constructions.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--n", type=int, dest="N", default=None, help="matrix dimension")
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--quad-order", type=int, default=0, help="0 means 4N")
    p.add_argument("--margin", type=int, default=8)
    p.add_argument("--method", choices=("polar", "hermite"), default="polar")
    p.add_argument("--t-grid", type=_grid, default=list(we.DEFAULT_T_GRID))
    p.add_argument("--hbar-grid", type=_grid, default=[1.0, 0.5, 0.25, 0.125])
    p.add_argument("--delta-grid", type=_grid, default=list(pp.DEFAULT_DELTAS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", dest="output_path", default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--pair", choices=("pauli", "random", "commuting"), default="pauli")
    p.add_argument("--operator", default="diff1", help="peetre operator name")
    p.add_argument("--power", type=int, default=2, help="peetre power for multiplicativity")
    p.add_argument("--samples", type=int, default=10_000, help="lemma sample count")
    p.add_argument("--j", default="g:xp", help="lemma observable, NAME or LD:NAME")
    p.add_argument("--l", default="g:h", help="lemma observable, NAME or LD:NAME")
    p.add_argument("--input", default=None, help="JSON file with operators")
    return p


_DEFAULT_N = {"witness": 16, "audit": 32, "generating-op": 16, "commutant": 2}


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    fmt = ns.format or ("json" if ns.command == "audit" else "csv")
    N = ns.N if ns.N is not None else _DEFAULT_N.get(ns.command, 16)
    return RunConfig(ns.command, N, ns.hbar, ns.quad_order, ns.margin, ns.t_grid, ns.hbar_grid,
                     ns.delta_grid, ns.seed, ns.output_path, fmt, ns.pair, ns.operator, ns.power,
                     ns.samples, ns.j, ns.l, ns.input, ns.method).validate()


def _pad(m: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=complex)
    out[: m.shape[0], : m.shape[1]] = m
    return out


def make_pair(kind: str, n: int, seed: int):
    """Raw operator pair for the witness demos, before the g-transform."""
    if n < 2:
        raise ConfigError("pairs need --n >= 2")
    rng = np.random.default_rng(seed)
    if kind == "pauli":
        eye = np.eye(n // 2)
        return (oc.HermitianOperator(_pad(np.kron(oc.SIGMA_X, eye), n)),
                oc.HermitianOperator(_pad(np.kron(oc.SIGMA_Z, eye), n)))
    if kind == "random":
        return we.random_hermitian(n, rng), we.random_hermitian(n, rng)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    a = q @ np.diag(rng.standard_normal(n)) @ q.conj().T
    b = q @ np.diag(rng.standard_normal(n)) @ q.conj().T
    return oc.HermitianOperator(a), oc.HermitianOperator(b)


def _load_operators(path: str) -> list:
    with open(path) as fh:
        data = json.load(fh)
    items = data["operators"] if isinstance(data, dict) and "operators" in data else data
    if isinstance(items, dict):
        items = [items]
    return [oc.HermitianOperator.from_dict(d) for d in items]


def cmd_witness(cfg: RunConfig):
    A0, B0 = make_pair(cfg.pair, cfg.N, cfg.seed)
    A, B = we.g_transform_pair(A0, B0)
    try:
        rep = we.growth_diagnostic(A, B, cfg.t_grid)
    except CommutingOperatorsError:
        s = oc.operator_norm(oc.s_form(A, B))
        raise CommutingOperatorsError(f"operators commute: S-form vanishes (||S(A,B)|| = {s:.3e})")
    ok = rep.slope_ok() and rep.monotone_tail
    meta = {"pair": cfg.pair, "N": cfg.N, "U": rep.U.to_list(), "offdiag_norm": rep.offdiag_norm,
            "loglog_slope": rep.loglog_slope, "monotone_tail": rep.monotone_tail, "pass": ok}
    rows = [r + (float(pb),) for r, pb in zip(rep.rows(), rep.plus_sign_bound_curve)]
    return Table("witness", ["t", "psp_norm", "lower_bound", "plus_sign_bound"], rows,
                 cfg.seed, meta), ok


def _quantizer(cfg: RunConfig):
    return wq.QuantizationContext(cfg.N, hbar=cfg.hbar, quad_order=cfg.quad_order,
                                  method=cfg.method, margin=cfg.margin)


def cmd_audit(cfg: RunConfig):
    ctx = _quantizer(cfg)
    obs = [cl.observable(k) for k in ("x", "p", "xp", "h")]
    rep = wq.axiom_audit(ctx, obs, wq.default_audit_maps(), seed=cfg.seed)
    ok = (rep["linearity"].passed and rep["unit"].passed and rep["ccr"].passed
          and not rep["neumann"].passed)
    rows = [(r.axiom, r.residual, r.threshold, r.passed) for r in rep.results]
    meta = dict(rep.context, expected="linearity, unit, ccr pass; neumann fails", pass_=ok)
    meta["pass"] = meta.pop("pass_")
    return Table("audit", ["axiom", "residual", "threshold", "pass"], rows, cfg.seed, meta), ok


def cmd_deviation_sweep(cfg: RunConfig):
    rows, slope = wq.deviation_sweep(cfg.hbar_grid, margin=cfg.margin, method=cfg.method)
    ok = len(rows) > 1 and abs(slope - 2.0) <= 0.2
    meta = {"observable": "h", "ld_map": "q.affine:1,0.5", "n_rule": "ceil(32/hbar)",
            "margin": cfg.margin, "loglog_slope": slope, "pass": ok}
    return Table("deviation-sweep", ["hbar", "N", "deviation"], rows, cfg.seed, meta), ok


def cmd_peetre(cfg: RunConfig):
    L = pp.operator(cfg.operator)
    sup = pp.support_nonincrease_check(L, seed=cfg.seed)
    meta = {"operator": cfg.operator, "support_pass": sup.passed,
            "support_max_leakage": sup.max_leakage}
    if not sup.passed:
        meta["pass"] = False
        return Table("peetre", ["power", "m", "slope", "vanished"], [], cfg.seed, meta), None
    rep = pp.order_multiplicativity_check(L, cfg.power, delta_grid=cfg.delta_grid)
    rows = []
    for est, power in zip(rep.estimates, (1, cfg.power)):
        for m, s, v in est.to_rows():
            rows.append((power, m, s, v))
    meta.update(order=rep.base_order, power=rep.power, power_order=rep.power_order,
                expected=rep.expected, note=rep.note, **{"pass": rep.passed})
    return Table("peetre", ["power", "m", "slope", "vanished"], rows, cfg.seed, meta), rep.passed


def _lemma_observable(text: str) -> cl.ClassicalObservable:
    if ":" in text and not text.startswith("affine"):
        psi, name = text.rsplit(":", 1)
        return cl.compose(cl.ld_map(psi), cl.observable(name))
    return cl.observable(text)


def cmd_lemma(cfg: RunConfig):
    j, l = _lemma_observable(cfg.j), _lemma_observable(cfg.l)
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(-cl.DEFAULT_HALF_WIDTH, cl.DEFAULT_HALF_WIDTH, size=(2, cfg.samples))
    r1, r2, scale = cl.lemma_identity_residuals(j, l, pts[0], pts[1])
    bound = 1e-9 * scale**4
    ok = r1 <= bound and r2 <= bound
    meta = {"j": j.label, "l": l.label, "samples": cfg.samples, "scale": scale,
            "bound": bound, "pass": ok}
    return Table("lemma", ["residual", "value"], [("r1", r1), ("r2", r2)], cfg.seed, meta), ok


def cmd_generating_op(cfg: RunConfig):
    if cfg.input:
        K = _load_operators(cfg.input)
    else:
        rng = np.random.default_rng(cfg.seed)
        S0 = we.random_hermitian(cfg.N, rng)
        K = [oc.functional_calculus(S0, np.polynomial.Polynomial(rng.standard_normal(d + 2)))
             for d in range(3)]
    gen = oc.generating_operator(K, seed=cfg.seed)
    rows = []
    for k, Kk in enumerate(K):
        err = oc.operator_norm(gen.reconstruct(k).entries - Kk.entries)
        rows.append((k, len(gen.funcs[k]), err, err <= 1e-9 * Kk.scale))
    ok = all(r[3] for r in rows)
    meta = {"N": K[0].dim, "distinct_labels": len(gen.funcs[0]), "pass": ok}
    return Table("generating-op", ["member", "labels", "reconstruction_error", "pass"], rows,
                 cfg.seed, meta), ok


def cmd_commutant(cfg: RunConfig):
    if cfg.input:
        family = _load_operators(cfg.input)
        source = cfg.input
    else:
        family = list(make_pair(cfg.pair, cfg.N, cfg.seed))
        source = cfg.pair
    d = oc.commutant_dimension(family)
    n = family[0].dim
    meta = {"source": source, "N": n, "irreducible": d == 1, "pass": True}
    return Table("commutant", ["N", "commutant_dimension"], [(n, d)], cfg.seed, meta), True


HANDLERS = {
    "witness": cmd_witness, "audit": cmd_audit, "deviation-sweep": cmd_deviation_sweep,
    "peetre": cmd_peetre, "lemma": cmd_lemma, "generating-op": cmd_generating_op,
    "commutant": cmd_commutant,
}


def run(cfg: RunConfig) -> int:
    try:
        table, ok = HANDLERS[cfg.command](cfg)
    except (CommutingOperatorsError, NonCommutingError, AmbiguityError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NEGATIVE
    except (QuadratureAccuracyError, EstimationError) as exc:
        print(f"accuracy error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except (ConfigError, DomainError, KeyError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = table.render(cfg.format)
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if ok is None:
        print(f"{cfg.command}: negative result, see output", file=sys.stderr)
        return EXIT_NEGATIVE
    return EXIT_OK if ok else EXIT_NEGATIVE


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
