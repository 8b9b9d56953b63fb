import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.hermite import hermgauss
from scipy.special import roots_laguerre

from neumann_lab.classical_layer import (ClassicalObservable, compose, constant, ld_affine, ld_g,
                                         ld_identity, ld_q, observable)
from neumann_lab.errors import QuadratureAccuracyError
from neumann_lab.operator_core import commutator, operator_norm
from neumann_lab.weyl_quantizer import (AXIOMS, MultiplicationQuantizer, QuantizationContext,
                                        axiom_audit, block_norm, default_audit_maps,
                                        deviation_sweep, gauss_hermite_function_rule,
                                        gauss_laguerre_function_rule, hermite_functions,
                                        momentum_operator, neumann_deviation, position_operator,
                                        weyl_quantize)

# frozen baselines at N = 32, hbar = 1, margin 8, polar engine
G_OF_X_DEVIATION = 0.008223722650726573
Q_OF_H_DEVIATION = 1.0000000000106282

X, P, XP, H = (observable(k) for k in ("x", "p", "xp", "h"))
SHIFTED_Q = ld_affine(1.0, 0.5).then(ld_q())


@pytest.fixture(scope="module")
def ctx16():
    return QuantizationContext(16, quad_order=64)


@pytest.fixture(scope="module")
def ctx32():
    return QuantizationContext(32)


class TestRules:
    def test_hermite_rule_matches_numpy(self):
        t, w = gauss_hermite_function_rule(20)
        tn, wn = hermgauss(20)
        assert np.allclose(t, tn, atol=1e-13)
        assert np.allclose(w, wn * np.exp(tn**2), rtol=1e-10)

    def test_laguerre_rule_matches_scipy(self):
        z, w = gauss_laguerre_function_rule(20)
        zs, ws = roots_laguerre(20)
        assert np.allclose(z, zs, rtol=1e-12)
        assert np.allclose(w, ws * np.exp(zs), rtol=1e-9)

    def test_large_rules_finite(self):
        for n in (512, 1024):
            t, w = gauss_hermite_function_rule(n)
            z, v = gauss_laguerre_function_rule(n)
            assert np.all(np.isfinite(w)) and np.all(np.isfinite(v))
            assert np.all(w > 0) and np.all(v > 0)

    def test_hermite_functions_orthonormal(self):
        t, w = gauss_hermite_function_rule(80)
        h = hermite_functions(t, 30)
        assert np.abs((h * w) @ h.T - np.eye(30)).max() <= 1e-12

    def test_context_basis(self, ctx32):
        assert ctx32.basis.shape == (128, 32)
        assert ctx32.basis_orthonormality_error() <= 1e-8


class TestContext:
    def test_default_order(self):
        assert QuantizationContext(10).quad_order == 40

    def test_rejects_low_order(self):
        with pytest.raises(ValueError, match="below 2N"):
            QuantizationContext(10, quad_order=12)

    @pytest.mark.parametrize("kw", [{"hbar": 0.0}, {"method": "monte-carlo"}, {"margin": 10}])
    def test_rejects_bad_settings(self, kw):
        with pytest.raises(ValueError):
            QuantizationContext(10, **kw)


class TestLadder:
    def test_n2_position(self):
        Xm = position_operator(QuantizationContext(2))
        s = math.sqrt(0.5)
        assert np.allclose(Xm.entries, [[0, s], [s, 0]], atol=1e-15)

    def test_ccr_block_and_trace(self, ctx32):
        Xm, Pm = position_operator(ctx32), momentum_operator(ctx32)
        c = commutator(Xm, Pm)
        assert block_norm(c - 1j * np.eye(32), 30) <= 1e-10
        assert abs(np.trace(c)) <= 1e-12
        # the corner carries the full trace defect
        assert abs(c[-1, -1] - 1j) > 1.0

    def test_hbar_scaling(self):
        ctx = QuantizationContext(12, hbar=0.25)
        c = commutator(position_operator(ctx), momentum_operator(ctx))
        assert block_norm(c - 0.25j * np.eye(12), 10) <= 1e-12


class TestQuantize:
    def test_unit(self, ctx16):
        assert operator_norm(weyl_quantize(ctx16, constant(1.0)).entries - np.eye(16)) <= 1e-8

    def test_position_and_momentum(self, ctx16):
        assert operator_norm(weyl_quantize(ctx16, X).entries - position_operator(ctx16).entries) <= 1e-8
        assert operator_norm(weyl_quantize(ctx16, P).entries - momentum_operator(ctx16).entries) <= 1e-8

    def test_symmetrization(self, ctx16):
        Xm, Pm = position_operator(ctx16).entries, momentum_operator(ctx16).entries
        sym = 0.5 * (Xm @ Pm + Pm @ Xm)
        assert block_norm(weyl_quantize(ctx16, XP).entries - sym, 14) <= 1e-8

    def test_oscillator_spectrum(self, ctx16):
        Qh = weyl_quantize(ctx16, H)
        assert np.allclose(np.diag(Qh.entries).real, 2 * np.arange(16) + 1, atol=1e-9)
        assert operator_norm(Qh.entries - np.diag(np.diag(Qh.entries))) <= 1e-9

    def test_engines_agree(self):
        f = compose(ld_g(), XP)
        a = weyl_quantize(QuantizationContext(12, quad_order=64, method="polar"), f)
        b = weyl_quantize(QuantizationContext(12, quad_order=256, method="hermite",
                                              check_convergence=False), f)
        assert operator_norm(a.entries - b.entries) <= 1e-6

    def test_hermitian_output(self, ctx16):
        Q = weyl_quantize(ctx16, compose(ld_g(), XP + P))
        assert np.array_equal(Q.entries, Q.entries.conj().T)

    def test_order_doubling_stable(self):
        f = compose(ld_g(), XP)
        a = weyl_quantize(QuantizationContext(16, quad_order=128), f)
        b = weyl_quantize(QuantizationContext(16, quad_order=256), f)
        assert operator_norm(a.entries - b.entries) <= 1e-8

    def test_g_of_x_matches_position_reference(self, ctx32):
        t, w = gauss_hermite_function_rule(256)
        h = hermite_functions(t, 32)
        ref = (h * w * (np.arctan(t) + np.pi)) @ h.T
        Q = weyl_quantize(ctx32, compose(ld_g(), X))
        assert np.abs(Q.entries - ref).max() <= 1e-8

    def test_non_convergence_raises(self):
        wild = ClassicalObservable(lambda x, p: np.cos(40 * x), "cos40x")
        with pytest.raises(QuadratureAccuracyError) as info:
            weyl_quantize(QuantizationContext(8, quad_order=16), wild)
        assert info.value.shift > 1e-6

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-2, 2), st.floats(-2, 2))
    def test_linearity(self, a, b):
        ctx = QuantizationContext(10, quad_order=40)
        f, g = compose(ld_g(), XP), H
        combo = ClassicalObservable(lambda x, p: a * f(x, p) + b * g(x, p))
        lhs = weyl_quantize(ctx, combo).entries
        rhs = a * weyl_quantize(ctx, f).entries + b * weyl_quantize(ctx, g).entries
        assert operator_norm(lhs - rhs) <= 1e-10 * max(1.0, operator_norm(rhs))


class TestNeumannDeviation:
    def test_identity_map(self, ctx32):
        assert neumann_deviation(ctx32, XP, ld_identity()) <= 1e-10

    def test_h_with_q_is_hbar_squared(self, ctx32):
        dev = neumann_deviation(ctx32, H, SHIFTED_Q)
        assert dev == pytest.approx(Q_OF_H_DEVIATION, rel=1e-9)
        assert dev == pytest.approx(1.0, rel=1e-8)

    def test_g_of_x_regression(self, ctx32):
        assert neumann_deviation(ctx32, X, ld_g()) == pytest.approx(G_OF_X_DEVIATION, rel=1e-6)

    def test_g_of_x_is_truncation_error(self, ctx32):
        devs = [neumann_deviation(ctx32, X, ld_g(), m) for m in (8, 12, 16, 20)]
        assert all(b < 0.5 * a for a, b in zip(devs, devs[1:]))

    @pytest.mark.xfail(strict=True, reason="g(X_N) differs from the compressed g(X) by "
                       "~8e-3 on the margin-8 block; see G_OF_X_DEVIATION")
    def test_g_of_x_below_1e6_at_margin_8(self, ctx32):
        assert neumann_deviation(ctx32, X, ld_g()) <= 1e-6

    def test_rejects_bad_margin(self, ctx32):
        with pytest.raises(ValueError):
            neumann_deviation(ctx32, X, ld_g(), 32)

    def test_sweep_two_points(self):
        rows, slope = deviation_sweep([1.0, 0.5], n_scale=16, margin=4)
        assert [r[1] for r in rows] == [16, 32]
        assert rows[0][2] == pytest.approx(1.0, rel=1e-6)
        assert rows[1][2] == pytest.approx(0.25, rel=1e-6)
        assert slope == pytest.approx(2.0, abs=1e-6)


class TestAudit:
    def test_weyl_signature(self, ctx32):
        rep = axiom_audit(ctx32, [X, P, XP, H], default_audit_maps())
        assert rep["linearity"].passed and rep["unit"].passed and rep["ccr"].passed
        assert not rep["neumann"].passed
        assert rep["neumann"].residual == pytest.approx(Q_OF_H_DEVIATION, rel=1e-9)

    def test_singleton_one(self, ctx16):
        rep = axiom_audit(ctx16, [constant(1.0)], [ld_identity()])
        for name in ("linearity", "unit", "neumann"):
            assert rep[name].residual <= 1e-12
        assert rep["ccr"].residual <= 1e-10

    def test_multiplication_map(self):
        mq = MultiplicationQuantizer(32)
        rep = axiom_audit(mq, [X, P, XP, H], default_audit_maps())
        assert rep["neumann"].residual <= 1e-10 and rep["neumann"].passed
        assert not rep["ccr"].passed
        assert rep["ccr"].residual == pytest.approx(1.0)

    def test_json_schema(self, ctx16):
        rep = axiom_audit(ctx16, [X, P], [ld_g()])
        doc = json.loads(rep.to_json())
        assert set(doc["context"]) >= {"N", "hbar", "quad_order", "margin"}
        assert [a["axiom"] for a in doc["axioms"]] == list(AXIOMS)
        assert set(doc["axioms"][0]) == {"axiom", "residual", "threshold", "pass"}
