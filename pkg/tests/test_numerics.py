import math

import mpmath as mp
import numpy as np
import pytest

from thermoprobe.numerics import (
    NoisyFunctionError,
    OdeError,
    OdeSpec,
    QuadratureError,
    QuadratureSpec,
    differentiate,
    gauss_kronrod,
    integrate,
    ode_integrate,
)


def rel(a, b):
    return abs(a - b) / abs(b)


class TestGaussKronrod:
    @pytest.mark.parametrize("degree", [0, 5, 20, 31])
    def test_exact_for_polynomials(self, degree):
        value, _ = gauss_kronrod(lambda x: x ** degree, 0.0, 1.0)
        assert value == pytest.approx(1 / (degree + 1), rel=1e-14)

    def test_error_estimate_is_small_for_smooth_integrand(self):
        value, err = gauss_kronrod(np.exp, 0.0, 1.0)
        assert abs(value - math.e + 1) <= max(err, 1e-15)


class TestQuadratureSpec:
    @pytest.mark.parametrize("kwargs", [
        dict(rel_tol=0.0),
        dict(abs_tol=-1.0),
        dict(max_subdivisions=0),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            QuadratureSpec(**kwargs)

    def test_singular_points_are_sorted(self):
        assert QuadratureSpec(singular_points=(2.0, 1.0)).singular_points == (1.0, 2.0)

    def test_singular_point_must_be_interior(self):
        with pytest.raises(ValueError):
            integrate(lambda x: x, 0.0, 1.0, QuadratureSpec(singular_points=(1.0,)))

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            integrate(lambda x: x, 1.0, 1.0)


# 20 integrals with closed forms: (f, a, b, exact)
BATTERY = [
    (lambda x: x ** 2, 0.0, 1.0, 1 / 3),
    (np.exp, 0.0, 1.0, math.e - 1),
    (np.sin, 0.0, math.pi, 2.0),
    (np.cos, 0.0, math.pi / 2, 1.0),
    (lambda x: 1 / (1 + x ** 2), 0.0, 1.0, math.pi / 4),
    (np.sqrt, 0.0, 1.0, 2 / 3),
    (np.log, 1e-300, 1.0, -1.0),
    (lambda x: 1 / np.sqrt(x), 1e-300, 1.0, 2.0),
    (lambda x: np.exp(-x * x), -5.0, 5.0, math.sqrt(math.pi) * math.erf(5.0)),
    (lambda x: x * np.exp(-x), 0.0, 40.0, 1 - 41 * math.exp(-40)),
    (lambda x: 1 / x, 1.0, math.e, 1.0),
    (lambda x: np.abs(x - 0.3), 0.0, 1.0, 0.29),
    (lambda x: np.sin(50 * x) ** 2, 0.0, math.pi, math.pi / 2),
    (lambda x: x ** 9, -1.0, 2.0, (2 ** 10 - 1) / 10),
    (lambda x: np.exp(-x) * np.cos(x), 0.0, 30.0,
     0.5 * (1 - math.exp(-30) * (math.cos(30) - math.sin(30)))),
    (lambda x: 1 / (1 + 100 * x ** 2), -1.0, 1.0, 2 * math.atan(10) / 10),
    (lambda x: np.log(1 + x), 0.0, 1.0, 2 * math.log(2) - 1),
    (lambda x: x ** 2 / np.expm1(x), 1e-300, 50.0, None),
    (lambda x: np.tanh(x), 0.0, 3.0, math.log(math.cosh(3.0))),
    (lambda x: x ** 0.25, 0.0, 2.0, 0.8 * 2 ** 1.25),
]


class TestIntegrate:
    def test_polynomial(self):
        value, _ = integrate(lambda x: x * x, 0.0, 1.0)
        assert rel(value, 1 / 3) <= 1e-12

    @pytest.mark.parametrize("f,a,b,exact", BATTERY)
    def test_error_estimates_are_honest(self, f, a, b, exact):
        if exact is None:
            mp.mp.dps = 30
            exact = float(mp.quad(lambda x: x ** 2 / mp.expm1(x), [0, 1, 10, 50]))
        value, err = integrate(f, a, b, QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14))
        true_err = abs(value - exact)
        assert true_err <= 3 * err + 4 * np.finfo(float).eps * abs(exact)
        assert err <= 1e-10 * abs(value) + 1e-14

    def test_log_singularity(self):
        spec = QuadratureSpec(singular_points=(1.0,))
        value, _ = integrate(lambda x: np.log(np.abs(1 - x)), 0.0, 2.0, spec)
        assert rel(value, -2.0) <= 1e-10

    def test_cauchy_principal_value(self):
        spec = QuadratureSpec(singular_points=(1.0,))
        value, _ = integrate(lambda x: 1 / (x - 1), 0.0, 3.0, spec)
        assert rel(value, math.log(2.0)) <= 1e-10

    def test_principal_value_with_smooth_numerator(self):
        # PV int_0^2 e^x / (x - 1) dx = e * (Ei(1) - Ei(-1))
        spec = QuadratureSpec(singular_points=(1.0,))
        value, _ = integrate(lambda x: np.exp(x) / (x - 1), 0.0, 2.0, spec)
        exact = float(mp.e * (mp.ei(1) - mp.ei(-1)))
        assert rel(value, exact) <= 1e-10

    def test_two_singular_points(self):
        def f(x):
            return 1 / (x - 1) + 1 / (x - 2)

        forward, _ = integrate(f, 0.0, 3.0, QuadratureSpec(abs_tol=1e-12, singular_points=(1.0, 2.0)))
        reverse, _ = integrate(f, 0.0, 3.0, QuadratureSpec(abs_tol=1e-12, singular_points=(2.0, 1.0)))
        # ln 2 + ln(1/2)
        assert abs(forward) <= 1e-12
        assert abs(forward - reverse) <= 1e-12

    def test_bose_moment_matches_zeta(self):
        for T in (0.01, 1.0, 300.0):
            value, _ = integrate(lambda k: k * k / np.expm1(k / T), 0.0, 50 * T,
                                 QuadratureSpec(rel_tol=1e-12, abs_tol=1e-300),
                                 breakpoints=[T, 5 * T, 20 * T])
            assert rel(value, 2 * float(mp.zeta(3)) * T ** 3) <= 1e-8

    def test_nonconvergence_raises(self):
        spec = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-300, max_subdivisions=5)
        with pytest.raises(QuadratureError):
            integrate(lambda x: np.sin(1 / x), 1e-6, 1.0, spec)


class TestDifferentiate:
    def test_exp(self):
        value, _ = differentiate(np.exp, 1.0)
        assert rel(value, math.e) <= 1e-9

    def test_second_derivative(self):
        value, _ = differentiate(np.sin, 0.7, order=2)
        assert rel(value, -math.sin(0.7)) <= 1e-7

    def test_respects_lower_bound(self):
        seen = []

        def f(x):
            seen.append(x)
            return math.log(x)

        value, _ = differentiate(f, 1e-3, lower=0.0)
        assert min(seen) > 0
        assert rel(value, 1e3) <= 1e-8

    def test_vector_valued(self):
        value, _ = differentiate(lambda x: np.array([x ** 2, np.sin(x)]), 0.5)
        np.testing.assert_allclose(value, [1.0, math.cos(0.5)], rtol=1e-9)

    def test_kink_is_noisy(self):
        with pytest.raises(NoisyFunctionError):
            differentiate(abs, 0.0)

    def test_unsupported_order(self):
        with pytest.raises(ValueError):
            differentiate(np.exp, 0.0, order=3)


class TestOde:
    def test_decay(self):
        y = ode_integrate(lambda t, y: -y, np.array([1.0]), (0.0, 1.0))
        assert rel(y[0], math.exp(-1)) <= 1e-9

    def test_unitary_phase_preserves_modulus(self):
        omega = 3.0
        y = ode_integrate(lambda t, y: 1j * omega * y, np.array([1.0 + 0j]), (0.0, 100 / omega))
        assert abs(abs(y[0]) - 1) <= 1e-10

    def test_invariant_under_halving_tolerance(self):
        def rhs(t, y):
            return np.array([y[1], -y[0] - 0.1 * y[1]])

        a = ode_integrate(rhs, np.array([1.0, 0.0]), (0.0, 20.0), OdeSpec(1e-10))
        b = ode_integrate(rhs, np.array([1.0, 0.0]), (0.0, 20.0), OdeSpec(5e-11))
        assert np.max(np.abs(a - b)) <= 1e-9

    def test_zero_span_returns_copy(self):
        y0 = np.array([2.0])
        y = ode_integrate(lambda t, y: y, y0, (1.0, 1.0))
        assert y == y0 and y is not y0

    def test_step_budget(self):
        with pytest.raises(OdeError):
            ode_integrate(lambda t, y: 1j * 1e3 * y, np.array([1.0 + 0j]), (0.0, 100.0),
                          OdeSpec(1e-10, max_steps=10))

    @pytest.mark.parametrize("kwargs", [dict(local_error_tol=0), dict(initial_step=-1.0),
                                        dict(max_steps=0)])
    def test_spec_validation(self, kwargs):
        with pytest.raises(ValueError):
            OdeSpec(**kwargs)
