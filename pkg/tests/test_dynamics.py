import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoprobe.dynamics import (
    BlochVector,
    EvolutionContext,
    ProbeState,
    StateError,
    bloch_vector,
    evolve,
    evolve_ode_oracle,
    half_angles,
    initial_state,
    populations,
    steady_state,
    trace_distance,
)
from thermoprobe.rates import BathParams, DomainError, ProbeParams, rate_bundle


def context(p, T=0.5, gm=1.0, include_lamb=True):
    bundle = rate_bundle(p, BathParams(T), include_lamb=include_lamb)
    return EvolutionContext.from_bundle(bundle, gm / (bundle.gamma0 * bundle.m_factor))


class TestProbeState:
    @pytest.mark.parametrize("rho,match", [
        (np.eye(3) / 3, "2x2"),
        ([[0.5, 0.1], [0.2, 0.5]], "Hermitian"),
        ([[0.6, 0], [0, 0.6]], "trace"),
        ([[1.2, 0], [0, -0.2]], "positive"),
        ([[math.nan, 0], [0, 1]], "non-finite"),
    ])
    def test_invariants(self, rho, match):
        with pytest.raises(StateError, match=match):
            ProbeState(np.array(rho, dtype=complex))

    def test_read_only(self):
        s = ProbeState(np.eye(2) / 2)
        with pytest.raises(ValueError):
            s.rho[0, 0] = 1

    def test_bloch_norm_bound(self):
        with pytest.raises(StateError):
            BlochVector(1.0, 0.5, 0.0)

    def test_bloch_roundtrip(self):
        w = BlochVector(0.3, -0.2, 0.5)
        assert bloch_vector(w.to_state()).as_array() == pytest.approx(w.as_array(), abs=1e-15)


class TestInitialState:
    @pytest.mark.parametrize("theta,phi", [(0.0, 0.0), (math.pi / 3, 1.0), (math.pi, 4.0), (2.0, 6.0)])
    def test_pure_with_expected_bloch_vector(self, theta, phi):
        s = initial_state(theta, phi)
        assert s.purity == pytest.approx(1.0, abs=1e-15)
        expected = [math.sin(theta) * math.cos(phi), -math.sin(theta) * math.sin(phi), math.cos(theta)]
        assert bloch_vector(s).as_array() == pytest.approx(expected, abs=1e-15)

    def test_half_angles_exact_at_pi(self):
        assert half_angles(math.pi) == (0.0, 1.0)
        c, s = half_angles(1.0)
        assert c == pytest.approx(math.cos(0.5)) and s == pytest.approx(math.sin(0.5))

    @pytest.mark.parametrize("theta,phi", [(-0.1, 0.0), (3.2, 0.0), (1.0, 2 * math.pi)])
    def test_rejects_bad_angles(self, theta, phi):
        with pytest.raises(DomainError):
            initial_state(theta, phi)


class TestEvolve:
    def test_zero_time_is_initial_state(self):
        p = ProbeParams(1.0, 0.3, 1.0, theta=1.2, phi=0.4)
        ctx = EvolutionContext.build(p, BathParams(0.5), 0.0)
        np.testing.assert_allclose(evolve(p, ctx).rho, initial_state(1.2, 0.4).rho, atol=1e-16)

    @pytest.mark.parametrize("coupling", ["udw", "td"])
    def test_long_time_is_steady_state(self, coupling):
        p = ProbeParams(0.7, 0.3, 2.0, theta=0.4, phi=1.0, coupling=coupling)
        ctx = context(p, T=0.4, gm=100.0)
        ss = steady_state(ctx.bundle)
        np.testing.assert_allclose(evolve(p, ctx).rho, ss.rho, atol=1e-15)
        n, m = ctx.bundle.n_mean, ctx.bundle.m_factor
        assert ss.rho[0, 0].real == pytest.approx(0.5 * (1 - 1 / m), rel=1e-14)
        assert ss.rho[0, 0].real / ss.rho[1, 1].real == pytest.approx(n / (n + 1), rel=1e-14)

    def test_hot_steady_state_is_nearly_maximally_mixed(self):
        bundle = rate_bundle(ProbeParams(1.0, 0.1, 0.5), BathParams(1e4))
        rho = steady_state(bundle).rho
        # the deviation is exactly 1/(2M); allow for rounding
        assert abs(rho[0, 0].real - 0.5) <= (1 + 1e-12) / (2 * bundle.m_factor)

    def test_steady_state_needs_decay(self):
        with pytest.raises(DomainError):
            steady_state(rate_bundle(ProbeParams(1.0, 0.0), BathParams(1.0)))

    def test_populations_resolve_tiny_excitation(self):
        n = 1e-40
        excited, ground = populations(math.pi, 3.0, n)
        assert excited == pytest.approx(-math.expm1(-3.0) * n / (2 * n + 1), rel=1e-14)
        assert ground == pytest.approx(1.0, rel=1e-15)

    def test_lamb_shift_only_rotates_coherence(self):
        p = ProbeParams(1.0, 0.5, 1.0, theta=1.0)
        on = evolve(p, context(p, include_lamb=True)).rho
        off = evolve(p, context(p, include_lamb=False)).rho
        assert on[0, 0] == off[0, 0]
        assert abs(on[0, 1]) == pytest.approx(abs(off[0, 1]), rel=1e-14)

    def test_context_validation(self):
        bundle = rate_bundle(ProbeParams(1.0, 1.0), BathParams(1.0))
        with pytest.raises(DomainError):
            EvolutionContext.from_bundle(bundle, -1.0)
        with pytest.raises(DomainError):
            EvolutionContext(tau=1.0, g=5.0, bundle=bundle)

    @settings(max_examples=80, deadline=None)
    @given(theta=st.floats(0, math.pi), phi=st.floats(0, 6.28), gm=st.floats(0, 1e3),
           T=st.floats(1e-3, 300.0), u=st.floats(0, 30), coupling=st.sampled_from(["udw", "td"]))
    def test_always_a_density_matrix(self, theta, phi, gm, T, u, coupling):
        p = ProbeParams(1.0, 0.2, u, theta=theta, phi=phi, coupling=coupling)
        state = evolve(p, context(p, T=T, gm=gm, include_lamb=False))
        assert bloch_vector(state).norm() <= 1 + 1e-12


class TestOdeOracle:
    @pytest.mark.parametrize("coupling", ["udw", "td"])
    @pytest.mark.parametrize("gm", [1e-3, 0.3, 3.0, 40.0])
    def test_matches_closed_form(self, coupling, gm):
        p = ProbeParams(0.5, 0.3, 1.5, theta=math.pi / 3, phi=1.0, coupling=coupling)
        ctx = context(p, T=0.3, gm=gm)
        if abs(ctx.bundle.omega_shifted) * ctx.tau > 300:
            ctx = EvolutionContext.from_bundle(ctx.bundle, 300 / abs(ctx.bundle.omega_shifted))
        assert trace_distance(evolve(p, ctx), evolve_ode_oracle(p, ctx)) <= 1e-8

    def test_reference_point(self):
        p = ProbeParams(0.5, 0.01, 4.0, theta=math.pi / 3, phi=1.0)
        ctx = EvolutionContext.build(p, BathParams(0.05), 1e3)
        assert trace_distance(evolve(p, ctx), evolve_ode_oracle(p, ctx)) <= 1e-8


class TestTraceDistance:
    def test_metric_properties(self):
        a = initial_state(0.3, 0.0)
        b = initial_state(2.0, 1.0)
        assert trace_distance(a, a) == 0.0
        assert trace_distance(a, b) == pytest.approx(trace_distance(b, a))
        assert 0 < trace_distance(a, b) <= 1

    def test_orthogonal_pure_states(self):
        assert trace_distance(initial_state(0.0, 0.0), initial_state(math.pi, 0.0)) == pytest.approx(1.0)
