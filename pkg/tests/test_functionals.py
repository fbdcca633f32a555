import math

import numpy as np
import pytest
from scipy.integrate import quad as adaptive_quad

from ultraflow import (
    GridFn,
    Params,
    PositivityError,
    beta_roots,
    cdc_triple,
    deficit,
    dissipation_heat,
    dissipation_nonlinear,
    entropy,
    fisher,
    quotient,
    two_star,
)
from ultraflow.discretization import normalization_constant, random_positive
from ultraflow.functionals import heat_bracket, nonlinear_bracket

from conftest import cached_quadrature


def rho_power(quad, u_vals, p):
    return GridFn.from_values(quad, u_vals**p)


class TestEntropy:
    def test_constant_vanishes(self, quad5):
        rho = GridFn.constant(quad5, 2.3)
        assert abs(entropy(rho, 3.0)) < 1e-14
        assert abs(entropy(rho, 2.0)) < 1e-14

    def test_log_branch_is_the_limit(self, quad5, rng):
        rho = random_positive(quad5, rng, modes=10, amplitude=0.5)
        e2 = entropy(rho, 2.0)
        for p in (2.0 + 1e-6, 2.0 - 1e-6):
            assert abs(entropy(rho, p) - e2) <= 1e-5 * (1.0 + abs(e2))

    def test_against_adaptive_oracle(self):
        d = 4.0
        p = two_star(d)
        quad = cached_quadrature(d, 128)
        rho = GridFn.from_function(quad, lambda z: (1 + z / 2) ** -d)
        z_d = normalization_constant(d)
        dens = lambda z: (1 - z * z) ** (d / 2 - 1) / z_d
        mass = adaptive_quad(lambda z: (1 + z / 2) ** -d * dens(z), -1, 1,
                             epsabs=1e-14, epsrel=1e-13)[0]
        frac = adaptive_quad(lambda z: (1 + z / 2) ** (-d * 2 / p) * dens(z), -1, 1,
                             epsabs=1e-14, epsrel=1e-13)[0]
        oracle = (mass ** (2 / p) - frac) / (p - 2)
        assert entropy(rho, p) == pytest.approx(oracle, abs=1e-10)

    def test_nonnegative_on_powers(self, quad5, rng):
        # the entropy of u^p is an interpolation gap of norms, hence >= 0
        for _ in range(10):
            u = random_positive(quad5, rng, modes=10, amplitude=0.6)
            assert entropy(rho_power(quad5, u.values, 3.0), 3.0) >= -1e-14

    def test_positivity_guard(self, quad5):
        rho = GridFn.from_values(quad5, quad5.nodes + 1.5)  # dips near 0.5, fine
        entropy(rho, 3.0)
        bad = GridFn.from_values(quad5, quad5.nodes)  # sign changing
        with pytest.raises(PositivityError):
            entropy(bad, 3.0)


class TestFisher:
    def test_constant_vanishes(self, quad5):
        assert fisher(GridFn.constant(quad5, 1.7), 3.0) == pytest.approx(0.0, abs=1e-20)

    def test_small_perturbation_expansion(self, quad5):
        # fisher(u^p) = eps^2 int nu + O(eps^3) for u = 1 + eps z
        d = 5.0
        int_nu = d / (d + 1.0)
        for eps in (1e-2, 1e-3):
            rho = rho_power(quad5, 1.0 + eps * quad5.nodes, 3.0)
            assert fisher(rho, 3.0) == pytest.approx(eps**2 * int_nu, rel=1e-12)

    def test_power_consistency(self, quad5, rng):
        from ultraflow import derivative

        u = random_positive(quad5, rng, modes=10, amplitude=0.6)
        direct = float(np.sum(quad5.weights * quad5.nu * derivative(u).values ** 2))
        assert abs(fisher(rho_power(quad5, u.values, 3.3), 3.3) - direct) < 1e-11


class TestDeficitAndQuotient:
    def test_deficit_constant_zero(self, quad5):
        assert abs(deficit(GridFn.constant(quad5, 2.0), 3.0)) < 1e-14

    def test_deficit_nonnegative(self, quad5, rng):
        vals = []
        for _ in range(50):
            u = random_positive(quad5, rng, modes=10, amplitude=0.6)
            vals.append(deficit(rho_power(quad5, u.values, 3.0), 3.0))
        assert min(vals) >= -1e-12

    @pytest.mark.parametrize("d,b", [(4.0, 0.3), (5.0, 0.4)])
    def test_conformal_family_saturates(self, d, b):
        p = two_star(d)
        quad = cached_quadrature(d, 128)
        u = GridFn.from_function(quad, lambda z: (1 + b * z) ** (-(d - 2) / 2))
        assert abs(deficit(rho_power(quad, u.values, p), p)) <= 1e-8

    def test_quotient_limit_is_d(self, quad5):
        # Richardson in eps^2: Q(1 + eps z) = d + c eps^2 + O(eps^4)
        qs = {}
        for eps in (0.01, 0.005):
            u = GridFn.from_values(quad5, 1.0 + eps * quad5.nodes)
            qs[eps] = quotient(u, 3.0)
        extrapolated = (4.0 * qs[0.005] - qs[0.01]) / 3.0
        assert abs(extrapolated - 5.0) <= 1e-3

    def test_quotient_vs_deficit_sign(self, quad5, rng):
        for _ in range(20):
            u = random_positive(quad5, rng, modes=8, amplitude=0.6)
            q = quotient(u, 3.0)
            f = deficit(rho_power(quad5, u.values, 3.0), 3.0)
            assert q >= 5.0 - 1e-9
            assert (q - 5.0) * 5.0 == pytest.approx(
                f * 5.0 / entropy(rho_power(quad5, u.values, 3.0), 3.0) * 5.0, rel=1e-8
            )

    def test_quotient_constant_raises(self, quad5):
        with pytest.raises(ZeroDivisionError):
            quotient(GridFn.constant(quad5, 1.0), 3.0)

    def test_log_quotient_limit(self, quad5):
        qs = {}
        for eps in (0.01, 0.005):
            u = GridFn.from_values(quad5, 1.0 + eps * quad5.nodes)
            qs[eps] = quotient(u, 2.0)
        extrapolated = (4.0 * qs[0.005] - qs[0.01]) / 3.0
        assert abs(extrapolated - 5.0) <= 1e-3


class TestCdcTriple:
    def test_constant_zero(self, quad5):
        assert cdc_triple(GridFn.constant(quad5, 1.0)) == pytest.approx((0.0, 0.0, 0.0), abs=1e-25)

    def test_powerlaw_structure(self, quad5):
        # w = (a + b z)^(1/(1-alpha)) satisfies w'' = alpha |w'|^2/w, so
        # J_fc = alpha J_cc and J_ff = alpha^2 J_cc
        alpha = 0.6
        w = GridFn.from_function(quad5, lambda z: (1 + 0.4 * z) ** (1 / (1 - alpha)))
        j_ff, j_fc, j_cc = cdc_triple(w)
        assert j_fc == pytest.approx(alpha * j_cc, rel=1e-9)
        assert j_ff == pytest.approx(alpha**2 * j_cc, rel=1e-9)

    def test_cauchy_schwarz(self, quad5, rng):
        for _ in range(20):
            u = random_positive(quad5, rng, modes=10, amplitude=0.7)
            j_ff, j_fc, j_cc = cdc_triple(u)
            assert j_ff >= 0.0 and j_cc >= 0.0
            assert j_fc**2 <= j_ff * j_cc * (1.0 + 1e-12)


class TestDissipation:
    def test_expanded_equals_completed_square(self, quad5, rng):
        for _ in range(10):
            u = random_positive(quad5, rng, modes=12, amplitude=0.6)
            e, s = heat_bracket(u, 3.0)
            assert e == pytest.approx(s, rel=1e-10)
            e, s = nonlinear_bracket(u, 3.3, 1.2)
            assert e == pytest.approx(s, rel=1e-10)

    def test_heat_sign_below_sharp(self, quad5, rng):
        for _ in range(50):
            u = random_positive(quad5, rng, modes=10, amplitude=0.6)
            assert dissipation_heat(u, 3.0).dF_dt_analytic <= 0.0

    def test_constant_report_zeros(self, quad5):
        rep = dissipation_heat(GridFn.constant(quad5, 1.3), 3.0)
        for name in ("E_p", "I_p", "F", "J_ff", "J_fc", "J_cc", "dF_dt_analytic"):
            assert abs(getattr(rep, name)) < 1e-14
        assert math.isnan(rep.Q_p)  # 0/0 at constants

    def test_beta_one_reduces_to_heat(self, quad5, rng):
        u = random_positive(quad5, rng, modes=10, amplitude=0.6)
        r_heat = dissipation_heat(u, 3.0)
        r_nl = dissipation_nonlinear(u, 3.0, 1.0)
        assert r_nl.dF_dt_analytic == pytest.approx(r_heat.dF_dt_analytic, abs=1e-12)

    def test_nonlinear_sign_at_admissible_beta(self, quad5, rng):
        params = Params(5.0, 3.3)
        beta = beta_roots(params).minus
        for _ in range(50):
            w = random_positive(quad5, rng, modes=10, amplitude=0.6)
            assert dissipation_nonlinear(w, 3.3, beta).dF_dt_analytic <= 1e-10

    def test_pure_square_at_critical(self, quad5):
        # gamma vanishes at the critical double root: the dissipation is the
        # completed square alone, and it vanishes on the conformal datum
        d = 5.0
        p = two_star(d)
        beta = (d - 2.0) / (d - 3.0)
        w = GridFn.from_function(quad5, lambda z: (1 + 0.4 * z) ** (-(d - 3) / 2))
        rep = dissipation_nonlinear(w, p, beta)
        assert abs(rep.dF_dt_analytic) <= 1e-8

    def test_report_serialization(self, quad5, rng):
        u = random_positive(quad5, rng, modes=8, amplitude=0.5)
        rep = dissipation_heat(u, 3.0)
        d = rep.to_dict()
        assert set(d) == {
            "E_p", "I_p", "F", "Q_p", "J_ff", "J_fc", "J_cc",
            "dF_dt_analytic", "dF_dt_numeric", "config",
        }
        assert d["config"]["N"] == 128

    def test_p_continuity_of_deficit(self, quad5, rng):
        rho = random_positive(quad5, rng, modes=8, amplitude=0.5)
        base = deficit(rho, 2.0)
        for p in (2.0 + 1e-6, 2.0 - 1e-6):
            assert abs(deficit(rho, p) - base) <= 1e-5 * (1.0 + abs(base))

    def test_p_continuity_of_quotient(self, quad5, rng):
        u = random_positive(quad5, rng, modes=8, amplitude=0.5)
        base = quotient(u, 2.0)
        for p in (2.0 + 1e-6, 2.0 - 1e-6):
            assert abs(quotient(u, p) - base) <= 1e-5 * (1.0 + abs(base))

    def test_heat_dissipation_positive_at_powerlaw_witness(self, quad5):
        # cross-module tie: at the power-law witness the report's analytic
        # derivative equals 2 (A / beta^2) J_cc, a strictly positive value
        from ultraflow import beta_roots, counterexample_coefficient

        params = Params(5.0, 3.25)
        beta = beta_roots(params).minus
        alpha = 4.0 * beta * 2.25 / 7.0
        w = GridFn.from_function(quad5, lambda z: (1 + 0.4 * z) ** (1.0 / (1.0 - alpha)))
        f = GridFn.from_values(quad5, w.values**beta)
        rep = dissipation_heat(f, 3.25)
        expected = 2.0 * counterexample_coefficient(params, beta) * rep.J_cc / beta**2
        assert rep.dF_dt_analytic > 0.0
        assert rep.dF_dt_analytic == pytest.approx(expected, rel=1e-9)
