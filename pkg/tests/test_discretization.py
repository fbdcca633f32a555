import numpy as np
import pytest
from scipy.integrate import quad as adaptive_quad

from ultraflow import (
    GridFn,
    PositivityError,
    QuadratureMismatchError,
    ResolutionError,
    apply_L,
    build_quadrature,
    derivative,
    eigenfunction,
    inner,
    integral,
    second_derivative,
    weighted_integral,
)
from ultraflow.discretization import (
    even_moment,
    normalization_constant,
    random_positive,
)
from ultraflow.errors import DomainError

from conftest import cached_quadrature


def nu_density(d):
    z_d = normalization_constant(d)
    return lambda z: (1.0 - z * z) ** (d / 2.0 - 1.0) / z_d


class TestQuadrature:
    @pytest.mark.parametrize("d", [1.0, 2.0, 2.5, 3.0, 4.0, 5.0, 8.0, 10.0])
    def test_probability_measure(self, d):
        quad = cached_quadrature(d, 64)
        assert abs(quad.weights.sum() - 1.0) < 1e-13

    def test_nodes_interior_increasing(self):
        quad = cached_quadrature(3.0, 40)
        assert quad.nodes[0] > -1.0 and quad.nodes[-1] < 1.0
        assert np.all(np.diff(quad.nodes) > 0)

    def test_second_moment_against_adaptive_oracle(self):
        # oracle: adaptive integration of z^2 against the weight density
        quad = cached_quadrature(3.0, 40)
        dens = nu_density(3.0)
        oracle, _ = adaptive_quad(lambda z: z * z * dens(z), -1, 1)
        val = integral(GridFn.from_values(quad, quad.nodes**2))
        assert abs(val - oracle) < 1e-12
        assert abs(val - 0.25) < 1e-13  # 1/(d+1) at d = 3

    def test_real_dimension_normalization(self):
        quad = cached_quadrature(2.5, 40)
        assert abs(integral(GridFn.constant(quad, 1.0)) - 1.0) < 1e-13

    @pytest.mark.parametrize("d", [1.0, 2.5, 5.0])
    def test_polynomial_exactness(self, d):
        # degree <= 2N-1 integrates exactly; closed-form symmetric moments
        quad = cached_quadrature(d, 16)
        for j in range(0, 15):
            vals = quad.nodes ** (2 * j)
            assert abs(float(np.sum(quad.weights * vals)) - even_moment(d, j)) < 1e-14
            assert abs(float(np.sum(quad.weights * quad.nodes ** (2 * j + 1)))) < 1e-15

    def test_bad_parameters(self):
        with pytest.raises(DomainError):
            build_quadrature(0.5, 32)
        with pytest.raises(DomainError):
            build_quadrature(3.0, 3)


class TestGridFn:
    def test_roundtrip(self, quad5, rng):
        f = random_positive(quad5, rng, modes=20, amplitude=0.7)
        back = GridFn.from_values(quad5, GridFn.from_coeffs(quad5, f.coeffs).values)
        err = np.sqrt(np.sum(quad5.weights * (back.values - f.values) ** 2))
        assert err < 1e-11

    def test_positivity_flag(self, quad5):
        f = GridFn.from_values(quad5, quad5.nodes)  # sign changing
        assert not f.is_positive()
        with pytest.raises(PositivityError):
            f.require_positive()

    def test_serialization_roundtrip(self, quad5, rng, tmp_path):
        f = random_positive(quad5, rng, modes=8)
        g = GridFn.from_json(f.to_json(), quad5)
        assert np.array_equal(g.coeffs, f.coeffs)
        path = tmp_path / "f.csv"
        f.to_csv(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.allclose(data[:, 1], f.values, rtol=0, atol=0)

    def test_serialization_mismatch(self, quad5, quad4, rng):
        f = random_positive(quad5, rng, modes=8)
        with pytest.raises(QuadratureMismatchError):
            GridFn.from_json(f.to_json(), quad4)


class TestOperators:
    def test_constant_in_kernel(self, quad5):
        f = GridFn.constant(quad5, 1.0)
        assert np.max(np.abs(apply_L(f).values)) < 1e-14
        assert np.max(np.abs(derivative(f).values)) < 1e-14

    def test_first_eigenfunction(self, quad5):
        f = GridFn.from_values(quad5, quad5.nodes)
        lf = apply_L(f)
        resid = lf.values + 5.0 * quad5.nodes
        # transform-roundtrip noise times the top eigenvalue sets the floor
        assert np.sqrt(np.sum(quad5.weights * resid**2)) < 5e-10

    def test_degree_two_eigenfunction(self, quad5):
        # z^2 - 1/(d+1), not z^2 - 2, spans the second eigenspace
        d = 5.0
        f = GridFn.from_values(quad5, quad5.nodes**2 - 1.0 / (d + 1.0))
        lf = apply_L(f)
        resid = lf.values + 2.0 * (d + 1.0) * f.values
        assert np.sqrt(np.sum(quad5.weights * resid**2)) < 5e-10
        g = GridFn.from_values(quad5, quad5.nodes**2 - 2.0)
        lg = apply_L(g)
        assert np.max(np.abs(lg.values + 2.0 * (d + 1.0) * g.values)) > 1.0

    @pytest.mark.parametrize("d", [3.0, 5.0])
    def test_eigenvalue_ladder(self, d):
        quad = cached_quadrature(d, 128)
        worst = 0.0
        for k in range(0, 65):
            phi = eigenfunction(quad, k)
            nodal = quad.nu * quad.second_derivative_values(
                phi.coeffs
            ) - d * quad.nodes * quad.derivative_values(phi.coeffs)
            resid = nodal - apply_L(phi).values
            worst = max(worst, float(np.sqrt(np.sum(quad.weights * resid**2))))
        assert worst < 1e-10

    def test_polynomial_derivative(self, quad5):
        f = GridFn.from_values(quad5, quad5.nodes**2)
        resid = derivative(f).values - 2.0 * quad5.nodes
        assert np.sqrt(np.sum(quad5.weights * resid**2)) < 1e-11

    def test_analytic_derivative_oracle(self):
        # relative to the derivative's sup, which the basis conditioning sets
        quad = cached_quadrature(3.0, 80)
        f = GridFn.from_function(quad, lambda z: (1 + z / 2) ** -3.0)
        exact = -1.5 * (1 + quad.nodes / 2) ** -4.0
        err = np.max(np.abs(derivative(f).values - exact))
        assert err / np.max(np.abs(exact)) < 1e-9

    def test_resolution_guard(self, quad5):
        coeffs = np.zeros(quad5.n)
        coeffs[0] = 1.0
        coeffs[-1] = 0.5
        f = GridFn.from_coeffs(quad5, coeffs)
        with pytest.raises(ResolutionError):
            apply_L(f)
        with pytest.raises(ResolutionError):
            derivative(f)

    def test_self_adjointness(self, quad5, rng):
        f = random_positive(quad5, rng, modes=12)
        g = random_positive(quad5, rng, modes=12)
        assert abs(inner(f, apply_L(g)) - inner(apply_L(f), g)) < 1e-10

    def test_integration_by_parts(self, quad5, rng):
        # <f, L g> = -int f' g' nu
        worst = 0.0
        for _ in range(5):
            f = random_positive(quad5, rng, modes=12)
            g = random_positive(quad5, rng, modes=12)
            lhs = inner(f, apply_L(g))
            rhs = -float(
                np.sum(quad5.weights * quad5.nu * derivative(f).values * derivative(g).values)
            )
            worst = max(worst, abs(lhs - rhs))
        assert worst < 1e-10

    def test_weighted_integral_oracle(self, quad5):
        # int z^2 nu dnu against adaptive quadrature
        dens = nu_density(5.0)
        oracle, _ = adaptive_quad(
            lambda z: z * z * (1 - z * z) * dens(z), -1, 1, epsabs=1e-14, epsrel=1e-13
        )
        f = GridFn.from_values(quad5, quad5.nodes**2)
        assert abs(weighted_integral(f, 1) - oracle) < 1e-12

    def test_quadrature_mismatch(self, quad5, quad4, rng):
        f = random_positive(quad5, rng, modes=6)
        g = random_positive(quad4, rng, modes=6)
        with pytest.raises(QuadratureMismatchError):
            inner(f, g)


class TestLemmaIdentities:
    @pytest.mark.parametrize("d", [3.0, 5.0])
    def test_square_and_cross_identities(self, d, rng):
        quad = cached_quadrature(d, 128)
        for _ in range(20):
            f = random_positive(quad, rng, modes=12, amplitude=0.6)
            lf = apply_L(f)
            fp = derivative(f).values
            fpp = second_derivative(f).values
            w = quad.weights
            lhs1 = float(np.sum(w * lf.values**2))
            rhs1 = float(np.sum(w * quad.nu**2 * fpp**2)) + d * float(
                np.sum(w * quad.nu * fp**2)
            )
            assert abs(lhs1 - rhs1) <= 1e-9 * abs(lhs1)
            lhs2 = float(np.sum(w * (fp**2 / f.values) * quad.nu * lf.values))
            jcc = float(np.sum(w * quad.nu**2 * fp**4 / f.values**2))
            jfc = float(np.sum(w * quad.nu**2 * fp**2 * fpp / f.values))
            rhs2 = d / (d + 2.0) * jcc - 2.0 * (d - 1.0) / (d + 2.0) * jfc
            assert abs(lhs2 - rhs2) <= 1e-9 * max(abs(lhs2), 1e-3)
