import numpy as np
import pytest
from scipy.optimize import brentq

from cellsinr.channel import compute_statistics
from cellsinr.det_equiv import (
    ConvergenceError,
    de_sinr,
    solve_derivative,
    solve_fixed_point,
    solve_zf_limit,
)
from cellsinr.precoder import PrecoderConfig
from cellsinr.scenario import PowerConfig, scenario_from_gains

from conftest import exp_correlation, random_gains, synthetic_scenario

ALL_PAIRS = [
    ("mrt", "vn"),
    ("mrt", "mn"),
    ("zf", "vn"),
    ("zf", "mn"),
    ("rzf", "vn"),
    ("rzf", "mn"),
]


def _draw_gram(rng, phi_sqrt, n):
    k = phi_sqrt.shape[0]
    z = (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))) / np.sqrt(2)
    h = np.einsum("kab,kb->ak", phi_sqrt, z)
    return h @ h.conj().T / n


class TestFixedPoint:
    def test_no_users_gives_scaled_identity(self):
        sol = solve_fixed_point(np.zeros((0, 6, 6)), None, alpha=0.25)
        assert np.allclose(sol.T, 4.0 * np.eye(6))
        assert sol.u.size == 0

    def test_scalar_reduction_matches_root_finder(self):
        # identical scaled-identity covariances collapse the system to one
        # scalar equation solvable by bracketing
        n, k, c, alpha = 32, 8, 1.7, 0.2
        phi = np.stack([c * np.eye(n, dtype=complex)] * k)
        sol = solve_fixed_point(phi, None, alpha)
        root = brentq(
            lambda u: u - c / (alpha + (k / n) * c / (1.0 + u)), 1e-9, 1e6, xtol=1e-14
        )
        assert np.allclose(sol.u, root, rtol=1e-9)

    def test_resolvent_oracle_small(self, rng):
        n, k, alpha = 64, 16, 0.4
        phi = np.stack([exp_correlation(rng, n, rng.uniform(0.5, 2.0)) for _ in range(k)])
        sol = solve_fixed_point(phi, None, alpha)
        q = exp_correlation(rng, n, 1.0)
        sqrts = np.stack([np.linalg.cholesky(p) for p in phi])
        for _ in range(5):
            b = _draw_gram(rng, sqrts, n)
            lhs = np.real(np.trace(q @ np.linalg.inv(b + alpha * np.eye(n)))) / n
            rhs = np.real(np.sum(q * sol.T.T)) / n
            assert abs(lhs - rhs) / abs(lhs) < 0.05

    def test_nonconvergence_carries_residual(self):
        phi = np.stack([np.eye(4, dtype=complex)] * 2)
        with pytest.raises(ConvergenceError) as exc:
            solve_fixed_point(phi, None, alpha=1e-3, max_iter=2)
        assert exc.value.residual is not None
        assert exc.value.iterations == 2

    def test_loading_matrix_enters_the_solution(self, rng):
        n, k = 16, 4
        phi = np.stack([exp_correlation(rng, n) for _ in range(k)])
        s = 0.5 * np.eye(n, dtype=complex)
        plain = solve_fixed_point(phi, None, 0.3)
        loaded = solve_fixed_point(phi, s, 0.3)
        assert not np.allclose(plain.u, loaded.u)
        # loading by c*I is the same as raising alpha by c
        shifted = solve_fixed_point(phi, None, 0.8)
        assert np.allclose(loaded.u, shifted.u, rtol=1e-9)


class TestDerivative:
    def test_zero_sandwich_gives_zero(self, rng):
        n, k = 12, 3
        phi = np.stack([exp_correlation(rng, n) for _ in range(k)])
        fp = solve_fixed_point(phi, None, 0.5)
        deriv = solve_derivative(phi, fp, omegas=[np.zeros((n, n), dtype=complex)])
        assert np.allclose(deriv.u_prime[0], 0.0)
        assert np.allclose(deriv.T_prime[0], 0.0)

    def test_finite_difference_oracle(self, rng):
        n, k, alpha, delta = 24, 6, 0.7, 1e-6
        phi = np.stack([exp_correlation(rng, n, rng.uniform(0.5, 1.5)) for _ in range(k)])
        fp = solve_fixed_point(phi, None, alpha, tol=1e-14)
        fp_shift = solve_fixed_point(phi, None, alpha + delta, tol=1e-14)
        deriv = solve_derivative(phi, fp, omegas=[np.eye(n, dtype=complex)])
        fd = (fp.u - fp_shift.u) / delta
        assert np.allclose(deriv.u_prime[0], fd, rtol=1e-3)

    def test_two_sided_trace_identity(self, rng):
        n, k, alpha = 64, 16, 0.4
        phi = np.stack([exp_correlation(rng, n, rng.uniform(0.5, 2.0)) for _ in range(k)])
        fp = solve_fixed_point(phi, None, alpha)
        omega = exp_correlation(rng, n, 1.0)
        q = exp_correlation(rng, n, 1.0)
        deriv = solve_derivative(phi, fp, omegas=[omega])
        sqrts = np.stack([np.linalg.cholesky(p) for p in phi])
        for _ in range(5):
            b = _draw_gram(rng, sqrts, n)
            res = np.linalg.inv(b + alpha * np.eye(n))
            lhs = np.real(np.trace(q @ res @ omega @ res)) / n
            rhs = np.real(np.sum(q * deriv.T_prime[0].T)) / n
            assert abs(lhs - rhs) / abs(lhs) < 0.05

    def test_uncorrelated_coupling_is_constant(self):
        # identical scaled-identity covariances make every coupling entry
        # c^2 (tr T^2 / N) / (N (1+u)^2)
        n, k, c, alpha = 24, 6, 1.3, 0.5
        phi = np.stack([c * np.eye(n, dtype=complex)] * k)
        fp = solve_fixed_point(phi, None, alpha)
        expected = (c**2 * np.real(np.trace(fp.T @ fp.T)) / n) / (n * (1.0 + fp.u[0]) ** 2)
        prods = phi @ fp.T
        gram = np.real(prods.reshape(k, -1) @ prods.swapaxes(-1, -2).reshape(k, -1).T)
        j = gram / (n * n * (1.0 + fp.u[None, :]) ** 2)
        assert np.allclose(j, expected, rtol=1e-12)
        deriv = solve_derivative(phi, fp, include_own=True)
        assert deriv.u_prime.shape == (k, k)


class TestZfLimit:
    def test_uncorrelated_solution_is_exact(self):
        n, k = 40, 8
        c = np.linspace(0.5, 2.0, k)
        phi = np.stack([ci * np.eye(n, dtype=complex) for ci in c])
        sol = solve_zf_limit(phi)
        assert np.allclose(sol.u, c * (1 - k / n), rtol=1e-10)
        # degrees-of-freedom fraction recovered from any user
        assert sol.u[3] / c[3] == pytest.approx(0.8, rel=1e-10)

    def test_alpha_scaling_extrapolates_to_limit(self, rng):
        sc = synthetic_scenario(rng, correlation="steering", num_antennas=30, ues_per_cell=5)
        phi = compute_statistics(sc).phi_own(0)
        limit = solve_zf_limit(phi)
        scaled = {}
        for alpha in (1e-3, 1e-4, 1e-5):
            scaled[alpha] = alpha * solve_fixed_point(phi, None, alpha).u
        extrapolated = scaled[1e-5] + (scaled[1e-5] - scaled[1e-4]) / 9.0
        assert np.allclose(extrapolated, limit.u, rtol=5e-3)

    def test_needs_more_antennas_than_users(self, rng):
        phi = np.stack([exp_correlation(rng, 8) for _ in range(8)])
        with pytest.raises(ConvergenceError, match="more antennas"):
            solve_zf_limit(phi)


class TestDeSinr:
    def test_noise_term_is_exact(self, rng):
        sc = synthetic_scenario(rng, correlation="steering")
        stats = compute_statistics(sc)
        expected = sc.power.sigma2 / (sc.num_antennas * sc.power.rho_dl)
        for scheme, norm in ALL_PAIRS:
            de = de_sinr(sc, PrecoderConfig(scheme=scheme, normalization=norm), stats=stats)
            assert de.grid.noise == expected

    def test_equal_statistics_collapse_vn_and_mn(self):
        # one cell, identical users: per-user and per-cell weights coincide
        gains = np.full((1, 1, 4), 0.8)
        sc = scenario_from_gains(
            gains, 16, PowerConfig(rho_tr=4.0, rho_dl=10.0, sigma2=1.0)
        )
        stats = compute_statistics(sc)
        for scheme in ("mrt", "zf"):
            vn = de_sinr(sc, PrecoderConfig(scheme=scheme, normalization="vn"), stats=stats)
            mn = de_sinr(sc, PrecoderConfig(scheme=scheme, normalization="mn"), stats=stats)
            assert np.allclose(vn.grid.sinr, mn.grid.sinr, rtol=1e-9)

    def test_scale_covariance(self, rng):
        # scaling all link covariances and the noise together moves every
        # component by the same factor and leaves the SINR untouched
        gains = random_gains(rng, 2, 3)
        power = PowerConfig(rho_tr=4.0, rho_dl=10.0, sigma2=1.0)
        c = 7.3
        sc1 = scenario_from_gains(gains, 18, power)
        sc2 = scenario_from_gains(
            c * gains, 18, PowerConfig(rho_tr=4.0, rho_dl=10.0, sigma2=c * 1.0)
        )
        st1, st2 = compute_statistics(sc1), compute_statistics(sc2)
        assert np.allclose(st2.phi(0, 1, 2), c * st1.phi(0, 1, 2), rtol=1e-12)
        for scheme, norm in ALL_PAIRS:
            g1 = de_sinr(sc1, PrecoderConfig(scheme=scheme, normalization=norm), stats=st1)
            g2 = de_sinr(sc2, PrecoderConfig(scheme=scheme, normalization=norm), stats=st2)
            assert np.allclose(g1.grid.sinr, g2.grid.sinr, rtol=1e-9)
            assert np.allclose(g2.grid.signal, c * g1.grid.signal, rtol=1e-9)

    def test_interference_map_diagonal_is_variance(self, rng):
        sc = synthetic_scenario(rng, correlation="steering")
        de = de_sinr(sc, PrecoderConfig(scheme="rzf", normalization="vn", alpha=0.1))
        l = np.arange(sc.num_cells)[:, None]
        k = np.arange(sc.ues_per_cell)[None, :]
        assert np.array_equal(de.interference_map[l, k, l, k], de.grid.variance)

    def test_rzf_alpha_must_be_positive(self, rng):
        sc = synthetic_scenario(rng)
        with pytest.raises(Exception, match="alpha > 0"):
            de_sinr(sc, PrecoderConfig(scheme="rzf", normalization="vn", alpha=-1.0))
