import numpy as np
import pytest

from cellsinr.channel import compute_statistics, draw_estimates_batch, draw_rotated_batch
from cellsinr.montecarlo import _chunks, _rng_for, estimate_sinr, sum_rate
from cellsinr.precoder import PrecoderConfig, default_rzf_alpha
from cellsinr.results import SinrGrid
from cellsinr.scenario import CorrelationModel, PowerConfig, scenario_from_gains

from conftest import synthetic_scenario

ALL_PAIRS = [
    ("mrt", "vn"),
    ("mrt", "mn"),
    ("zf", "vn"),
    ("zf", "mn"),
    ("rzf", "vn"),
    ("rzf", "mn"),
]


def _naive_directions(h_hat, config, alpha):
    """Loop-free reference precoders for a single (N, K) estimate matrix."""
    if config.scheme == "mrt":
        return h_hat
    if config.scheme == "zf":
        return h_hat @ np.linalg.inv(h_hat.conj().T @ h_hat)
    n = h_hat.shape[0]
    m = h_hat @ h_hat.conj().T + n * alpha * np.eye(n)
    if config.ridge_matrix is not None:
        m = m + config.ridge_matrix
    return np.linalg.inv(m) @ h_hat


def naive_estimate(scenario, config, trials, seed, stats, chunk_size=8):
    """Plain-loop reference for the vectorized estimator, same seed streams."""
    L, K = scenario.num_cells, scenario.ues_per_cell
    alpha = None
    if config.scheme == "rzf":
        alpha = config.alpha if config.alpha is not None else default_rzf_alpha(scenario)

    col_power = np.zeros((L, K))
    for idx, count in _chunks(trials, chunk_size):
        rng = _rng_for(seed, 0, idx)
        h_hat = draw_estimates_batch(scenario, stats, rng, count)
        for t in range(count):
            for l in range(L):
                f = _naive_directions(h_hat[t, l].T, config, alpha)
                col_power[l] += np.sum(np.abs(f) ** 2, axis=0)
    col_power /= trials
    if config.normalization == "vn":
        weights = 1.0 / col_power
    else:
        weights = np.repeat((K / col_power.sum(axis=1))[:, None], K, axis=1)

    own_c = np.zeros((L, K), dtype=complex)
    own_abs2 = np.zeros((L, K))
    noncoh = np.zeros((L, K))
    pilot = np.zeros((L, K))
    total_moment = np.zeros((L, K))
    power = np.zeros(L)
    for idx, count in _chunks(trials, chunk_size):
        rng = _rng_for(seed, 1, idx)
        h, h_hat = draw_rotated_batch(scenario, stats, rng, count)
        for t in range(count):
            f = [_naive_directions(h_hat[t, l].T, config, alpha) for l in range(L)]
            for l in range(L):
                power[l] += float(
                    np.sum(weights[l] * np.sum(np.abs(f[l]) ** 2, axis=0))
                )
            for j in range(L):
                for k in range(K):
                    c_own = np.vdot(h[t, j, j, k], f[j][:, k])
                    own_c[j, k] += c_own
                    own_abs2[j, k] += abs(c_own) ** 2
                    for l in range(L):
                        for i in range(K):
                            c = np.vdot(h[t, l, j, k], f[l][:, i])
                            term = weights[l, i] * abs(c) ** 2
                            total_moment[j, k] += term
                            if i != k:
                                noncoh[j, k] += term
                            elif l != j:
                                pilot[j, k] += term
    t = float(trials)
    mean_c = own_c / t
    signal = weights * np.abs(mean_c) ** 2
    variance = weights * (own_abs2 / t - np.abs(mean_c) ** 2)
    noise = scenario.power.sigma2 / scenario.power.rho_dl
    return {
        "signal": signal,
        "variance": variance,
        "noncoherent_interference": noncoh / t,
        "pilot_contamination": pilot / t,
        "noise": noise,
        "weights": weights,
        "power": power / t,
        "denominator_direct": noise + total_moment / t - signal,
    }


class TestAgainstNaiveReference:
    @pytest.mark.parametrize("scheme,norm", ALL_PAIRS)
    def test_exact_component_agreement(self, rng, scheme, norm):
        sc = synthetic_scenario(
            rng, num_cells=2, ues_per_cell=2, num_antennas=8, correlation="steering"
        )
        stats = compute_statistics(sc)
        cfg = PrecoderConfig(scheme=scheme, normalization=norm)
        est = estimate_sinr(sc, cfg, trials=40, seed=5, stats=stats, chunk_size=8)
        ref = naive_estimate(sc, cfg, trials=40, seed=5, stats=stats, chunk_size=8)
        assert np.allclose(est.weights, ref["weights"], rtol=1e-10)
        assert np.allclose(est.grid.signal, ref["signal"], rtol=1e-10)
        assert np.allclose(est.grid.variance, ref["variance"], rtol=1e-9)
        assert np.allclose(
            est.grid.noncoherent_interference, ref["noncoherent_interference"], rtol=1e-10
        )
        assert np.allclose(
            est.grid.pilot_contamination, ref["pilot_contamination"], rtol=1e-10
        )
        assert np.allclose(est.power_per_cell, ref["power"], rtol=1e-10)

    def test_decomposition_matches_direct_denominator(self, rng):
        # noise + variance + non-coherent + pilot recovers the raw
        # second-moment denominator as an algebraic identity
        sc = synthetic_scenario(rng, num_cells=2, ues_per_cell=3, num_antennas=12)
        stats = compute_statistics(sc)
        cfg = PrecoderConfig(scheme="mrt", normalization="vn")
        ref = naive_estimate(sc, cfg, trials=30, seed=3, stats=stats)
        assembled = (
            ref["noise"]
            + ref["variance"]
            + ref["noncoherent_interference"]
            + ref["pilot_contamination"]
        )
        assert np.allclose(assembled, ref["denominator_direct"], rtol=1e-9)


class TestPhysicalLimits:
    def test_single_user_mrt_perfect_csi(self):
        n = 24
        sc = scenario_from_gains(
            np.ones((1, 1, 1)),
            n,
            PowerConfig(rho_tr=1e12, rho_dl=10.0, sigma2=2.0),
            CorrelationModel(variant="uncorrelated", antenna_spacing=None),
        )
        est = estimate_sinr(
            sc, PrecoderConfig(scheme="mrt", normalization="vn"), trials=2000, seed=1
        )
        grid = est.grid
        assert np.all(grid.noncoherent_interference == 0)
        assert np.all(grid.pilot_contamination == 0)
        ratio = grid.signal[0, 0] / grid.noise
        assert ratio == pytest.approx(n * 10.0 / 2.0, rel=0.05)
        assert sum_rate(est, 0) == grid.sum_rate(0)

    def test_zero_forcing_kills_own_cell_interference(self):
        sc = scenario_from_gains(
            np.ones((1, 1, 3)),
            16,
            PowerConfig(rho_tr=1e12, rho_dl=10.0, sigma2=1.0),
            CorrelationModel(variant="uncorrelated", antenna_spacing=None),
        )
        est = estimate_sinr(
            sc, PrecoderConfig(scheme="zf", normalization="vn"), trials=100, seed=2
        )
        assert np.all(
            est.grid.noncoherent_interference <= 1e-10 * est.grid.signal
        )


class TestAsymptoticAgreement:
    @pytest.mark.parametrize("n_antennas", [40, 80])
    def test_correlated_seven_cell_per_user_gap(self, n_antennas):
        # reference correlated drop: simulated and asymptotic per-user SINR
        # agree within 4% under zero forcing with the per-cell scalar
        from cellsinr.det_equiv import de_sinr
        from cellsinr.scenario import ScenarioConfig, build_scenario

        cfg = ScenarioConfig(N=n_antennas, K=8, L=7, correlation="steering", seed=3)
        sc = build_scenario(cfg)
        stats = compute_statistics(sc)
        pc = PrecoderConfig(scheme="zf", normalization="mn")
        de = de_sinr(sc, pc, stats=stats)
        mc = estimate_sinr(sc, pc, trials=3000, seed=11, stats=stats)
        rel = np.abs(de.grid.sinr - mc.grid.sinr) / mc.grid.sinr
        assert np.max(rel) < 0.04


class TestPilotContamination:
    def test_coherent_cross_term_matches_asymptotic_prediction(self, rng):
        # reusing one pilot in every cell must leave a visibly nonzero
        # coherent cross term whose size the asymptotic pipeline predicts;
        # simulated components carry an extra factor N, and the simulated
        # same-pilot term also contains the fluctuation part that the
        # asymptotic decomposition books under non-coherent interference
        from cellsinr.det_equiv import de_sinr

        sc = synthetic_scenario(
            rng, num_cells=2, ues_per_cell=2, num_antennas=32, correlation="uncorrelated"
        )
        stats = compute_statistics(sc)
        cfg = PrecoderConfig(scheme="mrt", normalization="vn")
        mc = estimate_sinr(sc, cfg, trials=6000, seed=13, stats=stats)
        de = de_sinr(sc, cfg, stats=stats)
        assert np.all(mc.grid.pilot_contamination > 10 * mc.stderr["pilot_contamination"])
        l_idx = np.arange(sc.num_cells)
        k_idx = np.arange(sc.ues_per_cell)
        full = de.grid.pilot_contamination.copy()
        for j in range(sc.num_cells):
            for k in range(sc.ues_per_cell):
                others = [l for l in l_idx if l != j]
                full[j, k] += de.interference_map[others, k, j, k].sum()
        rel = np.abs(mc.grid.pilot_contamination / sc.num_antennas - full) / full
        assert np.max(rel) < 0.08


class TestEstimatorBehavior:
    def test_seeded_determinism_across_thread_counts(self, rng):
        sc = synthetic_scenario(rng, correlation="steering", num_antennas=12)
        stats = compute_statistics(sc)
        cfg = PrecoderConfig(scheme="zf", normalization="mn")
        a = estimate_sinr(sc, cfg, trials=64, seed=7, stats=stats, threads=1)
        b = estimate_sinr(sc, cfg, trials=64, seed=7, stats=stats, threads=3)
        for field in ("signal", "variance", "noncoherent_interference", "pilot_contamination"):
            assert np.array_equal(getattr(a.grid, field), getattr(b.grid, field))
        assert np.array_equal(a.weights, b.weights)

    def test_different_seeds_differ(self, rng):
        sc = synthetic_scenario(rng, num_antennas=12)
        cfg = PrecoderConfig(scheme="mrt", normalization="vn")
        a = estimate_sinr(sc, cfg, trials=32, seed=1)
        b = estimate_sinr(sc, cfg, trials=32, seed=2)
        assert not np.array_equal(a.grid.signal, b.grid.signal)

    def test_stderr_shrinks_with_trials(self, rng):
        sc = synthetic_scenario(rng, num_cells=2, ues_per_cell=2, num_antennas=12)
        cfg = PrecoderConfig(scheme="mrt", normalization="vn")
        small = estimate_sinr(sc, cfg, trials=400, seed=11)
        large = estimate_sinr(sc, cfg, trials=1600, seed=11)
        for key in ("noncoherent_interference", "pilot_contamination"):
            ratio = np.median(small.stderr[key] / large.stderr[key])
            assert 2.0 * 0.8 <= ratio <= 2.0 * 1.2

    def test_mrt_vn_weights_match_estimate_covariance_trace(self, rng):
        # matched-filter column power concentrates on the trace of the
        # estimate covariance, so the per-user weight is its inverse
        sc = synthetic_scenario(rng, num_cells=2, ues_per_cell=3, num_antennas=16)
        stats = compute_statistics(sc)
        cfg = PrecoderConfig(scheme="mrt", normalization="vn")
        est = estimate_sinr(sc, cfg, trials=4000, seed=5, stats=stats)
        for l in range(2):
            expected = 1.0 / np.real(np.einsum("kaa->k", stats.phi_own(l)))
            assert np.allclose(est.weights[l], expected, rtol=0.05)

    def test_vn_gives_unit_power_per_stream(self, rng):
        # weights from one ensemble applied to a fresh ensemble leave every
        # stream at unit average power
        sc = synthetic_scenario(rng, num_cells=2, ues_per_cell=3, num_antennas=16)
        stats = compute_statistics(sc)
        cfg = PrecoderConfig(scheme="zf", normalization="vn")
        est = estimate_sinr(sc, cfg, trials=3000, seed=21, stats=stats)
        fresh = draw_estimates_batch(sc, stats, np.random.default_rng(1), 3000)
        col_power = np.zeros((2, 3))
        from cellsinr.precoder import build_directions

        for l in range(2):
            f = build_directions(fresh[:, l].transpose(0, 2, 1), cfg)
            col_power[l] = np.mean(np.sum(np.abs(f) ** 2, axis=1), axis=0)
        assert np.allclose(est.weights * col_power, 1.0, rtol=0.05)

    def test_rejects_degenerate_arguments(self, rng):
        sc = synthetic_scenario(rng)
        cfg = PrecoderConfig(scheme="mrt", normalization="vn")
        with pytest.raises(ValueError):
            estimate_sinr(sc, cfg, trials=1, seed=0)
        with pytest.raises(ValueError):
            estimate_sinr(sc, cfg, trials=10, seed=-1)

    def test_sum_rate_units(self):
        grid = SinrGrid(
            signal=np.full((1, 8), 2.0),
            noise=1.0,
            variance=np.zeros((1, 8)),
            noncoherent_interference=np.ones((1, 8)),
            pilot_contamination=np.zeros((1, 8)),
        )
        assert grid.sum_rate(0) == pytest.approx(8.0)  # all SINRs equal one
        zero = SinrGrid(
            signal=np.zeros((1, 8)),
            noise=1.0,
            variance=np.zeros((1, 8)),
            noncoherent_interference=np.zeros((1, 8)),
            pilot_contamination=np.zeros((1, 8)),
        )
        assert zero.sum_rate(0) == 0.0
