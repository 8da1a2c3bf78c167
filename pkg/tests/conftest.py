import numpy as np
import pytest

from cellsinr.scenario import (
    CorrelationModel,
    PowerConfig,
    ScenarioConfig,
    build_scenario,
    scenario_from_gains,
)


def random_gains(rng, num_cells, ues_per_cell, own=(0.5, 2.0), cross=(0.02, 0.3)):
    """O(1)-scale synthetic gains with dominant own-cell links."""
    g = rng.uniform(*cross, size=(num_cells, num_cells, ues_per_cell))
    for l in range(num_cells):
        g[l, l] = rng.uniform(*own, size=ues_per_cell)
    return g


def synthetic_scenario(
    rng,
    num_cells=3,
    ues_per_cell=4,
    num_antennas=24,
    correlation="uncorrelated",
    rho_tr=4.0,
    rho_dl=10.0,
    sigma2=1.0,
):
    spacing = 0.3 if correlation == "steering" else None
    return scenario_from_gains(
        random_gains(rng, num_cells, ues_per_cell),
        num_antennas,
        PowerConfig(rho_tr=rho_tr, rho_dl=rho_dl, sigma2=sigma2),
        CorrelationModel(variant=correlation, antenna_spacing=spacing),
    )


def exp_correlation(rng, n, scale=1.0):
    """Random Hermitian PD exponential-correlation matrix, bounded norm."""
    rho = rng.uniform(0.1, 0.9) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    idx = np.arange(n)
    mag = rho ** np.abs(idx[:, None] - idx[None, :])
    m = np.where(idx[:, None] >= idx[None, :], mag, mag.conj())
    return scale * (m + m.conj().T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_uncorrelated(rng):
    return synthetic_scenario(rng, correlation="uncorrelated")


@pytest.fixture
def small_steering(rng):
    return synthetic_scenario(rng, correlation="steering")


@pytest.fixture
def reference_config():
    """Desk-scale version of the seven-cell reference drop."""
    return ScenarioConfig(N=24, K=4, L=7, correlation="steering", seed=42)


@pytest.fixture
def reference_scenario(reference_config):
    return build_scenario(reference_config)
