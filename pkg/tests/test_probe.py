import math

import numpy as np
import pytest

from matchnoise.closed_forms import nk_tfim_xy, teff
from matchnoise.gaussian import ModelParams, dispersion
from matchnoise.probe import (
    ProbeConfig, dense_probe_oracle, density_of_states, fgr_rates, probe_relaxation, probe_sweep,
    probe_temperature, resonant_momentum,
)

CRIT = ModelParams("tfim", 1.0, 1.0)


def test_resonant_momentum_inverts_dispersion():
    for g in (0.5, 1.0, 1.7):
        p = ModelParams("tfim", 1.0, g)
        for k in (0.3, 1.2, 2.9):
            assert resonant_momentum(float(dispersion(k, p)), p) == pytest.approx(k, abs=1e-10)


def test_density_of_states_is_inverse_group_velocity():
    p = ModelParams("tfim", 1.0, 1.4)
    k, h = 1.1, 1e-6
    v = (dispersion(k + h, p) - dispersion(k - h, p)) / (2 * h)
    assert density_of_states(float(dispersion(k, p)), p) == pytest.approx(1 / v, rel=1e-8)
    # critical band bottom: 1/2J
    assert density_of_states(0.01, CRIT) == pytest.approx(0.5, rel=1e-4)


def test_band_edge_clamped_with_warning():
    with pytest.warns(RuntimeWarning):
        rho = density_of_states(4.0 - 1e-6, CRIT)
    assert math.isfinite(rho)


def test_config_validation():
    with pytest.raises(ValueError):
        ProbeConfig(5.0, 0.01, CRIT)
    with pytest.raises(ValueError):
        ProbeConfig(1.0, 0.01, ModelParams("xx", 1.0))
    with pytest.warns(RuntimeWarning):
        ProbeConfig(1.0, 0.5, CRIT)


def test_rates_examples():
    cfg = ProbeConfig(1.0, 0.01, CRIT)
    assert fgr_rates(cfg, 0.0)[0] == 0.0
    up, down = fgr_rates(cfg, 0.5)
    assert up == down
    n = float(nk_tfim_xy(resonant_momentum(0.2, CRIT), 1.0))
    up, down = fgr_rates(ProbeConfig(0.2, 0.01, CRIT), n)
    assert abs(up / (up + down) - n) < 1e-14


def test_steady_state_independent_of_coupling():
    n = 0.31
    a = fgr_rates(ProbeConfig(0.7, 1e-3, CRIT), n)
    b = fgr_rates(ProbeConfig(0.7, 1e-2, CRIT), n)
    assert a[0] / sum(a) == pytest.approx(b[0] / sum(b), abs=1e-15)


def test_relaxation_rate_quadratic_in_coupling():
    lam = np.array([1e-3, 3e-3, 1e-2, 3e-2])
    tot = [sum(fgr_rates(ProbeConfig(0.7, float(x), CRIT), 0.2)) for x in lam]
    assert np.polyfit(np.log(lam), np.log(tot), 1)[0] == pytest.approx(2.0, abs=1e-12)


def test_relaxation_examples():
    rates = (0.3, 0.9)
    assert probe_relaxation(rates, 0.0) == 0.0
    assert probe_relaxation(rates, 1e3) == pytest.approx(0.25, abs=1e-15)
    assert abs(probe_relaxation(rates, 1 / 1.2) - 0.25 * (1 - math.exp(-1))) < 1e-14
    with pytest.raises(ValueError):
        probe_relaxation(rates, -1.0)


def test_temperature_readout():
    t = probe_temperature(1.0, 0.5)
    assert math.isinf(t)
    assert probe_temperature(2.0, 1 / (1 + math.e)) == pytest.approx(2.0)


def test_sweep_reproduces_chain_temperature():
    deltas = np.linspace(0.05, 3.9, 40)
    _, T = probe_sweep(deltas, 1.0)
    k = 2 * np.arcsin(deltas / 4)
    ref = teff(deltas, nk_tfim_xy(k, 1.0))
    assert np.max(np.abs(T - ref)) < 1e-10


def test_dense_probe_recovers_temperature():
    res = dense_probe_oracle(delta=1.0, coupling=0.02, gt=1.0, n_sites=6)
    assert abs(teff(1.0, res["n_probe"]) / teff(1.0, res["n_mode"]) - 1) < 0.10
