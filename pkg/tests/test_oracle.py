import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitcorr.bloch import solve_params
from eitcorr.oracle import (
    EstimatorConfig,
    InsufficientDataError,
    PreconditionError,
    TrajectoryEnsemble,
    ZeroVarianceError,
    estimate_g2_zero,
    estimate_spectra,
    max_step,
    mean_polarization,
    min_duration,
    simulate_ensemble,
    simulate_trajectory,
    write_trajectories_csv,
)
from eitcorr.params import reference_params, mhz
from eitcorr.spectra import analyze_point

W2 = mhz(2.0)


@pytest.fixture(scope="module")
def reference_ensemble():
    p = reference_params(0.2, 0.0)
    ens = simulate_ensemble(p, max_step(p, W2), min_duration(p), 32, base_seed=11, sample_every=4, omega_max=W2)
    return p, ens


# -- simulation ------------------------------------------------------------------


def test_no_phase_noise_is_constant():
    p = reference_params(0.2, 0.7, gamma_bar_mhz=0.0)
    ens = simulate_trajectory(p, max_step(p), 5.0, seed=3, enforce_preconditions=False)
    s = ens.series[0]
    assert np.all(np.abs(s - s[0]) <= 1e-9 * np.abs(s[0]))


def test_zero_coupling_gives_unit_intensity():
    p = reference_params(0.2, 0.7, kappa1=0.0, kappa2=0.0)
    ens = simulate_ensemble(p, max_step(p), 5.0, 3, enforce_preconditions=False)
    assert np.all(ens.series == 1.0)


def test_reproducible_bitwise():
    p = reference_params(0.2, 0.7)
    kw = dict(sample_every=3, enforce_preconditions=False)
    a = simulate_ensemble(p, max_step(p), 20.0, 4, base_seed=5, **kw)
    b = simulate_ensemble(p, max_step(p), 20.0, 4, base_seed=5, **kw)
    assert a.seeds == (5, 6, 7, 8)
    assert np.array_equal(a.series, b.series)
    # each trajectory depends only on its own seed
    c = simulate_ensemble(p, max_step(p), 20.0, 2, base_seed=7, **kw)
    assert np.array_equal(a.series[2:], c.series)


def test_intensities_finite_nonnegative(reference_ensemble):
    _, ens = reference_ensemble
    assert np.all(np.isfinite(ens.series)) and np.all(ens.series >= 0)


def test_preconditions_enforced():
    p = reference_params(0.2, 0.0)
    with pytest.raises(PreconditionError):
        simulate_trajectory(p, 2 * max_step(p), min_duration(p), 0)
    with pytest.raises(PreconditionError):
        simulate_trajectory(p, max_step(p), 0.5 * min_duration(p), 0)
    with pytest.raises(PreconditionError):
        simulate_trajectory(p, max_step(p, mhz(40)) * 1.5, min_duration(p), 0, omega_max=mhz(40))


def test_mean_polarization_matches_phase_averaged_state(reference_ensemble):
    p, ens = reference_ensemble
    mean, se = mean_polarization(ens, 0)
    _, ss = solve_params(p, average_phase_noise=True)
    assert abs(mean.imag - ss.p1.imag) <= 3 * se


@pytest.mark.xfail(strict=True, reason="ergodic mean includes laser-linewidth broadening; see decisions ledger")
def test_mean_polarization_matches_noise_free_state(reference_ensemble):
    p, ens = reference_ensemble
    mean, se = mean_polarization(ens, 0)
    _, ss = solve_params(p)
    assert abs(mean.imag - ss.p1.imag) <= 3 * se


def test_spectra_match_exact_model(reference_ensemble):
    p, ens = reference_ensemble
    est = estimate_spectra(ens, EstimatorConfig.for_frequencies([W2], ens.sample_dt))
    dec = analyze_point(p, W2, "full")
    for name in ("s11", "s22", "s12"):
        got, se = getattr(est, name)[0], getattr(est, name + "_se")[0]
        assert abs(got - getattr(dec, name)) <= 3 * se, name


def test_dt_halving_converges():
    p = reference_params(0.0, 2.0, gamma_bar_mhz=0.3)
    dt = max_step(p, W2)
    dur = 150.0
    a = simulate_ensemble(p, dt, dur, 16, base_seed=2, sample_every=4, noise_substeps=2, enforce_preconditions=False)
    b = simulate_ensemble(p, dt / 2, dur, 16, base_seed=2, sample_every=8, enforce_preconditions=False)
    cfg = EstimatorConfig.for_frequencies([W2], a.sample_dt)
    ea, eb = estimate_spectra(a, cfg), estimate_spectra(b, cfg)
    assert abs(ea.s12[0] - eb.s12[0]) < ea.s12_se[0]


def test_seed_reshuffle_invariance():
    p = reference_params(0.0, 2.0, gamma_bar_mhz=0.3)
    kw = dict(sample_every=4, enforce_preconditions=False)
    dt = max_step(p, W2)
    a = simulate_ensemble(p, dt, 120.0, 16, base_seed=0, **kw)
    b = simulate_ensemble(p, dt, 120.0, 16, base_seed=1000, **kw)
    cfg = EstimatorConfig.for_frequencies([W2], a.sample_dt)
    ea, eb = estimate_spectra(a, cfg), estimate_spectra(b, cfg)
    assert abs(ea.c[0] - eb.c[0]) <= 3 * math.hypot(ea.c_se[0], eb.c_se[0])
    assert abs(ea.s12[0] - eb.s12[0]) <= 3 * math.hypot(ea.s12_se[0], eb.s12_se[0])


def test_raw_dump(tmp_path):
    p = reference_params(0.2, 0.7)
    ens = simulate_ensemble(p, max_step(p), 1.0, 2, sample_every=10, enforce_preconditions=False)
    path = write_trajectories_csv(ens, tmp_path / "traj.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "trajectory,seed,t_us,I1,I2"
    assert len(lines) == 1 + 2 * ens.n_samples
    last = lines[-1].split(",")
    assert float(last[4]) == ens.series[1, -1, 1]


# -- estimator on synthetic data ---------------------------------------------------


def _white(n_traj=4, n=8192, seed=0):
    return np.random.default_rng(seed).standard_normal((n_traj, n))


def _cfg():
    return EstimatorConfig(segment_length=256, frequencies=(mhz(1.0), mhz(5.0), mhz(12.0)))


def test_identical_series_fully_correlated():
    f = _white()
    ens = TrajectoryEnsemble.from_series(np.stack([f, f], -1), 0.01)
    assert np.allclose(estimate_spectra(ens, _cfg()).c, 1.0)


def test_opposite_series_anticorrelated():
    f = _white()
    ens = TrajectoryEnsemble.from_series(np.stack([f, -f], -1), 0.01)
    assert np.allclose(estimate_spectra(ens, _cfg()).c, -1.0)


def test_mixed_white_noise():
    a, b = _white(8, 16384, 1), _white(8, 16384, 2)
    rho = 0.5
    y = rho * a + math.sqrt(1 - rho**2) * b
    est = estimate_spectra(TrajectoryEnsemble.from_series(np.stack([a, y], -1), 0.01), _cfg())
    assert np.all(np.abs(est.c - rho) <= 3 * est.c_se)


def test_white_noise_level():
    # unit-variance samples at spacing dt have S(w) = dt / (2 pi)
    dt = 0.01
    f = _white(8, 16384, 3)
    est = estimate_spectra(TrajectoryEnsemble.from_series(np.stack([f, f], -1), dt), _cfg())
    assert np.all(np.abs(est.s11 - dt / (2 * math.pi)) <= 4 * est.s11_se)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-1, 1))
def test_estimator_cauchy_schwarz(seed, mix):
    a, b = _white(2, 1024, seed), _white(2, 1024, seed + 1)
    y = mix * a + b * (1 - abs(mix))
    est = estimate_spectra(TrajectoryEnsemble.from_series(np.stack([a, y], -1), 0.01), _cfg())
    assert np.all(np.abs(est.c[est.defined]) <= 1.0)


def test_insufficient_data():
    f = _white(1, 512)
    with pytest.raises(InsufficientDataError):
        estimate_spectra(TrajectoryEnsemble.from_series(np.stack([f, f], -1), 0.01), _cfg())


def test_constant_input_undefined():
    ens = TrajectoryEnsemble.from_series(np.ones((2, 4096, 2)), 0.01)
    est = estimate_spectra(ens, _cfg())
    assert not np.any(est.defined)


def test_estimator_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(segment_length=8, frequencies=(1.0,))
    with pytest.raises(ValueError):
        EstimatorConfig(segment_length=64, frequencies=(1.0,), overlap=0.95)
    cfg = EstimatorConfig.for_frequencies([mhz(2.0)], 0.01)
    # bin spacing 1/(L dt) no wider than w/20
    assert 1 / (cfg.segment_length * 0.01) <= 2.0 / 20 + 1e-12


def test_g2_estimator():
    f = _white(2, 2048)[..., None]
    assert estimate_g2_zero(TrajectoryEnsemble.from_series(np.concatenate([f, f], -1), 0.1)) == pytest.approx(1.0)
    assert estimate_g2_zero(TrajectoryEnsemble.from_series(np.concatenate([f, 3 - f], -1), 0.1)) == pytest.approx(-1.0)
    with pytest.raises(ZeroVarianceError):
        estimate_g2_zero(TrajectoryEnsemble.from_series(np.concatenate([f, 0 * f + 1], -1), 0.1))


def test_g2_sign_pattern_positive_at_resonance(reference_ensemble):
    _, ens = reference_ensemble
    assert estimate_g2_zero(ens) > 0


@pytest.mark.xfail(strict=True, reason="simulated equal-time correlation stays positive near 1 MHz; see decisions ledger")
def test_g2_sign_pattern_negative_near_one_mhz():
    p = reference_params(0.2, 1.0)
    ens = simulate_ensemble(p, max_step(p, W2), min_duration(p), 16, sample_every=4)
    assert estimate_g2_zero(ens) < 0


@pytest.mark.xfail(strict=True, reason="lowest-order truncation misses the covariance term that dominates here; see decisions ledger")
def test_weak_noise_matches_lowest_order():
    p = reference_params(0.0, 2.0, gamma_bar_mhz=0.1)
    ens = simulate_ensemble(p, max_step(p, W2), 200.0, 16, sample_every=4, enforce_preconditions=False)
    est = estimate_spectra(ens, EstimatorConfig.for_frequencies([W2], ens.sample_dt))
    low = analyze_point(p, W2, "lowest").c
    assert abs(est.c[0] - low) <= max(0.1, 3 * est.c_se[0])


def test_weak_noise_matches_exact_model():
    p = reference_params(0.0, 2.0, gamma_bar_mhz=0.1)
    ens = simulate_ensemble(p, max_step(p, W2), 200.0, 16, sample_every=4, enforce_preconditions=False)
    est = estimate_spectra(ens, EstimatorConfig.for_frequencies([W2], ens.sample_dt))
    full = analyze_point(p, W2, "full").c
    assert abs(est.c[0] - full) <= max(0.1, 3 * est.c_se[0])
