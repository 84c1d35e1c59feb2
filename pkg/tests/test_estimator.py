import numpy as np
import pytest

from asyncsense import (ArrayGeometry, CsiBlock, DegenerateProjectionError, EstimatorConfig,
                        EstimationStageError, GainDistribution, ScenarioParams, ahrcrb_cgs,
                        beamspace_basis, draw_dynamic_gains, estimate_cgs,
                        estimate_phase_offsets, music_aoa, run_estimator, steering_vector,
                        synthesize_csi)

GRID = EstimatorConfig().grid_points
GRID_STEP = np.pi / GRID


def _grid_angle(i):
    return -np.pi / 2 + (i + 0.5) * GRID_STEP


def _phase_walk(rng, t, std=0.4):
    phi = rng.normal(0.0, std, t).cumsum()
    return phi - phi.mean()


def _noiseless_block(geom, theta, h_s, d, phi):
    params = ScenarioParams(theta, h_s, d, phi, 0.0)
    return synthesize_csi(geom, params, seed=0), params


def test_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(grid_points=32)
    with pytest.raises(ValueError):
        EstimatorConfig(source_count=0)


def test_music_requires_noise_subspace_and_snapshots():
    geom = ArrayGeometry(2)
    blk = CsiBlock(np.ones((2, 8), dtype=complex))
    with pytest.raises(ValueError):
        music_aoa(blk, geom)
    geom3 = ArrayGeometry(3)
    with pytest.raises(ValueError):
        music_aoa(CsiBlock(np.ones((3, 2), dtype=complex)), geom3)


def test_music_pure_dynamic_noiseless():
    geom = ArrayGeometry(6)
    rng = np.random.default_rng(0)
    theta = 0.513
    d = draw_dynamic_gains(32, GainDistribution(1.0), rng)
    blk, _ = _noiseless_block(geom, theta, np.zeros(6), d, _phase_walk(rng, 32))
    theta_hat, diag = music_aoa(blk, geom)
    assert abs(theta_hat - theta) <= GRID_STEP
    assert diag.has_dominant_gap


def test_music_disambiguates_dynamic_peak():
    # noiseless generic static channel: the selected peak is theta_d
    rng = np.random.default_rng(1)
    hits = 0
    for _ in range(100):
        m = int(rng.integers(4, 9))
        geom = ArrayGeometry(m)
        theta = float(rng.uniform(-1.2, 1.2))
        h_s = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)
        t = 48
        d = draw_dynamic_gains(t, GainDistribution(1.0), rng)
        blk, _ = _noiseless_block(geom, theta, h_s, d, _phase_walk(rng, t))
        theta_hat, _ = music_aoa(blk, geom)
        hits += abs(theta_hat - theta) <= GRID_STEP
    assert hits == 100


def test_music_flags_missing_eigen_gap_on_pure_noise():
    geom = ArrayGeometry(8)
    rng = np.random.default_rng(2)
    noise = (rng.standard_normal((8, 128)) + 1j * rng.standard_normal((8, 128)))
    _, diag = music_aoa(CsiBlock(noise), geom)
    assert not diag.has_dominant_gap


def test_music_deterministic():
    geom = ArrayGeometry(5)
    rng = np.random.default_rng(3)
    blk = CsiBlock(rng.standard_normal((5, 16)) + 1j * rng.standard_normal((5, 16)))
    a1, _ = music_aoa(blk, geom)
    a2, _ = music_aoa(CsiBlock(blk.data.copy()), geom)
    assert a1 == a2


def test_beamspace_basis_properties():
    geom = ArrayGeometry(7)
    for theta in (-1.1, 0.0, 0.4, 1.3):
        a_unit, b = beamspace_basis(theta, geom)
        assert np.max(np.abs(b.conj().T @ a_unit)) < 1e-12
        assert np.linalg.norm(b.conj().T @ steering_vector(geom, theta)) < 1e-10
        full = np.column_stack([a_unit, b])
        np.testing.assert_allclose(full @ full.conj().T, np.eye(7), atol=1e-12)


def test_phase_offsets_exact_without_dynamic_path():
    geom = ArrayGeometry(6)
    rng = np.random.default_rng(4)
    h_s = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    phi = _phase_walk(rng, 64)
    blk, _ = _noiseless_block(geom, 0.21, h_s, np.zeros(64), phi)
    _, b = beamspace_basis(0.4, geom)          # any beam works when d = 0
    phi_hat = estimate_phase_offsets(blk, b)
    np.testing.assert_allclose(phi_hat, phi, atol=1e-10)


def test_phase_offsets_dynamic_path_annihilated_at_true_angle():
    geom = ArrayGeometry(6)
    rng = np.random.default_rng(5)
    h_s = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    theta = 0.47
    phi = _phase_walk(rng, 64)
    d = draw_dynamic_gains(64, GainDistribution(1.5), rng)
    blk, _ = _noiseless_block(geom, theta, h_s, d, phi)
    _, b = beamspace_basis(theta, geom)        # exact theta: B^H a(theta) = 0
    phi_hat = estimate_phase_offsets(blk, b)
    np.testing.assert_allclose(phi_hat, phi, atol=1e-10)


def test_phase_offsets_degenerate_projection():
    geom = ArrayGeometry(5)
    theta = 0.3
    a = steering_vector(geom, theta)
    blk, _ = _noiseless_block(geom, theta, 2.0 * a, np.zeros(16), np.zeros(16))
    _, b = beamspace_basis(theta, geom)
    with pytest.raises(DegenerateProjectionError):
        estimate_phase_offsets(blk, b)


def test_phase_error_decreases_with_aperture():
    # fixed sigma2 (the M=8 / 20 dB level), growing array: nullspace SNR grows.
    # The static channel keeps |B^H h_s|^2 = M across M so the comparison is fair.
    sigma2 = 8.0 / 100.0
    rms = []
    theta = 0.35
    for m in (4, 8, 16):
        geom = ArrayGeometry(m)
        rng = np.random.default_rng(100 + m)
        a = steering_vector(geom, theta)
        h_s = np.exp(1j * 0.7 * np.arange(m) ** 2).astype(complex)
        h_s -= a * (np.vdot(a, h_s) / m)
        h_s *= np.sqrt(m) / np.linalg.norm(h_s)
        _, b = beamspace_basis(theta, geom)
        errs = []
        for _ in range(1000):
            t = 128
            phi = _phase_walk(rng, t)
            d = draw_dynamic_gains(t, GainDistribution(1.0), rng, constrained=True)
            params = ScenarioParams(theta, h_s, d, phi, sigma2)
            blk = synthesize_csi(geom, params, rng)
            phi_hat = estimate_phase_offsets(blk, b)
            errs.append(np.mean((phi_hat - phi) ** 2))
        rms.append(np.sqrt(np.mean(errs)))
    assert rms[0] > rms[1] > rms[2]


def test_cgs_exact_recovery_zero_phase():
    geom = ArrayGeometry(6)
    rng = np.random.default_rng(6)
    h_s = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    theta = -0.62
    d = draw_dynamic_gains(32, GainDistribution(1.0), rng, constrained=True)
    blk, _ = _noiseless_block(geom, theta, h_s, d, np.zeros(32))
    a_unit, _ = beamspace_basis(theta, geom)
    d_hat = estimate_cgs(blk, a_unit, np.zeros(32), geom)
    np.testing.assert_allclose(d_hat, d, atol=1e-10)


def test_cgs_exact_recovery_with_known_phases():
    geom = ArrayGeometry(6)
    rng = np.random.default_rng(7)
    h_s = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    theta = 0.18
    phi = _phase_walk(rng, 32)
    d = draw_dynamic_gains(32, GainDistribution(1.0), rng, constrained=True)
    blk, _ = _noiseless_block(geom, theta, h_s, d, phi)
    a_unit, _ = beamspace_basis(theta, geom)
    d_hat = estimate_cgs(blk, a_unit, phi, geom)
    np.testing.assert_allclose(d_hat, d, atol=1e-10)


def test_pipeline_noiseless_on_grid_full_recovery():
    # theta_d on a grid node: MUSIC returns it exactly (pole guard) and the
    # downstream stages recover phi and d to working precision
    geom = ArrayGeometry(8)
    rng = np.random.default_rng(8)
    theta = _grid_angle(1200)
    h_s = (rng.standard_normal(8) + 1j * rng.standard_normal(8)) / np.sqrt(2)
    t = 96
    d = draw_dynamic_gains(t, GainDistribution(1.0), rng, constrained=True)
    phi = _phase_walk(rng, t)
    blk, _ = _noiseless_block(geom, theta, h_s, d, phi)
    est = run_estimator(blk, geom)
    assert est.theta_hat == theta
    np.testing.assert_allclose(est.phi_hat, phi, atol=1e-10)
    np.testing.assert_allclose(est.d_hat, d, atol=1e-10)


def test_pipeline_noiseless_off_grid_theta_within_step():
    geom = ArrayGeometry(8)
    rng = np.random.default_rng(9)
    theta = 0.3317
    h_s = (rng.standard_normal(8) + 1j * rng.standard_normal(8)) / np.sqrt(2)
    t = 96
    d = draw_dynamic_gains(t, GainDistribution(1.0), rng, constrained=True)
    blk, _ = _noiseless_block(geom, theta, h_s, d, _phase_walk(rng, t))
    est = run_estimator(blk, geom)
    assert abs(est.theta_hat - theta) <= GRID_STEP


def test_pipeline_outputs_are_zero_mean():
    geom = ArrayGeometry(6)
    rng = np.random.default_rng(10)
    h_s = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    params = ScenarioParams(0.4, h_s, draw_dynamic_gains(64, GainDistribution(1.0), rng),
                            _phase_walk(rng, 64), 1.0)
    est = run_estimator(synthesize_csi(geom, params, rng), geom)
    assert abs(est.phi_hat.sum()) < 1e-10
    assert abs(est.d_hat.sum()) < 1e-10


def test_pipeline_deterministic():
    geom = ArrayGeometry(6)
    rng = np.random.default_rng(11)
    h_s = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    params = ScenarioParams(0.4, h_s, draw_dynamic_gains(64, GainDistribution(1.0), rng),
                            _phase_walk(rng, 64), 0.5)
    blk = synthesize_csi(geom, params, seed=12)
    e1 = run_estimator(blk, geom)
    e2 = run_estimator(CsiBlock(blk.data.copy()), geom)
    assert e1.theta_hat == e2.theta_hat
    np.testing.assert_array_equal(e1.d_hat, e2.d_hat)


def test_pipeline_stage_tagging():
    # static channel exactly in the dynamic beam, no noise: phase stage degenerates
    geom = ArrayGeometry(6)
    theta = _grid_angle(900)
    a = steering_vector(geom, theta)
    d = np.full(32, 0.5 + 0.2j) + np.linspace(0, 1, 32) * (0.3 - 0.1j)
    blk, _ = _noiseless_block(geom, theta, 3.0 * a, d - d.mean(), np.zeros(32))
    with pytest.raises(EstimationStageError) as err:
        run_estimator(blk, geom)
    assert err.value.stage == "phase"


def test_pipeline_mse_respects_cgs_bound(reference_scenario):
    # single-point bound ordering (the full sweep lives in the acceptance suite)
    geom, theta, h_s, sigma2, p_d = reference_scenario
    t = 128
    dist = GainDistribution(p_d)
    rng = np.random.default_rng(13)
    errs = []
    for _ in range(800):
        d = draw_dynamic_gains(t, dist, rng, constrained=True)
        phi = _phase_walk(rng, t)
        params = ScenarioParams(theta, h_s, d, phi, sigma2)
        est = run_estimator(synthesize_csi(geom, params, rng), geom)
        errs.append(np.mean(np.abs(est.d_hat - d) ** 2))
    mse = np.mean(errs)
    stderr = np.std(errs, ddof=1) / np.sqrt(len(errs))
    bound = ahrcrb_cgs(geom, theta, h_s, sigma2, p_d).value
    assert mse >= bound - 3 * stderr
