"""Seeded Monte Carlo orchestration: bounds vs estimator MSE over an SNR grid.

Seed derivation (counter-based, so adding trials or SNR points never perturbs
existing streams):

    SeedSequence(master, spawn_key=(0, point, trial))  per-trial synthesis
    SeedSequence(master, spawn_key=(1, 0))             campaign-level h_s draw
    SeedSequence(master, spawn_key=(2, point))         Monte Carlo AoA bound
    SeedSequence(master, spawn_key=(3, point))         finite-T CGS bound
    SeedSequence(master, spawn_key=(4, 0))             verification suites

All reductions over trials run in trial order through math.fsum, so results
are byte-stable for a given (config, seed) regardless of the worker count.

SNR convention: SNR_dB = 10 log10(p_d * M / sigma2), the dynamic-path array
SNR (|a|^2 = M), with sigma2 the per-real-component noise variance.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .array_model import (ArrayGeometry, GainDistribution, ScenarioParams,
                          draw_dynamic_gains, steering_derivative, steering_vector,
                          synthesize_csi)
from .bounds import ahrcrb_cgs, finite_t_hrcrb_cgs, hrcrb_theta, rho_theta, verify_hrcrb_chain
from .config import CampaignConfig
from .csvio import ResultRow
from .estimator import EstimatorConfig, run_estimator
from .exceptions import EstimationStageError
from .fisher import (constraint_basis, efim_theta_closed, efim_theta_schur,
                     fim_numeric_oracle, joint_fim, psi_block_inverse, reordered_blocks)
from .rng import as_rng

MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int                  # fingerprint of the per-trial seed stream
    theta_sq_err: float
    d_mse: float               # per-snapshot |d_hat - d|^2
    phi_mse: float
    failed: bool = False
    diagnostics: str = ""


@dataclass(frozen=True)
class VerifyCheck:
    name: str
    passed: bool
    worst: float
    threshold: float


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple
    ok: bool


@dataclass(frozen=True)
class CampaignResult:
    rows: tuple
    verify: VerificationReport = None
    trial_results: dict = None


def sigma2_from_snr_db(snr_db: float, p_d: float, m: int) -> float:
    """Invert SNR_dB = 10 log10(p_d * M / sigma2)."""
    return p_d * m / 10.0 ** (snr_db / 10.0)


def _trial_stream(master: int, point: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(0, point, trial))


def _campaign_stream(master: int, kind: int, index: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(kind, index))


def resolve_h_s(cfg: CampaignConfig) -> np.ndarray:
    """Campaign-level static channel: fixed vector or one seeded draw per campaign."""
    if cfg.h_s.mode == "fixed":
        return np.array(cfg.h_s.re) + 1j * np.array(cfg.h_s.im)
    rng = np.random.default_rng(_campaign_stream(cfg.seed, 1))
    scale = np.sqrt(cfg.h_s.power / 2.0)
    return scale * (rng.standard_normal(cfg.m) + 1j * rng.standard_normal(cfg.m))


def scenario_from_config(cfg: CampaignConfig, point: int = 0, trial: int = 0) -> ScenarioParams:
    """A concrete scenario draw (used by the fim/estimate CLI paths)."""
    h_s = resolve_h_s(cfg)
    sigma2 = sigma2_from_snr_db(cfg.snr_db[point], cfg.p_d, cfg.m)
    rng = np.random.default_rng(_trial_stream(cfg.seed, point, trial))
    d = draw_dynamic_gains(cfg.t, GainDistribution(cfg.p_d), rng, constrained=True)
    phi = rng.normal(0.0, cfg.phi_walk_std, cfg.t).cumsum()
    phi -= phi.mean()
    return ScenarioParams(cfg.theta_d, h_s, d, phi, sigma2)


def _one_trial(cfg: CampaignConfig, geom: ArrayGeometry, h_s: np.ndarray, sigma2: float,
               ecfg: EstimatorConfig, point: int, trial: int) -> TrialResult:
    ss = _trial_stream(cfg.seed, point, trial)
    fingerprint = int(ss.generate_state(1)[0])
    rng = np.random.default_rng(ss)
    d = draw_dynamic_gains(cfg.t, GainDistribution(cfg.p_d), rng, constrained=True)
    phi = rng.normal(0.0, cfg.phi_walk_std, cfg.t).cumsum()
    phi -= phi.mean()
    params = ScenarioParams(cfg.theta_d, h_s, d, phi, sigma2)
    csi = synthesize_csi(geom, params, rng)
    try:
        est = run_estimator(csi, geom, ecfg)
    except EstimationStageError as err:
        return TrialResult(trial, fingerprint, math.nan, math.nan, math.nan,
                           failed=True, diagnostics=err.stage)
    theta_sq = (est.theta_hat - cfg.theta_d) ** 2
    d_mse = float(np.mean(np.abs(est.d_hat - d) ** 2))
    phi_mse = float(np.mean((est.phi_hat - phi) ** 2))
    diag = est.diagnostics
    return TrialResult(trial, fingerprint, theta_sq, d_mse, phi_mse,
                       diagnostics=f"gap={diag.eigen_gap_ratio:.3g}")


def _mean_and_stderr(values) -> tuple:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def run_campaign(cfg: CampaignConfig, keep_trials: bool = False) -> CampaignResult:
    """Execute the configured campaign; deterministic for fixed (config, seed)."""
    if cfg.mode == "verify":
        report = run_verification(m=cfg.m, t=min(cfg.t, 8), p_d=cfg.p_d,
                                  trials=cfg.verify_trials, seed=cfg.seed,
                                  spacing=cfg.spacing)
        rows = tuple(
            ResultRow(None, f"verify_{c.name}", c.worst, None, cfg.verify_trials, cfg.seed)
            for c in report.checks
        )
        return CampaignResult(rows=rows, verify=report)

    geom = ArrayGeometry(cfg.m, cfg.spacing)
    h_s = resolve_h_s(cfg)
    dist = GainDistribution(cfg.p_d)
    ecfg = EstimatorConfig(grid_points=cfg.grid_points, refine=cfg.refine,
                           source_count=cfg.source_count)
    rows = []
    trial_map = {}

    for point, snr in enumerate(cfg.snr_db):
        sigma2 = sigma2_from_snr_db(snr, cfg.p_d, cfg.m)
        hb = hrcrb_theta(geom, cfg.theta_d, h_s, sigma2, cfg.t, dist, mode="closed-form")
        ab = ahrcrb_cgs(geom, cfg.theta_d, h_s, sigma2, cfg.p_d)
        rows.append(ResultRow(snr, "hrcrb_theta", hb.value, None, 0, cfg.seed))
        rows.append(ResultRow(snr, "ahrcrb_d", ab.value, None, 0, cfg.seed))

        if cfg.mode == "bounds-only":
            mc = hrcrb_theta(geom, cfg.theta_d, h_s, sigma2, cfg.t, dist,
                             mode="monte-carlo", trials=cfg.mc_bound_trials,
                             seed=_campaign_stream(cfg.seed, 2, point))
            rows.append(ResultRow(snr, "hrcrb_theta_mc", mc.value, mc.mc_stderr,
                                  mc.mc_trials, cfg.seed))
        if cfg.finite_t:
            ft = finite_t_hrcrb_cgs(geom, cfg.theta_d, h_s, sigma2, cfg.t, dist,
                                    trials=cfg.finite_t_trials,
                                    seed=_campaign_stream(cfg.seed, 3, point))
            rows.append(ResultRow(snr, "finite_t_hrcrb_d", ft.value, ft.mc_stderr,
                                  ft.mc_trials, cfg.seed))

        if cfg.mode == "estimator":
            results = [None] * cfg.trials

            def work(i, _point=point, _sigma2=sigma2):
                results[i] = _one_trial(cfg, geom, h_s, _sigma2, ecfg, _point, i)

            if cfg.threads <= 1:
                for i in range(cfg.trials):
                    work(i)
            else:
                with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                    list(pool.map(work, range(cfg.trials)))

            ok = [r for r in results if not r.failed]
            fail_rate = 1.0 - len(ok) / cfg.trials
            if fail_rate > MAX_FAILURE_RATE:
                raise RuntimeError(
                    f"estimator failed on {fail_rate:.1%} of trials at {snr} dB; aborting"
                )
            for metric, attr in (("mse_theta", "theta_sq_err"),
                                 ("mse_d", "d_mse"),
                                 ("mse_phi", "phi_mse")):
                mean, stderr = _mean_and_stderr([getattr(r, attr) for r in ok])
                rows.append(ResultRow(snr, metric, mean, stderr, len(ok), cfg.seed))
            rows.append(ResultRow(snr, "estimator_fail_rate", fail_rate, None,
                                  cfg.trials, cfg.seed))
            if keep_trials:
                trial_map[point] = results

    return CampaignResult(rows=tuple(rows), trial_results=trial_map if keep_trials else None)


# ---------------------------------------------------------------------------
# verification suites (the `verify` CLI mode)

def _random_scenario(rng, m_range=(2, 6), t_range=(2, 8), spacing=0.5):
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    t = int(rng.integers(t_range[0], t_range[1] + 1))
    geom = ArrayGeometry(m, spacing)
    theta = float(rng.uniform(-1.3, 1.3))
    a = steering_vector(geom, theta)
    while True:
        # keep Delta comfortably positive so closed forms stay well conditioned
        h_s = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)
        scale = m * float(np.vdot(h_s, h_s).real)
        if scale - abs(np.vdot(a, h_s)) ** 2 > 0.05 * scale:
            break
    d = (rng.standard_normal(t) + 1j * rng.standard_normal(t)) / np.sqrt(2)
    phi = rng.uniform(-np.pi / 4, np.pi / 4, t)
    sigma2 = float(rng.uniform(0.2, 2.0))
    return geom, ScenarioParams(theta, h_s, d, phi, sigma2)


def _orthogonal_static(geom, theta, rng):
    """h_s orthogonal to span{a, b}: the Xi = 0 / rho = 1 configuration."""
    a = steering_vector(geom, theta)
    b = steering_derivative(geom, theta)
    q, _ = np.linalg.qr(np.column_stack([a, b]))
    h = rng.standard_normal(geom.m) + 1j * rng.standard_normal(geom.m)
    h = h - q @ (q.conj().T @ h)
    norm = np.linalg.norm(h)
    if norm < 1e-6:
        raise ArithmeticError("degenerate orthogonal draw")
    return h / norm * np.sqrt(geom.m)


def check_rho_range(trials: int, seed) -> VerifyCheck:
    """1 <= rho <= 2 and Xi <= Gamma*Delta over random draws; rho = 1 at Xi = 0."""
    rng = as_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m = int(rng.integers(2, 17))
        geom = ArrayGeometry(m)
        theta = float(rng.uniform(-1.4, 1.4))
        h_s = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        try:
            dec = rho_theta(geom, theta, h_s)
        except ArithmeticError:
            continue
        worst = max(worst,
                    (dec.xi - dec.gamma * dec.delta) / (dec.gamma * dec.delta),
                    1.0 - dec.rho,
                    (dec.rho - 2.0) / 2.0)
    for _ in range(50):
        m = int(rng.integers(3, 17))
        geom = ArrayGeometry(m)
        theta = float(rng.uniform(-1.4, 1.4))
        h_s = _orthogonal_static(geom, theta, rng)
        dec = rho_theta(geom, theta, h_s)
        worst = max(worst, abs(dec.rho - 1.0))
    return VerifyCheck("rho_range", worst <= 1e-10, worst, 1e-10)


def check_fim_oracle(scenarios: int, seed) -> VerifyCheck:
    """Closed-form joint FIM vs finite-difference oracle, entrywise."""
    rng = as_rng(seed)
    worst = 0.0
    for _ in range(scenarios):
        geom, params = _random_scenario(rng)
        closed = joint_fim(geom, params).data
        oracle = fim_numeric_oracle(geom, params).data
        scale = np.max(np.abs(closed))
        worst = max(worst, float(np.max(np.abs(closed - oracle) / (np.abs(closed) + scale))))
    return VerifyCheck("fim_oracle", worst <= 1e-6, worst, 1e-6)


def check_schur_consistency(scenarios: int, seed) -> VerifyCheck:
    """EFIM of theta: Schur sum == closed form == 1/[J^-1]_00; exact block inverse."""
    rng = as_rng(seed)
    worst = 0.0
    for _ in range(scenarios):
        geom, params = _random_scenario(rng, m_range=(3, 6), t_range=(2, 6))
        schur = efim_theta_schur(geom, params)
        closed = efim_theta_closed(geom, params)
        full = reordered_blocks(geom, params).assemble()
        via_inverse = 1.0 / np.linalg.inv(full)[0, 0]
        worst = max(worst,
                    abs(schur - closed) / abs(schur),
                    abs(schur - via_inverse) / abs(schur))
        ro = reordered_blocks(geom, params)
        for t in range(params.t):
            inv = psi_block_inverse(ro.blocks[t], geom, params, t)
            worst = max(worst, float(np.max(np.abs(inv @ ro.blocks[t].j_psi - np.eye(3)))))
    return VerifyCheck("schur_consistency", worst <= 1e-10, worst, 1e-10)


def check_constraint_basis() -> VerifyCheck:
    """U^T U = I, all-ones rows annihilated, and the hand-derived T=4 column."""
    worst = 0.0
    for t in (2, 3, 8, 64):
        basis = constraint_basis(3, t)
        u = basis.u
        worst = max(worst, float(np.max(np.abs(u.T @ u - np.eye(u.shape[1])))))
        lay_rows = np.zeros((3, u.shape[0]))
        m = basis.m
        lay_rows[0, 1 + 2 * m: 1 + 2 * m + t] = 1.0
        lay_rows[1, 1 + 2 * m + t: 1 + 2 * m + 2 * t] = 1.0
        lay_rows[2, 1 + 2 * m + 2 * t:] = 1.0
        worst = max(worst, float(np.max(np.abs(lay_rows @ u))))
    u_sub = constraint_basis(2, 4).u[5:9, 5:6].ravel()
    expected = np.array([-5.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5])
    worst = max(worst, float(np.max(np.abs(u_sub - expected))))
    return VerifyCheck("constraint_basis", worst <= 1e-12, worst, 1e-12)


def check_hrcrb_chain(m: int, t: int, p_d: float, trials: int, seed,
                      spacing: float = 0.5) -> tuple:
    geom = ArrayGeometry(m, spacing)
    report = verify_hrcrb_chain(geom, t, GainDistribution(p_d), sigma2=1.0,
                                trials=trials, seed=seed,
                                scenarios=max(2, min(20, trials // 100)))
    order_worst = max(report.max_floor_violation, report.max_jensen_violation,
                      report.scalar_jensen_violation)
    return (
        VerifyCheck("chain_orderings", order_worst <= 1e-10, order_worst, 1e-10),
        VerifyCheck("chain_schur_identity", report.max_schur_rel_error <= 1e-9,
                    report.max_schur_rel_error, 1e-9),
    )


def run_verification(m: int = 4, t: int = 4, p_d: float = 1.0, trials: int = 2000,
                     seed: int = 0, spacing: float = 0.5) -> VerificationReport:
    """Desk-scale property suites (full-scale versions live in the acceptance tests)."""
    base = _campaign_stream(seed, 4)
    sub = base.spawn(3)
    checks = [
        check_rho_range(trials, sub[0]),
        check_fim_oracle(max(5, trials // 200), sub[1]),
        check_schur_consistency(max(10, trials // 100), sub[2]),
        check_constraint_basis(),
    ]
    checks.extend(check_hrcrb_chain(m, t, p_d, trials, _campaign_stream(seed, 4, 1),
                                     spacing=spacing))
    return VerificationReport(checks=tuple(checks), ok=all(c.passed for c in checks))
