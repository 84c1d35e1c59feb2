"""Reference dynamic-path estimation pipeline.

Six stages applied to one CSI block H (M x T):

1. AoA by spectral MUSIC on the sample covariance H H^H / T (two-dimensional
   signal subspace: static channel plus dynamic steering vector).
2. Beamspace split: A = a(theta_hat)/|a(theta_hat)|, B = orthonormal basis of
   its nullspace (from the SVD of A).
3. Nullspace projection H_p = B^H H removes the dynamic component.
4. Phase offsets: maximal-ratio combining of H_p with the principal left
   singular vector, angles unwrapped along time, mean removed.
5. Phase compensation H_c = H diag(exp(-j phi_hat)).
6. Gain combining d_hat = A^H H_c / |a(theta_hat)| followed by DC removal, so
   d_hat carries the model's units (the sqrt(M) combining gain is divided out).

The pseudospectrum peak is disambiguated between the dynamic and static
directions by the temporal magnitude variance of the beam series: under pure
phase offsets the static projection has constant magnitude while the dynamic
path modulates it.
"""

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .array_model import ArrayGeometry, CsiBlock, steering_matrix, steering_vector
from .exceptions import DegenerateProjectionError, EstimationStageError

# Peak value this far above its neighbours marks a numerical pole of the
# noiseless pseudospectrum; parabolic interpolation through a pole is
# meaningless, so the grid node itself is returned.
_POLE_GUARD = 1e12

# Diagnostic-only threshold on mean(signal eigenvalues) / mean(noise
# eigenvalues) below which the block is flagged as having no dominant gap.
_EIGEN_GAP_THRESHOLD = 2.0


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs of the pipeline; defaults follow the reference campaign."""

    grid_points: int = 2048
    refine: bool = True
    source_count: int = 2

    def __post_init__(self):
        if self.grid_points < 64:
            raise ValueError(f"grid_points must be >= 64, got {self.grid_points}")
        if self.source_count < 1:
            raise ValueError(f"source_count must be >= 1, got {self.source_count}")


@dataclass(frozen=True)
class MusicDiagnostics:
    eigenvalues: np.ndarray          # ascending
    peak_angles: np.ndarray
    peak_heights: np.ndarray
    peak_variances: np.ndarray       # beam-magnitude variance used to disambiguate
    eigen_gap_ratio: float
    has_dominant_gap: bool
    refined: bool


@dataclass(frozen=True)
class EstimateResult:
    """Pipeline output; phi_hat and d_hat are zero-mean by construction."""

    theta_hat: float
    phi_hat: np.ndarray
    d_hat: np.ndarray
    diagnostics: MusicDiagnostics = field(repr=False, default=None)


@functools.lru_cache(maxsize=8)
def _aoa_grid(m: int, spacing: float, grid_points: int):
    """Cell-centre angle grid on (-pi/2, pi/2) and its steering matrix (read-only)."""
    step = np.pi / grid_points
    grid = -np.pi / 2 + (np.arange(grid_points) + 0.5) * step
    manifold = steering_matrix(ArrayGeometry(m, spacing), grid)
    grid.setflags(write=False)
    manifold.setflags(write=False)
    return grid, manifold


def _refine_peak(grid: np.ndarray, spectrum: np.ndarray, i: int):
    """Parabolic (log-domain) peak interpolation with a pole guard.

    Returns (theta, refined_flag).  Edge peaks and numerical poles of the
    noiseless pseudospectrum are returned unrefined: the grid node is already
    the minimizer of the noise projection to machine precision.
    """
    if i == 0 or i == grid.size - 1:
        return grid[i], False
    if spectrum[i] > _POLE_GUARD * max(spectrum[i - 1], spectrum[i + 1]):
        return grid[i], False
    lm, lc, lp = np.log(spectrum[i - 1:i + 2])
    denom = lm - 2 * lc + lp
    if denom >= 0:
        return grid[i], False
    delta = 0.5 * (lm - lp) / denom
    return grid[i] + delta * (grid[1] - grid[0]), True


def music_aoa(csi: CsiBlock, geom: ArrayGeometry, cfg: EstimatorConfig = EstimatorConfig()):
    """MUSIC AoA estimate with peak disambiguation; returns (theta_hat, diagnostics)."""
    h = csi.data
    m, t = h.shape
    if m != geom.m:
        raise ValueError(f"CSI has {m} rows but geometry says m={geom.m}")
    if m <= cfg.source_count:
        raise ValueError(
            f"need m > source_count for a noise subspace, got m={m}, "
            f"source_count={cfg.source_count}"
        )
    if t < 3:
        raise ValueError(f"need at least 3 snapshots, got {t}")

    cov = h @ h.conj().T / t
    eigval, eigvec = np.linalg.eigh(cov)
    noise_dim = m - cfg.source_count
    e_noise = eigvec[:, :noise_dim]

    noise_floor = max(float(eigval[:noise_dim].mean()), np.finfo(float).tiny)
    with np.errstate(over="ignore"):
        gap_ratio = float(np.float64(eigval[noise_dim:].mean()) / noise_floor)
    has_gap = gap_ratio > _EIGEN_GAP_THRESHOLD

    grid, manifold = _aoa_grid(geom.m, geom.spacing, cfg.grid_points)
    proj = np.sum(np.abs(e_noise.conj().T @ manifold) ** 2, axis=0)
    spectrum = 1.0 / np.maximum(proj, np.finfo(float).tiny)

    peaks, _ = find_peaks(spectrum)
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(spectrum))])
    peaks = peaks[np.argsort(spectrum[peaks])[::-1][:cfg.source_count]]

    # dynamic-vs-static disambiguation: the dynamic beam modulates |a^H h_t|
    variances = np.empty(peaks.size)
    for k, i in enumerate(peaks):
        series = np.abs(manifold[:, i].conj() @ h) / m
        variances[k] = series.var()
    best = peaks[int(np.argmax(variances))]

    if cfg.refine:
        theta_hat, refined = _refine_peak(grid, spectrum, int(best))
    else:
        theta_hat, refined = grid[best], False

    diag = MusicDiagnostics(
        eigenvalues=eigval,
        peak_angles=grid[peaks],
        peak_heights=spectrum[peaks],
        peak_variances=variances,
        eigen_gap_ratio=gap_ratio,
        has_dominant_gap=has_gap,
        refined=refined,
    )
    return float(theta_hat), diag


def beamspace_basis(theta_hat: float, geom: ArrayGeometry):
    """Unit dynamic-beam vector A and the orthonormal nullspace basis B (M x (M-1))."""
    a = steering_vector(geom, theta_hat)
    a_unit = a / np.linalg.norm(a)
    u, _, _ = np.linalg.svd(a_unit[:, None], full_matrices=True)
    # align the first left singular vector's phase with A so [A | B] is unitary
    return a_unit, u[:, 1:]


def estimate_phase_offsets(csi: CsiBlock, b: np.ndarray) -> np.ndarray:
    """Per-snapshot phase offsets from the nullspace projection, mean removed.

    H_p = B^H H, maximal-ratio combining with the principal left singular
    vector, then unwrapped angles.  Valid while consecutive offsets differ by
    less than pi (unwrap assumption).
    """
    h = csi.data
    h_p = np.asarray(b, dtype=complex).conj().T @ h
    u, s, _ = np.linalg.svd(h_p, full_matrices=False)
    if s[0] <= 1e-10 * np.linalg.norm(h):
        raise DegenerateProjectionError(
            "nullspace projection carries no static-path energy "
            "(static channel parallel to the estimated beam?)"
        )
    h_q = u[:, 0].conj() @ h_p
    phi = np.unwrap(np.angle(h_q))
    return phi - phi.mean()


def estimate_cgs(csi: CsiBlock, a_unit: np.ndarray, phi_hat: np.ndarray,
                 geom: ArrayGeometry) -> np.ndarray:
    """Compensate phases, combine along the dynamic beam, remove DC.

    The combining gain |a| = sqrt(M) is divided out so d_hat estimates the
    gain sequence in the model's units.
    """
    h_c = csi.data * np.exp(-1j * np.asarray(phi_hat))[None, :]
    d_hat = (np.asarray(a_unit).conj() @ h_c) / np.sqrt(geom.m)
    return d_hat - d_hat.mean()


def run_estimator(csi: CsiBlock, geom: ArrayGeometry,
                  cfg: EstimatorConfig = EstimatorConfig()) -> EstimateResult:
    """Full pipeline; numerical failures are re-raised tagged with their stage."""
    try:
        theta_hat, diag = music_aoa(csi, geom, cfg)
    except (ArithmeticError, np.linalg.LinAlgError) as err:
        raise EstimationStageError("music", err) from err
    try:
        a_unit, b = beamspace_basis(theta_hat, geom)
    except (ArithmeticError, np.linalg.LinAlgError) as err:
        raise EstimationStageError("beamspace", err) from err
    try:
        phi_hat = estimate_phase_offsets(csi, b)
    except (ArithmeticError, np.linalg.LinAlgError) as err:
        raise EstimationStageError("phase", err) from err
    try:
        d_hat = estimate_cgs(csi, a_unit, phi_hat, geom)
    except (ArithmeticError, np.linalg.LinAlgError) as err:
        raise EstimationStageError("cgs", err) from err
    return EstimateResult(theta_hat=theta_hat, phi_hat=phi_hat, d_hat=d_hat, diagnostics=diag)
