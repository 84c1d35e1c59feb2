"""Physical scenario: antenna array, parameter vector, CSI snapshot synthesis.

Signal model per snapshot t (t = 0..T-1):

    h_t = (h_s + a(theta_d) * d_t) * exp(j * phi_t) + n_t

where h_s is the static channel, a(theta) the steering vector of the single
dynamic path, d_t its complex gain, phi_t the random per-snapshot phase
offset of the asynchronous receiver, and n_t white circular Gaussian noise.

Array convention: uniform linear array, element m at m * spacing wavelengths,
phase reference at element 0, so

    a_m(theta) = exp(j * 2*pi * spacing * m * sin(theta)),   |a(theta)|^2 = M.

Noise convention: sigma2 is the noise variance PER REAL COMPONENT, i.e. each
complex CSI entry has total variance 2*sigma2.  With this convention the
closed-form information matrices in :mod:`asyncsense.fisher` (scaled 1/sigma2)
are exactly the Fisher information of the synthesized observations, and the
performance bounds are true lower bounds for the simulated estimators.
"""

from dataclasses import dataclass, replace

import numpy as np

from .rng import as_rng

# Zero-sum identifiability constraints are considered satisfied below this
# relative residual (checked after projection).
CONSTRAINT_EPS = 1e-9


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and spacing in wavelengths."""

    m: int
    spacing: float = 0.5

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"antenna count m must be an integer >= 2, got {self.m}")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise ValueError(f"element spacing must be positive, got {self.spacing}")


@dataclass(frozen=True)
class GainDistribution:
    """Circularly symmetric dynamic-path gain distribution, E|d_t|^2 = p_d."""

    p_d: float

    def __post_init__(self):
        if not (self.p_d > 0 and np.isfinite(self.p_d)):
            raise ValueError(f"per-snapshot power p_d must be positive, got {self.p_d}")


@dataclass(frozen=True)
class ScenarioParams:
    """Full parameter vector (theta_d, h_s, d, phi_o) plus noise variance.

    theta_d : dynamic-path AoA in radians, inside (-pi/2, pi/2)
    h_s     : complex static channel, length M
    d       : complex dynamic gain sequence, length T
    phi_o   : real phase offsets in radians, length T
    sigma2  : noise variance per real component (complex entry variance 2*sigma2)

    The zero-sum identifiability constraints on d and phi_o are only
    guaranteed after :func:`project_constraints`; bound computations
    deliberately use unconstrained gain draws (see module docs in
    :mod:`asyncsense.bounds`).
    """

    theta_d: float
    h_s: np.ndarray
    d: np.ndarray
    phi_o: np.ndarray
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "h_s", np.asarray(self.h_s, dtype=complex))
        object.__setattr__(self, "d", np.asarray(self.d, dtype=complex))
        object.__setattr__(self, "phi_o", np.asarray(self.phi_o, dtype=float))
        if not -np.pi / 2 < self.theta_d < np.pi / 2:
            raise ValueError(f"theta_d must lie in (-pi/2, pi/2), got {self.theta_d}")
        if self.h_s.ndim != 1 or self.d.ndim != 1 or self.phi_o.ndim != 1:
            raise ValueError("h_s, d and phi_o must be one-dimensional")
        if self.d.size != self.phi_o.size:
            raise ValueError(
                f"d and phi_o must share length T, got {self.d.size} and {self.phi_o.size}"
            )
        for name in ("h_s", "d", "phi_o"):
            if not np.all(np.isfinite(getattr(self, name).view(float))):
                raise ValueError(f"{name} contains non-finite entries")
        if not (np.isfinite(self.sigma2) and self.sigma2 >= 0):
            raise ValueError(f"sigma2 must be finite and >= 0, got {self.sigma2}")

    @property
    def m(self) -> int:
        return self.h_s.size

    @property
    def t(self) -> int:
        return self.d.size

    def constraints_satisfied(self, eps: float = CONSTRAINT_EPS) -> bool:
        """True when both zero-sum constraints hold to the given tolerance."""
        rms = np.sqrt(np.mean(np.abs(self.d) ** 2))
        d_ok = abs(self.d.sum()) <= eps * np.sqrt(self.t) * max(rms, np.finfo(float).tiny)
        phi_ok = abs(self.phi_o.sum()) <= eps
        return bool(d_ok and phi_ok)


@dataclass(frozen=True)
class CsiBlock:
    """Complex M x T snapshot matrix; column t is the CSI vector h_t."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=complex))
        if self.data.ndim != 2:
            raise ValueError("CSI block must be a 2-D matrix (antennas x snapshots)")

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def t(self) -> int:
        return self.data.shape[1]


def _check_theta(theta: float):
    if not -np.pi / 2 < theta < np.pi / 2:
        raise ValueError(f"theta must lie in the open interval (-pi/2, pi/2), got {theta}")


def steering_vector(geom: ArrayGeometry, theta: float) -> np.ndarray:
    """ULA steering vector a(theta); unit-modulus entries, |a|^2 = M."""
    _check_theta(theta)
    m = np.arange(geom.m)
    return np.exp(1j * 2 * np.pi * geom.spacing * m * np.sin(theta))


def steering_matrix(geom: ArrayGeometry, thetas: np.ndarray) -> np.ndarray:
    """Steering vectors for a whole angle grid, stacked as columns (M x len)."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size and not (
        -np.pi / 2 < thetas.min() and thetas.max() < np.pi / 2
    ):
        raise ValueError("all grid angles must lie in (-pi/2, pi/2)")
    m = np.arange(geom.m)
    return np.exp(1j * 2 * np.pi * geom.spacing * np.outer(m, np.sin(thetas)))


def steering_derivative(geom: ArrayGeometry, theta: float) -> np.ndarray:
    """Derivative b(theta) = da/dtheta of the steering vector."""
    _check_theta(theta)
    m = np.arange(geom.m)
    return 1j * 2 * np.pi * geom.spacing * m * np.cos(theta) * steering_vector(geom, theta)


def project_constraints(params: ScenarioParams) -> ScenarioParams:
    """Remove the DC component of d and phi_o (zero-sum identifiability constraints)."""
    return replace(params, d=params.d - params.d.mean(), phi_o=params.phi_o - params.phi_o.mean())


def draw_dynamic_gains(t: int, dist: GainDistribution, seed, constrained: bool = False) -> np.ndarray:
    """Draw T i.i.d. circularly symmetric complex Gaussian gains, E|d_t|^2 = p_d.

    constrained=True additionally removes the mean, matching the estimator's
    identifiability model.  Bound expectations use unconstrained draws.
    """
    if t < 2:
        raise ValueError(f"need at least 2 snapshots, got {t}")
    rng = as_rng(seed)
    scale = np.sqrt(dist.p_d / 2.0)
    d = scale * (rng.standard_normal(t) + 1j * rng.standard_normal(t))
    if constrained:
        d = d - d.mean()
    return d


def synthesize_csi(geom: ArrayGeometry, params: ScenarioParams, seed) -> CsiBlock:
    """Synthesize a noisy CSI block for the scenario; deterministic given the seed.

    Noise is i.i.d. across entries and snapshots with variance sigma2 per real
    component (2*sigma2 per complex entry).
    """
    if params.m != geom.m:
        raise ValueError(f"h_s length {params.m} does not match geometry m={geom.m}")
    rng = as_rng(seed)
    a = steering_vector(geom, params.theta_d)
    clean = (params.h_s[:, None] + np.outer(a, params.d)) * np.exp(1j * params.phi_o)[None, :]
    shape = (geom.m, params.t)
    noise = np.sqrt(params.sigma2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return CsiBlock(clean + noise)
