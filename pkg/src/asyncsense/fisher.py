"""Exact Fisher information machinery for the single-carrier asynchronous model.

Joint FIM over the real parameter vector

    [theta_d | Re h_s (M) | Im h_s (M) | Re d (T) | Im d (T) | phi_o (T)]

of dimension 1 + 2M + 3T, every block scaled by 1/sigma2.  Under the
per-real-component noise convention of :mod:`asyncsense.array_model` this is
exactly the Fisher information of the synthesized CSI block: the textbook
circular-Gaussian FIM is (2 / complex_variance) * Re{Jmu^H Jmu} and the
complex entry variance is 2*sigma2, so the prefactor reduces to 1/sigma2.

The reordered per-snapshot machinery (blocks over psi_t = (Re d_t, Im d_t,
phi_t) with h_s treated as known) feeds the equivalent Fisher information of
theta_d and of psi_t via Schur complements, together with their closed forms.
"""

from dataclasses import dataclass

import numpy as np

from .array_model import ArrayGeometry, ScenarioParams, steering_derivative, steering_vector
from .exceptions import CollinearityError, DegenerateBoundError, SingularMatrixError

# Delta below this fraction of its natural scale |a|^2 |h_s|^2 is treated as
# exact collinearity of h_s and a (the bounds genuinely diverge there).
COLLINEARITY_RTOL = 1e-12

# Condition number beyond which a constrained information matrix is reported
# singular instead of being silently regularized.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ParamLayout:
    """Index map of the joint parameter ordering; all index arithmetic lives here."""

    m: int
    t: int

    @property
    def dim(self) -> int:
        return 1 + 2 * self.m + 3 * self.t

    @property
    def theta(self) -> int:
        return 0

    @property
    def h_re(self) -> slice:
        return slice(1, 1 + self.m)

    @property
    def h_im(self) -> slice:
        return slice(1 + self.m, 1 + 2 * self.m)

    @property
    def d_re(self) -> slice:
        return slice(1 + 2 * self.m, 1 + 2 * self.m + self.t)

    @property
    def d_im(self) -> slice:
        return slice(1 + 2 * self.m + self.t, 1 + 2 * self.m + 2 * self.t)

    @property
    def phi(self) -> slice:
        return slice(1 + 2 * self.m + 2 * self.t, self.dim)

    def psi_indices(self, t: int) -> np.ndarray:
        """Joint indices of the snapshot-t nuisance triple (Re d_t, Im d_t, phi_t)."""
        base = 1 + 2 * self.m
        return np.array([base + t, base + self.t + t, base + 2 * self.t + t])

    def reordered_indices(self) -> np.ndarray:
        """Indices of (theta, psi_0, ..., psi_{T-1}) in the joint ordering."""
        return np.concatenate([[self.theta]] + [self.psi_indices(t) for t in range(self.t)])

    def pack(self, theta_d, h_s, d, phi_o) -> np.ndarray:
        v = np.empty(self.dim)
        v[self.theta] = theta_d
        v[self.h_re] = np.real(h_s)
        v[self.h_im] = np.imag(h_s)
        v[self.d_re] = np.real(d)
        v[self.d_im] = np.imag(d)
        v[self.phi] = phi_o
        return v

    def unpack(self, v: np.ndarray):
        theta_d = v[self.theta]
        h_s = v[self.h_re] + 1j * v[self.h_im]
        d = v[self.d_re] + 1j * v[self.d_im]
        phi_o = v[self.phi]
        return theta_d, h_s, d, phi_o


@dataclass(frozen=True)
class FimMatrix:
    """Real symmetric joint FIM with the fixed parameter ordering of ParamLayout."""

    data: np.ndarray
    layout: ParamLayout

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=float))
        if self.data.shape != (self.layout.dim, self.layout.dim):
            raise ValueError(
                f"FIM shape {self.data.shape} does not match layout dim {self.layout.dim}"
            )


@dataclass(frozen=True)
class SnapshotBlock:
    """Per-snapshot pieces of the reordered FIM: J_psi (3x3) and J_theta,psi (3,)."""

    j_psi: np.ndarray
    j_theta_psi: np.ndarray


@dataclass(frozen=True)
class ReorderedFim:
    """Scalar theta-theta entry plus the per-snapshot blocks; h_s is known here."""

    j_theta_theta: float
    blocks: tuple

    def assemble(self) -> np.ndarray:
        """Dense (1 + 3T) x (1 + 3T) matrix over (theta, psi_0, ..., psi_{T-1})."""
        t = len(self.blocks)
        full = np.zeros((1 + 3 * t, 1 + 3 * t))
        full[0, 0] = self.j_theta_theta
        for i, blk in enumerate(self.blocks):
            s = slice(1 + 3 * i, 4 + 3 * i)
            full[s, s] = blk.j_psi
            full[0, s] = blk.j_theta_psi
            full[s, 0] = blk.j_theta_psi
        return full


@dataclass(frozen=True)
class ConstraintBasis:
    """Orthonormal basis U of the zero-sum constraint tangent space."""

    u: np.ndarray
    m: int
    t: int


def _couplings(geom: ArrayGeometry, params: ScenarioParams):
    """Steering vectors and the inner products every closed form is built from."""
    a = steering_vector(geom, params.theta_d)
    b = steering_derivative(geom, params.theta_d)
    return a, b, np.vdot(a, b), np.vdot(a, params.h_s), np.vdot(b, params.h_s)


def _delta(geom: ArrayGeometry, params: ScenarioParams, ah: complex) -> float:
    """Delta = |a|^2 |h_s|^2 - |a^H h_s|^2, with the collinearity guard."""
    scale = geom.m * float(np.vdot(params.h_s, params.h_s).real)
    delta = scale - abs(ah) ** 2
    if delta <= COLLINEARITY_RTOL * max(scale, np.finfo(float).tiny):
        raise CollinearityError(
            f"static channel is collinear with the steering vector (Delta={delta:.3e})"
        )
    return delta


def _check_sigma2(params: ScenarioParams):
    if params.sigma2 <= 0:
        raise ValueError(f"Fisher information needs sigma2 > 0, got {params.sigma2}")


def joint_fim(geom: ArrayGeometry, params: ScenarioParams) -> FimMatrix:
    """Closed-form joint FIM, every submatrix scaled by 1/sigma2."""
    _check_sigma2(params)
    if params.m != geom.m:
        raise ValueError("scenario and geometry disagree on the antenna count")
    m, t = params.m, params.t
    lay = ParamLayout(m, t)
    a, b, ab, ah, bh = _couplings(geom, params)
    d, h_s = params.d, params.h_s
    ba = np.conj(ab)

    j = np.zeros((lay.dim, lay.dim))
    col = h_s[:, None] + np.outer(a, d)          # per-snapshot noiseless mean / phase factor
    chi = ah + m * d

    j[lay.theta, lay.theta] = np.vdot(b, b).real * np.vdot(d, d).real
    j[lay.theta, lay.h_re] = np.real(d.conj().sum() * b.conj())
    j[lay.theta, lay.h_im] = -np.imag(d.conj().sum() * b.conj())
    j[lay.theta, lay.d_re] = np.real(ba * d.conj())
    j[lay.theta, lay.d_im] = -np.imag(ba * d.conj())
    j[lay.theta, lay.phi] = -np.imag(bh * d.conj() + ba * d.conj() * d)

    j[lay.h_re, lay.h_re] = t * np.eye(m)
    j[lay.h_im, lay.h_im] = t * np.eye(m)
    j[lay.h_re, lay.d_re] = np.tile(np.real(a)[:, None], (1, t))
    j[lay.h_re, lay.d_im] = np.tile(-np.imag(a)[:, None], (1, t))
    j[lay.h_im, lay.d_re] = np.tile(np.imag(a)[:, None], (1, t))
    j[lay.h_im, lay.d_im] = np.tile(np.real(a)[:, None], (1, t))
    j[lay.h_re, lay.phi] = -np.imag(col)
    j[lay.h_im, lay.phi] = np.real(col)

    j[lay.d_re, lay.d_re] = m * np.eye(t)
    j[lay.d_im, lay.d_im] = m * np.eye(t)
    # sign of the Im/phi coupling follows the per-snapshot block form (and the
    # numeric oracle); the flat submatrix list carries a copy error here
    j[lay.d_re, lay.phi] = np.diag(-np.imag(chi))
    j[lay.d_im, lay.phi] = np.diag(np.real(chi))

    j[lay.phi, lay.phi] = np.diag(np.sum(np.abs(col) ** 2, axis=0))

    j = np.triu(j) + np.triu(j, 1).T
    return FimMatrix(j / params.sigma2, lay)


def fim_numeric_oracle(geom: ArrayGeometry, params: ScenarioParams, step: float = 1e-6) -> FimMatrix:
    """Finite-difference FIM: no closed-form block is referenced.

    Textbook circular complex Gaussian FIM, (2 / complex_variance) *
    Re{Jmu^H Jmu}, with the mean Jacobian by central differences.  The model's
    complex entry variance is 2*sigma2, so the prefactor is 1/sigma2 and the
    result is directly comparable to :func:`joint_fim`.
    """
    _check_sigma2(params)
    m, t = params.m, params.t
    lay = ParamLayout(m, t)

    def mean_vec(v: np.ndarray) -> np.ndarray:
        theta_d, h_s, d, phi_o = lay.unpack(v)
        a = steering_vector(geom, theta_d)
        return ((h_s[:, None] + np.outer(a, d)) * np.exp(1j * phi_o)[None, :]).ravel()

    v0 = lay.pack(params.theta_d, params.h_s, params.d, params.phi_o)
    jac = np.empty((m * t, lay.dim), dtype=complex)
    for i in range(lay.dim):
        vp = v0.copy()
        vp[i] += step
        vm = v0.copy()
        vm[i] -= step
        jac[:, i] = (mean_vec(vp) - mean_vec(vm)) / (2 * step)

    complex_var = 2.0 * params.sigma2
    data = (2.0 / complex_var) * np.real(jac.conj().T @ jac)
    return FimMatrix(data, lay)


def constraint_basis(m: int, t: int) -> ConstraintBasis:
    """Block-diagonal orthonormal basis annihilating the three all-ones constraints.

    U_sub is T x (T-1): off-diagonal 1/(T+sqrt(T)), diagonal 1/(T+sqrt(T)) - 1,
    last row 1/sqrt(T); identity on the 2M+1 unconstrained coordinates.
    """
    if t < 2:
        raise ValueError(f"constraint basis needs T >= 2, got {t}")
    if m < 1:
        raise ValueError(f"antenna count must be >= 1, got {m}")
    u_sub = np.full((t, t - 1), 1.0 / (t + np.sqrt(t)))
    u_sub[np.arange(t - 1), np.arange(t - 1)] -= 1.0
    u_sub[t - 1, :] = 1.0 / np.sqrt(t)

    lay = ParamLayout(m, t)
    u = np.zeros((lay.dim, 1 + 2 * m + 3 * (t - 1)))
    u[: 1 + 2 * m, : 1 + 2 * m] = np.eye(1 + 2 * m)
    for i, block in enumerate((lay.d_re, lay.d_im, lay.phi)):
        cols = slice(1 + 2 * m + i * (t - 1), 1 + 2 * m + (i + 1) * (t - 1))
        u[block, cols] = u_sub
    return ConstraintBasis(u, m, t)


def constrained_crb(fim: FimMatrix, basis: ConstraintBasis) -> np.ndarray:
    """Constrained CRB U (U^T J U)^{-1} U^T; PSD with range in the constraint tangent space."""
    if (basis.m, basis.t) != (fim.layout.m, fim.layout.t):
        raise ValueError("constraint basis does not match the FIM layout")
    u = basis.u
    core = u.T @ fim.data @ u
    core = 0.5 * (core + core.T)
    eigvals = np.linalg.eigvalsh(core)
    smallest, largest = eigvals[0], eigvals[-1]
    if smallest <= 0 or largest / smallest > CONDITION_LIMIT:
        raise SingularMatrixError(
            f"U^T J U is singular at the working condition limit "
            f"(smallest eigenvalue {smallest:.6e})"
        )
    crb = u @ np.linalg.solve(core, u.T)
    return 0.5 * (crb + crb.T)


def reordered_blocks(geom: ArrayGeometry, params: ScenarioParams) -> ReorderedFim:
    """Per-snapshot 3x3 nuisance blocks and 1x3 cross blocks, h_s treated as known."""
    _check_sigma2(params)
    m = geom.m
    a, b, ab, ah, bh = _couplings(geom, params)
    d = params.d
    ba = np.conj(ab)
    s2 = params.sigma2

    chi = ah + m * d
    col = params.h_s[:, None] + np.outer(a, d)
    q = np.sum(np.abs(col) ** 2, axis=0)

    blocks = []
    for t in range(params.t):
        c = chi[t]
        j_psi = np.array([
            [m, 0.0, -c.imag],
            [0.0, m, c.real],
            [-c.imag, c.real, q[t]],
        ]) / s2
        j_theta_psi = np.array([
            np.real(ab * d[t]),
            np.imag(ab * d[t]),
            -np.imag(ba * abs(d[t]) ** 2 + bh * np.conj(d[t])),
        ]) / s2
        blocks.append(SnapshotBlock(j_psi=j_psi, j_theta_psi=j_theta_psi))

    j_tt = float(np.vdot(b, b).real * np.vdot(d, d).real / s2)
    return ReorderedFim(j_theta_theta=j_tt, blocks=tuple(blocks))


def psi_block_inverse(block: SnapshotBlock, geom: ArrayGeometry,
                      params: ScenarioParams, t: int) -> np.ndarray:
    """Closed-form inverse of the snapshot nuisance block.

    With chi = a^H h_s + M d_t and Delta = |a|^2 |h_s|^2 - |a^H h_s|^2:

        J_psi^{-1} = sigma2/(M Delta) * [[Im chi^2, -Re Im, M Im],
                                         [-Re Im, Re chi^2, -M Re],
                                         [M Im, -M Re, M^2]]
                     + sigma2/M * diag(1, 1, 0)
    """
    _check_sigma2(params)
    m = geom.m
    _, _, _, ah, _ = _couplings(geom, params)
    delta = _delta(geom, params, ah)
    chi = ah + m * params.d[t]
    re, im = chi.real, chi.imag
    outer = np.array([
        [im * im, -re * im, m * im],
        [-re * im, re * re, -m * re],
        [m * im, -m * re, float(m * m)],
    ])
    return params.sigma2 / (m * delta) * outer + params.sigma2 / m * np.diag([1.0, 1.0, 0.0])


def efim_theta_schur(geom: ArrayGeometry, params: ScenarioParams) -> float:
    """Equivalent Fisher information of theta_d by the per-snapshot Schur complement."""
    _, _, _, ah, _ = _couplings(geom, params)
    _delta(geom, params, ah)  # the snapshot blocks are singular when collinear
    ro = reordered_blocks(geom, params)
    corr = 0.0
    for blk in ro.blocks:
        corr += float(blk.j_theta_psi @ np.linalg.solve(blk.j_psi, blk.j_theta_psi))
    return ro.j_theta_theta - corr


def efim_theta_closed(geom: ArrayGeometry, params: ScenarioParams) -> float:
    """Closed-form equivalent Fisher information of theta_d.

        J_theta^equ = |d|^2 Gamma / (sigma2 M)
                      - sum_t Im{(b^H a a^H h_s - a^H a b^H h_s) d_t^*}^2 / (sigma2 M Delta)
    """
    _check_sigma2(params)
    m = geom.m
    a, b, ab, ah, bh = _couplings(geom, params)
    delta = _delta(geom, params, ah)
    gamma = m * float(np.vdot(b, b).real) - abs(ab) ** 2
    c = np.conj(ab) * ah - m * bh
    first = float(np.vdot(params.d, params.d).real) * gamma / (params.sigma2 * m)
    second = float(np.sum(np.imag(c * params.d.conj()) ** 2)) / (params.sigma2 * m * delta)
    return first - second


def efim_psi_t(geom: ArrayGeometry, params: ScenarioParams, t: int) -> np.ndarray:
    """EFIM of the snapshot-t nuisance triple after eliminating theta_d.

    Uses the leave-one-out equivalent information of theta_d: the correction
    sum runs over every snapshot except t, while the theta-theta entry keeps
    the full gain energy.
    """
    if params.t < 2:
        raise ValueError("per-snapshot EFIM needs at least 2 snapshots")
    if not 0 <= t < params.t:
        raise ValueError(f"snapshot index {t} out of range for T={params.t}")
    _, _, _, ah, _ = _couplings(geom, params)
    _delta(geom, params, ah)
    ro = reordered_blocks(geom, params)
    loo = ro.j_theta_theta
    for i, blk in enumerate(ro.blocks):
        if i == t:
            continue
        loo -= float(blk.j_theta_psi @ np.linalg.solve(blk.j_psi, blk.j_theta_psi))
    if loo <= 0:
        raise DegenerateBoundError(
            f"leave-one-out information of theta_d is not positive ({loo:.3e})"
        )
    blk = ro.blocks[t]
    return blk.j_psi - np.outer(blk.j_theta_psi, blk.j_theta_psi) / loo
