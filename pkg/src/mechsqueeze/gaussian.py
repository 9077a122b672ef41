"""Gaussian-state engine for harmonic-oscillator modes.

Quadratures are dimensionless, ``xbar = x / (2 dx0)`` and ``pbar = p / (2 dp0)``,
ordered ``(x1, p1, x2, p2, ...)``.  In this convention the vacuum variance of
every quadrature is 1/4 and the Heisenberg bound on symplectic eigenvalues is
also 1/4.  Physical units only enter through :class:`OscillatorConfig`.

All operations return new states; :class:`GaussianState` is immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy import constants
from scipy.linalg import cho_factor, cho_solve

from .errors import InvalidArgumentError, NumericalDegeneracyError

VACUUM_VARIANCE = 0.25
RB85_MASS = 84.911789738 * constants.atomic_mass
TRAP_OMEGA = 2 * math.pi * 125e3

_SYMMETRY_TOL = 1e-12
_HEISENBERG_TOL = 1e-9
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class OscillatorConfig:
    """Physical parameters of one trap axis.

    ``omega`` is the trap angular frequency and ``omega_prime`` the frequency
    the trap is jumped to when squeezing.  Ground-state widths are derived
    from ``omega``.
    """

    mass: float = RB85_MASS
    omega: float = TRAP_OMEGA
    omega_prime: float = TRAP_OMEGA * math.exp(-1.21)

    def __post_init__(self):
        if not self.mass > 0:
            raise InvalidArgumentError(f"mass must be positive, got {self.mass}")
        if not self.omega > 0 or not self.omega_prime > 0:
            raise InvalidArgumentError(
                f"trap frequencies must be positive, got omega={self.omega}, "
                f"omega_prime={self.omega_prime}"
            )

    @classmethod
    def from_squeezing(cls, r: float, *, mass: float = RB85_MASS, omega: float = TRAP_OMEGA):
        """Config whose jump ratio gives ``ln(omega / omega_prime) == r``."""
        return cls(mass=mass, omega=omega, omega_prime=omega * math.exp(-r))

    @property
    def dx0(self) -> float:
        return math.sqrt(constants.hbar / (2 * self.mass * self.omega))

    @property
    def dp0(self) -> float:
        return math.sqrt(constants.hbar * self.mass * self.omega / 2)

    @property
    def dv0(self) -> float:
        return self.dp0 / self.mass

    @property
    def jump_ratio_log(self) -> float:
        return math.log(self.omega / self.omega_prime)


@dataclass(frozen=True)
class SqueezeParams:
    """Squeezing amplitude ``r`` and phase ``theta`` with ``xi = r exp(2i theta)``."""

    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not self.r >= 0:
            raise InvalidArgumentError(f"squeezing amplitude must be >= 0, got {self.r}")
        object.__setattr__(self, "theta", float(self.theta) % (2 * math.pi))


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray
    mode_count: int = field(init=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if mean.size == 0 or mean.size % 2:
            raise InvalidArgumentError("mean must hold an even, nonzero number of quadratures")
        n = mean.size
        if cov.shape != (n, n):
            raise InvalidArgumentError(f"cov must be {n}x{n}, got {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > _SYMMETRY_TOL * scale:
            raise InvalidArgumentError("cov is not symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise InvalidArgumentError("cov is not positive-definite") from None
        nu = _symplectic_from_cholesky(chol)
        # roundoff in nu grows with the condition number, about (4 * scale)^2 for pure states
        tol = max(_HEISENBERG_TOL, 16 * np.finfo(float).eps * scale**2)
        if nu.min() < VACUUM_VARIANCE - tol:
            raise InvalidArgumentError(
                f"cov violates the uncertainty principle: smallest symplectic eigenvalue {nu.min():.3g} < 1/4"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mode_count", n // 2)

    def variance(self, weights: Sequence[float]) -> float:
        """Variance of the linear combination ``sum(w_i * q_i)`` of quadratures."""
        w = np.asarray(weights, dtype=float)
        return float(w @ self.cov @ w)

    def std(self, weights: Sequence[float]) -> float:
        return math.sqrt(self.variance(weights))

    def reduced(self, modes: Sequence[int]) -> GaussianState:
        idx = []
        for m in modes:
            _check_mode(self, m)
            idx += [2 * m, 2 * m + 1]
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def transformed(self, symplectic: np.ndarray) -> GaussianState:
        s = np.asarray(symplectic, dtype=float)
        cov = s @ self.cov @ s.T
        return GaussianState(s @ self.mean, 0.5 * (cov + cov.T))


@lru_cache(maxsize=8)
def _symplectic_form(n: int) -> np.ndarray:
    om = np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    om.setflags(write=False)
    return om


def _symplectic_from_cholesky(chol: np.ndarray) -> np.ndarray:
    # L^T (i Omega) L is Hermitian and similar to i Omega V for V = L L^T
    herm = 1j * (chol.T @ _symplectic_form(chol.shape[0] // 2) @ chol)
    return np.sort(np.abs(np.linalg.eigvalsh(herm)))[::2]


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a ``2N x 2N`` covariance matrix, sorted ascending."""
    cov = np.asarray(cov, dtype=float)
    try:
        return _symplectic_from_cholesky(np.linalg.cholesky(cov))
    except np.linalg.LinAlgError:
        ev = np.abs(np.linalg.eigvals(1j * _symplectic_form(cov.shape[0] // 2) @ cov))
        return np.sort(ev)[::2]


def _check_mode(state: GaussianState, mode: int) -> None:
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < state.mode_count:
        raise InvalidArgumentError(f"mode {mode} out of range for {state.mode_count}-mode state")


def _embed(n_modes: int, block: np.ndarray, modes: Sequence[int]) -> np.ndarray:
    s = np.eye(2 * n_modes)
    if len(modes) == 1:
        m = 2 * modes[0]
        s[m : m + 2, m : m + 2] = block
        return s
    idx = [i for m in modes for i in (2 * m, 2 * m + 1)]
    s[np.ix_(idx, idx)] = block
    return s


def vacuum(n_modes: int) -> GaussianState:
    return thermal(n_modes, 0.0)


def thermal(n_modes: int, nbar: float) -> GaussianState:
    """Product of ``n_modes`` thermal states with mean occupation ``nbar``."""
    if not isinstance(n_modes, (int, np.integer)) or n_modes < 1:
        raise InvalidArgumentError(f"n_modes must be a positive integer, got {n_modes}")
    if not nbar >= 0:
        raise InvalidArgumentError(f"nbar must be >= 0, got {nbar}")
    var = (2 * nbar + 1) * VACUUM_VARIANCE
    return GaussianState(np.zeros(2 * n_modes), var * np.eye(2 * n_modes))


def squeeze_matrix(r: float, theta: float = 0.0) -> np.ndarray:
    """2x2 symplectic map of ``a -> a cosh r - exp(2i theta) a^dag sinh r``.

    At ``theta = 0`` the position quadrature is scaled by ``exp(-r)`` and the
    momentum by ``exp(+r)``.  Negative ``r`` is accepted here and squeezes the
    conjugate quadrature.
    """
    ch, sh = math.cosh(r), math.sinh(r)
    c2, s2 = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[ch - sh * c2, -sh * s2], [-sh * s2, ch + sh * c2]])


def rotation_matrix(phi: float) -> np.ndarray:
    """Free evolution through phase ``phi``: x -> x cos + p sin, p -> p cos - x sin."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s], [-s, c]])


def beam_splitter_matrix(angle: float) -> np.ndarray:
    """4x4 passive map on ``(xa, pa, xb, pb)`` mixing two modes by ``angle``.

    ``a' = cos(angle) a + sin(angle) b`` and ``b' = -sin(angle) a + cos(angle) b``
    for both quadratures.
    """
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s, 0.0], [0.0, c, 0.0, s], [-s, 0.0, c, 0.0], [0.0, -s, 0.0, c]])


def apply_squeeze(state: GaussianState, mode: int, params: SqueezeParams) -> GaussianState:
    _check_mode(state, mode)
    block = squeeze_matrix(params.r, params.theta)
    return state.transformed(_embed(state.mode_count, block, [mode]))


def apply_rotation(state: GaussianState, mode: int, phi: float) -> GaussianState:
    _check_mode(state, mode)
    return state.transformed(_embed(state.mode_count, rotation_matrix(phi), [mode]))


def _apply_beam_splitter(state: GaussianState, mode_a: int, mode_b: int, angle: float) -> GaussianState:
    _check_mode(state, mode_a)
    _check_mode(state, mode_b)
    if mode_a == mode_b:
        raise InvalidArgumentError("beam splitter needs two distinct modes")
    return state.transformed(_embed(state.mode_count, beam_splitter_matrix(angle), [mode_a, mode_b]))


def apply_beam_splitter_50_50(state: GaussianState, mode_a: int, mode_b: int) -> GaussianState:
    """Project two modes onto the 45-degree basis.

    ``xa' = (xa + xb)/sqrt2`` and ``xb' = (-xa + xb)/sqrt2``, likewise for momenta.
    """
    return _apply_beam_splitter(state, mode_a, mode_b, math.pi / 4)


# Closed forms.  All return dimensionless standard deviations; multiply by
# 2*dp0 (or 2*dv0 for velocities) for physical units.


def momentum_uncertainty_eq2(r: float, theta_x: float, theta_y: float) -> float:
    """Momentum spread of either output port after the 45-degree projection."""
    if not r >= 0:
        raise InvalidArgumentError(f"r must be >= 0, got {r}")
    var = math.cosh(2 * r) + math.sinh(2 * r) * math.cos(theta_x + theta_y) * math.cos(theta_x - theta_y)
    return math.sqrt(var) / 2


def single_mode_width_vs_time(r: float, omega: float, t: float) -> float:
    """Momentum spread of a freely evolving squeezed state; period ``pi / omega``."""
    if not r >= 0 or not t >= 0:
        raise InvalidArgumentError("r and t must be nonnegative")
    return math.sqrt(math.cosh(2 * r) + math.sinh(2 * r) * math.cos(2 * omega * t)) / 2


def eq3_uncertainties(r: float, theta_x: float) -> tuple[float, float]:
    """Spreads of the output momentum difference and sum for out-of-phase inputs.

    Returns ``(diff, sum)`` with ``diff = std(pbar_x' - pbar_y')`` and
    ``sum = std(pbar_x' + pbar_y')`` when ``theta_y = theta_x + pi/2``.
    """
    if not r >= 0:
        raise InvalidArgumentError(f"r must be >= 0, got {r}")
    em, ep = math.exp(-2 * r), math.exp(2 * r)
    c2, s2 = math.cos(theta_x) ** 2, math.sin(theta_x) ** 2
    diff = math.sqrt(2) * math.sqrt(em * s2 + ep * c2) / 2
    total = math.sqrt(2) * math.sqrt(em * c2 + ep * s2) / 2
    return diff, total


def epr_surrogate(r: float) -> float:
    """Momentum-only EPR product: difference spread at theta_x=pi/2 times sum spread at theta_x=0.

    After a quarter period the momentum difference carries the earlier
    position difference, so this equals the position-difference times
    momentum-sum product of the state at ``theta_x = 0``.
    """
    diff, _ = eq3_uncertainties(r, math.pi / 2)
    _, total = eq3_uncertainties(r, 0.0)
    return diff * total


def squeezing_db(ratio: float) -> float:
    """Width ratio to vacuum expressed in dB below vacuum noise (positive = squeezed)."""
    return -20 * math.log10(ratio)


# Entanglement criteria.
#
# x_a - x_b commutes with p_a + p_b (and x_a + x_b with p_a - p_b); only these
# commuting pairs give separable bounds of 1 (sum of variances) and 1/4
# (product of spreads).  Both pairings are evaluated and the smaller value is
# returned, which makes the result independent of the beam-splitter sign
# convention.


def _pair_variances(state: GaussianState, mode_a: int, mode_b: int) -> list[tuple[float, float]]:
    _check_mode(state, mode_a)
    _check_mode(state, mode_b)
    if mode_a == mode_b:
        raise InvalidArgumentError("entanglement criteria need two distinct modes")
    n = 2 * state.mode_count
    out = []
    for sign in (-1.0, 1.0):
        u = np.zeros(n)
        v = np.zeros(n)
        u[2 * mode_a], u[2 * mode_b] = 1.0, sign
        v[2 * mode_a + 1], v[2 * mode_b + 1] = 1.0, -sign
        out.append((state.variance(u), state.variance(v)))
    return out


def _local_phase_scan(state: GaussianState, mode_b: int, func, n_grid: int = 721) -> float:
    from scipy.optimize import minimize_scalar

    phis = np.linspace(0.0, 2 * math.pi, n_grid, endpoint=False)
    vals = [func(apply_rotation(state, mode_b, phi)) for phi in phis]
    k = int(np.argmin(vals))
    step = phis[1] - phis[0]
    res = minimize_scalar(
        lambda phi: func(apply_rotation(state, mode_b, phi)),
        bounds=(phis[k] - step, phis[k] + step),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(min(res.fun, vals[k]))


def duan_simon_value(state: GaussianState, mode_a: int, mode_b: int, *, optimize_phase: bool = False) -> float:
    """Sum of the commuting difference/sum quadrature variances; < 1 means inseparable.

    With ``optimize_phase`` the value is minimised over a local phase-space
    rotation of ``mode_b`` (closed form), which makes it independent of a
    common free-evolution phase.
    """
    if optimize_phase:
        _pair_variances(state, mode_a, mode_b)
        ia, ib = 2 * mode_a, 2 * mode_b
        c = state.cov
        total = c[ia, ia] + c[ia + 1, ia + 1] + c[ib, ib] + c[ib + 1, ib + 1]
        amp = 2 * math.hypot(c[ia + 1, ib + 1] - c[ia, ib], c[ia, ib + 1] + c[ia + 1, ib])
        return float(total - amp)
    return min(vx + vp for vx, vp in _pair_variances(state, mode_a, mode_b))


def epr_product(state: GaussianState, mode_a: int, mode_b: int, *, optimize_phase: bool = False) -> float:
    """Product of the commuting difference/sum quadrature spreads; < 1/4 certifies steering."""

    def product(s):
        return min(math.sqrt(vx * vp) for vx, vp in _pair_variances(s, mode_a, mode_b))

    if optimize_phase:
        return _local_phase_scan(state, mode_b, product)
    return product(state)


# Wigner functions.


def _guarded_factor(cov: np.ndarray):
    if np.linalg.cond(cov) > _COND_LIMIT:
        raise NumericalDegeneracyError("covariance condition number exceeds 1e12")
    return cho_factor(cov)


def wigner_value(state: GaussianState, point: Sequence[float]) -> float:
    z = np.asarray(point, dtype=float).reshape(-1)
    if z.size != state.mean.size:
        raise InvalidArgumentError(f"point must have {state.mean.size} entries, got {z.size}")
    factor = _guarded_factor(state.cov)
    d = z - state.mean
    quad = d @ cho_solve(factor, d)
    det = np.prod(np.diag(factor[0])) ** 2
    return float(math.exp(-quad / 2) / ((2 * math.pi) ** state.mode_count * math.sqrt(det)))


class WignerGrid(NamedTuple):
    first: np.ndarray
    second: np.ndarray
    values: np.ndarray  # values[i, j] at (first[i], second[j])

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.second, axis=1), self.first))


def wigner_projection(
    state: GaussianState,
    axis_pair: tuple[int, int],
    bounds: tuple[float, float] | tuple[tuple[float, float], tuple[float, float]],
    resolution: int = 101,
) -> WignerGrid:
    """Marginal Wigner density over two quadratures, evaluated on a square grid.

    ``axis_pair`` indexes quadratures (``2*mode`` for position, ``2*mode + 1``
    for momentum).  All other quadratures are integrated out.
    """
    i, j = axis_pair
    n = state.mean.size
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise InvalidArgumentError(f"invalid quadrature pair {axis_pair}")
    if np.ndim(bounds[0]) == 0:
        bounds = (bounds, bounds)
    first = np.linspace(*bounds[0], resolution)
    second = np.linspace(*bounds[1], resolution)
    sub = state.cov[np.ix_([i, j], [i, j])]
    factor = _guarded_factor(sub)
    inv = cho_solve(factor, np.eye(2))
    det = np.prod(np.diag(factor[0])) ** 2
    u = first[:, None] - state.mean[i]
    v = second[None, :] - state.mean[j]
    quad = inv[0, 0] * u**2 + 2 * inv[0, 1] * u * v + inv[1, 1] * v**2
    values = np.exp(-quad / 2) / (2 * math.pi * math.sqrt(det))
    return WignerGrid(first, second, values)
