"""Experimental sequences built from the Gaussian engine.

* frequency-jump squeezing: jump omega -> omega', wait a quarter period at
  omega', jump back; each jump re-expresses the state in the new trap's
  ground-state units, a squeeze by ``ln(omega/omega')/2``.
* the two-mode protocol: the same sequence on x and y, with y delayed so the
  two squeezed states are ``relative_phase`` apart, followed by projection
  onto the 45-degree axes.
* the echo sequence ``S^dag(r) U(omega tau) S(r)`` averaged over a Gaussian
  spread of site frequencies.

Jumps are instantaneous; switching times are assumed short against the
oscillation period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, TruncationError
from .fitting import DecayFit, fit_decaying_sinusoid
from .fock import DEFAULT_TRUNCATION_GATE, fock_from_moments, moments_from_cov
from .gaussian import (
    GaussianState,
    OscillatorConfig,
    SqueezeParams,
    apply_beam_splitter_50_50,
    apply_rotation,
    apply_squeeze,
    squeeze_matrix,
    thermal,
)
from .spectroscopy import SidebandModel, sideband_weights

DEFAULT_NBAR0 = 0.06
DEFAULT_ENSEMBLE_ORDER = 21
ENSEMBLE_METHODS = ("fourier", "gauss-hermite", "monte-carlo")
# numpy's node generator overflows beyond this order
MAX_HERMITE_ORDER = 300


def squeeze_amplitude_from_jump(omega: float, omega_prime: float) -> float:
    """``ln(omega / omega_prime)``; negative for a jump to a stiffer trap."""
    if not omega > 0 or not omega_prime > 0:
        raise InvalidArgumentError("trap frequencies must be positive")
    return math.log(omega / omega_prime)


@dataclass(frozen=True)
class JumpSchedule:
    config: OscillatorConfig
    events: tuple[tuple[float, float], ...]
    total_duration: float

    def __post_init__(self):
        times = [t for t, _ in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidArgumentError("jump times must be strictly increasing")
        allowed = (self.config.omega, self.config.omega_prime)
        for _, f in self.events:
            if not any(math.isclose(f, a, rel_tol=1e-12) for a in allowed):
                raise InvalidArgumentError(f"frequency {f} is neither omega nor omega_prime")

    def delayed(self, delay: float) -> JumpSchedule:
        return JumpSchedule(self.config, tuple((t + delay, f) for t, f in self.events), self.total_duration + delay)

    def rows(self) -> list[tuple[float, float]]:
        """``(time_us, frequency_hz)`` rows."""
        return [(t * 1e6, f / (2 * math.pi)) for t, f in self.events]


def _frame_change(state: GaussianState, mode: int, half_log: float) -> GaussianState:
    # Re-expressing quadratures in a trap whose frequency is lower by exp(-2*half_log).
    theta = 0.0 if half_log >= 0 else math.pi / 2
    return apply_squeeze(state, mode, SqueezeParams(abs(half_log), theta))


def jump_sequence(state: GaussianState, mode: int, config: OscillatorConfig) -> GaussianState:
    """Apply jump, quarter-turn at omega', and jump back to one mode of ``state``."""
    s = squeeze_amplitude_from_jump(config.omega, config.omega_prime) / 2
    state = _frame_change(state, mode, s)
    state = apply_rotation(state, mode, math.pi / 2)
    return _frame_change(state, mode, -s)


def single_mode_jump_protocol(config: OscillatorConfig, *, nbar0: float = 0.0) -> tuple[GaussianState, JumpSchedule]:
    """Squeeze the (thermal) ground state of ``omega`` by ``r = ln(omega/omega')``.

    The result is the squeezed state rotated by a quarter turn: the momentum
    quadrature is the squeezed one.
    """
    state = jump_sequence(thermal(1, nbar0), 0, config)
    quarter = math.pi / (2 * config.omega_prime)
    schedule = JumpSchedule(config, ((0.0, config.omega_prime), (quarter, config.omega)), quarter)
    return state, schedule


@dataclass(frozen=True)
class TwoModeEvolution:
    """Two-mode protocol output as a function of free-evolution time ``t``.

    ``t`` is referenced so that the x mode has squeeze phase ``theta_x = omega t``
    (antisqueezed momentum at ``t = 0``) and ``theta_y = theta_x - relative_phase``.
    Lab-frame modes are (x, y); output modes after the 45-degree projection
    are (x', y').
    """

    config: OscillatorConfig
    relative_phase: float
    nbar0: float = 0.0
    schedule_x: JumpSchedule = field(init=False)
    schedule_y: JumpSchedule = field(init=False)
    _prepared: GaussianState = field(init=False, repr=False)

    def __post_init__(self):
        state = thermal(2, self.nbar0)
        state = jump_sequence(state, 0, self.config)
        state = jump_sequence(state, 1, self.config)
        _, sched = single_mode_jump_protocol(self.config)
        object.__setattr__(self, "_prepared", state)
        object.__setattr__(self, "schedule_x", sched)
        object.__setattr__(self, "schedule_y", sched.delayed(self.relative_phase / self.config.omega))

    @property
    def r(self) -> float:
        return self.config.jump_ratio_log

    def lab_state(self, t: float) -> GaussianState:
        # the jump sequence leaves a quarter-turn offset; remove it so theta_x = omega t
        phase = self.config.omega * t - math.pi / 2
        state = apply_rotation(self._prepared, 0, phase)
        return apply_rotation(state, 1, phase - self.relative_phase)

    def output_state(self, t: float) -> GaussianState:
        return apply_beam_splitter_50_50(self.lab_state(t), 0, 1)

    __call__ = output_state

    def momentum_width(self, t: float, mode: int = 0) -> float:
        w = np.zeros(4)
        w[2 * mode + 1] = 1.0
        return self.output_state(t).std(w)


def two_mode_protocol(config: OscillatorConfig, relative_phase: float, *, nbar0: float = 0.0) -> TwoModeEvolution:
    return TwoModeEvolution(config, relative_phase, nbar0)


@dataclass(frozen=True)
class InhomogeneityModel:
    """Static Gaussian spread of trap frequency across sites.

    ``method`` selects how site averages are taken:

    * ``"fourier"`` (default): exact.  Observables depend on the site
      frequency only through the phase ``omega_site * tau`` and are periodic
      in it with period ``pi``, so each harmonic ``k`` of the phase dependence
      is damped by ``exp(-2 k^2 sigma^2 tau^2)``.  ``ensemble_size`` is unused.
    * ``"gauss-hermite"``: ``ensemble_size`` quadrature nodes.  Converges slowly
      once ``sigma * tau`` is of order one, because the integrand then
      oscillates across the Gaussian.
    * ``"monte-carlo"``: ``ensemble_size`` samples drawn from ``seed``.
    """

    sigma_omega: float = 0.0
    ensemble_size: int = DEFAULT_ENSEMBLE_ORDER
    method: str = "fourier"
    seed: int | None = None

    def __post_init__(self):
        if not self.sigma_omega >= 0:
            raise InvalidArgumentError("sigma_omega must be >= 0")
        if self.ensemble_size < 1:
            raise InvalidArgumentError("ensemble_size must be positive")
        if self.method not in ENSEMBLE_METHODS:
            raise InvalidArgumentError(f"unknown ensemble method {self.method!r}")
        if self.method == "gauss-hermite" and self.ensemble_size > MAX_HERMITE_ORDER:
            raise InvalidArgumentError(f"gauss-hermite order is limited to {MAX_HERMITE_ORDER}")

    @classmethod
    def from_decay_time(cls, decay_time: float, **kw) -> InhomogeneityModel:
        """Spread whose dephasing gives the 2*omega beat a 1/e envelope time ``decay_time``.

        Averaging ``cos(2 omega tau)`` over a Gaussian ``omega`` of width sigma
        gives the envelope ``exp(-2 sigma^2 tau^2)``.
        """
        if not decay_time > 0:
            raise InvalidArgumentError("decay time must be positive")
        return cls(sigma_omega=1 / (math.sqrt(2) * decay_time), **kw)

    @property
    def decay_time(self) -> float:
        return math.inf if self.sigma_omega == 0 else 1 / (math.sqrt(2) * self.sigma_omega)

    def nodes(self, omega: float) -> tuple[np.ndarray, np.ndarray]:
        """Site frequencies and their weights (summing to one) for the sampling methods."""
        if self.sigma_omega == 0:
            return np.array([omega]), np.array([1.0])
        if self.method == "fourier":
            raise InvalidArgumentError("the fourier method averages analytically and has no nodes")
        if self.method == "gauss-hermite":
            x, w = np.polynomial.hermite.hermgauss(self.ensemble_size)
            return omega + math.sqrt(2) * self.sigma_omega * x, w / math.sqrt(math.pi)
        rng = np.random.default_rng(self.seed)
        samples = rng.normal(omega, self.sigma_omega, self.ensemble_size)
        return samples, np.full(self.ensemble_size, 1 / self.ensemble_size)


@dataclass(frozen=True)
class EchoTrace:
    tau: np.ndarray
    ratio: np.ndarray

    def rows(self) -> list[tuple[float, float]]:
        """``(tau_us, R)`` rows."""
        return [(float(t) * 1e6, float(r)) for t, r in zip(self.tau, self.ratio)]


def _echo_covariances(r: float, phases: np.ndarray, nbar0: float) -> np.ndarray:
    s = squeeze_matrix(r, 0.0)
    s_inv = np.linalg.inv(s)
    c, sn = np.cos(phases), np.sin(phases)
    rot = np.empty(phases.shape + (2, 2))
    rot[..., 0, 0], rot[..., 0, 1], rot[..., 1, 0], rot[..., 1, 1] = c, sn, -sn, c
    m = s_inv @ rot @ s
    return (2 * nbar0 + 1) / 4 * m @ np.swapaxes(m, -1, -2)


def _echo_populations(r, phases, nbar0, sideband, tail, gate, chunk):
    """Blue and red sideband excitation after the echo with rotation angles ``phases``."""
    cov = _echo_covariances(r, phases, nbar0)
    nbar, m_abs = moments_from_cov(cov)
    k2 = float(np.max(nbar + m_abs))
    q = k2 / (1 + k2)
    n_max = 25 if q <= 0 else max(25, int(math.ceil(math.log(tail * (1 - q)) / math.log(q))))
    blue, red = sideband_weights(n_max + 1, sideband)

    p_plus = np.empty(nbar.size)
    p_minus = np.empty(nbar.size)
    lost = 0.0
    for start in range(0, nbar.size, chunk):
        sl = slice(start, start + chunk)
        probs = fock_from_moments(nbar[sl], m_abs[sl], n_max)
        lost = max(lost, float(np.max(1 - probs.sum(axis=-1))))
        p_plus[sl] = probs @ blue
        p_minus[sl] = probs @ red
    if gate is not None and lost >= gate:
        raise TruncationError(f"echo distributions lose {lost:.3g} of the probability")
    return p_plus, p_minus


def _harmonics(r, nbar0, sideband, tail, gate, chunk, *, max_points: int = 1 << 14):
    """Fourier coefficients in ``exp(2 i k phi)`` of the populations over one period."""
    m = 64
    while True:
        phases = np.arange(m) * (math.pi / m)
        pops = np.stack(_echo_populations(r, phases, nbar0, sideband, tail, gate, chunk))
        coef = np.fft.rfft(pops, axis=-1) / m
        scale = np.abs(coef[:, :1])
        if np.all(np.abs(coef[:, m // 4:]) <= 1e-14 * scale) or m >= max_points:
            return coef[:, : m // 4]
        m *= 2


def echo_ratio_vs_delay(
    r: float,
    tau_grid: Sequence[float],
    config: OscillatorConfig,
    inhom: InhomogeneityModel,
    sideband: SidebandModel,
    *,
    nbar0: float = DEFAULT_NBAR0,
    tail: float = 1e-9,
    gate: float | None = DEFAULT_TRUNCATION_GATE,
    chunk: int = 2048,
) -> EchoTrace:
    """Sideband ratio after ``S^dag(r) U(omega_site tau) S(r)`` on a thermal state.

    For every delay the sideband populations are averaged over site
    frequencies before forming the red/blue ratio.  Fock cutoffs are chosen
    so the discarded tail stays below ``tail``.
    """
    if not r >= 0:
        raise InvalidArgumentError(f"r must be >= 0, got {r}")
    if not nbar0 >= 0:
        raise InvalidArgumentError(f"nbar0 must be >= 0, got {nbar0}")
    tau = np.asarray(tau_grid, dtype=float)
    if (tau < 0).any():
        raise InvalidArgumentError("delays must be nonnegative")

    if inhom.method == "fourier" and inhom.sigma_omega > 0:
        coef = _harmonics(r, nbar0, sideband, tail, gate, chunk)
        k = np.arange(coef.shape[1])
        weight = np.where(k == 0, 1.0, 2.0)
        factor = np.exp(2j * np.outer(tau * config.omega, k) - 2 * (inhom.sigma_omega * np.outer(tau, k)) ** 2)
        p_plus, p_minus = ((factor * weight) @ coef.T).real.T
        return EchoTrace(tau, p_minus / p_plus)

    freqs, weights = inhom.nodes(config.omega)
    phases = tau[:, None] * freqs[None, :]
    p_plus, p_minus = _echo_populations(r, phases.ravel(), nbar0, sideband, tail, gate, chunk)
    p_plus = p_plus.reshape(phases.shape) @ weights
    p_minus = p_minus.reshape(phases.shape) @ weights
    return EchoTrace(tau, p_minus / p_plus)


def fit_echo_decay(trace: EchoTrace, omega: float, *, envelope: str = "gaussian") -> DecayFit:
    """Damped-sinusoid fit of an echo trace; the oscillation is at ``2 omega``."""
    return fit_decaying_sinusoid(trace.tau, trace.ratio, math.pi / omega, envelope=envelope)


def envelope_peaks(trace: EchoTrace, omega: float) -> np.ndarray:
    """Maximum of R within each oscillation period ``pi / omega``."""
    period = math.pi / omega
    idx = np.floor(trace.tau / period).astype(int)
    return np.array([trace.ratio[idx == k].max() for k in np.unique(idx) if (idx == k).sum() > 2])
