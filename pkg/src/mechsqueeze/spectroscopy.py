"""Measurement models: Lamb-Dicke sideband populations and Raman velocimetry.

Sideband populations follow decaying Rabi flopping summed over the phonon
distribution of the probed mode x'.  Only the red/blue ratio is observable,
so both populations share one arbitrary normalisation.

Velocimetry maps the momentum marginal of a Gaussian state onto two-photon
detuning, ``delta = k_eff * v`` with ``v = 2 dv0 * pbar``, optionally
convolved with the square-pulse response ``sinc^2(delta T / 2)``.  At the
default 0.1 ms pulse a plain Gaussian fit reads the vacuum Doppler width
about 1.6% wide, so :func:`gaussian_fit` fits the convolved profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidDataError, TruncationError, UndefinedRatioError
from .fitting import GaussianFit, fit_gaussian
from .fock import DEFAULT_TRUNCATION_GATE, FockDistribution
from .gaussian import GaussianState, OscillatorConfig

RAMAN_WAVELENGTH = 795e-9
DEFAULT_K_EFF = 2 * (2 * math.pi / RAMAN_WAVELENGTH)
VELOCIMETRY_PULSE = 0.1e-3

_AXIS_WEIGHTS = {
    "x": ((0, 1.0),),
    "y": ((1, 1.0),),
    "x'": ((0, 1 / math.sqrt(2)), (1, 1 / math.sqrt(2))),
    "y'": ((0, -1 / math.sqrt(2)), (1, 1 / math.sqrt(2))),
}


@dataclass(frozen=True)
class SidebandModel:
    """Raman sideband parameters.

    rabi_01: first-sideband Rabi frequency ``eta * Omega`` (rad/s).
    lamb_dicke: ``eta``; the square-root scaling of sideband couplings assumes ``eta << 1``.
    gamma: Rabi-flopping decay rate (1/s); zero disables the decay.
    pulse_duration: Raman pulse length (s).
    decay_uncoupled: when False (default) a Fock state with no coupling on a
        sideband (``n = 0`` on the red sideband) contributes nothing; when True
        the decay term ``(1 - exp(-gamma t)) / 2`` is applied to it as well.
    """

    rabi_01: float = 2 * math.pi * 1.5e3
    lamb_dicke: float = 0.13
    gamma: float = 10.36e3
    pulse_duration: float = 0.17e-3
    decay_uncoupled: bool = False

    def __post_init__(self):
        if not (self.rabi_01 > 0 and self.lamb_dicke > 0 and self.pulse_duration >= 0 and self.gamma >= 0):
            raise InvalidArgumentError("sideband parameters must be positive (gamma may be zero)")
        if self.lamb_dicke >= 1:
            raise InvalidArgumentError("Lamb-Dicke parameter must be < 1")

    @property
    def carrier_rabi(self) -> float:
        return self.rabi_01 / self.lamb_dicke


def sideband_weights(n_levels: int, model: SidebandModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-Fock-state excitation after the pulse on the blue and red sidebands."""
    n = np.arange(n_levels)
    t = model.pulse_duration
    damp = math.exp(-model.gamma * t)
    blue = (1 - damp * np.cos(np.sqrt(n + 1) * model.rabi_01 * t)) / 2
    red = (1 - damp * np.cos(np.sqrt(n) * model.rabi_01 * t)) / 2
    if not model.decay_uncoupled and n_levels:
        red[0] = 0.0
    return blue, red


def _probed_marginal(dist, gate) -> np.ndarray:
    if isinstance(dist, FockDistribution):
        dist.check_truncation(gate)
        return dist.marginal(0)
    p = np.asarray(dist, dtype=float)
    if p.ndim == 2:
        p = p.sum(axis=1)
    if gate is not None and 1 - p.sum() >= gate:
        raise TruncationError(f"truncation discards {1 - p.sum():.3g} of the probability (gate {gate:g})")
    return p


def sideband_populations(dist, model: SidebandModel, *, gate: float | None = DEFAULT_TRUNCATION_GATE):
    """``(p_plus, p_minus)`` for a joint table or a 1-D phonon distribution of mode x'."""
    p = _probed_marginal(dist, gate)
    blue, red = sideband_weights(p.size, model)
    return float(p @ blue), float(p @ red)


def ratio_R(dist, model: SidebandModel, *, gate: float | None = DEFAULT_TRUNCATION_GATE) -> float:
    p_plus, p_minus = sideband_populations(dist, model, gate=gate)
    if p_plus <= 0:
        raise UndefinedRatioError("blue sideband population is zero")
    return p_minus / p_plus


@dataclass(frozen=True)
class VelocityScan:
    detunings: np.ndarray
    excited_fraction: np.ndarray
    k_eff: float = DEFAULT_K_EFF
    noise_seed: int | None = None
    pulse_duration: float | None = None
    fraction_error: float | None = None

    def __post_init__(self):
        d = np.array(self.detunings, dtype=float)
        f = np.array(self.excited_fraction, dtype=float)
        if d.shape != f.shape or d.ndim != 1:
            raise InvalidDataError("detunings and excited_fraction must be equal-length 1-D arrays")
        if f.size and (f.min() < 0 or f.max() > 1):
            raise InvalidDataError("excited fraction must lie in [0, 1]")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "excited_fraction", f)

    @property
    def velocities(self) -> np.ndarray:
        return self.detunings / self.k_eff


def axis_weights(state: GaussianState, axis: str) -> np.ndarray:
    """Weights selecting the momentum quadrature measured along ``axis`` of the lab frame."""
    if axis not in _AXIS_WEIGHTS:
        raise InvalidArgumentError(f"unknown axis {axis!r}; expected one of {sorted(_AXIS_WEIGHTS)}")
    w = np.zeros(2 * state.mode_count)
    for mode, coef in _AXIS_WEIGHTS[axis]:
        if mode >= state.mode_count:
            raise InvalidArgumentError(f"axis {axis!r} needs a two-mode state")
        w[2 * mode + 1] = coef
    return w


def velocity_sigma(state: GaussianState, axis: str, config: OscillatorConfig) -> float:
    """Standard deviation of the velocity along ``axis`` (m/s)."""
    return 2 * config.dv0 * state.std(axis_weights(state, axis))


def _pulse_kernel(u: np.ndarray, pulse: float) -> np.ndarray:
    return pulse / (2 * math.pi) * np.sinc(u * pulse / (2 * math.pi)) ** 2


@lru_cache(maxsize=32)
def _convolved_profile(offsets: tuple, sigma: float, pulse: float) -> tuple:
    # direct trapezoid convolution; the fit evaluates the same shape in the Fourier domain
    det = np.array(offsets)
    reach = 8 * sigma + 200 * (2 * math.pi / pulse)
    u = np.linspace(-reach, reach, 40001)
    kern = _pulse_kernel(u, pulse)
    kern /= np.trapezoid(kern, u)
    prof = np.exp(-0.5 * ((det[:, None] - u[None, :]) / sigma) ** 2)
    return tuple(np.trapezoid(prof * kern[None, :], u, axis=1))


def synthesize_velocity_scan(
    state: GaussianState,
    axis: str,
    config: OscillatorConfig,
    grid: tuple[float, float, int] | None = None,
    *,
    noise: float | None = None,
    seed: int | None = None,
    k_eff: float = DEFAULT_K_EFF,
    pulse_duration: float = VELOCIMETRY_PULSE,
    convolve: bool = True,
    peak: float = 0.5,
    baseline: float = 0.05,
) -> VelocityScan:
    """Excited fraction versus two-photon detuning for a released state.

    ``grid`` is ``(low, high, steps)`` in rad/s; by default 41 points over
    +-4 standard deviations of the Doppler profile.  ``noise`` is the
    standard deviation of additive Gaussian noise as a fraction of ``peak``,
    drawn from ``numpy.random.default_rng(seed)``.
    """
    w = axis_weights(state, axis)
    center = k_eff * 2 * config.dv0 * float(w @ state.mean)
    sigma = k_eff * velocity_sigma(state, axis, config)
    if grid is None:
        grid = (center - 4 * sigma, center + 4 * sigma, 41)
    lo, hi, steps = grid
    det = np.linspace(lo, hi, int(steps))

    if convolve and pulse_duration > 0:
        shape = np.array(_convolved_profile(tuple(det - center), sigma, pulse_duration))
    else:
        shape = np.exp(-0.5 * ((det - center) / sigma) ** 2)
    frac = baseline + peak * shape
    if noise:
        rng = np.random.default_rng(seed)
        frac = frac + rng.normal(0.0, noise * peak, size=frac.shape)
    return VelocityScan(
        det,
        np.clip(frac, 0.0, 1.0),
        k_eff=k_eff,
        noise_seed=seed if noise else None,
        pulse_duration=pulse_duration if convolve and pulse_duration > 0 else None,
        fraction_error=noise * peak if noise else None,
    )


def gaussian_fit(scan: VelocityScan) -> GaussianFit:
    """Gaussian fit of a velocimetry scan in detuning units (rad/s).

    The pulse response recorded on the scan is deconvolved and known error
    bars set the covariance.  Divide ``sigma`` by ``scan.k_eff`` for the
    velocity spread.
    """
    return fit_gaussian(
        scan.detunings, scan.excited_fraction, pulse_duration=scan.pulse_duration, y_error=scan.fraction_error
    )


class SpectrumTrace(NamedTuple):
    detuning: np.ndarray
    signal: np.ndarray
    areas: dict  # "red", "carrier", "blue" -> peak area


def synthesize_sideband_spectrum(
    dist,
    model: SidebandModel,
    inhom,
    grid: tuple[float, float, int],
    omega: float,
    *,
    gate: float | None = DEFAULT_TRUNCATION_GATE,
) -> SpectrumTrace:
    """Three-peak Lamb-Dicke spectrum: red sideband at -omega, carrier at 0, blue at +omega.

    ``inhom`` is an inhomogeneity model (anything with ``sigma_omega``) or a
    bare standard deviation in rad/s.  Sideband areas are the populations of
    :func:`sideband_populations`; the carrier area uses the carrier Rabi
    frequency and is on the same arbitrary scale.  With zero width each peak
    is deposited on its nearest grid point as area / spacing.
    """
    sigma = float(getattr(inhom, "sigma_omega", inhom))
    p = _probed_marginal(dist, gate)
    p_plus, p_minus = sideband_populations(p, model, gate=None)
    t = model.pulse_duration
    carrier = float(p.sum() * (1 - math.exp(-model.gamma * t) * math.cos(model.carrier_rabi * t)) / 2)
    lo, hi, steps = grid
    det = np.linspace(lo, hi, int(steps))
    areas = {"red": p_minus, "carrier": carrier, "blue": p_plus}
    signal = np.zeros_like(det)
    for pos, area in ((-omega, p_minus), (0.0, carrier), (omega, p_plus)):
        if sigma > 0:
            signal += area * np.exp(-0.5 * ((det - pos) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        else:
            k = int(np.argmin(np.abs(det - pos)))
            signal[k] += area / (det[1] - det[0])
    return SpectrumTrace(det, signal, areas)


def spectrum_peak_areas(trace: SpectrumTrace, omega: float) -> dict:
    """Integrate the trace in windows of half the sideband spacing around each peak."""
    out = {}
    for name, pos in (("red", -omega), ("carrier", 0.0), ("blue", omega)):
        m = np.abs(trace.detuning - pos) <= omega / 2
        out[name] = float(np.trapezoid(trace.signal[m], trace.detuning[m]))
    return out


def ratio_curve(rs: Sequence[float], family: str, model: SidebandModel, nbar0: float, n_max: int = 25,
                *, gate: float | None = None, l_cap: int = 50) -> np.ndarray:
    """R versus squeezing amplitude for ``family`` in {"two-mode", "single-mode"}.

    The two-mode family uses the thermally weighted two-mode squeeze table;
    the single-mode family the squeezed-thermal distribution of the in-phase
    output, both truncated at ``n_max`` phonons per mode.
    """
    from .fock import TwoModeSqueezeOp, squeezed_thermal_probabilities, thermal_weighted_distribution

    out = []
    for r in rs:
        if family == "two-mode":
            dist = thermal_weighted_distribution(TwoModeSqueezeOp(float(r), l_cap=l_cap), nbar0, n_max)
        elif family == "single-mode":
            dist = squeezed_thermal_probabilities(float(r), nbar0, n_max)
        else:
            raise InvalidArgumentError(f"unknown state family {family!r}")
        out.append(ratio_R(dist, model, gate=gate))
    return np.array(out)
