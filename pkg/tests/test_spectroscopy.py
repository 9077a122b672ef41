import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mechsqueeze.errors import InvalidArgumentError, InvalidDataError, TruncationError, UndefinedRatioError
from mechsqueeze.fock import (
    TwoModeSqueezeOp,
    smsv_probabilities,
    thermal_weighted_distribution,
    tmsv_probabilities,
)
from mechsqueeze.gaussian import (
    TRAP_OMEGA,
    GaussianState,
    OscillatorConfig,
    SqueezeParams,
    apply_squeeze,
    thermal,
    vacuum,
)
from mechsqueeze.protocol import InhomogeneityModel, two_mode_protocol
from mechsqueeze.spectroscopy import (
    DEFAULT_K_EFF,
    SidebandModel,
    VelocityScan,
    gaussian_fit,
    ratio_R,
    ratio_curve,
    sideband_populations,
    sideband_weights,
    spectrum_peak_areas,
    synthesize_sideband_spectrum,
    synthesize_velocity_scan,
    velocity_sigma,
)

REFERENCE_MODEL = SidebandModel()
# R for the thermally weighted two-mode squeeze at r = 1.2, nbar0 = 0.06, n' <= 25
TMSV_R12_REGRESSION = 0.7230715565469352


def _geometric(nbar, n_max):
    return (nbar / (1 + nbar)) ** np.arange(n_max + 1) / (1 + nbar)


def test_reference_model_defaults():
    m = REFERENCE_MODEL
    assert m.rabi_01 == pytest.approx(2 * math.pi * 1.5e3)
    assert m.gamma == pytest.approx(10.36e3)
    assert m.pulse_duration == pytest.approx(0.17e-3)
    assert m.lamb_dicke == 0.13
    assert m.carrier_rabi == pytest.approx(m.rabi_01 / 0.13)


def test_model_validation():
    with pytest.raises(InvalidArgumentError):
        SidebandModel(rabi_01=0.0)
    with pytest.raises(InvalidArgumentError):
        SidebandModel(lamb_dicke=1.2)
    with pytest.raises(InvalidArgumentError):
        SidebandModel(gamma=-1.0)


def test_vacuum_populations():
    p = np.zeros(26)
    p[0] = 1.0
    damp = math.exp(-REFERENCE_MODEL.gamma * REFERENCE_MODEL.pulse_duration)
    blue, red = sideband_populations(p, REFERENCE_MODEL)
    assert red == 0.0
    assert blue == pytest.approx((1 - damp * math.cos(REFERENCE_MODEL.rabi_01 * REFERENCE_MODEL.pulse_duration)) / 2)
    assert ratio_R(tmsv_probabilities(0.0, 25), REFERENCE_MODEL) == 0.0
    # applying the decay to the uncoupled ground state gives the constant (1 - e^{-gamma t}) / 2
    m = SidebandModel(decay_uncoupled=True)
    _, red = sideband_populations(p, m)
    assert red == pytest.approx((1 - damp) / 2, rel=1e-14)
    _, red = sideband_populations(p, SidebandModel(decay_uncoupled=True, gamma=0.0))
    assert red == 0.0


def test_sideband_weights_against_formula():
    blue, red = sideband_weights(6, REFERENCE_MODEL)
    t, om, g = REFERENCE_MODEL.pulse_duration, REFERENCE_MODEL.rabi_01, REFERENCE_MODEL.gamma
    for n in range(1, 6):
        assert red[n] == pytest.approx((1 - math.exp(-g * t) * math.cos(math.sqrt(n) * om * t)) / 2, rel=1e-14)
        assert blue[n - 1] == pytest.approx(red[n], rel=1e-14)


@pytest.mark.parametrize("nbar", [0.0, 0.06, 0.3, 1.0])
def test_small_pulse_limit(nbar):
    # first order in (Omega t)^2: red ~ sum n p_n, blue ~ sum (n + 1) p_n
    m = SidebandModel(gamma=0.0, pulse_duration=0.04 / REFERENCE_MODEL.rabi_01)
    p = _geometric(nbar, 400)
    assert abs(ratio_R(p, m, gate=None) - nbar / (nbar + 1)) < 1e-3


def test_small_pulse_limit_taylor_oracle():
    nbar = 0.06
    theta = 0.04
    m = SidebandModel(gamma=0.0, pulse_duration=theta / REFERENCE_MODEL.rabi_01)
    p = _geometric(nbar, 400)
    n = np.arange(p.size)
    # second-order expansion of 1 - cos: theta^2 n / 2 - theta^4 n^2 / 24
    red = p @ (theta**2 * n / 4 - theta**4 * n**2 / 48)
    blue = p @ (theta**2 * (n + 1) / 4 - theta**4 * (n + 1) ** 2 / 48)
    assert ratio_R(p, m, gate=None) == pytest.approx(red / blue, rel=1e-6)


def test_thermal_r_is_near_057_for_small_pulses():
    m = SidebandModel(gamma=0.0, pulse_duration=0.01 / REFERENCE_MODEL.rabi_01)
    assert ratio_R(_geometric(0.06, 200), m, gate=None) == pytest.approx(0.057, abs=5e-4)


def test_undefined_ratio():
    with pytest.raises(UndefinedRatioError):
        ratio_R(_geometric(0.1, 50), SidebandModel(pulse_duration=0.0), gate=None)


def test_ratio_gate():
    with pytest.raises(TruncationError):
        ratio_R(tmsv_probabilities(1.5, 10), REFERENCE_MODEL)
    assert 0 < ratio_R(tmsv_probabilities(1.5, 10), REFERENCE_MODEL, gate=None) < 1


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.5), st.sampled_from(["tmsv", "smsv"]))
def test_ratio_in_unit_interval(r, family):
    d = tmsv_probabilities(r, 60) if family == "tmsv" else smsv_probabilities(r, 120)
    assert 0 <= ratio_R(d, REFERENCE_MODEL, gate=None) < 1


@pytest.mark.parametrize("family", ["two-mode", "single-mode"])
def test_ratio_monotone_in_r(family):
    rs = np.round(np.arange(0.0, 1.5001, 0.05), 10)
    curve = ratio_curve(rs, family, REFERENCE_MODEL, 0.06, 25)
    assert np.all(np.diff(curve) >= 0)
    assert curve[0] == pytest.approx(ratio_R(_geometric(0.06, 25), REFERENCE_MODEL, gate=None), rel=1e-12)


def test_ratio_curve_unknown_family():
    with pytest.raises(InvalidArgumentError):
        ratio_curve([0.5], "three-mode", REFERENCE_MODEL, 0.06)


def test_tmsv_regression_constant():
    assert ratio_curve([1.2], "two-mode", REFERENCE_MODEL, 0.06, 25)[0] == pytest.approx(TMSV_R12_REGRESSION, rel=1e-12)


def test_tmsv_ratio_matches_thermal_marginal_oracle():
    # the x' marginal of a two-mode squeezed thermal pair is thermal with
    # occupation nbar0 cosh^2 r + (nbar0 + 1) sinh^2 r
    r, nbar0 = 1.2, 0.06
    nbar = nbar0 * math.cosh(r) ** 2 + (nbar0 + 1) * math.sinh(r) ** 2
    oracle = ratio_R(_geometric(nbar, 400), REFERENCE_MODEL, gate=None)
    wide = thermal_weighted_distribution(TwoModeSqueezeOp(r, l_cap=20), nbar0, 45)
    assert ratio_R(wide, REFERENCE_MODEL, gate=None) == pytest.approx(oracle, abs=1e-6)
    # truncating at n' <= 25 moves R by well under 1e-4
    assert abs(TMSV_R12_REGRESSION - oracle) < 1e-4


def test_two_mode_truncation_robustness():
    rs = np.round(np.arange(0.0, 1.2001, 0.05), 10)
    a = ratio_curve(rs, "two-mode", REFERENCE_MODEL, 0.06, 25)
    b = ratio_curve(rs, "two-mode", REFERENCE_MODEL, 0.06, 35)
    assert np.max(np.abs(a - b)) < 1e-4


def test_single_mode_truncation_robustness_to_r09():
    # the single-mode distribution has twice the phonon variance, so its tail
    # reaches n' = 25 earlier than the two-mode one
    rs = np.round(np.arange(0.0, 0.9001, 0.05), 10)
    a = ratio_curve(rs, "single-mode", REFERENCE_MODEL, 0.06, 25)
    b = ratio_curve(rs, "single-mode", REFERENCE_MODEL, 0.06, 35)
    assert np.max(np.abs(a - b)) < 1e-4


def test_vacuum_velocity_width():
    cfg = OscillatorConfig()
    assert cfg.dv0 == pytest.approx(math.sqrt(1.054571817e-34 * cfg.omega / (2 * cfg.mass)), rel=1e-9)
    assert cfg.dv0 * 100 == pytest.approx(1.71, abs=5e-3)
    assert velocity_sigma(vacuum(1), "x", cfg) == pytest.approx(cfg.dv0, rel=1e-14)


def test_two_mode_xprime_width_is_flat():
    cfg = OscillatorConfig.from_squeezing(0.89)
    evo = two_mode_protocol(cfg, math.pi / 2)
    period = 2 * math.pi / cfg.omega
    ratios = [velocity_sigma(evo.lab_state(t), "x'", cfg) / cfg.dv0 for t in np.linspace(0, 2 * period, 41)]
    assert np.ptp(ratios) < 1e-10
    assert ratios[0] == pytest.approx(math.sqrt(math.cosh(1.78)), rel=1e-12)
    assert ratios[0] == pytest.approx(1.7462, abs=5e-5)


def test_axis_validation():
    with pytest.raises(InvalidArgumentError):
        synthesize_velocity_scan(vacuum(1), "z", OscillatorConfig())
    with pytest.raises(InvalidArgumentError):
        synthesize_velocity_scan(vacuum(1), "x'", OscillatorConfig())


@pytest.mark.parametrize("convolve", [True, False])
def test_zero_noise_round_trip(convolve):
    cfg = OscillatorConfig()
    state = apply_squeeze(thermal(1, 0.06), 0, SqueezeParams(0.4, 0.3))
    scan = synthesize_velocity_scan(state, "x", cfg, convolve=convolve)
    fit = gaussian_fit(scan)
    truth = DEFAULT_K_EFF * velocity_sigma(state, "x", cfg)
    assert abs(fit.sigma / truth - 1) < 1e-3
    assert fit.sigma / scan.k_eff == pytest.approx(velocity_sigma(state, "x", cfg), rel=1e-3)


def test_convolution_broadens_plain_fit():
    cfg = OscillatorConfig()
    scan = synthesize_velocity_scan(vacuum(1), "x", cfg)
    plain = VelocityScan(scan.detunings, scan.excited_fraction, scan.k_eff)
    truth = DEFAULT_K_EFF * cfg.dv0
    assert gaussian_fit(plain).sigma / truth - 1 > 0.01
    assert abs(gaussian_fit(scan).sigma / truth - 1) < 1e-6


def test_displaced_state_centre():
    cfg = OscillatorConfig()
    state = GaussianState(np.array([0.0, 0.8]), vacuum(1).cov)
    scan = synthesize_velocity_scan(state, "x", cfg)
    fit = gaussian_fit(scan)
    assert fit.center == pytest.approx(DEFAULT_K_EFF * 2 * cfg.dv0 * 0.8, rel=1e-6)


def test_noisy_scan_is_seeded_and_bounded():
    cfg = OscillatorConfig()
    a = synthesize_velocity_scan(vacuum(1), "x", cfg, noise=0.02, seed=5)
    b = synthesize_velocity_scan(vacuum(1), "x", cfg, noise=0.02, seed=5)
    c = synthesize_velocity_scan(vacuum(1), "x", cfg, noise=0.02, seed=6)
    assert np.array_equal(a.excited_fraction, b.excited_fraction)
    assert not np.array_equal(a.excited_fraction, c.excited_fraction)
    assert a.noise_seed == 5 and a.fraction_error == pytest.approx(0.01)
    assert np.all((a.excited_fraction >= 0) & (a.excited_fraction <= 1))


def test_noisy_round_trip_coverage_small_sample():
    cfg = OscillatorConfig()
    truth = DEFAULT_K_EFF * cfg.dv0
    hits = 0
    for seed in range(100):
        fit = gaussian_fit(synthesize_velocity_scan(vacuum(1), "x", cfg, noise=0.02, seed=seed))
        hits += abs(fit.sigma - truth) <= 2 * fit.stderr[1]
    # nominal two-sigma coverage is 95.4%; allow binomial scatter on 100 draws
    assert hits >= 89


def test_velocity_scan_validation():
    with pytest.raises(InvalidDataError):
        VelocityScan(np.zeros(3), np.zeros(4))
    with pytest.raises(InvalidDataError):
        VelocityScan(np.zeros(3), np.array([0.1, 1.2, 0.3]))
    scan = VelocityScan(np.array([DEFAULT_K_EFF]), np.array([0.5]))
    assert scan.velocities[0] == pytest.approx(1.0)


def test_spectrum_ground_state():
    d = tmsv_probabilities(0.0, 25)
    omega = TRAP_OMEGA
    sigma = 2 * math.pi * 2e3
    trace = synthesize_sideband_spectrum(d, REFERENCE_MODEL, InhomogeneityModel(sigma), (-1.5 * omega, 1.5 * omega, 3001),
                                         omega)
    areas = spectrum_peak_areas(trace, omega)
    assert areas["red"] < 1e-12
    assert areas["blue"] == pytest.approx(trace.areas["blue"], rel=1e-6)
    assert areas["blue"] > 0.1


def test_spectrum_thermal_area_ratio():
    d = thermal_weighted_distribution(TwoModeSqueezeOp(0.0), 0.5, 40)
    omega = TRAP_OMEGA
    trace = synthesize_sideband_spectrum(d, REFERENCE_MODEL, 2 * math.pi * 3e3, (-1.5 * omega, 1.5 * omega, 4001), omega,
                                         gate=None)
    areas = spectrum_peak_areas(trace, omega)
    assert areas["red"] / areas["blue"] == pytest.approx(ratio_R(d, REFERENCE_MODEL, gate=None), rel=1e-6)
    assert trace.areas["red"] / trace.areas["blue"] == pytest.approx(ratio_R(d, REFERENCE_MODEL, gate=None), rel=1e-14)


def test_spectrum_zero_width_is_delta_like():
    d = thermal_weighted_distribution(TwoModeSqueezeOp(0.0), 0.2, 30)
    omega = TRAP_OMEGA
    trace = synthesize_sideband_spectrum(d, REFERENCE_MODEL, 0.0, (-1.5 * omega, 1.5 * omega, 301), omega)
    assert np.count_nonzero(trace.signal) == 3
    areas = spectrum_peak_areas(trace, omega)
    for k in ("red", "carrier", "blue"):
        assert areas[k] == pytest.approx(trace.areas[k], rel=1e-12)
