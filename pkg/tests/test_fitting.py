import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mechsqueeze import fitting
from mechsqueeze.errors import FitError, InvalidArgumentError, InvalidDataError
from mechsqueeze.fitting import fit_decaying_sinusoid, fit_gaussian


def _gauss(x, c, s, a, b):
    return b + a * np.exp(-0.5 * ((x - c) / s) ** 2)


def test_exact_gaussian_recovered():
    x = np.linspace(-5, 7, 41)
    fit = fit_gaussian(x, _gauss(x, 1.3, 1.7, 0.45, 0.05))
    assert fit.center == pytest.approx(1.3, abs=1e-9)
    assert fit.sigma == pytest.approx(1.7, rel=1e-9)
    assert fit.amplitude == pytest.approx(0.45, rel=1e-9)
    assert fit.offset == pytest.approx(0.05, abs=1e-9)
    assert fit.gradient_norm < 1e-10
    assert fit.residual_norm < 1e-9


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-1.0, 1.0), st.floats(0.5, 2.0), st.floats(0.1, 1.0), st.floats(0.0, 0.2), st.floats(1e-3, 1e6),
)
def test_exact_fit_is_scale_free(c, s, a, b, unit):
    x = np.linspace(-6, 6, 41)
    fit = fit_gaussian(x * unit, _gauss(x, c, s, a, b))
    assert fit.center / unit == pytest.approx(c, abs=1e-8)
    assert fit.sigma / unit == pytest.approx(s, rel=1e-8)


def test_pulse_profile_matches_direct_convolution():
    # independent route: trapezoid convolution with the sinc^2 kernel
    s, pulse = 1.0, 3.0
    x = np.linspace(-4, 4, 9)
    prof, d_c, d_s = fitting._pulse_profile(x, 0.0, s, pulse)
    u = np.linspace(-400, 400, 400001)
    kern = pulse / (2 * math.pi) * np.sinc(u * pulse / (2 * math.pi)) ** 2
    direct = np.array([np.trapezoid(np.exp(-0.5 * ((xi - u) / s) ** 2) * kern, u) for xi in x])
    assert np.allclose(prof, direct, atol=2e-5)
    # derivatives against finite differences
    h = 1e-6
    up, _, _ = fitting._pulse_profile(x, h, s, pulse)
    dn, _, _ = fitting._pulse_profile(x, -h, s, pulse)
    assert np.allclose(d_c, (up - dn) / (2 * h), atol=1e-7)
    up, _, _ = fitting._pulse_profile(x, 0.0, s + h, pulse)
    dn, _, _ = fitting._pulse_profile(x, 0.0, s - h, pulse)
    assert np.allclose(d_s, (up - dn) / (2 * h), atol=1e-7)


def test_convolved_fit_is_exact_on_its_own_model():
    x = np.linspace(-8, 8, 41)
    pulse = 2.0
    y = 0.05 + 0.4 * fitting._pulse_profile(x, 0.3, 1.9, pulse)[0]
    fit = fit_gaussian(x, y, pulse_duration=pulse)
    assert fit.sigma == pytest.approx(1.9, rel=1e-9)
    assert fit.center == pytest.approx(0.3, abs=1e-9)


def test_known_error_covariance():
    x = np.linspace(-5, 5, 41)
    rng = np.random.default_rng(1)
    y = _gauss(x, 0.0, 1.5, 0.5, 0.05) + rng.normal(0, 0.01, x.size)
    fit = fit_gaussian(x, y, y_error=0.01)
    # rebuild y_err^2 (J^T J)^-1 from the analytic Jacobian at the solution
    e = np.exp(-0.5 * ((x - fit.center) / fit.sigma) ** 2)
    u = (x - fit.center) / fit.sigma
    jac = np.column_stack([fit.amplitude * e * u / fit.sigma, fit.amplitude * e * u**2 / fit.sigma, e, np.ones_like(x)])
    expected = 0.01**2 * np.linalg.inv(jac.T @ jac)
    assert np.allclose(fit.covariance, expected, rtol=1e-6)
    with pytest.raises(InvalidDataError):
        fit_gaussian(x, y, y_error=0.0)


def test_residual_covariance_scales_with_noise():
    x = np.linspace(-5, 5, 41)
    rng = np.random.default_rng(2)
    base = _gauss(x, 0.0, 1.5, 0.5, 0.05)
    noise = rng.normal(0, 1, x.size)
    small = fit_gaussian(x, base + 0.001 * noise)
    large = fit_gaussian(x, base + 0.01 * noise)
    assert large.stderr[1] / small.stderr[1] == pytest.approx(10, rel=0.05)


def test_invalid_data():
    x = np.linspace(0, 1, 20)
    with pytest.raises(InvalidDataError):
        fit_gaussian(x, np.full_like(x, 0.3))
    with pytest.raises(InvalidDataError):
        fit_gaussian(x[:5], x[:5])
    with pytest.raises(InvalidDataError):
        fit_gaussian(x, x[:-1])


def test_non_convergence_reports_diagnostics(monkeypatch):
    monkeypatch.setattr(fitting, "MAX_ITERATIONS", 1)
    x = np.linspace(-5, 5, 41)
    y = _gauss(x, 2.0, 0.4, 0.5, 0.05) + 0.02 * np.sin(7 * x)
    with pytest.raises(FitError) as info:
        fit_gaussian(x, y)
    assert "residual_norm" in info.value.diagnostics
    assert "did not converge" in str(info.value)


def test_to_dict_layout():
    x = np.linspace(-5, 5, 41)
    d = fit_gaussian(x, _gauss(x, 0.0, 1.0, 1.0, 0.0)).to_dict()
    assert set(d) == {"parameters", "standard_errors", "residual_norm", "gradient_norm", "iterations"}
    assert set(d["parameters"]) == {"center", "sigma", "amplitude", "offset"}


@pytest.mark.parametrize("envelope", ["gaussian", "exponential"])
def test_decaying_sinusoid_exact(envelope):
    t = np.linspace(0, 200e-6, 800)
    tau, period = 80e-6, 4e-6
    env = np.exp(-((t / tau) ** 2)) if envelope == "gaussian" else np.exp(-t / tau)
    y = 0.6 + 0.2 * env * np.cos(2 * math.pi * t / period + 0.4)
    fit = fit_decaying_sinusoid(t, y, 4.05e-6, envelope=envelope)
    assert fit.decay_time == pytest.approx(tau, rel=1e-8)
    assert fit.period == pytest.approx(period, rel=1e-10)
    assert fit.phase == pytest.approx(0.4, abs=1e-8)
    assert fit.amplitude == pytest.approx(0.2, rel=1e-8)
    assert fit.to_dict()["envelope"] == envelope


def test_decaying_sinusoid_validation():
    t = np.linspace(0, 1, 20)
    with pytest.raises(InvalidArgumentError):
        fit_decaying_sinusoid(t, np.sin(t), 0.1, envelope="lorentzian")
    with pytest.raises(InvalidDataError):
        fit_decaying_sinusoid(t, np.ones_like(t), 0.1)
    with pytest.raises(InvalidDataError):
        fit_decaying_sinusoid(t[:4], t[:4], 0.1)
