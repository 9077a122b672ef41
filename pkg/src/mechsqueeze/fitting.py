"""Nonlinear least-squares fits used for width extraction and echo decay.

Both fits run scipy's Levenberg-Marquardt on variables rescaled to order
unity, so the gradient-norm convergence test is unit-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError, InvalidArgumentError, InvalidDataError

GRADIENT_TOL = 1e-10
MAX_ITERATIONS = 200


@dataclass(frozen=True)
class GaussianFit:
    center: float
    sigma: float
    amplitude: float
    offset: float
    covariance: np.ndarray
    residual_norm: float
    gradient_norm: float
    iterations: int

    @property
    def stderr(self) -> np.ndarray:
        """Standard errors of ``(center, sigma, amplitude, offset)``."""
        return np.sqrt(np.diag(self.covariance))

    def to_dict(self) -> dict:
        names = ("center", "sigma", "amplitude", "offset")
        return {
            "parameters": {k: float(getattr(self, k)) for k in names},
            "standard_errors": dict(zip(names, map(float, self.stderr))),
            "residual_norm": self.residual_norm,
            "gradient_norm": self.gradient_norm,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class DecayFit:
    """Damped sinusoid ``offset + amplitude * env(t) * cos(2 pi t / period + phase)``.

    ``decay_time`` is the 1/e time of the envelope.
    """

    offset: float
    amplitude: float
    decay_time: float
    period: float
    phase: float
    envelope: str
    covariance: np.ndarray
    residual_norm: float

    def to_dict(self) -> dict:
        names = ("offset", "amplitude", "decay_time", "period", "phase")
        err = np.sqrt(np.diag(self.covariance))
        return {
            "envelope": self.envelope,
            "parameters": {k: float(getattr(self, k)) for k in names},
            "standard_errors": dict(zip(names, map(float, err))),
            "residual_norm": self.residual_norm,
        }


def _lm(residual, jac, p0, *, what: str):
    res = least_squares(
        residual,
        p0,
        jac=jac,
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=MAX_ITERATIONS * (len(p0) + 1),
    )
    j = res.jac
    grad = float(np.linalg.norm(j.T @ res.fun))
    diag = {"params": res.x.tolist(), "residual_norm": float(np.linalg.norm(res.fun)), "gradient_norm": grad,
            "iterations": int(res.nfev), "status": int(res.status)}
    if res.status == 0 and grad > GRADIENT_TOL:
        raise FitError(f"{what} did not converge within {MAX_ITERATIONS} iterations", diag)
    if not np.all(np.isfinite(res.x)):
        raise FitError(f"{what} diverged", diag)
    dof = max(1, res.fun.size - res.x.size)
    s2 = float(res.fun @ res.fun) / dof
    try:
        cov = s2 * np.linalg.inv(j.T @ j)
    except np.linalg.LinAlgError:
        raise FitError(f"{what}: singular normal matrix", diag) from None
    return res, cov, grad


_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(96)


def _gauss_model(p, x):
    c, s, a, b = p
    e = np.exp(-0.5 * ((x - c) / s) ** 2)
    return b + a * e, e


def _gauss_jac(p, x):
    c, s, a, _ = p
    _, e = _gauss_model(p, x)
    u = (x - c) / s
    return np.column_stack([a * e * u / s, a * e * u**2 / s, e, np.ones_like(x)])


def _pulse_profile(x, c, s, pulse):
    """Unit-height Gaussian convolved with the unit-area ``sinc^2`` response of a square pulse.

    The pulse response transforms to the triangle ``1 - k/pulse`` on
    ``|k| < pulse``, so the convolution is a cosine transform over a finite
    interval, evaluated by Gauss-Legendre quadrature.  Returns the profile
    and its derivatives with respect to ``c`` and ``s``.
    """
    top = min(pulse, 12.0 / s)
    k = 0.5 * top * (_NODES + 1)
    w = 0.5 * top * _WEIGHTS
    g = np.exp(-0.5 * (s * k) ** 2) * (1 - k / pulse) * w
    arg = np.outer(x - c, k)
    cos = np.cos(arg)
    pref = 2 * s / math.sqrt(2 * math.pi)
    prof = pref * cos @ g
    d_c = pref * (np.sin(arg) * k) @ g
    d_s = prof / s - pref * cos @ (g * s * k**2)
    return prof, d_c, d_s


def fit_gaussian(x, y, *, pulse_duration: float | None = None, y_error: float | None = None) -> GaussianFit:
    """Fit ``offset + amplitude * profile((x - center) / sigma)`` to data.

    The profile is a Gaussian, or with ``pulse_duration`` (in units of
    ``1/x``) the Gaussian convolved with the square-pulse response, so the
    returned ``sigma`` is the deconvolved width.  ``y_error`` is a known
    per-point standard deviation; when given, the parameter covariance is
    ``y_error^2 (J^T J)^-1`` rather than the residual-variance estimate.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidDataError("x and y must be 1-D arrays of equal length")
    if x.size < 8:
        raise InvalidDataError(f"need at least 8 points, got {x.size}")
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        raise InvalidDataError("data has zero variance")

    x0, xs = 0.5 * (x.max() + x.min()), 0.5 * np.ptp(x)
    ys = float(np.max(np.abs(y)))
    u, v = (x - x0) / xs, y / ys

    edge = max(2, u.size // 8)
    base = float(np.median(np.sort(v)[:edge]))
    w = np.clip(v - base, 0, None)
    if w.sum() <= 0:
        raise InvalidDataError("no peak above the baseline")
    c0 = float(u[np.argmax(v)])
    s0 = float(np.sqrt(np.sum(w * (u - c0) ** 2) / w.sum()))
    p0 = [c0, max(s0, 1e-3), float(v.max() - base), base]

    if pulse_duration:
        tp = pulse_duration * xs

        def model(p):
            return p[3] + p[2] * _pulse_profile(u, p[0], p[1], tp)[0]

        def jac(p):
            prof, d_c, d_s = _pulse_profile(u, p[0], p[1], tp)
            return np.column_stack([p[2] * d_c, p[2] * d_s, prof, np.ones_like(u)])

    else:

        def model(p):
            return _gauss_model(p, u)[0]

        def jac(p):
            return _gauss_jac(p, u)

    res, cov, grad = _lm(lambda p: model(p) - v, jac, p0, what="gaussian fit")
    if y_error is not None:
        if not y_error > 0:
            raise InvalidDataError("y_error must be positive")
        cov = (y_error / ys) ** 2 * np.linalg.inv(res.jac.T @ res.jac)
    scale = np.array([xs, xs, ys, ys])
    c, s, a, b = res.x * scale + np.array([x0, 0, 0, 0])
    if not xs * 1e-6 < abs(s) < 1e3 * xs:
        raise FitError("gaussian fit produced an unphysical width", {"params": res.x.tolist()})
    return GaussianFit(
        center=float(c),
        sigma=float(abs(s)),
        amplitude=float(a),
        offset=float(b),
        covariance=cov * np.outer(scale, scale),
        residual_norm=float(np.linalg.norm(res.fun) * ys),
        gradient_norm=grad,
        iterations=int(res.nfev),
    )


def _decay_parts(p, t, envelope):
    b, a, tau, period, phi = p
    env = np.exp(-((t / tau) ** 2)) if envelope == "gaussian" else np.exp(-t / tau)
    arg = 2 * math.pi * t / period + phi
    return b, a, tau, period, env, arg


def _decay_model(p, t, envelope):
    b, a, _, _, env, arg = _decay_parts(p, t, envelope)
    return b + a * env * np.cos(arg)


def _decay_jac(p, t, envelope):
    b, a, tau, period, env, arg = _decay_parts(p, t, envelope)
    cos, sin = np.cos(arg), np.sin(arg)
    denv = env * (2 * t**2 / tau**3 if envelope == "gaussian" else t / tau**2)
    return np.column_stack(
        [
            np.ones_like(t),
            env * cos,
            a * denv * cos,
            a * env * sin * 2 * math.pi * t / period**2,
            -a * env * sin,
        ]
    )


def fit_decaying_sinusoid(t, y, period_guess: float, *, envelope: str = "gaussian", decay_guess=None) -> DecayFit:
    """Fit a damped sinusoid to a trace.

    ``envelope="gaussian"`` uses ``exp(-(t/T)^2)``, the envelope produced by a
    Gaussian spread of oscillation frequencies; ``"exponential"`` uses
    ``exp(-t/T)``.  ``T`` is reported as ``decay_time`` either way.
    """
    if envelope not in ("gaussian", "exponential"):
        raise InvalidArgumentError(f"unknown envelope {envelope!r}")
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 8:
        raise InvalidDataError("need at least 8 points")
    if np.ptp(y) == 0:
        raise InvalidDataError("data has zero variance")
    ts = float(t.max())
    ys = float(np.max(np.abs(y)))
    u, v = t / ts, y / ys

    # phase from projection of the first periods onto cos/sin
    first = u <= min(1.0, 3 * period_guess / ts)
    w = 2 * math.pi * u * ts / period_guess
    c = np.mean((v[first] - v.mean()) * np.cos(w[first]))
    s = np.mean((v[first] - v.mean()) * np.sin(w[first]))
    p0 = [
        float(np.median(v)),
        float(2 * math.hypot(c, s)) or float(np.ptp(v) / 2),
        (decay_guess if decay_guess is not None else ts / 2) / ts,
        period_guess / ts,
        float(math.atan2(-s, c)),
    ]
    res, cov, _ = _lm(
        lambda p: _decay_model(p, u, envelope) - v,
        lambda p: _decay_jac(p, u, envelope),
        p0,
        what="damped sinusoid fit",
    )
    scale = np.array([ys, ys, ts, ts, 1.0])
    b, a, tau, period, phi = res.x * scale
    if a < 0:
        a, phi = -a, phi + math.pi
    return DecayFit(
        offset=float(b),
        amplitude=float(a),
        decay_time=float(abs(tau)),
        period=float(period),
        phase=float(phi % (2 * math.pi)),
        envelope=envelope,
        covariance=cov * np.outer(scale, scale),
        residual_norm=float(np.linalg.norm(res.fun) * ys),
    )
