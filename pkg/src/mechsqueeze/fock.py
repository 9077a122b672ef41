"""Truncated Fock-basis engine.

Phonon-number distributions of two-mode and single-mode squeezed states,
exact two-mode squeeze matrix elements, thermal weighting of imperfectly
cooled inputs, and a matrix-exponential oracle used to validate the closed
forms.  Only probabilities are stored; coherences (and hence the squeeze
phase) never enter here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .errors import InvalidArgumentError, NumericalDegeneracyError, ResourceLimitError, TruncationError

DEFAULT_N_MAX = 25
DEFAULT_L_CAP = 50
DEFAULT_TRUNCATION_GATE = 1e-3
ORACLE_MAX_DIM = 40

_EXACT_BINOM_LIMIT = 30


@dataclass(frozen=True)
class FockDistribution:
    """Joint phonon-number table ``probs[n_x', n_y']`` of a two-mode state."""

    probs: np.ndarray
    warnings: tuple[str, ...] = ()
    n_max: int = field(init=False)
    truncation_mass: float = field(init=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise InvalidArgumentError(f"probs must be a square table, got shape {p.shape}")
        if (p < 0).any():
            raise InvalidArgumentError("probabilities must be nonnegative")
        total = float(p.sum())
        if total > 1 + 1e-9:
            raise InvalidArgumentError(f"probabilities sum to {total} > 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "n_max", p.shape[0] - 1)
        object.__setattr__(self, "truncation_mass", max(0.0, 1.0 - total))

    def marginal(self, mode: int = 0) -> np.ndarray:
        if mode not in (0, 1):
            raise InvalidArgumentError(f"mode must be 0 (x') or 1 (y'), got {mode}")
        return self.probs.sum(axis=1 - mode)

    def check_truncation(self, gate: float | None = DEFAULT_TRUNCATION_GATE) -> None:
        if gate is not None and self.truncation_mass >= gate:
            raise TruncationError(
                f"truncation discards {self.truncation_mass:.3g} of the probability (gate {gate:g})"
            )


@dataclass(frozen=True)
class TwoModeSqueezeOp:
    """Two-mode squeeze with amplitude ``r`` and initial relative phase ``theta0``.

    ``l_cap`` bounds ``l_x + l_y`` in the thermal-weighting sum.
    """

    r: float
    theta0: float = 0.0
    l_cap: int = DEFAULT_L_CAP

    def __post_init__(self):
        if not self.r >= 0:
            raise InvalidArgumentError(f"r must be >= 0, got {self.r}")
        if self.l_cap < 0:
            raise InvalidArgumentError("l_cap must be nonnegative")


def _log_binom(n, k):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _binom(n: int, k: int) -> float:
    if k < 0 or k > n:
        return 0.0
    if n < _EXACT_BINOM_LIMIT:
        return float(math.comb(n, k))
    return math.exp(_log_binom(n, k))


def tmsv_probabilities(r: float, n_max: int = DEFAULT_N_MAX) -> FockDistribution:
    """Diagonal table ``P(n, n) = sech^2 r tanh^(2n) r`` of the two-mode squeezed vacuum."""
    if not r >= 0:
        raise InvalidArgumentError(f"r must be >= 0, got {r}")
    if n_max < 0:
        raise InvalidArgumentError("n_max must be nonnegative")
    n = np.arange(n_max + 1)
    diag = np.zeros(n_max + 1)
    diag[0] = 1.0 / math.cosh(r) ** 2
    if r > 0:
        diag = np.exp(2 * n * math.log(math.tanh(r)) - 2 * math.log(math.cosh(r)))
    return FockDistribution(np.diag(diag))


def smsv_probabilities(r: float, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """Phonon distribution of a single-mode squeezed vacuum (odd entries are zero)."""
    if not r >= 0:
        raise InvalidArgumentError(f"r must be >= 0, got {r}")
    p = np.zeros(n_max + 1)
    if r == 0:
        p[0] = 1.0
        return p
    m = np.arange(n_max // 2 + 1)
    logp = (
        gammaln(2 * m + 1)
        - 2 * (m * math.log(2) + gammaln(m + 1))
        + 2 * m * math.log(math.tanh(r))
        - math.log(math.cosh(r))
    )
    p[0::2] = np.exp(logp)
    return p


def s2_matrix_element_sq(n_x: int, n_y: int, l_x: int, l_y: int, r: float) -> float:
    """``|<n_x, n_y| S2(r) |l_x, l_y>|^2`` for the two-mode squeeze operator.

    Zero unless ``l_x - n_x == l_y - n_y``.  The alternating sum carries all
    four binomials ``C(n_x,g) C(n_y,g) C(l_x,k) C(l_y,k)`` with
    ``k = l_x - n_x + g``; the result is symmetric under exchanging the modes
    and under exchanging bra and ket.
    """
    if min(n_x, n_y, l_x, l_y) < 0:
        raise InvalidArgumentError("Fock indices must be nonnegative")
    if not r >= 0:
        raise InvalidArgumentError(f"r must be >= 0, got {r}")
    d = l_x - n_x
    if d != l_y - n_y:
        return 0.0
    if r == 0:
        return 1.0 if d == 0 else 0.0
    s2 = math.sinh(r) ** 2
    g0 = max(0, -d)
    total = 0.0
    # the leading power sinh^(2 g0) is folded into the prefactor so tiny r cannot overflow
    for g in range(g0, min(n_x, n_y) + 1):
        k = d + g
        weight = _binom(n_x, g) * _binom(n_y, g) * _binom(l_x, k) * _binom(l_y, k)
        total += (-s2) ** (g - g0) * math.sqrt(weight)
    log_pref = (
        2 * d * math.log(math.tanh(r))
        + 4 * g0 * math.log(math.sinh(r))
        - 2 * (n_x + n_y + 1) * math.log(math.cosh(r))
    )
    return math.exp(log_pref) * total * total


def _s2_element_table(r: float, n_max: int, l_cap: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised squared elements for all ``n_x, n_y <= n_max`` and ``l_x + l_y <= l_cap``.

    Returns ``(elements, l_x, l_y)`` arrays of shape ``(n_max+1, n_max+1, n_d)``
    where the last axis runs over the shift ``d = l - n``; entries outside the
    cap are zero.
    """
    n = np.arange(n_max + 1)
    nx = n[:, None, None]
    ny = n[None, :, None]
    d = np.arange(-n_max, l_cap + 1)[None, None, :]
    lx, ly = nx + d, ny + d
    valid = (lx >= 0) & (ly >= 0) & (lx + ly <= l_cap)
    if r == 0:
        elem = np.where(valid & (d == 0), 1.0, 0.0)
        return elem, np.where(valid, lx, 0), np.where(valid, ly, 0)

    g = np.arange(n_max + 1)[None, None, None, :]
    k = d[..., None] + g
    gmask = valid[..., None] & (g <= np.minimum(nx, ny)[..., None]) & (k >= 0)
    nx4, ny4 = nx[..., None], ny[..., None]
    lx4, ly4 = np.maximum(lx, 0)[..., None], np.maximum(ly, 0)[..., None]
    ks = np.clip(k, 0, None)
    with np.errstate(invalid="ignore"):
        log_w = 0.5 * (
            _log_binom(nx4, np.minimum(g, nx4))
            + _log_binom(ny4, np.minimum(g, ny4))
            + _log_binom(lx4, np.minimum(ks, lx4))
            + _log_binom(ly4, np.minimum(ks, ly4))
        )
    log_pref = d * math.log(math.tanh(r)) - (nx + ny + 1) * math.log(math.cosh(r))
    log_term = g * 2 * math.log(math.sinh(r)) + log_w + log_pref[..., None]
    sign = np.where(g % 2 == 0, 1.0, -1.0)
    terms = np.where(gmask, sign * np.exp(np.where(gmask, log_term, 0.0)), 0.0)
    amp = terms.sum(axis=-1)
    elem = np.where(valid, amp * amp, 0.0)
    return elem, np.where(valid, lx, 0), np.where(valid, ly, 0)


def s2_oracle(r: float, dim: int, pad: int | str = "auto") -> np.ndarray:
    """Dense two-mode squeeze operator on the ``dim x dim`` Fock basis by matrix exponential.

    Basis index ``n_x * dim + n_y``.  The generator ``r (a b - a^dag b^dag)``
    conserves ``n_x - n_y``, so each conserved block is exponentiated on its
    own with ``pad`` extra levels before cropping to ``dim``; ``pad=0`` gives
    the bare truncated exponential.  ``"auto"`` picks enough padding for the
    discarded tail ``tanh(r)^(2 pad)`` to fall below double precision.
    """
    if dim < 1:
        raise InvalidArgumentError("dim must be positive")
    if dim > ORACLE_MAX_DIM:
        raise ResourceLimitError(f"dense oracle limited to dim <= {ORACLE_MAX_DIM}, got {dim}")
    if not r >= 0:
        raise InvalidArgumentError(f"r must be >= 0, got {r}")
    if pad == "auto":
        t2 = math.tanh(r) ** 2
        pad = 8 if t2 < 1e-300 else max(8, int(math.ceil(-80.0 / math.log(t2))) + 20)
    pad = int(pad)
    size = dim + pad
    out = np.zeros((dim * dim, dim * dim))
    for shift in range(-(dim - 1), dim):
        sx, sy = max(shift, 0), max(-shift, 0)
        k = np.arange(size - abs(shift))
        nx, ny = k + sx, k + sy
        # <k-1| a b |k> = sqrt(nx ny)
        off = r * np.sqrt(nx[1:] * ny[1:])
        gen = np.diag(off, 1) - np.diag(off, -1)
        block = expm(gen)
        keep = np.flatnonzero((nx < dim) & (ny < dim))
        idx = nx[keep] * dim + ny[keep]
        out[np.ix_(idx, idx)] = block[np.ix_(keep, keep)]
    return out


def _geometric(nbar: float, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if nbar == 0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(nbar / (1 + nbar)) - math.log1p(nbar))


def thermal_weighted_distribution(
    op: TwoModeSqueezeOp, nbar0: float, n_max: int = DEFAULT_N_MAX, *, tail_tolerance: float = 1e-6
) -> FockDistribution:
    """Joint phonon table of a two-mode squeeze acting on a thermal product input.

    Each input pair ``(l_x, l_y)`` with ``l_x + l_y <= op.l_cap`` is weighted
    by its Boltzmann probability.  If the thermal weight outside the cap
    exceeds ``tail_tolerance`` a warning is recorded in the result.
    """
    if not nbar0 >= 0:
        raise InvalidArgumentError(f"nbar0 must be >= 0, got {nbar0}")
    if n_max < 0:
        raise InvalidArgumentError("n_max must be nonnegative")
    elem, lx, ly = _s2_element_table(op.r, n_max, op.l_cap)
    if nbar0 == 0:
        weight = ((lx == 0) & (ly == 0)).astype(float)
    else:
        q = nbar0 / (1 + nbar0)
        weight = np.exp((lx + ly) * math.log(q) - 2 * math.log1p(nbar0))
    probs = (elem * weight).sum(axis=-1)
    warnings = []
    # thermal mass with l_x + l_y > cap: P(sum > L) for the sum of two geometric variables
    if nbar0 > 0:
        q = nbar0 / (1 + nbar0)
        s = np.arange(op.l_cap + 1)
        inside = float(np.sum((s + 1) * (1 - q) ** 2 * q**s))
        if 1 - inside > tail_tolerance:
            warnings.append(f"thermal weight beyond l_x + l_y <= {op.l_cap} is {1 - inside:.3g}")
    dist = FockDistribution(np.clip(probs, 0.0, None), tuple(warnings))
    return dist


def fock_from_moments(nbar, m_abs, n_max: int) -> np.ndarray:
    """Phonon distribution(s) of zero-mean single-mode Gaussian states.

    ``nbar = <a^dag a>`` and ``m_abs = |<a a>|``.  Uses the generating
    function ``[(1 + k1 (1-z)) (1 + k2 (1-z))]^(-1/2)`` with ``k1,2 = nbar -/+ m_abs``,
    i.e. the convolution of two ``(1 - q z)^(-1/2)`` series.  Accepts scalars
    or equal-shape arrays; the probability index is the last axis.
    """
    nbar = np.asarray(nbar, dtype=float)
    m_abs = np.asarray(m_abs, dtype=float)
    k1, k2 = nbar - m_abs, nbar + m_abs
    if np.any(k1 <= -0.5 + 1e-15):
        raise NumericalDegeneracyError("moments violate the uncertainty bound")
    q1, q2 = k1 / (1 + k1), k2 / (1 + k2)
    k = np.arange(n_max + 1)
    # c_k = C(2k, k) / 4^k
    c = np.exp(gammaln(2 * k + 1) - 2 * gammaln(k + 1) - 2 * k * math.log(2))
    a = c * q1[..., None] ** k
    b = c * q2[..., None] ** k
    norm = np.sqrt((1 + k1) * (1 + k2))
    if a.ndim == 1:
        p = np.convolve(a, b)[: n_max + 1] / norm
    else:
        size = 1 << int(math.ceil(math.log2(2 * n_max + 2)))
        p = np.fft.irfft(np.fft.rfft(a, size) * np.fft.rfft(b, size), size)[..., : n_max + 1]
        p = p / norm[..., None]
    return np.clip(p, 0.0, None)


def moments_from_cov(cov) -> tuple[float, float]:
    """``(<a^dag a>, |<a a>|)`` of a zero-mean single mode with 2x2 quadrature covariance."""
    cov = np.asarray(cov, dtype=float)
    vx, vp, cxp = cov[..., 0, 0], cov[..., 1, 1], cov[..., 0, 1]
    return vx + vp - 0.5, np.hypot(vx - vp, 2 * cxp)


def gaussian_fock_probabilities(cov, n_max: int) -> np.ndarray:
    nbar, m_abs = moments_from_cov(cov)
    return fock_from_moments(nbar, m_abs, n_max)


def squeezed_thermal_probabilities(r: float, nbar0: float, n_max: int) -> np.ndarray:
    """Phonon distribution of a thermal state (mean ``nbar0``) squeezed by ``r``."""
    if not r >= 0 or not nbar0 >= 0:
        raise InvalidArgumentError("r and nbar0 must be nonnegative")
    scale = (2 * nbar0 + 1) / 4
    vx, vp = scale * math.exp(-2 * r), scale * math.exp(2 * r)
    return fock_from_moments(vx + vp - 0.5, abs(vp - vx), n_max)


def product_distribution(p_x: np.ndarray, p_y: np.ndarray) -> FockDistribution:
    """Joint table of two independent modes (e.g. the in-phase squeezed output)."""
    size = max(len(p_x), len(p_y))
    px = np.zeros(size)
    py = np.zeros(size)
    px[: len(p_x)] = p_x
    py[: len(p_y)] = p_y
    return FockDistribution(np.outer(px, py))


def phonon_stats(dist, mode: int = 0, *, gate: float | None = DEFAULT_TRUNCATION_GATE) -> tuple[float, float]:
    """Mean and variance of the phonon number in one mode.

    ``dist`` is a :class:`FockDistribution` or a 1-D probability vector.
    Moments are taken over the retained (truncated) probabilities without
    renormalisation.
    """
    if isinstance(dist, FockDistribution):
        dist.check_truncation(gate)
        p = dist.marginal(mode)
    else:
        p = np.asarray(dist, dtype=float)
        if gate is not None and 1 - p.sum() >= gate:
            raise TruncationError(f"truncation discards {1 - p.sum():.3g} of the probability (gate {gate:g})")
    n = np.arange(len(p))
    mean = float(n @ p)
    var = float((n - mean) ** 2 @ p)
    return mean, var


def required_n_max(nbar: float, m_abs: float = 0.0, tail: float = 1e-9, floor: int = DEFAULT_N_MAX) -> int:
    """Smallest cutoff whose discarded tail is below ``tail`` for a Gaussian single mode."""
    k2 = nbar + m_abs
    if k2 <= 0:
        return floor
    q = k2 / (1 + k2)
    n = floor
    # tail of the dominant (1 - q z)^(-1/2) series is bounded by q^n / (1 - q)
    while q**n / (1 - q) > tail:
        n *= 2
    return n
