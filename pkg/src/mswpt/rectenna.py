"""Nonlinear rectenna output-voltage model.

The rectifier DC output is modelled by the fourth-order truncation of the
diode characteristic, ``v_out = beta2 * E[y^2] + beta4 * E[y^4]``, where
``y(t)`` is the received multisine. With per-tone received amplitudes
``a_n = h_n^T s_n`` and lagged correlations ``c_k = sum_n conj(a_n) a_{n+k}``
the time average reduces to

    v_out = beta2 c_0 + 3/2 beta4 c_0^2 + 3 beta4 sum_{k>=1} |c_k|^2.

Precoders and channels share a frequency-major layout: entry
``n * M + m`` (zero based) belongs to antenna ``m`` on tone ``n``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "IMAG_RTOL",
    "RectifierParams",
    "BetaCoefficients",
    "beta_coefficients",
    "WaveformPrecoder",
    "CouplingMatrices",
    "build_coupling",
    "FreqVariant",
    "FreqCouplingMatrices",
    "received_amplitudes",
    "lagged_correlations",
    "quartic_from_aux",
    "vout_quartic",
    "vout_time_oracle",
    "vout_freq",
    "vout_asymptotic_uniform",
    "weighted_sum_vout",
    "aux_from_gram",
]

IMAG_RTOL = 1e-10


@dataclass(frozen=True)
class RectifierParams:
    """Physical parameters of the rectifying diode and antenna.

    Attributes
    ----------
    r_ant : float
        Antenna resistance in ohms.
    n_i : float
        Diode ideality factor.
    v_t : float
        Thermal voltage in volts.
    i_s : float
        Saturation current in amperes. Only a positive rescale of the
        output, so it does not enter the beta coefficients.
    """

    r_ant: float = 50.0
    n_i: float = 1.0
    v_t: float = 0.02585
    i_s: float = 5e-6

    def __post_init__(self):
        for name in ("r_ant", "n_i", "v_t"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ValueError(f"{name} must be positive and finite, got {val}")


@dataclass(frozen=True)
class BetaCoefficients:
    """Second- and fourth-order coefficients of the truncated diode model."""

    beta2: float
    beta4: float

    def __post_init__(self):
        if not (self.beta2 > 0 and self.beta4 > 0):
            raise ValueError("beta coefficients must be positive")


def beta_coefficients(params: RectifierParams | None = None) -> BetaCoefficients:
    """Compute ``beta2 = R/(2 n V_T)`` and ``beta4 = R^2/(24 n^3 V_T^3)``."""
    p = params or RectifierParams()
    beta2 = p.r_ant / (2.0 * p.n_i * p.v_t)
    beta4 = p.r_ant**2 / (24.0 * p.n_i**3 * p.v_t**3)
    return BetaCoefficients(beta2=beta2, beta4=beta4)


def _split_layout(length: int, m: int, n: int) -> None:
    if m < 1 or n < 1 or length != m * n:
        raise ValueError(f"vector of length {length} does not match M={m}, N={n}")


@dataclass(frozen=True)
class WaveformPrecoder:
    """Stacked multi-antenna multisine precoder.

    Attributes
    ----------
    entries : numpy.ndarray
        Complex vector of length ``m * n`` in frequency-major layout.
    m, n : int
        Number of antennas and tones.
    budget : float or None
        Transmit power budget the precoder was designed for.
    """

    entries: np.ndarray
    m: int
    n: int
    budget: float | None = None

    def __post_init__(self):
        s = np.asarray(self.entries, dtype=complex).reshape(-1)
        _split_layout(s.size, self.m, self.n)
        object.__setattr__(self, "entries", s)
        if self.budget is not None and self.power > self.budget * (1 + 1e-9) + 1e-12:
            raise ValueError(
                f"precoder power {self.power:.6g} exceeds budget {self.budget:.6g}"
            )

    @property
    def blocks(self) -> np.ndarray:
        """Per-tone spatial vectors as an ``(n, m)`` array."""
        return self.entries.reshape(self.n, self.m)

    @property
    def power(self) -> float:
        return float(np.vdot(self.entries, self.entries).real)


def received_amplitudes(s: np.ndarray, h: np.ndarray, m: int, n: int) -> np.ndarray:
    """Per-tone received complex amplitudes ``a_n = h_n^T s_n``."""
    s = np.asarray(s, dtype=complex).reshape(-1)
    h = np.asarray(h, dtype=complex).reshape(-1)
    _split_layout(s.size, m, n)
    _split_layout(h.size, m, n)
    return np.sum(h.reshape(n, m) * s.reshape(n, m), axis=1)


def lagged_correlations(a: np.ndarray) -> np.ndarray:
    """Return ``c_k = sum_n conj(a_n) a_{n+k}`` for ``k = 0 .. N-1``."""
    a = np.asarray(a, dtype=complex)
    n = a.size
    c = np.array([np.vdot(a[: n - k], a[k:]) for k in range(n)], dtype=complex)
    c[0] = c[0].real
    return c


def quartic_from_aux(t: np.ndarray, beta: BetaCoefficients) -> float:
    """Output voltage as a function of the auxiliary lag variables ``t``."""
    t = np.asarray(t)
    t0 = float(np.real(t[0]))
    tail = float(np.sum(np.abs(t[1:]) ** 2))
    return beta.beta2 * t0 + 1.5 * beta.beta4 * t0**2 + 3.0 * beta.beta4 * tail


@dataclass(frozen=True)
class CouplingMatrices:
    """Masked coupling matrices of one user.

    ``matrix(k)`` keeps only block ``(n, n + k)`` of ``h^* h^T``, so that
    ``s^H M_k s = sum_n conj(a_n) a_{n+k}``. Negative ``k`` gives the
    conjugate transpose of ``matrix(-k)``.
    """

    h: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex).reshape(-1)
        _split_layout(h.size, self.m, self.n)
        if not np.all(np.isfinite(h)):
            raise ValueError("channel has non-finite entries")
        object.__setattr__(self, "h", h)

    @property
    def gains(self) -> np.ndarray:
        """Per-tone channel vectors as an ``(n, m)`` array."""
        return self.h.reshape(self.n, self.m)

    @property
    def block_row(self) -> np.ndarray:
        """``N x MN`` matrix whose row ``n`` holds ``h_n^T`` in block ``n``."""
        g = self.gains
        out = np.zeros((self.n, self.n * self.m), dtype=complex)
        for i in range(self.n):
            out[i, i * self.m : (i + 1) * self.m] = g[i]
        return out

    def full(self) -> np.ndarray:
        return np.outer(self.h.conj(), self.h)

    def matrix(self, k: int) -> np.ndarray:
        """Dense ``MN x MN`` masked matrix for lag ``k``."""
        if abs(k) >= self.n:
            raise ValueError(f"lag {k} out of range for N={self.n}")
        if k < 0:
            return self.matrix(-k).conj().T
        m, g = self.m, self.gains
        out = np.zeros((self.n * m, self.n * m), dtype=complex)
        for i in range(self.n - k):
            out[i * m : (i + 1) * m, (i + k) * m : (i + k + 1) * m] = np.outer(
                g[i].conj(), g[i + k]
            )
        return out

    def aux_from_vector(self, s: np.ndarray) -> np.ndarray:
        return lagged_correlations(received_amplitudes(s, self.h, self.m, self.n))


def build_coupling(h: np.ndarray, m: int, n: int) -> CouplingMatrices:
    """Build the masked coupling family of a channel of length ``m * n``."""
    return CouplingMatrices(h=h, m=m, n=n)


class FreqVariant(enum.Enum):
    """Scalar per-tone gain families for frequency-domain coupling."""

    NORM = "norm"
    EFFECTIVE = "effective"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class FreqCouplingMatrices:
    """Coupling matrices at one-scalar-per-tone granularity.

    Every variant reduces to per-tone complex gains ``g_n`` with received
    amplitude ``g_n p_n``:

    * NORM: ``g_n = ||h_n||`` (MRT spatial beams).
    * EFFECTIVE: ``g_n = h_n^T w_n`` for fixed spatial beams ``w_n``.
    * ASYMPTOTIC: ``g_n = sqrt(E) * Lambda`` with all-ones masked
      diagonals scaled by the large-scale prefactors.
    """

    variant: FreqVariant
    gains: np.ndarray
    energy: float | None = None
    large_scale: float | None = None

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=complex).reshape(-1)
        if g.size < 1 or not np.all(np.isfinite(g)):
            raise ValueError("gains must be a non-empty finite vector")
        object.__setattr__(self, "gains", g)
        if self.variant is FreqVariant.ASYMPTOTIC:
            if self.energy is None or self.large_scale is None:
                raise ValueError("asymptotic coupling needs E and Lambda prefactors")
            if self.energy <= 0 or self.large_scale <= 0:
                raise ValueError("E and Lambda must be positive")

    @property
    def n(self) -> int:
        return self.gains.size

    @classmethod
    def norm(cls, h: np.ndarray, m: int, n: int) -> "FreqCouplingMatrices":
        h = np.asarray(h, dtype=complex).reshape(-1)
        _split_layout(h.size, m, n)
        return cls(FreqVariant.NORM, np.linalg.norm(h.reshape(n, m), axis=1))

    @classmethod
    def effective(cls, h: np.ndarray, beams: np.ndarray) -> "FreqCouplingMatrices":
        """Gains of channel ``h`` seen through per-tone unit beams ``(n, m)``."""
        beams = np.asarray(beams, dtype=complex)
        n, m = beams.shape
        h = np.asarray(h, dtype=complex).reshape(-1)
        _split_layout(h.size, m, n)
        return cls(FreqVariant.EFFECTIVE, np.sum(h.reshape(n, m) * beams, axis=1))

    @classmethod
    def asymptotic(cls, large_scale: float, energy: float, n: int) -> "FreqCouplingMatrices":
        g = np.full(n, np.sqrt(energy) * large_scale, dtype=complex)
        return cls(FreqVariant.ASYMPTOTIC, g, energy=energy, large_scale=large_scale)

    def base_matrix(self, k: int) -> np.ndarray:
        """Unscaled masked matrix: ones on diagonal ``k`` for ASYMPTOTIC."""
        if self.variant is FreqVariant.ASYMPTOTIC:
            return np.eye(self.n, k=k, dtype=complex)
        return self.matrix(k)

    def matrix(self, k: int) -> np.ndarray:
        """``N x N`` matrix keeping diagonal ``k`` of ``g^* g^T``."""
        if abs(k) >= self.n:
            raise ValueError(f"lag {k} out of range for N={self.n}")
        full = np.outer(self.gains.conj(), self.gains)
        return full * np.eye(self.n, k=k)

    def aux_from_vector(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=complex).reshape(-1)
        if p.size != self.n:
            raise ValueError(f"expected {self.n} entries, got {p.size}")
        return lagged_correlations(self.gains * p)


def vout_quartic(s: np.ndarray, coupling: CouplingMatrices, beta: BetaCoefficients) -> float:
    """Output voltage of one user from the stacked quartic form."""
    s = np.asarray(s, dtype=complex).reshape(-1)
    if s.size != coupling.h.size:
        raise ValueError(f"precoder length {s.size} != channel length {coupling.h.size}")
    return quartic_from_aux(coupling.aux_from_vector(s), beta)


def vout_time_oracle(
    s: np.ndarray,
    h: np.ndarray,
    beta: BetaCoefficients,
    m: int,
    n: int,
    samples_per_period: int | None = None,
    periods: int = 1,
    first_tone: int | None = None,
) -> float:
    """Brute-force output voltage by time-domain synthesis and averaging.

    Tones sit on the integer grid ``omega_n = (first_tone + n) * domega``
    with ``domega = 1``; the DC output does not depend on the absolute
    scale. The received signal ``y(t) = sqrt(2) Re{sum_n a_n e^{j omega_n t}}``
    is sampled uniformly over whole fundamental periods ``2 pi``. Equispaced
    samples integrate a trigonometric polynomial exactly when the sample
    count per period exceeds its highest frequency, which is
    ``4 * (first_tone + n - 1)`` for ``y^4``.

    Parameters
    ----------
    first_tone : int, optional
        Index of the lowest tone; defaults to ``n`` so that the grid
        satisfies ``omega_1 > (N - 1) domega / 2``.
    samples_per_period : int, optional
        Defaults to ``64 * n``.

    Raises
    ------
    ValueError
        If ``periods`` is not a positive integer or the sampling would alias.
    """
    if isinstance(periods, float):
        if not periods.is_integer():
            raise ValueError(f"averaging window must cover whole periods, got {periods}")
        periods = int(periods)
    if periods < 1:
        raise ValueError("periods must be >= 1")
    n0 = n if first_tone is None else int(first_tone)
    if n0 <= (n - 1) / 2:
        raise ValueError("lowest tone must exceed half the occupied span")
    sps = 64 * n if samples_per_period is None else int(samples_per_period)
    top = 4 * (n0 + n - 1)
    if sps <= top:
        raise ValueError(f"{sps} samples per period alias the order-4 span {top}")
    a = received_amplitudes(s, h, m, n)
    t = 2.0 * np.pi * np.arange(sps * periods) / sps
    omega = n0 + np.arange(n)
    y = np.sqrt(2.0) * np.real(np.exp(1j * np.outer(t, omega)) @ a)
    y2 = y * y
    return float(beta.beta2 * np.mean(y2) + beta.beta4 * np.mean(y2 * y2))


def vout_freq(p: np.ndarray, fc: FreqCouplingMatrices, beta: BetaCoefficients) -> float:
    """Output voltage of per-tone weights ``p`` through scalar tone gains."""
    if fc.variant is FreqVariant.ASYMPTOTIC and (fc.energy is None or fc.large_scale is None):
        raise ValueError("asymptotic coupling needs E and Lambda prefactors")
    return quartic_from_aux(fc.aux_from_vector(p), beta)


def vout_asymptotic_uniform(
    large_scale: float, energy: float, n: int, beta: BetaCoefficients
) -> float:
    """Closed-form asymptotic voltage of uniform power allocation.

    Parameters
    ----------
    large_scale : float
        Large-scale gain ``Lambda``.
    energy : float
        ``E = P * M``.
    n : int
        Number of tones.
    """
    if large_scale <= 0 or energy <= 0 or n < 1:
        raise ValueError("need Lambda > 0, E > 0 and N >= 1")
    el = energy * large_scale
    return (
        beta.beta2 * el
        + 1.5 * beta.beta4 * el**2
        + beta.beta4 * el**2 * n * (n - 1) * (2 * n - 1) / (2.0 * n * n)
    )


def weighted_sum_vout(
    s: np.ndarray,
    channels: np.ndarray,
    weights: np.ndarray,
    beta: BetaCoefficients,
    m: int,
    n: int,
) -> float:
    """Weighted sum of per-user output voltages.

    Parameters
    ----------
    channels : numpy.ndarray
        ``(K, m * n)`` stacked user channels.
    weights : numpy.ndarray
        ``K`` nonnegative weights.
    """
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != channels.shape[0]:
        raise ValueError("one weight per user required")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return float(
        sum(wq * vout_quartic(s, build_coupling(hq, m, n), beta) for wq, hq in zip(w, channels))
    )


def aux_from_gram(x: np.ndarray, coupling: CouplingMatrices | FreqCouplingMatrices) -> np.ndarray:
    """Auxiliary lag variables ``t_k = Tr{M_k X}`` for ``k = 0 .. N-1``.

    The lifted matrix is compressed to the tone domain first,
    ``Y = G X G^H`` with ``G`` the block-row channel matrix, after which
    ``t_k`` is the sum of the ``-k`` diagonal of ``Y``.

    Raises
    ------
    ValueError
        If ``t_0`` has an imaginary part above ``IMAG_RTOL * (1 + |t_0|)``,
        which signals a non-Hermitian input.
    """
    x = np.asarray(x, dtype=complex)
    if isinstance(coupling, CouplingMatrices):
        g = coupling.block_row
        n = coupling.n
    else:
        g = np.diag(coupling.gains)
        n = coupling.n
    if x.shape != (g.shape[1], g.shape[1]):
        raise ValueError(f"Gram matrix shape {x.shape} does not match {g.shape[1]}")
    y = g @ x @ g.conj().T
    t = np.array([np.trace(y, offset=-k) for k in range(n)], dtype=complex)
    if abs(t[0].imag) > IMAG_RTOL * (1.0 + abs(t[0])):
        raise ValueError(f"t_0 has imaginary residue {t[0].imag:.3e}")
    t[0] = t[0].real
    return t
