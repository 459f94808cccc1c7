"""Closed-form reference waveforms."""

from __future__ import annotations

import numpy as np

from ..channel import ChannelRealization
from ..rectenna import BetaCoefficients, WaveformPrecoder
from .common import PrecoderResult, user_vouts

__all__ = [
    "mrt_directions",
    "baseline_ass",
    "baseline_up_mrt",
    "baseline_mu_up",
    "fairness_weights",
    "tdma_compose",
]


def mrt_directions(tones: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit MRT beams ``h_n^* / ||h_n||`` per tone and the active-tone mask.

    Tones with zero gain get a zero beam and are flagged inactive.
    """
    norms = np.linalg.norm(tones, axis=-1)
    active = norms > 0
    safe = np.where(active, norms, 1.0)
    return np.where(active[..., None], tones.conj() / safe[..., None], 0.0), active


def _result(s, ch: ChannelRealization, power: float, beta, **extra) -> PrecoderResult:
    prec = WaveformPrecoder(s, ch.m, ch.n, budget=power)
    v = user_vouts(prec.entries, ch.tones, beta)[0] if beta is not None else None
    return PrecoderResult(s=prec, vout=v, extra=extra)


def baseline_ass(ch: ChannelRealization, power: float, beta: BetaCoefficients | None = None, user: int = 0) -> PrecoderResult:
    """Adaptive single sinewave: all power on the strongest tone of ``user``, MRT.

    Ties between tones go to the lowest index.
    """
    tones = ch.tones[user]
    gains = np.sum(np.abs(tones) ** 2, axis=1)
    best = int(np.argmax(gains))
    s = np.zeros((ch.n, ch.m), dtype=complex)
    if gains[best] > 0:
        s[best] = np.sqrt(power) * tones[best].conj() / np.sqrt(gains[best])
    return _result(s, ch, power, beta, tone=best)


def baseline_up_mrt(ch: ChannelRealization, power: float, beta: BetaCoefficients | None = None, user: int = 0) -> PrecoderResult:
    """Uniform power over the active tones of ``user`` with MRT per tone."""
    beams, active = mrt_directions(ch.tones[user])
    count = int(active.sum())
    s = beams * np.sqrt(power / count) if count else beams
    return _result(s, ch, power, beta)


def baseline_mu_up(ch: ChannelRealization, power: float, beta: BetaCoefficients | None = None) -> PrecoderResult:
    """Multi-user uniform power: ``w_n = sum_q h_{q,n}^* / ||h_{q,n}||`` scaled to the budget."""
    beams, _ = mrt_directions(ch.tones)
    w = beams.sum(axis=0)
    norm = np.linalg.norm(w)
    s = np.sqrt(power) * w / norm if norm > 0 else w
    return _result(s, ch, power, beta)


def fairness_weights(ch: ChannelRealization, power: float, beta: BetaCoefficients) -> np.ndarray:
    """Weights inversely proportional to each user's stand-alone UP-MRT voltage."""
    alpha = np.array([baseline_up_mrt(ch, power, beta, user=q).vout[q] for q in range(ch.k)])
    if np.any(alpha <= 0):
        raise ValueError("a user has zero stand-alone voltage")
    inv = 1.0 / alpha
    return inv / inv.sum()


def tdma_compose(single_user_vouts, shares) -> np.ndarray:
    """Per-user average voltage when user ``q`` is served alone for a share of time.

    Parameters
    ----------
    single_user_vouts : array_like or list of PrecoderResult
        Voltage of user ``q`` when the waveform is designed for it alone.
        For results, entry ``q`` of the ``q``-th result's ``vout`` is used.
    shares : array_like
        Nonnegative slot fractions summing to at most one.
    """
    vals = []
    for q, item in enumerate(single_user_vouts):
        vals.append(float(item.vout[q] if isinstance(item, PrecoderResult) else item))
    shares = np.asarray(shares, dtype=float)
    if shares.size != len(vals):
        raise ValueError("one share per user required")
    if np.any(shares < 0) or shares.sum() > 1 + 1e-12:
        raise ValueError("shares must be nonnegative and sum to at most one")
    return shares * np.array(vals)
