"""Rank-one SCA designs: single user, weighted sum and its simplified form.

Each iteration minimizes ``Tr{A_1 X}`` over ``Tr{X} <= P``, whose
solution is ``X = x x^H`` with ``x = sqrt(P)`` times the eigenvector of
the smallest eigenvalue of ``A_1``. The designs differ only in the
channel seen by the iteration: the spatial-frequency channel itself, the
per-tone norms (MRT beams, single user), or effective scalar channels
through fixed per-tone beams.
"""

from __future__ import annotations

import numpy as np

from ..channel import ChannelRealization
from ..linalg import dominant_eigvec, min_eigvec
from ..rectenna import BetaCoefficients, WaveformPrecoder
from .baselines import baseline_ass, mrt_directions
from .common import (
    AlgorithmConfig,
    Init,
    IterationRecord,
    OptimizationTrace,
    PrecoderResult,
    StopRule,
    linearization_offset,
    rank1_step,
    surrogate_matrix,
    user_vouts,
)

__all__ = ["sca_rank1", "su_wpt", "wsum", "wsum_s"]


def sca_rank1(
    gains: np.ndarray,
    weights: np.ndarray,
    beta: BetaCoefficients,
    power: float,
    x0: np.ndarray,
    cfg: AlgorithmConfig,
) -> tuple[np.ndarray, OptimizationTrace]:
    """Run the eigenvector SCA on ``(K, N, M)`` gains from ``x0``.

    Returns the final (or, on MAX_ITER, the best) iterate and its trace.
    The objective recorded is ``-sum_q w_q v_q``.
    """
    w = np.asarray(weights, dtype=float)
    x = np.asarray(x0, dtype=complex).reshape(-1)
    v, aux = user_vouts(x, gains, beta)
    f = -float(w @ v)
    trace = OptimizationTrace(stop_rule=cfg.stop_rule.value, initial_objective=f)
    best = (f, x)
    for it in range(1, cfg.max_iter + 1):
        a1 = surrogate_matrix(gains, aux, w, beta)
        cbar = float(sum(wq * linearization_offset(t, beta) for wq, t in zip(w, aux)))
        ep = min_eigvec(a1)
        x_new = np.sqrt(power) * ep.vector
        v_new, aux_new = user_vouts(x_new, gains, beta)
        f_new = -float(w @ v_new)
        if cfg.stop_rule is StopRule.FROBENIUS:
            step = rank1_step(x_new, x)
        else:
            step = abs(f_new - f) / abs(f_new) if f_new != 0 else np.inf
        trace.records.append(
            IterationRecord(
                iteration=it,
                surrogate=power * ep.value + cbar,
                objective=f_new,
                vout=v_new,
                aux=aux_new,
                step=step,
                degenerate=ep.degenerate,
            )
        )
        x, aux, f = x_new, aux_new, f_new
        if f < best[0]:
            best = (f, x)
        if step <= cfg.epsilon:
            return x, trace
    trace.status = "max_iter"
    return best[1], trace


def _check_weights(weights, k):
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != k:
        raise ValueError(f"{w.size} weights for {k} users")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be nonnegative and not all zero")
    return w


def su_wpt(ch: ChannelRealization, beta: BetaCoefficients, cfg: AlgorithmConfig = AlgorithmConfig()) -> PrecoderResult:
    """Single-user design: MRT spatial beams with SCA frequency allocation.

    The spatial beam on every tone is matched to the channel, so the
    iteration runs on the ``N`` per-tone channel norms. Tones with zero
    gain receive no power.
    """
    if ch.k != 1:
        raise ValueError("single-user design needs exactly one user")
    power = cfg.budget.total_power(ch.m)
    beams, active = mrt_directions(ch.tones[0])
    norms = np.linalg.norm(ch.tones[0], axis=1)
    gains = norms.astype(complex)[None, :, None]
    if cfg.init is Init.UP_MRT:
        p0 = np.where(active, np.sqrt(power / max(active.sum(), 1)), 0.0)
    elif cfg.init is Init.ASS:
        p0 = np.zeros(ch.n)
        p0[baseline_ass(ch, power).extra["tone"]] = np.sqrt(power)
    else:
        p0 = np.asarray(cfg.custom_init, dtype=complex).reshape(-1)
        if p0.size != ch.n:
            raise ValueError("custom init for the single-user design is a length-N weight vector")
        p0 = np.sqrt(power) * p0 / np.linalg.norm(p0)
    p, trace = sca_rank1(gains, np.ones(1), beta, power, p0, cfg)
    p = np.where(active, p, 0.0)
    s = WaveformPrecoder(p[:, None] * beams, ch.m, ch.n, budget=power)
    v, _ = user_vouts(s.entries, ch.tones, beta)
    return PrecoderResult(s=s, vout=v, trace=trace, p=p[None, :])


def _weighted_mrt_init(ch: ChannelRealization, weights: np.ndarray, power: float) -> np.ndarray:
    beams, _ = mrt_directions(ch.tones)
    w = np.einsum("q,qnm->nm", weights, beams)
    norms = np.linalg.norm(w, axis=1)
    active = norms > 0
    w[active] /= norms[active, None]
    return np.sqrt(power / max(active.sum(), 1)) * w


def wsum(
    ch: ChannelRealization,
    weights,
    beta: BetaCoefficients,
    cfg: AlgorithmConfig = AlgorithmConfig(),
) -> PrecoderResult:
    """Weighted-sum voltage maximization over the full spatial-frequency precoder.

    The default start puts uniform power on each tone with the normalized
    weighted sum of the users' MRT beams.
    """
    w = _check_weights(weights, ch.k)
    power = cfg.budget.total_power(ch.m)
    if cfg.init is Init.UP_MRT:
        x0 = _weighted_mrt_init(ch, w, power)
    elif cfg.init is Init.ASS:
        x0 = baseline_ass(ch, power, user=int(np.argmax(w))).s.entries
    else:
        x0 = np.asarray(cfg.custom_init, dtype=complex)
        x0 = np.sqrt(power) * x0 / np.linalg.norm(x0)
    x, trace = sca_rank1(ch.tones, w, beta, power, x0, cfg)
    s = WaveformPrecoder(x, ch.m, ch.n, budget=power)
    v, _ = user_vouts(s.entries, ch.tones, beta)
    return PrecoderResult(s=s, vout=v, trace=trace, extra={"weights": w})


def wsum_s(
    ch: ChannelRealization,
    weights,
    beta: BetaCoefficients,
    cfg: AlgorithmConfig = AlgorithmConfig(),
) -> PrecoderResult:
    """Simplified weighted sum: fixed dominant-eigenvector beams, SCA over tone weights.

    The beam on tone ``n`` is the dominant eigenvector of
    ``sum_q w_q h_{q,n}^* h_{q,n}^T``; the iteration then optimizes one
    complex weight per tone through the users' effective channels.
    """
    w = _check_weights(weights, ch.k)
    power = cfg.budget.total_power(ch.m)
    beams = np.zeros((ch.n, ch.m), dtype=complex)
    degenerate = []
    for i in range(ch.n):
        hs = ch.tones[:, i, :]
        cov = np.einsum("q,qa,qb->ab", w, hs.conj(), hs)
        if np.allclose(cov, 0):
            continue
        ep = dominant_eigvec(cov)
        beams[i] = ep.vector
        degenerate.append(ep.degenerate)
    eff = np.einsum("qnm,nm->qn", ch.tones, beams)[:, :, None]
    active = np.any(np.abs(eff[:, :, 0]) > 0, axis=0)
    if cfg.init is Init.CUSTOM:
        p0 = np.asarray(cfg.custom_init, dtype=complex).reshape(-1)
        p0 = np.sqrt(power) * p0 / np.linalg.norm(p0)
    else:
        p0 = np.where(active, np.sqrt(power / max(active.sum(), 1)), 0.0)
    p, trace = sca_rank1(eff, w, beta, power, p0, cfg)
    s = WaveformPrecoder(p[:, None] * beams, ch.m, ch.n, budget=power)
    v, _ = user_vouts(s.entries, ch.tones, beta)
    return PrecoderResult(
        s=s, vout=v, trace=trace, p=p[None, :], extra={"weights": w, "beams": beams, "beam_degenerate": degenerate}
    )
