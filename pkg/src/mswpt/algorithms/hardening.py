"""Designs that rely on channel hardening.

For many antennas the per-tone inner products concentrate:
``h_{q,n}^T h_{q',n'}^* / M`` tends to ``Lambda_q`` when ``(q, n) = (q', n')``
and to zero otherwise. With the precoder structure

    s_n = sqrt(P) s_bar_n / ||s_bar||,   s_bar_n = sum_q p_{q,n} h_{q,n}^* / sqrt(M),

the received amplitude of user ``q`` on tone ``n`` tends to
``sqrt(E) Lambda_q p_{q,n}`` with ``E = P M``, under the normalization
``sum_q Lambda_q ||p_q||^2 = 1``. The designs below optimize the per-user
tone weights ``p_q`` against this asymptotic voltage, so their cost does
not grow with ``M``.
"""

from __future__ import annotations

import numpy as np

from ..channel import ChannelRealization
from ..linalg import herm_eig, psd_sqrt
from ..rectenna import BetaCoefficients, WaveformPrecoder, lagged_correlations, quartic_from_aux
from ..sdp import Constraint, SdpProblem, SdpStatus, Sense, rank1_preserving_vector, rank_reduce, solve_sdp
from .common import (
    AlgorithmConfig,
    IterationRecord,
    OptimizationTrace,
    PrecoderResult,
    StopRule,
    lag_toeplitz,
    linearization_offset,
    rank1_step,
    user_vouts,
)
from .max_min import MaxMinSolveError

__all__ = [
    "asymptotic_state",
    "assemble_precoder",
    "che_wsum",
    "che_max_min_rr",
    "che_max_min_randomized",
]


def _check_lambda(large_scale):
    lam = np.atleast_1d(np.asarray(large_scale, dtype=float))
    if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise ValueError("large-scale gains must be positive")
    return lam


def asymptotic_state(p: np.ndarray, lam: np.ndarray, energy: float, beta: BetaCoefficients):
    """Asymptotic voltages and amplitude lags of tone weights ``p`` ``(K, N)``."""
    amps = np.sqrt(energy) * lam[:, None] * p
    aux = np.stack([lagged_correlations(a) for a in amps])
    v = np.array([quartic_from_aux(t, beta) for t in aux])
    return v, aux


def _block_matrices(lam, energy, aux, beta):
    """Per-user ``A'_q`` (``N x N``) and offsets ``c_bar'_q``."""
    mats = [energy * lam[q] ** 2 * lag_toeplitz(aux[q], beta) for q in range(lam.size)]
    cbar = np.array([linearization_offset(aux[q], beta) for q in range(lam.size)])
    return mats, cbar


def assemble_precoder(p: np.ndarray, ch: ChannelRealization, power: float) -> WaveformPrecoder:
    """``s = sqrt(P) s_bar / ||s_bar||`` with ``s_bar_n = sum_q p_{q,n} h_{q,n}^* / sqrt(M)``."""
    sbar = np.einsum("qn,qnm->nm", p, ch.tones.conj()) / np.sqrt(ch.m)
    norm = np.linalg.norm(sbar)
    if norm == 0:
        raise ValueError("assembled precoder is zero")
    return WaveformPrecoder(np.sqrt(power) * sbar / norm, ch.m, ch.n, budget=power)


def _resolve(large_scale, n_tones, energy, cfg, channels):
    lam = _check_lambda(large_scale)
    if channels is not None:
        if channels.k != lam.size or channels.n != n_tones:
            raise ValueError("channels do not match the number of users or tones")
        power = cfg.budget.total_power(channels.m)
        if energy is None:
            energy = power * channels.m
    if energy is None or not energy > 0:
        raise ValueError("E = P M must be given when no channels are supplied")
    return lam, float(energy)


def _finish(p, lam, energy, beta, trace, channels, cfg, extra):
    va, _ = asymptotic_state(p, lam, energy, beta)
    if channels is None:
        return PrecoderResult(s=None, vout=va, trace=trace, p=p, vout_asymptotic=va, extra=extra)
    power = cfg.budget.total_power(channels.m)
    s = assemble_precoder(p, channels, power)
    v, _ = user_vouts(s.entries, channels.tones, beta)
    return PrecoderResult(s=s, vout=v, trace=trace, p=p, vout_asymptotic=va, extra=extra)


def _uniform_start(lam, n):
    return np.outer(1.0 / np.sqrt(lam.size * n * lam), np.ones(n)).astype(complex)


def che_wsum(
    large_scale,
    weights,
    beta: BetaCoefficients,
    cfg: AlgorithmConfig = AlgorithmConfig(),
    n_tones: int | None = None,
    energy: float | None = None,
    channels: ChannelRealization | None = None,
) -> PrecoderResult:
    """Weighted-sum design on the asymptotic voltage.

    Each iteration minimizes ``sum_q w_q p_q^H A'_q p_q`` subject to
    ``sum_q Lambda_q ||p_q||^2 = 1``. The block-diagonal structure makes
    the minimizer the smallest eigenvector of one block
    ``w_q A'_q / Lambda_q``, rescaled by ``Lambda_q^(-1/2)``; near-ties between
    blocks are broken with ``cfg.rng(2)`` and noted in the trace.

    Parameters
    ----------
    large_scale : array_like
        ``Lambda_q`` per user.
    weights : array_like
    n_tones : int, optional
        Taken from ``channels`` when omitted.
    energy : float, optional
        ``E = P M``; derived from ``cfg.budget`` and ``channels`` when omitted.
    channels : ChannelRealization, optional
        When given, the precoder is assembled and true voltages reported.
    """
    n = n_tones if n_tones is not None else channels.n
    lam, energy = _resolve(large_scale, n, energy, cfg, channels)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != lam.size or np.any(w < 0) or not np.any(w > 0):
        raise ValueError("need one nonnegative weight per user, not all zero")
    rng = cfg.rng(2)
    p = _uniform_start(lam, n)
    v, aux = asymptotic_state(p, lam, energy, beta)
    f = -float(w @ v)
    trace = OptimizationTrace(stop_rule=cfg.stop_rule.value, initial_objective=f)
    for it in range(1, cfg.max_iter + 1):
        mats, cbar = _block_matrices(lam, energy, aux, beta)
        eigs = [herm_eig(w[q] * mats[q] / lam[q]) for q in range(lam.size)]
        lows = np.array([e.eigenvalues[0] for e in eigs])
        scale = max(np.max(np.abs(lows)), 1e-300)
        tied = np.flatnonzero(lows <= lows.min() + 1e-10 * scale)
        notes = []
        chosen = int(tied[0]) if tied.size == 1 else int(rng.choice(tied))
        if tied.size > 1:
            notes.append(f"tie between users {tied.tolist()}; chose {chosen}")
        inner = eigs[chosen].eigenvalues
        degenerate = inner.size > 1 and inner[1] - inner[0] <= 1e-10 * max(np.abs(inner).max(), 1e-300)
        p_new = np.zeros_like(p)
        p_new[chosen] = eigs[chosen].eigenvectors[:, 0] / np.sqrt(lam[chosen])
        v_new, aux_new = asymptotic_state(p_new, lam, energy, beta)
        f_new = -float(w @ v_new)
        sur = float(lows.min() + w @ cbar)
        if cfg.stop_rule is StopRule.FROBENIUS:
            step = rank1_step(p_new.reshape(-1), p.reshape(-1))
        else:
            step = abs(f_new - f) / abs(f_new)
        trace.records.append(
            IterationRecord(it, sur, f_new, v_new, aux_new, step, degenerate=bool(degenerate or tied.size > 1),
                            notes=notes, extra={"user": chosen})
        )
        p, aux, f = p_new, aux_new, f_new
        if step <= cfg.epsilon:
            break
    else:
        trace.status = "max_iter"
    return _finish(p, lam, energy, beta, trace, channels, cfg, {"weights": w})


def _blockdiag_step(p_new, p_old):
    num = sum(
        np.linalg.norm(np.outer(a, a.conj()) - np.outer(b, b.conj())) ** 2 for a, b in zip(p_new, p_old)
    )
    den = sum(np.linalg.norm(a) ** 4 for a in p_new)
    return float(np.sqrt(num / den)) if den > 0 else np.inf


def _solve_che_relaxation(mats, cbar, lam, scale, tol):
    """Multi-block max-min relaxation in ``Y_q = Lambda_q X_q``; returns ``X_q``."""
    k, n = lam.size, mats[0].shape[0]
    cons = [
        Constraint({q: mats[q] / (lam[q] * scale), k: np.ones((1, 1))}, Sense.LE, -cbar[q] / scale)
        for q in range(k)
    ]
    cons.append(Constraint({q: np.eye(n) for q in range(k)}, Sense.EQ, 1.0))
    prob = SdpProblem([n] * k + [1], {k: -np.ones((1, 1))}, cons)
    sol = solve_sdp(prob, tol=tol, feastol=min(1e-9, tol), max_iter=200)
    if sol.status is not SdpStatus.OPTIMAL and sol.gap > 1e-6:
        raise MaxMinSolveError(f"relaxation failed: {sol.status.value} ({sol.message})")
    xs = [0.5 * (y + y.conj().T) / lam[q] for q, y in enumerate(sol.x[:k])]
    return xs, sol


def _che_reduction_problem(mats, cbar, lam, q0):
    """Reduced program: user ``q0`` carries the objective, the others are coupled to it."""
    k, n = lam.size, mats[0].shape[0]
    cons = [
        Constraint({q: mats[q], q0: -mats[q0]}, Sense.LE, cbar[q0] - cbar[q]) for q in range(k) if q != q0
    ]
    cons.append(Constraint({q: lam[q] * np.eye(n) for q in range(k)}, Sense.EQ, 1.0))
    return SdpProblem([n] * k, {q0: mats[q0]}, cons, offset=cbar[q0])


def _preserving_factor(x, b1, b2, rng):
    """Rank-one ``p`` with ``p^H B_i p = Tr{B_i X}`` for ``i = 1, 2``."""
    r = psd_sqrt(x)
    dec = herm_eig(r @ b1 @ r)
    u = dec.eigenvectors
    q = u.conj().T @ r @ b2 @ r @ u
    v = rank1_preserving_vector(q, rng)
    return r @ u @ v


def _linear_values(mats, cbar, blocks):
    return np.array([float(np.real(np.vdot(a, x))) for a, x in zip(mats, blocks)]) + cbar


def _che_max_min(large_scale, beta, cfg, n_tones, energy, channels, randomized: bool):
    n = n_tones if n_tones is not None else channels.n
    lam, energy = _resolve(large_scale, n, energy, cfg, channels)
    k = lam.size
    rng = cfg.rng(3)
    p = _uniform_start(lam, n)
    v, aux = asymptotic_state(p, lam, energy, beta)
    f = -float(v.min())
    trace = OptimizationTrace(stop_rule=cfg.stop_rule.value, initial_objective=f)
    for it in range(1, cfg.max_iter + 1):
        mats, cbar = _block_matrices(lam, energy, aux, beta)
        cur = [np.outer(a, a.conj()) for a in p]
        prev = float(_linear_values(mats, cbar, cur).max())
        xs, sol = _solve_che_relaxation(mats, cbar, lam, abs(prev), cfg.sdp_tol)
        q0 = int(np.argmax(_linear_values(mats, cbar, xs)))
        notes, extra = [], {"sdp_gap": sol.gap, "q0": q0}
        p_new = np.zeros_like(p)
        if randomized:
            res1, res2 = [], []
            for q in range(k):
                b1 = -mats[q] if q == q0 else mats[q]
                b2 = lam[q] * np.eye(n)
                vec = _preserving_factor(xs[q], b1, b2, rng)
                p_new[q] = vec
                for b, res in ((b1, res1), (b2, res2)):
                    lhs = float(np.real(np.vdot(vec, b @ vec)))
                    rhs = float(np.real(np.vdot(b, xs[q])))
                    res.append(abs(lhs - rhs) / max(abs(rhs), np.linalg.norm(b) * np.trace(xs[q]).real, 1e-300))
            extra["identity_b1"] = max(res1)
            extra["identity_b2"] = max(res2)
        else:
            prob = _che_reduction_problem(mats, cbar, lam, q0)
            red = rank_reduce(xs, prob)
            extra["ranks"] = list(red.ranks)
            extra["rank_sq_sum"] = int(sum(r * r for r in red.ranks))
            extra["eig_ratios"] = [
                float(np.linalg.eigvalsh(x)[-2] / np.linalg.eigvalsh(x)[-1]) if np.trace(x).real > 0 and n > 1 else 0.0
                for x in red.x
            ]
            before = prob.objective_value(xs) - prob.offset
            after = prob.objective_value(red.x) - prob.offset
            extra["rr_objective_change"] = abs(after - before) / max(abs(before), 1e-300)
            if red.status != "ok":
                notes.append(f"rank reduction: {red.status}")
            for q in range(k):
                fac = red.factors[q]
                if fac.shape[1] == 1:
                    p_new[q] = fac[:, 0]
                elif fac.shape[1] > 1:
                    b1 = -mats[q] if q == q0 else mats[q]
                    p_new[q] = _preserving_factor(red.x[q], b1, lam[q] * np.eye(n), rng)
                    notes.append(f"block {q} kept rank {fac.shape[1]}; used a trace-preserving factor")
        total = float(np.sum(lam * np.sum(np.abs(p_new) ** 2, axis=1)))
        p_new = p_new / np.sqrt(total)
        sur = float(_linear_values(mats, cbar, [np.outer(a, a.conj()) for a in p_new]).max())
        if sur > prev:
            notes.append("subproblem solution worse than previous iterate; kept previous")
            p_new, sur = p, prev
        v_new, aux_new = asymptotic_state(p_new, lam, energy, beta)
        f_new = -float(v_new.min())
        if randomized or cfg.stop_rule is StopRule.OBJECTIVE:
            step = abs(sur - prev) / abs(sur) if randomized else abs(f_new - f) / abs(f_new)
        else:
            step = _blockdiag_step(p_new, p)
        trace.records.append(IterationRecord(it, sur, f_new, v_new, aux_new, step, notes=notes, extra=extra))
        p, aux, f = p_new, aux_new, f_new
        if step <= cfg.epsilon:
            break
    else:
        trace.status = "max_iter"
    if randomized:
        trace.stop_rule = StopRule.OBJECTIVE.value
    return _finish(p, lam, energy, beta, trace, channels, cfg, {})


def che_max_min_rr(
    large_scale,
    beta: BetaCoefficients,
    cfg: AlgorithmConfig = AlgorithmConfig(),
    n_tones: int | None = None,
    energy: float | None = None,
    channels: ChannelRealization | None = None,
) -> PrecoderResult:
    """Max-min design on the asymptotic voltage with rank reduction.

    Each iteration solves the ``K``-block relaxation, then reduces the
    ranks on the program in which the maximizing user ``q0`` carries the
    objective and every other user ``q`` is coupled to it through
    ``Tr{A'_q X_q} - Tr{A'_q0 X_q0} <= c_bar'_q0 - c_bar'_q``. Stops on the
    relative change of the block-diagonal Gram matrix ``diag(p_q p_q^H)``.
    """
    return _che_max_min(large_scale, beta, cfg, n_tones, energy, channels, randomized=False)


def che_max_min_randomized(
    large_scale,
    beta: BetaCoefficients,
    cfg: AlgorithmConfig = AlgorithmConfig(),
    n_tones: int | None = None,
    energy: float | None = None,
    channels: ChannelRealization | None = None,
) -> PrecoderResult:
    """Max-min design on the asymptotic voltage with one randomized rank-one step.

    For every block ``X_q`` of the relaxation, with ``R = X_q^(1/2)`` and the
    eigendecomposition ``R B_1 R = U Sigma U^H``, the update
    ``p_q = R U v`` uses a unit-modulus ``v`` with ``v^H (U^H R B_2 R U) v``
    equal to the trace, so both ``Tr{B_1 X_q}`` and ``Tr{B_2 X_q}`` are kept.
    Here ``B_1`` is ``A'_q`` (``-A'_q0`` for the maximizing user) and
    ``B_2 = Lambda_q I``. Iterations stop on the relative change of the
    relaxation objective, since the randomized weights need not converge.
    """
    return _che_max_min(large_scale, beta, cfg, n_tones, energy, channels, randomized=True)
