"""Max-min output-voltage designs over the full spatial-frequency precoder.

Each SCA iteration solves the semidefinite relaxation

    minimize -gamma  s.t.  Tr{A_q X} + c_bar_q + gamma <= 0  for all q,
                            Tr{X} <= P,  X >= 0,  gamma >= 0,

where ``gamma >= 0`` is harmless because the previous iterate already
achieves ``gamma = min_q v_q > 0``. Internally ``X`` is scaled by ``P`` and
``gamma`` by the magnitude of the previous objective so that the solver
sees unit-sized data.

Given the maximizing user ``q0`` the relaxation is equivalent to

    minimize Tr{A_q0 X}  s.t.  Tr{(A_q - A_q0) X} <= c_bar_q0 - c_bar_q (q != q0),
                               Tr{X} <= P,

a program with ``K`` constraints whose solutions can be reduced to rank
one when ``K <= 3``. The randomized variant keeps the high-rank SCA
solution and draws unit-modulus random rank-one candidates from it.
"""

from __future__ import annotations

import numpy as np

from ..channel import ChannelRealization
from ..rectenna import BetaCoefficients, WaveformPrecoder, quartic_from_aux
from ..sdp import Constraint, SdpProblem, SdpStatus, Sense, randomize_gaussian_rank1, rank_reduce, solve_sdp
from .baselines import baseline_mu_up
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

__all__ = ["MaxMinSolveError", "aux_from_lifted", "max_min_rr", "max_min_rand", "max_min_rand_sweep"]


class MaxMinSolveError(RuntimeError):
    """Raised when an SCA subproblem cannot be solved."""


def aux_from_lifted(gains: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``(K, N)`` lag variables ``Tr{M_{q,k} X}`` of a lifted matrix.

    Uses ``Y_q = G_q X G_q^H`` where ``G_q`` maps the stacked precoder to
    the tone amplitudes of user ``q``; ``t_{q,k}`` is the sum of the
    ``-k`` diagonal of ``Y_q``.
    """
    k, n, m = gains.shape
    xb = x.reshape(n, m, n, m)
    y = np.einsum("qia,iajb,qjb->qij", gains, xb, gains.conj())
    aux = np.stack([[np.trace(y[q], offset=-d) for d in range(n)] for q in range(k)])
    aux[:, 0] = aux[:, 0].real
    return aux


def _relaxed_vouts(aux, beta):
    return np.array([quartic_from_aux(t, beta) for t in aux])


def _user_matrices(gains, aux, beta):
    k = gains.shape[0]
    mats = [surrogate_matrix(gains[q : q + 1], aux[q : q + 1], [1.0], beta) for q in range(k)]
    cbar = np.array([linearization_offset(aux[q], beta) for q in range(k)])
    return mats, cbar


def _linear_values(mats, cbar, x):
    return np.array([float(np.real(np.vdot(a, x))) for a in mats]) + cbar


def _solve_relaxation(mats, cbar, power, scale, tol):
    """Solve the max-min relaxation in normalized variables; return ``X``."""
    d = mats[0].shape[0]
    cons = [
        Constraint({0: (power / scale) * a, 1: np.ones((1, 1))}, Sense.LE, -c / scale)
        for a, c in zip(mats, cbar)
    ]
    cons.append(Constraint({0: np.eye(d)}, Sense.LE, 1.0))
    prob = SdpProblem([d, 1], {1: -np.ones((1, 1))}, cons)
    sol = solve_sdp(prob, tol=tol, feastol=min(1e-9, tol), max_iter=200)
    if sol.status is not SdpStatus.OPTIMAL and sol.gap > 1e-6:
        raise MaxMinSolveError(f"relaxation failed: {sol.status.value} ({sol.message})")
    x = power * sol.x[0]
    return 0.5 * (x + x.conj().T), sol


def _reduction_problem(mats, cbar, q0, power):
    cons = [
        Constraint({0: mats[q] - mats[q0]}, Sense.LE, cbar[q0] - cbar[q])
        for q in range(len(mats))
        if q != q0
    ]
    cons.append(Constraint({0: np.eye(mats[0].shape[0])}, Sense.LE, power))
    return SdpProblem([mats[0].shape[0]], {0: mats[q0]}, cons, offset=cbar[q0])


def _initial_point(ch: ChannelRealization, power: float, cfg: AlgorithmConfig) -> np.ndarray:
    if cfg.init is Init.CUSTOM:
        x0 = np.asarray(cfg.custom_init, dtype=complex).reshape(-1)
        return np.sqrt(power) * x0 / np.linalg.norm(x0)
    return baseline_mu_up(ch, power).s.entries


def _sca_max_min(ch, beta, cfg, reduce_rank: bool):
    power = cfg.budget.total_power(ch.m)
    gains = ch.tones
    x0 = _initial_point(ch, power, cfg)
    xmat = np.outer(x0, x0.conj())
    vec = x0
    aux = aux_from_lifted(gains, xmat)
    v = _relaxed_vouts(aux, beta)
    trace = OptimizationTrace(stop_rule=cfg.stop_rule.value, initial_objective=-float(v.min()))
    f = trace.initial_objective
    for it in range(1, cfg.max_iter + 1):
        mats, cbar = _user_matrices(gains, aux, beta)
        prev = float(_linear_values(mats, cbar, xmat).max())
        xs, sol = _solve_relaxation(mats, cbar, power, abs(prev), cfg.sdp_tol)
        vals = _linear_values(mats, cbar, xs)
        q0 = int(np.argmax(vals))
        notes, extra = [], {"sdp_gap": sol.gap, "sdp_iterations": sol.iterations, "q0": q0}
        if reduce_rank:
            prob = _reduction_problem(mats, cbar, q0, power)
            red = rank_reduce([xs], prob)
            factor = red.factors[0]
            w = np.linalg.eigvalsh(red.x[0])
            extra["rr_eig_ratio"] = float(w[-2] / w[-1]) if w.size > 1 and w[-1] > 0 else 0.0
            before = prob.objective_value([xs]) - prob.offset
            after = prob.objective_value(red.x) - prob.offset
            extra["rr_objective_change"] = abs(after - before) / max(abs(before), 1e-300)
            extra["rr_steps"] = red.steps
            extra["rr_rank"] = red.ranks[0]
            if red.status != "ok":
                notes.append(f"rank reduction: {red.status}")
            new_vec = factor[:, 0] if factor.shape[1] else np.zeros(xs.shape[0], dtype=complex)
            if factor.shape[1] > 1:
                notes.append(f"rank reduction left rank {factor.shape[1]}")
                new_vec = factor[:, np.argmax(np.linalg.norm(factor, axis=0))]
            new_vec = np.sqrt(power) * new_vec / np.linalg.norm(new_vec)
            new_x = np.outer(new_vec, new_vec.conj())
        else:
            new_x = xs * (power / np.trace(xs).real)
            new_vec = None
        sur = float(_linear_values(mats, cbar, new_x).max())
        if sur > prev:
            notes.append("subproblem solution worse than previous iterate; kept previous")
            new_x, new_vec, sur = xmat, vec, prev
        if reduce_rank:
            step = rank1_step(new_vec, vec)
        else:
            step = float(np.linalg.norm(new_x - xmat) / np.linalg.norm(new_x))
        aux = aux_from_lifted(gains, new_x)
        v = _relaxed_vouts(aux, beta)
        f_new = -float(v.min())
        if cfg.stop_rule is StopRule.OBJECTIVE:
            step = abs(f_new - f) / abs(f_new)
        trace.records.append(
            IterationRecord(it, sur, f_new, v, aux, step, notes=notes, extra=extra)
        )
        xmat, vec, f = new_x, new_vec, f_new
        if step <= cfg.epsilon:
            break
    else:
        trace.status = "max_iter"
    return xmat, vec, trace, power


def max_min_rr(ch: ChannelRealization, beta: BetaCoefficients, cfg: AlgorithmConfig = AlgorithmConfig()) -> PrecoderResult:
    """Max-min design with rank reduction after every relaxation (``K <= 3``).

    Starts from the multi-user uniform-power waveform unless a custom
    start is configured. Trace records carry the eigenvalue ratio and the
    objective change of each rank reduction.
    """
    if not 1 <= ch.k <= 3:
        raise ValueError(f"rank-reduction max-min supports 1 <= K <= 3, got K={ch.k}")
    _, vec, trace, power = _sca_max_min(ch, beta, cfg, reduce_rank=True)
    s = WaveformPrecoder(vec, ch.m, ch.n, budget=power)
    v, _ = user_vouts(s.entries, ch.tones, beta)
    return PrecoderResult(s=s, vout=v, trace=trace)


def _pick_candidate(xmat, trace, ch, beta, power, t, rng):
    cands = randomize_gaussian_rank1(xmat, t, rng)
    scores = np.array([user_vouts(c, ch.tones, beta)[0].min() for c in cands])
    best = int(np.argmax(scores))
    s = WaveformPrecoder(cands[best], ch.m, ch.n, budget=power)
    v, _ = user_vouts(s.entries, ch.tones, beta)
    w = np.linalg.eigvalsh(xmat)
    return PrecoderResult(
        s=s,
        vout=v,
        trace=trace,
        extra={
            "candidate": best,
            "candidate_min_vout": scores,
            "relaxed_rank_ratio": float(w[-2] / w[-1]) if w.size > 1 else 0.0,
            "t_rand": t,
        },
    )


def max_min_rand(ch: ChannelRealization, beta: BetaCoefficients, cfg: AlgorithmConfig = AlgorithmConfig()) -> PrecoderResult:
    """Max-min design by SCA on the relaxation followed by randomization.

    After convergence ``cfg.t_rand`` candidates ``U Sigma^(1/2) v`` with
    random unit-modulus ``v`` are drawn from the final relaxed matrix and
    the candidate with the largest minimum voltage is returned (first one
    on ties). Candidates come from the stream ``cfg.rng(1)`` and are drawn
    as one ``(T, r)`` block, so the first candidate does not depend on ``T``.
    """
    return max_min_rand_sweep(ch, beta, cfg, [cfg.t_rand])[0]


def max_min_rand_sweep(ch: ChannelRealization, beta: BetaCoefficients, cfg: AlgorithmConfig, t_values) -> list:
    """``max_min_rand`` for several candidate counts sharing one SCA run.

    Every entry uses the same candidate stream, so the candidates for a
    smaller ``T`` are a prefix of those for a larger one.
    """
    t_values = [int(t) for t in t_values]
    if any(t < 1 for t in t_values):
        raise ValueError("candidate counts must be at least 1")
    xmat, _, trace, power = _sca_max_min(ch, beta, cfg, reduce_rank=False)
    state = cfg.rng(1).bit_generator.state
    out = []
    for t in t_values:
        gen = np.random.default_rng()
        gen.bit_generator.state = state
        out.append(_pick_candidate(xmat, trace, ch, beta, power, t, gen))
    return out
