"""Shared configuration, trace records and surrogate building blocks.

Every successive convex approximation (SCA) in this package linearizes
the concave part of the quartic voltage model. Writing the voltage of a
user as ``v(t) = beta2 t_0 - g(t)`` with ``g(t) = t^H A_0 t`` and
``A_0 = diag(-3/2 beta4, -3 beta4, ..., -3 beta4)``, the first-order
expansion around a previous point ``t'`` bounds ``g`` from above, and
the approximate problem becomes linear in the lifted matrix ``X``:

    -v(X) <= Tr{A_1 X} + c_bar,   c_bar = -t'^H A_0 t',

where ``A_1 = G^H T G`` with ``G`` the block-row channel matrix and ``T``
a Hermitian Toeplitz matrix whose diagonal is ``-(beta2 + 3 beta4 t'_0)``
and whose ``k``-th upper (lower) diagonal is ``-3 beta4 conj(t'_k)``
(``-3 beta4 t'_k``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..rectenna import BetaCoefficients, lagged_correlations, quartic_from_aux

__all__ = [
    "Budget",
    "Init",
    "StopRule",
    "AlgorithmConfig",
    "IterationRecord",
    "OptimizationTrace",
    "PrecoderResult",
    "dbm_to_watts",
    "lag_toeplitz",
    "linearization_offset",
    "surrogate_matrix",
    "tone_amplitudes",
    "user_vouts",
    "rank1_step",
    "gram_step",
]


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Budget:
    """Transmit budget: total power ``P`` or a fixed EIRP ``M * P``.

    Attributes
    ----------
    kind : str
        ``"power"`` or ``"eirp"``.
    watts : float
        ``P`` for a power budget, ``M * P`` for an EIRP budget.
    """

    kind: str = "power"
    watts: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "eirp"):
            raise ValueError(f"unknown budget kind {self.kind!r}")
        if not self.watts > 0:
            raise ValueError("budget must be positive")

    @classmethod
    def power(cls, watts: float) -> "Budget":
        return cls("power", watts)

    @classmethod
    def eirp_dbm(cls, dbm: float) -> "Budget":
        return cls("eirp", dbm_to_watts(dbm))

    def total_power(self, m: int) -> float:
        """Transmit power ``P`` for an ``m``-antenna array."""
        return self.watts if self.kind == "power" else self.watts / m


class Init(enum.Enum):
    UP_MRT = "up_mrt"
    ASS = "ass"
    CUSTOM = "custom"


class StopRule(enum.Enum):
    FROBENIUS = "frobenius"
    OBJECTIVE = "objective"


@dataclass(frozen=True)
class AlgorithmConfig:
    """Knobs shared by all iterative designs.

    Attributes
    ----------
    epsilon : float
        Relative stopping threshold.
    max_iter : int
    init : Init
        Starting point. CUSTOM uses ``custom_init``.
    custom_init : numpy.ndarray, optional
        Starting precoder (or per-tone weights for frequency-domain designs).
    t_rand : int
        Number of randomization candidates.
    budget : Budget
    stop_rule : StopRule
        FROBENIUS compares successive lifted matrices, OBJECTIVE compares
        successive objective values.
    sdp_tol : float
        Relative duality gap requested from the SDP solver.
    seed : int
        Root seed of the randomized steps.
    """

    epsilon: float = 1e-3
    max_iter: int = 200
    init: Init = Init.UP_MRT
    custom_init: np.ndarray | None = None
    t_rand: int = 50
    budget: Budget = field(default_factory=Budget)
    stop_rule: StopRule = StopRule.FROBENIUS
    sdp_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.t_rand < 1:
            raise ValueError("t_rand must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        object.__setattr__(self, "init", Init(self.init))
        object.__setattr__(self, "stop_rule", StopRule(self.stop_rule))
        if self.init is Init.CUSTOM and self.custom_init is None:
            raise ValueError("CUSTOM init needs custom_init")

    def rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=tuple(key)))


@dataclass
class IterationRecord:
    """Diagnostics of one SCA iteration.

    ``surrogate`` is the approximate-problem objective at the new iterate
    (linearized around the previous one); ``objective`` is the exact
    objective at the new iterate, in the same minimization sense.
    """

    iteration: int
    surrogate: float
    objective: float
    vout: np.ndarray
    aux: np.ndarray
    step: float
    degenerate: bool = False
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass
class OptimizationTrace:
    records: list = field(default_factory=list)
    status: str = "converged"
    stop_rule: str = StopRule.FROBENIUS.value
    initial_objective: float = np.nan

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def surrogates(self) -> np.ndarray:
        return np.array([r.surrogate for r in self.records])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def monotone_sequence(self) -> np.ndarray:
        """Initial objective followed by every surrogate value."""
        return np.concatenate([[self.initial_objective], self.surrogates])


@dataclass
class PrecoderResult:
    """Output of a waveform design.

    Attributes
    ----------
    s : WaveformPrecoder
    vout : numpy.ndarray
        True output voltage per user.
    trace : OptimizationTrace or None
    p : numpy.ndarray, optional
        Per-user per-tone weights of the hardening-based designs ``(K, N)``.
    vout_asymptotic : numpy.ndarray, optional
        Asymptotic voltage per user of the hardening-based designs.
    extra : dict
    """

    s: object
    vout: np.ndarray
    trace: OptimizationTrace | None = None
    p: np.ndarray | None = None
    vout_asymptotic: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def min_vout(self) -> float:
        return float(np.min(self.vout))

    @property
    def status(self) -> str:
        return self.trace.status if self.trace is not None else "closed_form"


def lag_toeplitz(t: np.ndarray, beta: BetaCoefficients) -> np.ndarray:
    """Hermitian Toeplitz kernel ``T`` of the linearized objective."""
    t = np.asarray(t, dtype=complex)
    n = t.size
    out = np.zeros((n, n), dtype=complex)
    out[np.diag_indices(n)] = -(beta.beta2 + 3.0 * beta.beta4 * t[0].real)
    for k in range(1, n):
        idx = np.arange(n - k)
        out[idx, idx + k] = -3.0 * beta.beta4 * np.conj(t[k])
        out[idx + k, idx] = -3.0 * beta.beta4 * t[k]
    return out


def linearization_offset(t: np.ndarray, beta: BetaCoefficients) -> float:
    """``c_bar = -t^H A_0 t``, the constant of the linearized objective."""
    t = np.asarray(t)
    return 1.5 * beta.beta4 * float(t[0].real) ** 2 + 3.0 * beta.beta4 * float(
        np.sum(np.abs(t[1:]) ** 2)
    )


def surrogate_matrix(gains: np.ndarray, aux: np.ndarray, weights, beta: BetaCoefficients) -> np.ndarray:
    """Weighted linearized objective matrix ``sum_q w_q G_q^H T_q G_q``.

    Parameters
    ----------
    gains : numpy.ndarray
        ``(K, N, M)`` per-user per-tone channel vectors (``M = 1`` for
        scalar tone gains).
    aux : numpy.ndarray
        ``(K, N)`` lag variables of the previous iterate.
    weights : array_like
        ``K`` user weights.

    Returns
    -------
    numpy.ndarray
        ``(N M, N M)`` Hermitian matrix in frequency-major layout.
    """
    k, n, m = gains.shape
    w = np.asarray(weights, dtype=float)
    tt = np.stack([lag_toeplitz(aux[q], beta) for q in range(k)])
    a = np.einsum("q,qia,qij,qjb->iajb", w, gains.conj(), tt, gains)
    a = a.reshape(n * m, n * m)
    return 0.5 * (a + a.conj().T)


def tone_amplitudes(s: np.ndarray, gains: np.ndarray) -> np.ndarray:
    """``(K, N)`` received amplitudes of precoder ``s`` through ``(K, N, M)`` gains."""
    k, n, m = gains.shape
    return np.einsum("qnm,nm->qn", gains, np.asarray(s).reshape(n, m))


def user_vouts(s: np.ndarray, gains: np.ndarray, beta: BetaCoefficients):
    """Per-user voltages and lag variables of a precoder."""
    amps = tone_amplitudes(s, gains)
    aux = np.stack([lagged_correlations(a) for a in amps])
    v = np.array([quartic_from_aux(t, beta) for t in aux])
    return v, aux


def rank1_step(x_new: np.ndarray, x_old: np.ndarray) -> float:
    """``||x x^H - y y^H||_F / ||x x^H||_F`` without forming the matrices."""
    a = np.vdot(x_new, x_new).real
    b = np.vdot(x_old, x_old).real
    c = abs(np.vdot(x_old, x_new)) ** 2
    num = max(a * a + b * b - 2.0 * c, 0.0)
    return float(np.sqrt(num) / a) if a > 0 else np.inf


def gram_step(x_new: np.ndarray, x_old: np.ndarray) -> float:
    den = np.linalg.norm(x_new)
    return float(np.linalg.norm(x_new - x_old) / den) if den > 0 else np.inf
