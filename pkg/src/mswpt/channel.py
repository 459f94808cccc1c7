"""Frequency-selective multi-user channel generation.

Channels follow a tapped-delay-line model: for every (user, antenna)
pair the tap gains are independent circularly-symmetric Gaussians whose
variances come from a power delay profile. The response is evaluated at
the baseband offsets of the tone grid and scaled by the large-scale gain.

Random streams are derived with ``numpy.random.SeedSequence`` using the
spawn key ``(trial, user, antenna)``, so any realization can be rebuilt
independently of the order in which trials are generated.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "SPEED_OF_LIGHT",
    "BREAKPOINT_M",
    "PowerDelayProfile",
    "PropagationConfig",
    "ChannelRealization",
    "HardenMode",
    "path_loss_db",
    "tone_grid",
    "load_pdp",
    "gen_realization",
    "gen_hardened",
]

SPEED_OF_LIGHT = 3e8
BREAKPOINT_M = 20.0
_EXPONENT_BEYOND_BP = 3.5


@dataclass(frozen=True)
class PowerDelayProfile:
    """Tap delays (seconds) with linear average powers summing to one.

    Attributes
    ----------
    gain : float
        Total linear power of the taps before normalization. Profiles
        tabulated in absolute power carry their multipath gain here.
    """

    delays: np.ndarray
    powers: np.ndarray
    name: str = "custom"
    gain: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float).reshape(-1)
        p = np.asarray(self.powers, dtype=float).reshape(-1)
        if d.size == 0 or d.size != p.size:
            raise ValueError("delays and powers must be non-empty and equal length")
        if np.any(np.diff(d) < 0):
            raise ValueError("tap delays must be nondecreasing")
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise ValueError("tap powers must be positive")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "powers", p / p.sum())
        if not self.gain > 0:
            raise ValueError("profile gain must be positive")

    @classmethod
    def parse(cls, text: str, name: str = "custom") -> "PowerDelayProfile":
        """Parse ``delay_ns,power_db`` lines; ``#`` starts a comment."""
        delays, powers = [], []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [x.strip() for x in line.split(",")]
            if len(parts) != 2:
                raise ValueError(f"malformed PDP line: {raw!r}")
            delays.append(float(parts[0]) * 1e-9)
            powers.append(10.0 ** (float(parts[1]) / 10.0))
        powers = np.array(powers)
        return cls(np.array(delays), powers, name=name, gain=float(powers.sum()))

    def dumps(self) -> str:
        lines = ["# delay_ns,power_db"]
        for d, p in zip(self.delays, self.powers * self.gain):
            lines.append(f"{d * 1e9:.10g},{10 * np.log10(p):.10g}")
        return "\n".join(lines) + "\n"

    def frequency_response(self, taps: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        """Evaluate ``sum_l g_l exp(-j 2 pi f tau_l)`` at baseband ``offsets``.

        ``taps`` may carry leading batch axes; the last axis indexes taps.
        """
        phase = np.exp(-2j * np.pi * np.outer(offsets, self.delays))
        return taps @ phase.T


def load_pdp(pdp_id: str) -> PowerDelayProfile:
    """Load a named profile (``tgn_e`` or ``flat``) or a PDP file path."""
    if pdp_id == "flat":
        return PowerDelayProfile(np.zeros(1), np.ones(1), name="flat")
    if pdp_id == "tgn_e":
        text = resources.files("mswpt").joinpath("data/tgn_e.csv").read_text("utf-8")
        return PowerDelayProfile.parse(text, name="tgn_e")
    path = Path(pdp_id)
    if path.is_file():
        return PowerDelayProfile.parse(path.read_text("utf-8"), name=path.stem)
    raise ValueError(f"unknown power delay profile {pdp_id!r}")


def path_loss_db(d: float, f_c: float = 2.4e9) -> float:
    """Distance-dependent path loss in dB.

    Free-space loss ``20 log10(4 pi d f_c / c)`` up to a 20 m breakpoint,
    then an extra ``35 log10(d / 20)`` beyond it.
    """
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    free = lambda x: 20.0 * np.log10(4.0 * np.pi * x * f_c / SPEED_OF_LIGHT)
    if d <= BREAKPOINT_M:
        return float(free(d))
    return float(free(BREAKPOINT_M) + 10.0 * _EXPONENT_BEYOND_BP * np.log10(d / BREAKPOINT_M))


def tone_grid(f_c: float, bandwidth: float, n: int) -> np.ndarray:
    """``n`` tones spaced ``bandwidth / n`` apart and centered on ``f_c``."""
    if n < 1:
        raise ValueError("need at least one tone")
    df = bandwidth / n
    f = f_c + (np.arange(1, n + 1) - (n + 1) / 2.0) * df
    if not f[0] > (n - 1) * df / 2.0:
        raise ValueError("lowest tone must exceed half the occupied span")
    return f


@dataclass(frozen=True)
class PropagationConfig:
    """Scenario parameters for channel generation.

    Attributes
    ----------
    distance_m : tuple of float
        One distance per user; a single value is broadcast to all users.
    normalize_pdp : bool
        Drop the profile's multipath gain so that the average channel power
        equals the path gain.
    """

    n_tones: int = 1
    n_antennas: int = 1
    n_users: int = 1
    f_c: float = 2.4e9
    bandwidth: float = 10e6
    distance_m: tuple = (10.0,)
    tx_gain_db: float = 0.0
    rx_gain_db: float = 0.0
    pdp_id: str = "tgn_e"
    normalize_pdp: bool = False
    seed: int = 0

    def __post_init__(self):
        d = self.distance_m
        d = (float(d),) if np.isscalar(d) else tuple(float(x) for x in d)
        if len(d) == 1:
            d = d * self.n_users
        object.__setattr__(self, "distance_m", d)
        if min(self.n_tones, self.n_antennas, self.n_users) < 1:
            raise ValueError("N, M and K must all be at least 1")
        if len(d) != self.n_users:
            raise ValueError(f"{len(d)} distances given for {self.n_users} users")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        tone_grid(self.f_c, self.bandwidth, self.n_tones)

    def path_gains(self) -> np.ndarray:
        """Linear large-scale gain per user, antenna gains included."""
        pl = np.array([path_loss_db(d, self.f_c) for d in self.distance_m])
        return 10.0 ** ((self.tx_gain_db + self.rx_gain_db - pl) / 10.0)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ChannelRealization:
    """Stacked channels of ``K`` users.

    Attributes
    ----------
    h : numpy.ndarray
        ``(K, N * M)`` complex array, frequency-major per user.
    m, n : int
        Antennas and tones.
    path_gain : numpy.ndarray
        Large-scale gain ``Lambda_q`` per user, i.e. the average power
        ``E{|h|^2}`` of every entry (path gain times multipath gain).
    meta : dict
        Provenance such as seed, trial and configuration digest.
    """

    h: np.ndarray
    m: int
    n: int
    path_gain: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=complex))
        if h.shape[1] != self.m * self.n:
            raise ValueError(f"channel width {h.shape[1]} != M*N = {self.m * self.n}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel has non-finite entries")
        lam = np.broadcast_to(np.asarray(self.path_gain, dtype=float), (h.shape[0],)).copy()
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "path_gain", lam)

    @classmethod
    def from_array(cls, h: np.ndarray, m: int, n: int, path_gain=1.0, **meta):
        return cls(h=h, m=m, n=n, path_gain=path_gain, meta=dict(meta))

    @property
    def k(self) -> int:
        return self.h.shape[0]

    @property
    def tones(self) -> np.ndarray:
        """``(K, N, M)`` view of the channel."""
        return self.h.reshape(self.k, self.n, self.m)

    def tone_norms(self) -> np.ndarray:
        """``(K, N)`` array of ``||h_{q,n}||``."""
        return np.linalg.norm(self.tones, axis=2)

    def user(self, q: int) -> "ChannelRealization":
        return ChannelRealization(self.h[q : q + 1], self.m, self.n, self.path_gain[q : q + 1], dict(self.meta))

    def subset(self, users) -> "ChannelRealization":
        idx = list(users)
        return ChannelRealization(self.h[idx], self.m, self.n, self.path_gain[idx], dict(self.meta))

    def to_csv(self) -> str:
        """Dump as CSV with columns ``user,tone,antenna,re,im`` (zero based)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["user", "tone", "antenna", "re", "im"])
        t = self.tones
        for q in range(self.k):
            for i in range(self.n):
                for a in range(self.m):
                    z = t[q, i, a]
                    w.writerow([q, i, a, repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, path_gain=1.0) -> "ChannelRealization":
        rows = list(csv.DictReader(io.StringIO(text)))
        k = 1 + max(int(r["user"]) for r in rows)
        n = 1 + max(int(r["tone"]) for r in rows)
        m = 1 + max(int(r["antenna"]) for r in rows)
        t = np.zeros((k, n, m), dtype=complex)
        for r in rows:
            t[int(r["user"]), int(r["tone"]), int(r["antenna"])] = complex(float(r["re"]), float(r["im"]))
        return cls(t.reshape(k, n * m), m, n, path_gain)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def gen_realization(
    cfg: PropagationConfig, trial: int = 0, pdp: PowerDelayProfile | None = None
) -> ChannelRealization:
    """Draw one multi-user frequency-selective channel realization.

    Parameters
    ----------
    cfg : PropagationConfig
        Scenario description; ``cfg.seed`` is the root seed.
    trial : int
        Monte Carlo trial index, part of every substream key.
    pdp : PowerDelayProfile, optional
        Overrides ``cfg.pdp_id``.
    """
    prof = pdp if pdp is not None else load_pdp(cfg.pdp_id)
    k, m, n = cfg.n_users, cfg.n_antennas, cfg.n_tones
    offsets = tone_grid(cfg.f_c, cfg.bandwidth, n) - cfg.f_c
    std = np.sqrt(prof.powers / 2.0)
    taps = np.empty((k, m, prof.delays.size), dtype=complex)
    for q in range(k):
        for a in range(m):
            z = _stream(cfg.seed, trial, q, a).standard_normal((2, prof.delays.size))
            taps[q, a] = std * (z[0] + 1j * z[1])
    resp = prof.frequency_response(taps, offsets)  # (K, M, N)
    lam = cfg.path_gains() * (1.0 if cfg.normalize_pdp else prof.gain)
    h = np.sqrt(lam)[:, None, None] * np.transpose(resp, (0, 2, 1))
    meta = {
        "seed": int(cfg.seed),
        "trial": int(trial),
        "config": cfg.digest(),
        "pdp": prof.name,
        "path_loss_db": [path_loss_db(d, cfg.f_c) for d in cfg.distance_m],
    }
    return ChannelRealization(h.reshape(k, n * m), m, n, lam, meta)


class HardenMode(enum.Enum):
    EXACT = "exact"
    GAUSSIAN = "gaussian"


def gen_hardened(
    large_scale,
    m: int,
    n: int,
    mode: HardenMode = HardenMode.EXACT,
    seed: int = 0,
    trial: int = 0,
) -> ChannelRealization:
    """Channels that satisfy or approximate the hardening limit.

    EXACT places user ``q``'s tone ``n`` on the standard basis vector
    ``e_{qN+n}`` scaled to ``||h_{q,n}||^2 = M Lambda_q``, so that all cross
    inner products vanish exactly. GAUSSIAN draws i.i.d. ``CN(0, Lambda_q)``
    entries.

    Raises
    ------
    ValueError
        In EXACT mode when ``M < K * N``.
    """
    lam = np.atleast_1d(np.asarray(large_scale, dtype=float))
    if np.any(lam <= 0):
        raise ValueError("large-scale gains must be positive")
    k = lam.size
    mode = HardenMode(mode)
    h = np.zeros((k, n, m), dtype=complex)
    if mode is HardenMode.EXACT:
        if m < k * n:
            raise ValueError(f"exact hardening needs M >= K*N, got M={m}, K*N={k * n}")
        for q in range(k):
            for i in range(n):
                h[q, i, q * n + i] = np.sqrt(m * lam[q])
    else:
        for q in range(k):
            z = _stream(seed, trial, q).standard_normal((2, n, m))
            h[q] = np.sqrt(lam[q] / 2.0) * (z[0] + 1j * z[1])
    meta = {"seed": int(seed), "trial": int(trial), "mode": mode.value}
    return ChannelRealization(h.reshape(k, n * m), m, n, lam, meta)
