"""Multi-sine, multi-antenna waveform design for wireless power transfer.

Subpackages and modules
-----------------------
linalg
    Hermitian eigen-decomposition helpers.
rectenna
    Diode nonlinearity model, coupling matrices and output-voltage evaluators.
channel
    Frequency-selective multi-user channel generation.
sdp
    Interior-point SDP solver, rank reduction and Gaussian randomization.
algorithms
    Waveform designs (single user, weighted sum, max-min, hardening based)
    and baselines.
bench
    Scenario configuration, Monte Carlo execution and summaries.
"""

from importlib.metadata import PackageNotFoundError, version

from .algorithms import AlgorithmConfig, Budget, PrecoderResult
from .channel import ChannelRealization, PropagationConfig, gen_hardened, gen_realization
from .rectenna import RectifierParams, beta_coefficients

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.1.0"

__all__ = [
    "AlgorithmConfig",
    "Budget",
    "ChannelRealization",
    "PrecoderResult",
    "PropagationConfig",
    "RectifierParams",
    "beta_coefficients",
    "gen_hardened",
    "gen_realization",
    "__version__",
]
