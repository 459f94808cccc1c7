import numpy as np
import pytest

from mswpt.rectenna import RectifierParams, beta_coefficients


@pytest.fixture
def beta():
    return beta_coefficients(RectifierParams())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(rng, n):
    a = crandn(rng, n, n)
    return (a + a.conj().T) / 2


def random_psd(rng, n, rank=None):
    b = crandn(rng, n, rank or n)
    return b @ b.conj().T


def make_channel(seed, k=1, m=1, n=4, d=10.0, trial=0):
    """Realistic multipath channel of ``k`` users at distance ``d``."""
    from mswpt.channel import PropagationConfig, gen_realization

    cfg = PropagationConfig(n_tones=n, n_antennas=m, n_users=k, distance_m=(d,), seed=seed)
    return gen_realization(cfg, trial)


# (criterion number, title, passed, detail) lines collected by the acceptance suite
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}: {detail}")
