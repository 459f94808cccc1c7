"""Dense complex Hermitian linear algebra.

Small wrappers around LAPACK's Hermitian eigensolver that add input
validation, deterministic phase canonicalization of eigenvectors and
degeneracy reporting for the extreme eigenpairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HERMITIAN_ATOL",
    "DEGENERACY_RTOL",
    "EigenDecomposition",
    "ExtremeEigenpair",
    "hermitian",
    "canonicalize_phase",
    "herm_eig",
    "min_eigvec",
    "dominant_eigvec",
    "psd_sqrt",
]

HERMITIAN_ATOL = 1e-12
DEGENERACY_RTOL = 1e-10
_PSD_CLAMP_RTOL = 1e-10


def hermitian(a: np.ndarray) -> np.ndarray:
    """Return a Hermitian copy of ``a`` obtained by averaging with ``a^H``.

    Parameters
    ----------
    a : array_like
        Square matrix with finite entries.

    Returns
    -------
    numpy.ndarray
        Complex matrix ``(a + a^H) / 2``.

    Raises
    ------
    ValueError
        If ``a`` is not square, is empty or has non-finite entries.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValueError("matrix dimension must be at least 1")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return 0.5 * (a + a.conj().T)


def canonicalize_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the columns of ``v`` so each first nonzero entry is real-positive.

    An entry counts as nonzero when its modulus exceeds ``1e-8`` times the
    largest modulus in its column; this keeps the choice stable under
    round-off in entries that are zero in exact arithmetic.
    """
    v = np.array(v, dtype=complex, copy=True)
    flat = v.ndim == 1
    if flat:
        v = v[:, None]
    mags = np.abs(v)
    for j in range(v.shape[1]):
        col = mags[:, j]
        peak = col.max()
        if peak == 0.0:
            continue
        i = int(np.argmax(col > 1e-8 * peak))
        v[:, j] *= np.conj(v[i, j]) / col[i]
        v[i, j] = col[i]
    return v[:, 0] if flat else v


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in ascending order with paired unitary eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


@dataclass(frozen=True)
class ExtremeEigenpair:
    """An extreme eigenpair plus a flag for a non-unique eigenvector.

    Attributes
    ----------
    vector : numpy.ndarray
        Unit-norm, phase-canonical eigenvector.
    value : float
        The paired eigenvalue.
    degenerate : bool
        True when the gap to the neighbouring eigenvalue is below
        ``DEGENERACY_RTOL`` relative to the spectral scale.
    gap : float
        Absolute gap to the neighbouring eigenvalue (``inf`` for 1x1).
    """

    vector: np.ndarray
    value: float
    degenerate: bool
    gap: float


def herm_eig(a: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    a : array_like
        Square matrix; it is symmetrized before factorization.

    Returns
    -------
    EigenDecomposition
        Ascending eigenvalues and phase-canonical eigenvectors.
    """
    h = hermitian(a)
    w, u = np.linalg.eigh(h)
    return EigenDecomposition(eigenvalues=w, eigenvectors=canonicalize_phase(u))


def _extreme(a: np.ndarray, largest: bool) -> ExtremeEigenpair:
    dec = herm_eig(a)
    w = dec.eigenvalues
    idx = len(w) - 1 if largest else 0
    if len(w) == 1:
        gap = np.inf
        degenerate = False
    else:
        gap = float(w[-1] - w[-2]) if largest else float(w[1] - w[0])
        scale = float(np.max(np.abs(w)))
        degenerate = gap <= DEGENERACY_RTOL * scale if scale > 0 else True
    return ExtremeEigenpair(
        vector=dec.eigenvectors[:, idx].copy(),
        value=float(w[idx]),
        degenerate=bool(degenerate),
        gap=gap,
    )


def min_eigvec(a: np.ndarray) -> ExtremeEigenpair:
    """Eigenvector of the smallest eigenvalue of a Hermitian matrix."""
    return _extreme(a, largest=False)


def dominant_eigvec(a: np.ndarray) -> ExtremeEigenpair:
    """Eigenvector of the largest eigenvalue of a Hermitian matrix."""
    return _extreme(a, largest=True)


def psd_sqrt(x: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root.

    Eigenvalues down to ``-1e-10 * ||x||_F`` are treated as round-off and
    clamped to zero.

    Raises
    ------
    ValueError
        If an eigenvalue lies below the clamp threshold.
    """
    dec = herm_eig(x)
    w = dec.eigenvalues
    fro = float(np.linalg.norm(x))
    if w[0] < -_PSD_CLAMP_RTOL * fro:
        raise ValueError(
            f"matrix is not PSD: smallest eigenvalue {w[0]:.3e} "
            f"below clamp threshold {-_PSD_CLAMP_RTOL * fro:.3e}"
        )
    u = dec.eigenvectors
    r = (u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T
    return 0.5 * (r + r.conj().T)
