"""Dense linear-algebra helpers shared by every module.

All matrices are plain ``numpy.ndarray``; symmetric matrices are kept
symmetric by explicit symmetrization on construction (``sym``).  Default
tolerances match double-precision SDP residuals: symmetry 1e-10, PSD -1e-9,
relative rank 1e-12.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    InvalidMatrix,
    NotPositiveDefinite,
    SingularBlock,
    SingularFactorization,
)

SYM_TOL = 1e-10
PSD_TOL = 1e-9
RANK_TOL = 1e-12


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return a 2-D float array with finite entries."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise InvalidMatrix(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return a


def sym(m, tol: float = SYM_TOL) -> np.ndarray:
    """Return the symmetric part of a square matrix.

    Raises ``InvalidMatrix`` if the skew part exceeds ``tol`` relative to the
    matrix scale, which usually indicates a modelling bug upstream.
    """
    a = as_matrix(m, "symmetric matrix")
    if a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"symmetric matrix must be square, got {a.shape}")
    skew = np.abs(a - a.T).max()
    scale = max(1.0, np.abs(a).max())
    if skew > max(tol, 1e-7 * scale):
        raise InvalidMatrix(f"matrix is not symmetric (skew {skew:.3g})")
    return 0.5 * (a + a.T)


def is_psd(m, tol: float = PSD_TOL) -> bool:
    """True iff the minimum eigenvalue of the symmetrized matrix is >= -tol."""
    a = as_matrix(m, "psd candidate")
    if a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"is_psd needs a square matrix, got {a.shape}")
    a = 0.5 * (a + a.T)
    return float(np.linalg.eigvalsh(a)[0]) >= -tol


def is_pd(m, tol: float = PSD_TOL) -> bool:
    """True iff the minimum eigenvalue exceeds ``tol``."""
    a = 0.5 * (as_matrix(m) + as_matrix(m).T)
    return float(np.linalg.eigvalsh(a)[0]) > tol


def min_eig(m) -> float:
    a = as_matrix(m)
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])


def schur_reduce(q, split: int) -> np.ndarray:
    """Schur complement of the trailing block: Q1 - Q2 Q3^{-1} Q2^T.

    ``split`` is the size of the leading block that is kept.
    """
    a = sym(q)
    k = a.shape[0]
    if not 0 < split < k:
        raise InvalidMatrix(f"split {split} outside (0, {k})")
    q1 = a[:split, :split]
    q2 = a[:split, split:]
    q3 = a[split:, split:]
    # reject a numerically singular trailing block before solving
    sv = np.linalg.svd(q3, compute_uv=False)
    if sv[-1] <= RANK_TOL * max(1.0, sv[0]):
        raise SingularBlock("trailing block is numerically singular")
    red = q1 - q2 @ np.linalg.solve(q3, q2.T)
    return 0.5 * (red + red.T)


def pinv(m, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse (SVD based)."""
    return np.linalg.pinv(as_matrix(m, "pinv argument"), rcond=rcond)


def full_rank_factorize(w) -> tuple[np.ndarray, np.ndarray]:
    """Factor a nonsingular square matrix as w = V @ U.T with V, U nonsingular.

    Deterministic SVD construction: w = P S Q^T gives V = P S and U^T = Q^T.
    """
    a = as_matrix(w, "factorization target")
    if a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"full_rank_factorize needs a square matrix, got {a.shape}")
    p, s, qt = np.linalg.svd(a)
    if s[-1] <= RANK_TOL * max(1.0, s[0]):
        raise SingularFactorization(
            f"matrix is numerically singular (sigma_min {s[-1]:.3g})")
    v = p @ np.diag(s)
    u = qt.T
    return v, u


def unit_ball_volume(n: int) -> float:
    """Volume of the n-dimensional Euclidean unit ball."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def ellipsoid_volume(p, level: float) -> float:
    """Volume of {x : x^T P x <= level} for positive definite P."""
    a = sym(p)
    if level <= 0.0:
        raise NotPositiveDefinite(f"level must be positive, got {level}")
    eigs = np.linalg.eigvalsh(a)
    if eigs[0] <= 0.0:
        raise NotPositiveDefinite(
            f"shape matrix is not positive definite (min eig {eigs[0]:.3g})")
    n = a.shape[0]
    logdet = float(np.sum(np.log(eigs)))
    return unit_ball_volume(n) * level ** (n / 2.0) * math.exp(-0.5 * logdet)


def eigs_in_disk(a, center: float, radius: float, tol: float = 1e-9) -> bool:
    """True iff every eigenvalue of ``a`` lies in the closed disk |z - center| <= radius."""
    m = as_matrix(a, "disk-check matrix")
    if m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"eigs_in_disk needs a square matrix, got {m.shape}")
    lam = np.linalg.eigvals(m)
    return bool(np.all(np.abs(lam - center) <= radius + tol))


def spectral_radius(a) -> float:
    m = as_matrix(a)
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def sqrtm_psd(m, tol: float = PSD_TOL) -> np.ndarray:
    """Symmetric square root of a PSD matrix via eigendecomposition."""
    a = sym(m)
    w, v = np.linalg.eigh(a)
    if w[0] < -tol:
        raise NotPositiveDefinite(f"matrix is not PSD (min eig {w[0]:.3g})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T
