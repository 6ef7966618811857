"""Dense complex matrix / superoperator substrate.

Everything in this package uses a single vectorization convention:
column stacking, ``vec(X)[i + d*j] = X[i, j]``, which gives the
Kronecker identity ``vec(A X B) = (B.T kron A) vec(X)``.  Superoperators
are ``d**2 x d**2`` complex matrices acting on vectorized densities
(``K*d**2`` when several channels are stacked channel-major).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "vectorize",
    "devectorize",
    "trace_vector",
    "sandwich_superop",
    "kraus_superop",
    "hamiltonian_superop",
    "anticommutator_superop",
    "hermitian_eigs",
    "hermiticity_residual",
    "matrix_exp",
    "psd_check",
    "choi_matrix",
]


def _square(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def vectorize(matrix: np.ndarray) -> np.ndarray:
    """Column-stack a square matrix into a length ``d**2`` vector."""
    m = _square(matrix)
    return m.reshape(-1, order="F")


def devectorize(vector: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`; the roundtrip is bit-exact."""
    v = np.asarray(vector, dtype=complex).ravel()
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    return v.reshape((d, d), order="F")


def trace_vector(dim: int, channels: int = 1) -> np.ndarray:
    """Row vector implementing the (total) trace functional on vec'd states."""
    tau = np.zeros(dim * dim, dtype=complex)
    tau[:: dim + 1] = 1.0
    return np.tile(tau, channels)


def sandwich_superop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> A X B`` (column stacking: ``B.T kron A``)."""
    a = _square(a, "A")
    b = _square(b, "B")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: A is {a.shape}, B is {b.shape}")
    return np.kron(b.T, a)


def kraus_superop(kraus_ops) -> np.ndarray:
    """Superoperator of the CP map ``X -> sum_k K_k X K_k^dag``."""
    ops = [_square(k, "Kraus operator") for k in kraus_ops]
    if not ops:
        raise ValueError("empty Kraus set")
    return sum(np.kron(k.conj(), k) for k in ops)


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> -i [H, X]`` (hbar = 1)."""
    h = _square(h, "H")
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def anticommutator_superop(d: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> {D, X} = D X + X D``."""
    d = _square(d, "D")
    eye = np.eye(d.shape[0])
    return np.kron(eye, d) + np.kron(d.T, eye)


def hermiticity_residual(matrix: np.ndarray) -> float:
    """Relative deviation from Hermiticity, ``|M - M^dag| / max(1, |M|)``."""
    m = np.asarray(matrix, dtype=complex)
    scale = max(1.0, np.linalg.norm(m))
    return float(np.linalg.norm(m - m.conj().T) / scale)


def _require_hermitian(matrix: np.ndarray, tol: float, name: str) -> np.ndarray:
    m = _square(matrix, name)
    res = np.linalg.norm(m - m.conj().T)
    if res > tol * np.linalg.norm(m):
        raise ValueError(f"{name} is not Hermitian (residual {res:.3e})")
    return m


def hermitian_eigs(matrix: np.ndarray, tol: float = 1e-10):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(w, u)`` with eigenvalues ``w`` sorted ascending and unitary
    ``u`` such that ``M = u diag(w) u^dag``.  Raises for inputs that are
    not Hermitian within ``tol`` relative to the operator norm.
    """
    m = _require_hermitian(matrix, tol, "matrix")
    w, u = np.linalg.eigh(m)
    return w, u


def matrix_exp(generator: np.ndarray, t: float) -> np.ndarray:
    """Evaluate ``exp(t G)`` for a (possibly non-normal) superoperator.

    Normal generators go through a unitary Schur diagonalization; everything
    else falls back to scaling-and-squaring (Pade).
    """
    g = _square(generator, "generator")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return np.eye(g.shape[0], dtype=complex)
    comm = g @ g.conj().T - g.conj().T @ g
    scale = np.linalg.norm(g) ** 2
    if np.linalg.norm(comm) <= 1e-12 * max(1.0, scale):
        tmat, q = scipy.linalg.schur(g, output="complex")
        result = (q * np.exp(t * np.diag(tmat))) @ q.conj().T
    else:
        result = scipy.linalg.expm(t * g)
    if not np.all(np.isfinite(result)):
        raise FloatingPointError(f"overflow in matrix exponential at t={t}")
    return result


def psd_check(matrix: np.ndarray, tol: float = 1e-8):
    """Test positive semidefiniteness of a Hermitian matrix.

    Returns ``(is_psd, min_eig)``.  The input is symmetrized before the
    eigenvalue computation (only here; nowhere else in the package), and
    ``is_psd`` means ``min_eig >= -tol * max(1, |M|)``.
    """
    m = _require_hermitian(matrix, 1e-10, "matrix")
    sym = 0.5 * (m + m.conj().T)
    eigs = np.linalg.eigvalsh(sym)
    min_eig = float(eigs[0])
    return min_eig >= -tol * max(1.0, np.linalg.norm(m)), min_eig


def choi_matrix(superop: np.ndarray) -> np.ndarray:
    """Choi matrix of a superoperator (column-stacking reshuffle).

    For a CP map ``X -> sum_k K_k X K_k^dag`` this equals
    ``sum_k vec(K_k) vec(K_k)^dag`` and is therefore PSD exactly when the
    map is completely positive.  The reshuffle is an involution, so the
    same function maps Choi matrices back to superoperators.
    """
    s = _square(superop, "superoperator")
    d = int(round(np.sqrt(s.shape[0])))
    if d * d != s.shape[0]:
        raise ValueError("superoperator dimension is not a perfect square")
    return s.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(d * d, d * d)
