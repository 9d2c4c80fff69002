"""Complex matrix primitives shared by the estimators.

Every function accepts stacked inputs: a trailing ``(n, n)`` matrix with any
number of leading batch axes. Hermitian outputs are symmetrized explicitly, so
``A == A.conj().swapaxes(-1, -2)`` holds exactly.
"""
import numpy as np

__all__ = [
    "SingularMatrixError",
    "hermitian",
    "is_psd",
    "sample_covariance",
    "commutation_matrix",
    "kron",
    "block",
    "logdet_psd",
    "inv_psd",
    "cholesky_masked",
    "inv_logdet_masked",
    "pauli_coherence",
    "PAULI_T",
    "PAULI_G",
]

#: relative eigenvalue floor used by PSD checks
PSD_RTOL = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix expected to be positive definite is not."""


def hermitian(A):
    """Return ``(A + A^H) / 2`` on the last two axes."""
    A = np.asarray(A)
    if not np.iscomplexobj(A):
        A = A.astype(complex)
    return 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))


def is_psd(A, rtol=PSD_RTOL):
    """True where all eigenvalues are >= -rtol * max eigenvalue."""
    w = np.linalg.eigvalsh(hermitian(A))
    scale = np.maximum(np.abs(w).max(axis=-1), np.finfo(float).tiny)
    return np.all(w >= -rtol * scale[..., None], axis=-1)


def sample_covariance(X):
    """Sample covariance ``X X^H / K`` of data with looks along the last axis.

    Parameters
    ----------
    X : array_like, shape (..., n, K)
        Columns are the zero-mean observation vectors.

    Returns
    -------
    ndarray, shape (..., n, n)
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim < 2 or X.shape[-1] < 1:
        raise ValueError("X must have shape (..., n, K) with K >= 1")
    K = X.shape[-1]
    return hermitian(X @ np.conj(np.swapaxes(X, -1, -2)) / K)


def commutation_matrix(M, N):
    """Permutation ``K_{M,N}`` with ``K @ vec(A) == vec(A.T)`` for any M x N ``A``.

    ``vec`` stacks columns (Fortran order). Built as the sum of
    ``E_ij kron E_ji`` over the M x N unit matrices.
    """
    if M < 1 or N < 1:
        raise ValueError("M and N must be positive")
    Kmn = np.zeros((M * N, M * N))
    for i in range(M):
        for j in range(N):
            E = np.zeros((M, N))
            E[i, j] = 1.0
            Kmn += np.kron(E, E.T)
    return Kmn


def kron(A, B):
    """Kronecker product over the last two axes, broadcasting leading axes."""
    A = np.asarray(A)
    B = np.asarray(B)
    m, n = A.shape[-2:]
    p, q = B.shape[-2:]
    out = A[..., :, None, :, None] * B[..., None, :, None, :]
    return out.reshape(out.shape[:-4] + (m * p, n * q))


def block(S, k, l, blockdim):
    """The ``(k, l)`` square sub-block (0-based) of size ``blockdim``."""
    S = np.asarray(S)
    n = S.shape[-1]
    if blockdim < 1 or n % blockdim:
        raise ValueError(f"block size {blockdim} does not tile dimension {n}")
    nb = n // blockdim
    if not (0 <= k < nb and 0 <= l < nb):
        raise IndexError(f"block index ({k}, {l}) out of range for {nb}x{nb} blocks")
    return S[..., k * blockdim:(k + 1) * blockdim, l * blockdim:(l + 1) * blockdim]


def cholesky_masked(H):
    """Batched Cholesky factor that tolerates failures per matrix.

    Returns ``(L, ok)``. Matrices whose factorization fails get one retry with
    a diagonal jitter of ``1e-12 * trace / n``; those that still fail are
    flagged ``ok == False`` and their factor is filled with NaN.
    """
    H = hermitian(H)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        pass
    else:
        return L, np.all(np.isfinite(L), axis=(-2, -1))
    n = H.shape[-1]
    flat = H.reshape((-1, n, n))
    L = np.full(flat.shape, np.nan, dtype=complex)
    ok = np.zeros(flat.shape[0], dtype=bool)
    for i, Hi in enumerate(flat):
        for jitter in (0.0, 1e-12):
            eps = jitter * abs(np.real(np.trace(Hi))) / n
            try:
                L[i] = np.linalg.cholesky(Hi + eps * np.eye(n))
            except np.linalg.LinAlgError:
                continue
            ok[i] = np.all(np.isfinite(L[i]))
            break
    return L.reshape(H.shape), ok.reshape(H.shape[:-2])


def _cholesky(H):
    L, ok = cholesky_masked(H)
    if not np.all(ok):
        raise SingularMatrixError("matrix is singular or indefinite")
    return L


def logdet_psd(H):
    """Log-determinant of a Hermitian positive definite matrix via Cholesky.

    A jitter of ``1e-12 * trace / n`` is added once if the first factorization
    fails; a second failure raises :class:`SingularMatrixError`.
    """
    L = _cholesky(H)
    d = np.real(np.diagonal(L, axis1=-2, axis2=-1))
    return 2.0 * np.log(d).sum(axis=-1)


def inv_logdet_masked(H):
    """Inverse and log-determinant of a stack of PD matrices, plus a success mask.

    Failed entries come back as NaN instead of raising.
    """
    L, ok = cholesky_masked(H)
    n = L.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        Lsafe = np.where(ok[..., None, None], L, np.eye(n))
        Linv = np.linalg.solve(Lsafe, np.broadcast_to(np.eye(n), L.shape))
        inv = hermitian(np.conj(np.swapaxes(Linv, -1, -2)) @ Linv)
        ld = 2.0 * np.log(np.real(np.diagonal(Lsafe, axis1=-2, axis2=-1))).sum(axis=-1)
    inv = np.where(ok[..., None, None], inv, np.nan)
    ld = np.where(ok, ld, np.nan)
    return inv, ld, ok


def inv_psd(H):
    """Inverse of a Hermitian positive definite matrix, symmetrized."""
    inv, _, ok = inv_logdet_masked(H)
    if not np.all(ok):
        raise SingularMatrixError("matrix is singular or indefinite")
    return inv


PAULI_T = np.array([[1.0, 0.0, 1.0],
                    [1.0, 0.0, -1.0],
                    [0.0, np.sqrt(2.0), 0.0]]) / np.sqrt(2.0)
PAULI_G = np.diag([1.0, np.sqrt(2.0), 1.0])


def pauli_coherence(Cp):
    """Map a lexicographic (HH, HV, VV) covariance to the Pauli coherence.

    ``T_P = T G C_p G T^T``, which is the covariance of the Pauli vector
    ``[(HH + VV), (HH - VV), 2 HV] / sqrt(2)``.
    """
    A = PAULI_T @ PAULI_G
    return hermitian(A @ np.asarray(Cp) @ A.T)
