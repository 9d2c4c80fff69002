"""Kronecker-structured ML estimation of temporal and polarimetric covariances.

The data covariance is modelled as ``C = C_t kron C_p`` with ``C_t`` the
M x M temporal covariance and ``C_p`` the 3 x 3 polarimetric covariance,
optionally constrained to a symmetry class. Vectors are stacked pass-major:
entry ``m * 3 + n`` of a look holds channel ``n`` of pass ``m``.

All estimators accept stacks of problems along leading axes so Monte Carlo
trials and image pixels are processed in one vectorized sweep.

Note on the determinant identity: for ``C_t`` of size M and ``C_p`` of size N,
``|C_t kron C_p| = |C_t|^N |C_p|^M``. The negative log-likelihood below uses
these exponents.
"""
from dataclasses import dataclass, field

import numpy as np

from .linalg import hermitian, inv_logdet_masked, sample_covariance
from .symmetry import Symmetry, project

__all__ = [
    "N_POL",
    "FlipFlopConfig",
    "FlipFlopError",
    "KroneckerEstimate",
    "polarimetric_update",
    "temporal_update",
    "negative_log_likelihood",
    "flip_flop",
    "flip_flop_scm",
    "gauge_fix",
    "tusml",
    "tusml_scm",
    "per_pass_average",
]

N_POL = 3


class FlipFlopError(np.linalg.LinAlgError):
    """A factor became singular during the alternating minimization."""

    def __init__(self, message, iteration=None, symmetry=None):
        super().__init__(message)
        self.iteration = iteration
        self.symmetry = symmetry


@dataclass(frozen=True)
class FlipFlopConfig:
    """Stopping rule and starting point of the alternating minimization.

    Five sweeps from an identity temporal covariance are enough for the
    likelihood to settle at the window sizes used in practice; the
    relative-change test only shortens runs that have already converged.
    """

    max_iterations: int = 5
    nll_rel_tol: float = 1e-8
    ct_init: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.nll_rel_tol > 0:
            raise ValueError("nll_rel_tol must be positive")


@dataclass
class KroneckerEstimate:
    """Result of :func:`flip_flop`.

    For stacked input every field carries the same leading axes. ``nll_trace``
    then has ``max_iterations`` columns; elements that converged early repeat
    their final value. ``ok`` is False where a factor went singular.
    """

    Ct: np.ndarray
    Cp: np.ndarray
    nll_trace: np.ndarray
    symmetry: Symmetry
    n_iter: np.ndarray
    ok: np.ndarray

    @property
    def covariance(self):
        from .linalg import kron
        return kron(self.Ct, self.Cp)


def _split(S, M):
    S = np.asarray(S)
    n = S.shape[-1]
    if n != N_POL * M:
        raise ValueError(f"statistic of size {n} does not match {M} passes x {N_POL} channels")
    return S.reshape(S.shape[:-2] + (M, N_POL, M, N_POL))


def _polarimetric_update(S4, Ct_inv, M):
    return hermitian(np.einsum("...kalb,...lk->...ab", S4, Ct_inv) / M)


def _temporal_update(S4, Cp_inv):
    return hermitian(np.einsum("...kalb,...ba->...kl", S4, Cp_inv) / N_POL)


def _trace_term(S4, Ct_inv, Cp_inv):
    return np.real(np.einsum("...kalb,...lk,...ba->...", S4, Ct_inv, Cp_inv))


def polarimetric_update(S, Ct):
    """Minimizer over an unstructured ``C_p`` for fixed ``C_t``.

    ``(1/M) sum_{k,l} S^{kl} [C_t^{-1}]_{lk}`` where ``S^{kl}`` is the
    ``(k, l)`` 3 x 3 block of ``S``.
    """
    Ct = np.asarray(Ct)
    M = Ct.shape[-1]
    Ct_inv, _, ok = inv_logdet_masked(Ct)
    if not np.all(ok):
        raise FlipFlopError("temporal covariance is singular")
    return _polarimetric_update(_split(S, M), Ct_inv, M)


def temporal_update(S, Cp):
    """Minimizer over ``C_t`` for fixed ``C_p``.

    Permutes ``S`` into channel-major order (the commutation-matrix
    congruence) and averages its M x M blocks weighted by ``C_p^{-1}``.
    """
    S = np.asarray(S)
    M = S.shape[-1] // N_POL
    Cp_inv, _, ok = inv_logdet_masked(Cp)
    if not np.all(ok):
        raise FlipFlopError("polarimetric covariance is singular")
    return _temporal_update(_split(S, M), Cp_inv)


def _nll(ld_t, ld_p, tr, K, M):
    return K * (N_POL * ld_t + M * ld_p + tr) + N_POL * M * K * np.log(np.pi)


def negative_log_likelihood(Ct, Cp, S, K):
    """Gaussian negative log-likelihood of ``K`` looks with SCM ``S``.

    ``K [N log|C_t| + M log|C_p| + tr(S (C_t^{-1} kron C_p^{-1}))] + N M K log(pi)``
    """
    Ct = np.asarray(Ct)
    M = Ct.shape[-1]
    Ct_inv, ld_t, ok_t = inv_logdet_masked(Ct)
    Cp_inv, ld_p, ok_p = inv_logdet_masked(Cp)
    if not (np.all(ok_t) and np.all(ok_p)):
        raise FlipFlopError("singular factor in likelihood")
    return _nll(ld_t, ld_p, _trace_term(_split(S, M), Ct_inv, Cp_inv), K, M)


def gauge_fix(Ct, Cp):
    """Rescale so that ``trace(C_t) == M`` while keeping ``C_t kron C_p`` fixed."""
    Ct = np.asarray(Ct)
    M = Ct.shape[-1]
    s = np.real(np.trace(Ct, axis1=-2, axis2=-1)) / M
    s = s[..., None, None]
    return Ct / s, Cp * s


def flip_flop_scm(S, n_passes, n_looks, symmetry, config=None, on_failure="raise"):
    """Alternating ML estimation from a sample covariance matrix.

    Parameters
    ----------
    S : array_like, shape (..., 3M, 3M)
        Sample covariance of the stacked multipass vectors.
    n_passes : int
        Number of passes ``M``.
    n_looks : int
        Number of looks ``K`` that produced ``S`` (scales the likelihood).
    symmetry : Symmetry
        Structure enforced on ``C_p`` after every polarimetric update.
    config : FlipFlopConfig, optional
    on_failure : {"raise", "mask"}
        With "mask", problems whose factors go singular are frozen and flagged
        in ``KroneckerEstimate.ok`` instead of raising.

    Returns
    -------
    KroneckerEstimate
        Factors normalized so that ``trace(C_t) == M``.
    """
    config = config or FlipFlopConfig()
    symmetry = Symmetry.parse(symmetry)
    M = int(n_passes)
    S = hermitian(S)
    S4 = _split(S, M)
    batch = S.shape[:-2]

    if config.ct_init is None:
        Ct = np.broadcast_to(np.eye(M, dtype=complex), batch + (M, M)).copy()
    else:
        Ct = np.broadcast_to(hermitian(config.ct_init), batch + (M, M)).copy()
    Cp = np.zeros(batch + (N_POL, N_POL), dtype=complex)

    ok = np.ones(batch, dtype=bool)
    active = np.ones(batch, dtype=bool)
    n_iter = np.zeros(batch, dtype=int)
    trace = []
    prev = None
    for it in range(config.max_iterations):
        Ct_inv, _, ok_t = inv_logdet_masked(Ct)
        Cp_new = project(_polarimetric_update(S4, np.nan_to_num(Ct_inv), M), symmetry, check=False)
        Cp_inv, ld_p, ok_p = inv_logdet_masked(Cp_new)
        Ct_new = _temporal_update(S4, np.nan_to_num(Cp_inv))
        Ct_new_inv, ld_t, ok_tn = inv_logdet_masked(Ct_new)
        nll = _nll(ld_t, ld_p, _trace_term(S4, np.nan_to_num(Ct_new_inv), np.nan_to_num(Cp_inv)),
                   n_looks, M)

        step_ok = ok_t & ok_p & ok_tn & np.isfinite(nll)
        failed = active & ~step_ok
        if np.any(failed):
            if on_failure == "raise":
                raise FlipFlopError(
                    f"singular factor at iteration {it + 1} under {symmetry.label} symmetry",
                    iteration=it + 1, symmetry=symmetry)
            ok &= ~failed
            active &= ~failed

        upd = active[..., None, None]
        Ct = np.where(upd, Ct_new, Ct)
        Cp = np.where(upd, Cp_new, Cp)
        cur = nll if prev is None else np.where(active, nll, prev)
        trace.append(np.where(ok, cur, np.nan))
        n_iter = n_iter + active
        if prev is not None:
            settled = np.abs(prev - cur) <= config.nll_rel_tol * np.maximum(np.abs(cur), 1.0)
            active &= ~settled
        prev = cur
        if not np.any(active):
            break

    nll_trace = np.stack(trace, axis=-1)
    if nll_trace.shape[-1] < config.max_iterations:
        pad = config.max_iterations - nll_trace.shape[-1]
        nll_trace = np.concatenate([nll_trace, np.repeat(nll_trace[..., -1:], pad, axis=-1)], axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        Ct, Cp = gauge_fix(Ct, Cp)
    if batch == ():
        nll_trace = nll_trace[: int(n_iter)]
    return KroneckerEstimate(Ct=Ct, Cp=hermitian(Cp), nll_trace=nll_trace, symmetry=symmetry,
                             n_iter=n_iter, ok=ok)


def flip_flop(X, n_passes, symmetry, config=None, on_failure="raise"):
    """Alternating ML estimation from multipass data ``X`` of shape (..., 3M, K)."""
    X = np.asarray(X)
    return flip_flop_scm(sample_covariance(X), n_passes, X.shape[-1], symmetry, config, on_failure)


def per_pass_average(S, n_passes):
    """Mean of the M diagonal 3 x 3 blocks of a multipass sample covariance."""
    S4 = _split(S, int(n_passes))
    return hermitian(np.einsum("...kakb->...ab", S4) / n_passes)


def tusml_scm(S, n_passes, symmetry):
    """Temporally-uncorrelated structured ML estimate from a multipass SCM.

    Ignores correlation between passes: projects the average of the per-pass
    3 x 3 sample covariances onto the symmetry class.
    """
    return project(per_pass_average(S, n_passes), symmetry, check=False)


def tusml(X, n_passes, symmetry):
    """:func:`tusml_scm` applied to data of shape (..., 3M, K)."""
    return tusml_scm(sample_covariance(X), n_passes, symmetry)
