"""Structured ML estimates of the 3x3 polarimetric covariance.

Channel order is lexicographic ``(HH, HV, VV)``. Each symmetry class is the
image of a simple pattern (block diagonal, real persymmetric, diagonal) under a
fixed invertible change of basis, so the constrained ML estimate is obtained
by moving the statistic into that basis, keeping the admissible part, and
moving back.
"""
from enum import IntEnum

import numpy as np

from .linalg import hermitian, is_psd

__all__ = [
    "Symmetry",
    "project",
    "structure_residual",
    "REFLECTION_U",
    "ROTATION_E",
    "ROTATION_T",
    "ROTATION_V",
]


class Symmetry(IntEnum):
    """Candidate polarimetric symmetry classes, ordered as in confusion tables."""

    NONE = 0
    REFLECTION = 1
    ROTATION = 2
    AZIMUTH = 3

    @property
    def zeta_p(self):
        """Number of real parameters of the structured 3x3 covariance."""
        return _ZETA_P[self]

    @property
    def label(self):
        return self.name.lower()

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise ValueError(f"unknown symmetry {value!r}") from None
        return cls(int(value))


_ZETA_P = {Symmetry.NONE: 9, Symmetry.REFLECTION: 5, Symmetry.ROTATION: 3, Symmetry.AZIMUTH: 2}

_SQ2 = np.sqrt(2.0)

REFLECTION_U = np.array([[1.0, 0.0, 0.0],
                         [0.0, 0.0, 1.0],
                         [0.0, 1.0, 0.0]])
ROTATION_E = np.diag([1.0, 1.0 / _SQ2, 1.0])
ROTATION_T = np.array([[1.0, 0.0, 1.0],
                       [1.0, 0.0, -1.0],
                       [0.0, _SQ2, 0.0]]) / _SQ2
ROTATION_V = np.array([[1.0, 0.0, 0.0],
                       [0.0, 0.0, 1j],
                       [0.0, 1.0, 0.0]])
_J2 = np.array([[0.0, 1.0], [1.0, 0.0]])

# forward maps S -> A S A^H and their inverses (T, V unitary)
_A_ROT = ROTATION_V @ ROTATION_E @ ROTATION_T
_A_ROT_INV = ROTATION_T.T @ np.linalg.inv(ROTATION_E) @ ROTATION_V.conj().T
_A_AZ = ROTATION_E @ ROTATION_T
_A_AZ_INV = ROTATION_T.T @ np.linalg.inv(ROTATION_E)


def _congruence(A, S):
    return A @ S @ np.conj(A).T


def _reflection(S):
    St = _congruence(REFLECTION_U, S)
    B = np.zeros_like(St)
    B[..., :2, :2] = St[..., :2, :2]
    B[..., 2, 2] = St[..., 2, 2]
    C = _congruence(REFLECTION_U.T, B)
    C[..., [0, 1, 1, 2], [1, 0, 2, 1]] = 0.0
    return C


def _rotation(S):
    St = _congruence(_A_ROT, S)
    B = np.zeros_like(St)
    B[..., 0, 0] = St[..., 0, 0]
    S22 = St[..., 1:, 1:]
    B[..., 1:, 1:] = 0.5 * (S22 + _J2 @ S22 @ _J2)
    C = _congruence(_A_ROT_INV, B)
    # rebuild from the three free parameters to remove round-off residue
    a = 0.5 * np.real(C[..., 0, 0] + C[..., 2, 2])
    c = 0.5 * np.real(C[..., 0, 2] + C[..., 2, 0])
    b = 0.5j * np.imag(C[..., 0, 1] + C[..., 1, 2])
    return _rotation_matrix(a, b, c)


def _rotation_matrix(a, b, c):
    d = 0.5 * (a - c)
    C = np.empty(np.shape(a) + (3, 3), dtype=complex)
    C[..., 0, 0] = a
    C[..., 0, 1] = b
    C[..., 0, 2] = c
    C[..., 1, 0] = -b
    C[..., 1, 1] = d
    C[..., 1, 2] = b
    C[..., 2, 0] = c
    C[..., 2, 1] = -b
    C[..., 2, 2] = a
    return C


def _azimuth(S):
    St = _congruence(_A_AZ, S)
    tied = 0.5 * (St[..., 1, 1] + St[..., 2, 2])
    D = np.zeros_like(St)
    D[..., 0, 0] = St[..., 0, 0]
    D[..., 1, 1] = tied
    D[..., 2, 2] = tied
    C = _congruence(_A_AZ_INV, D)
    a = 0.5 * np.real(C[..., 0, 0] + C[..., 2, 2])
    c = 0.5 * np.real(C[..., 0, 2] + C[..., 2, 0])
    return _rotation_matrix(a, np.zeros_like(a), c)


_PROJECTIONS = {
    Symmetry.NONE: lambda S: S,
    Symmetry.REFLECTION: _reflection,
    Symmetry.ROTATION: _rotation,
    Symmetry.AZIMUTH: _azimuth,
}


def project(S, symmetry, check=True):
    """Constrained ML estimate of a 3x3 covariance given the statistic ``S``.

    Parameters
    ----------
    S : array_like, shape (..., 3, 3)
        Hermitian PSD statistic (the sample covariance in the single-pass case).
    symmetry : Symmetry or str or int
    check : bool
        Verify that ``S`` is PSD. Internal callers whose statistic is PSD by
        construction skip this.

    Returns
    -------
    ndarray, shape (..., 3, 3)
        Hermitian matrix lying exactly in the structure set of ``symmetry``.
    """
    symmetry = Symmetry.parse(symmetry)
    S = hermitian(S)
    if S.shape[-2:] != (3, 3):
        raise ValueError(f"expected (..., 3, 3) input, got {S.shape}")
    if check and not np.all(is_psd(S)):
        raise ValueError("statistic is not positive semidefinite")
    return hermitian(_PROJECTIONS[symmetry](S))


def structure_residual(C, symmetry):
    """Largest violation of the entry constraints that define ``symmetry``.

    Zero exactly when ``C`` belongs to the structure set. Hermiticity is part
    of every constraint set.
    """
    symmetry = Symmetry.parse(symmetry)
    C = np.asarray(C, dtype=complex)
    terms = [np.abs(C - np.conj(np.swapaxes(C, -1, -2))).max(axis=(-2, -1))]
    c11, c12, c13 = C[..., 0, 0], C[..., 0, 1], C[..., 0, 2]
    c22, c23, c33 = C[..., 1, 1], C[..., 1, 2], C[..., 2, 2]
    if symmetry in (Symmetry.REFLECTION, Symmetry.AZIMUTH):
        terms += [np.abs(c12), np.abs(c23)]
    if symmetry in (Symmetry.ROTATION, Symmetry.AZIMUTH):
        terms += [
            np.abs(c11 - c33),
            np.abs(np.imag(c13)),
            np.abs(c22 - 0.5 * (c11 - np.real(c13))),
        ]
    if symmetry is Symmetry.ROTATION:
        terms += [np.abs(np.real(c12)), np.abs(c23 - c12)]
    return np.max(np.stack(np.broadcast_arrays(*terms)), axis=0)
