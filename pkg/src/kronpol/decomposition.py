"""Entropy / mean-alpha features of a Pauli coherence and the nine-zone plane."""
from typing import NamedTuple

import numpy as np

from .linalg import hermitian

__all__ = ["HAlpha", "h_alpha", "zone_index", "ZONE_NAMES", "ENTROPY_BANDS", "ALPHA_BOUNDS"]

#: entropy splitting low / medium / high
ENTROPY_BANDS = (0.5, 0.9)
#: alpha bounds in degrees per entropy band, low to high entropy
ALPHA_BOUNDS = ((42.5, 47.5), (40.0, 50.0), (40.0, 55.0))
# zones for (band, alpha bin) with alpha bins ordered low to high
_ZONES = np.array([[9, 8, 7],
                   [6, 5, 4],
                   [3, 2, 1]])

ZONE_NAMES = {
    1: "high entropy double bounce",
    2: "high entropy multiple scattering",
    3: "high entropy surface (nonfeasible)",
    4: "medium entropy multiple scattering",
    5: "medium entropy vegetation",
    6: "medium entropy surface",
    7: "low entropy multiple scattering",
    8: "low entropy dipole",
    9: "low entropy surface",
}

_DEGENERATE_RTOL = 1e-8


class HAlpha(NamedTuple):
    entropy: np.ndarray
    mean_alpha: np.ndarray  # degrees


def h_alpha(T, invalid="raise"):
    """Entropy (base 3) and mean alpha angle of a 3 x 3 coherence matrix.

    Eigenvalues closer than ``1e-8`` of the largest one are treated as one
    degenerate cluster: their eigenvectors' first-component energies are
    averaged, which makes the mean alpha independent of the arbitrary basis
    chosen inside the cluster.

    Parameters
    ----------
    T : array_like, shape (..., 3, 3)
    invalid : {"raise", "nan"}
        Behaviour for matrices with zero (or non-finite) trace.
    """
    T = hermitian(T)
    finite = np.all(np.isfinite(T), axis=(-2, -1))
    T = np.where(finite[..., None, None], T, 0.0)
    w, V = np.linalg.eigh(T)
    w = np.clip(w, 0.0, None)
    total = w.sum(axis=-1)
    bad = ~finite | ~(total > 0)
    if np.any(bad) and invalid == "raise":
        raise ValueError("coherence matrix has zero trace")
    total = np.where(bad, 1.0, total)
    p = w / total[..., None]

    c2 = np.abs(V[..., 0, :]) ** 2
    tol = _DEGENERATE_RTOL * np.max(w, axis=-1)
    link01 = (w[..., 1] - w[..., 0]) <= tol
    link12 = (w[..., 2] - w[..., 1]) <= tol
    g0 = np.zeros_like(link01, dtype=int)
    g1 = np.where(link01, g0, 1)
    g2 = np.where(link12, g1, 2)
    groups = np.stack([g0, g1, g2], axis=-1)
    same = groups[..., :, None] == groups[..., None, :]
    c2 = (same * c2[..., None, :]).sum(axis=-1) / same.sum(axis=-1)

    alpha = np.degrees(np.arccos(np.sqrt(np.clip(c2, 0.0, 1.0))))
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p) / np.log(3.0), 0.0)
    H = np.clip(-plogp.sum(axis=-1), 0.0, 1.0) + 0.0  # no -0.0
    abar = np.clip((p * alpha).sum(axis=-1), 0.0, 90.0)
    H = np.where(bad, np.nan, H)
    abar = np.where(bad, np.nan, abar)
    if H.ndim == 0:
        return HAlpha(float(H), float(abar))
    return HAlpha(H, abar)


def zone_index(entropy, mean_alpha):
    """Zone 1..9 of points in the H / alpha plane (0 where input is NaN).

    Bands are half-open and lower-inclusive: a point on a boundary belongs to
    the band above it.
    """
    H = np.asarray(entropy, dtype=float)
    a = np.asarray(mean_alpha, dtype=float)
    band = np.digitize(H, ENTROPY_BANDS)
    lo = np.take(np.array([b[0] for b in ALPHA_BOUNDS]), band)
    hi = np.take(np.array([b[1] for b in ALPHA_BOUNDS]), band)
    abin = (a >= lo).astype(int) + (a >= hi).astype(int)
    zone = _ZONES[band, abin]
    zone = np.where(np.isnan(H) | np.isnan(a), 0, zone)
    if zone.ndim == 0:
        return int(zone)
    return zone
