"""Model-order selection among the four polarimetric symmetry hypotheses.

For each hypothesis the Kronecker ML fit is scored by

    2K log|C| + 2K tr(C^{-1} S) + zeta * eta(K),

with ``zeta = M**2 + zeta_p`` real parameters and ``eta`` the penalty of the
chosen information criterion. The hypothesis with the lowest score wins; exact
ties go to the hypothesis with fewer parameters.
"""
from dataclasses import dataclass

import numpy as np

from .kronml import FlipFlopError, N_POL, flip_flop_scm, per_pass_average, _split, _trace_term
from .linalg import inv_logdet_masked, sample_covariance
from .symmetry import Symmetry, project

__all__ = [
    "MosRule",
    "MosScore",
    "AIC",
    "BIC",
    "GIC",
    "HQC",
    "penalty",
    "n_parameters",
    "score",
    "fit_all",
    "score_fits",
    "select",
    "classify",
    "classify_scm",
    "score_tusml",
    "classify_tusml",
]

_RULES = ("aic", "gic", "bic", "hqc")


@dataclass(frozen=True)
class MosRule:
    """Information criterion; ``delta`` is only meaningful for GIC."""

    name: str
    delta: int = None

    def __post_init__(self):
        name = self.name.lower()
        object.__setattr__(self, "name", name)
        if name not in _RULES:
            raise ValueError(f"unknown rule {self.name!r}; expected one of {_RULES}")
        if name == "gic":
            if self.delta is None:
                object.__setattr__(self, "delta", 2)
            if int(self.delta) != self.delta or self.delta < 2:
                raise ValueError("GIC delta must be an integer >= 2")
        elif self.delta is not None:
            raise ValueError("delta is only used by GIC")

    @classmethod
    def parse(cls, value, delta=None):
        if isinstance(value, cls):
            return value
        return cls(value, delta if str(value).lower() == "gic" else None)

    def __str__(self):
        return f"gic{self.delta}" if self.name == "gic" else self.name


AIC = MosRule("aic")
BIC = MosRule("bic")
GIC = MosRule("gic", 2)
HQC = MosRule("hqc")


@dataclass
class MosScore:
    symmetry: Symmetry
    score: float
    zeta: int
    nll_term: float


def penalty(rule, n_looks):
    """Per-parameter penalty ``eta(K)``."""
    rule = MosRule.parse(rule)
    K = n_looks
    if K < 1:
        raise ValueError("number of looks must be >= 1")
    if rule.name == "aic":
        return 2.0
    if rule.name == "gic":
        return float(rule.delta + 1)
    if rule.name == "bic":
        return float(np.log(K))
    if K < 2:
        raise ValueError("HQC needs at least 2 looks (log log K undefined)")
    return 2.0 * np.log(np.log(K))


def n_parameters(symmetry, n_passes):
    """Parameter count ``M**2 + zeta_p`` charged by the penalty."""
    return n_passes ** 2 + Symmetry.parse(symmetry).zeta_p


def _fit_term(Ct, Cp, S, n_looks):
    # 2K log|Ct kron Cp| + 2K tr((Ct kron Cp)^{-1} S)
    M = Ct.shape[-1]
    Ct_inv, ld_t, ok_t = inv_logdet_masked(Ct)
    Cp_inv, ld_p, ok_p = inv_logdet_masked(Cp)
    tr = _trace_term(_split(S, M), np.nan_to_num(Ct_inv), np.nan_to_num(Cp_inv))
    term = 2.0 * n_looks * (N_POL * ld_t + M * ld_p + tr)
    return np.where(ok_t & ok_p, term, np.nan)


def score(estimate, S, n_looks, rule):
    """Score of one fitted hypothesis (single problem)."""
    M = estimate.Ct.shape[-1]
    term = _fit_term(estimate.Ct, estimate.Cp, S, n_looks)
    if not np.all(np.isfinite(term)):
        raise FlipFlopError("singular covariance estimate", symmetry=estimate.symmetry)
    zeta = n_parameters(estimate.symmetry, M)
    return MosScore(symmetry=estimate.symmetry, score=term + zeta * penalty(rule, n_looks),
                    zeta=zeta, nll_term=term)


def fit_all(S, n_passes, n_looks, config=None, on_failure="raise"):
    """Flip-flop fits for all four hypotheses, keyed by :class:`Symmetry`."""
    fits = {}
    for h in Symmetry:
        try:
            fits[h] = flip_flop_scm(S, n_passes, n_looks, h, config, on_failure=on_failure)
        except FlipFlopError as exc:
            raise FlipFlopError(f"{h.label} fit failed: {exc}", iteration=exc.iteration,
                                symmetry=h) from exc
    return fits


def score_fits(fits, S, n_looks, rule):
    """Scores of shape (..., 4), column ``i`` for ``Symmetry(i)``; NaN on failure."""
    cols = []
    for h in Symmetry:
        est = fits[h]
        M = est.Ct.shape[-1]
        term = _fit_term(est.Ct, est.Cp, S, n_looks)
        term = np.where(est.ok, term, np.nan)
        cols.append(term + n_parameters(h, M) * penalty(rule, n_looks))
    return np.stack(cols, axis=-1)


# hypotheses ordered by increasing parameter count for tie-breaking
_BY_ZETA = np.array(sorted(Symmetry, key=lambda h: h.zeta_p))


def select(scores):
    """Index of the minimum score along the last axis, ties to the smallest model.

    Rows where every score is NaN return -1.
    """
    scores = np.asarray(scores, dtype=float)
    reordered = scores[..., _BY_ZETA]
    allnan = np.all(np.isnan(reordered), axis=-1)
    filled = np.where(np.isnan(reordered), np.inf, reordered)
    choice = _BY_ZETA[np.argmin(filled, axis=-1)]
    return np.where(allnan, -1, choice)


def classify_scm(S, n_passes, n_looks, rule, config=None, on_failure="raise"):
    """Selected hypothesis index for a (stack of) multipass SCM(s)."""
    fits = fit_all(S, n_passes, n_looks, config, on_failure=on_failure)
    return select(score_fits(fits, S, n_looks, rule))


def classify(X, n_passes, rule, config=None):
    """Dominant symmetry of multipass data ``X`` of shape (3M, K)."""
    X = np.asarray(X)
    choice = classify_scm(sample_covariance(X), n_passes, X.shape[-1], rule, config)
    if np.ndim(choice) == 0:
        return Symmetry(int(choice))
    return choice


def score_tusml(S, n_passes, n_looks, rule):
    """Scores of the temporally-uncorrelated baseline, shape (..., 4).

    Each hypothesis is fitted by projecting the pass-averaged SCM and scored
    with the full-data likelihood under ``C_t = I``, i.e. treating the ``M K``
    polarimetric vectors as independent looks, with the penalty ``zeta_p *
    eta(K)``.
    """
    M = int(n_passes)
    Savg = per_pass_average(S, M)
    eta = penalty(rule, n_looks)
    cols = []
    for h in Symmetry:
        Cp = project(Savg, h, check=False)
        Cp_inv, ld, ok = inv_logdet_masked(Cp)
        tr = np.real(np.einsum("...ij,...ji->...", np.nan_to_num(Cp_inv), Savg))
        term = 2.0 * n_looks * M * (ld + tr)
        cols.append(np.where(ok, term, np.nan) + h.zeta_p * eta)
    return np.stack(cols, axis=-1)


def classify_tusml(X, n_passes, rule):
    """Baseline decision for multipass data ``X`` of shape (3M, K)."""
    X = np.asarray(X)
    choice = select(score_tusml(sample_covariance(X), n_passes, X.shape[-1], rule))
    if np.ndim(choice) == 0:
        return Symmetry(int(choice))
    return choice
