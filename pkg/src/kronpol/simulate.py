"""Monte Carlo harness: Gaussian multipass data, NRMSE curves, confusion tables.

Random streams are counter based. Trial ``t`` of class ``h`` in a scenario draws
from a Philox generator keyed on ``(seed, scenario key, h, t)``, so results do
not depend on chunking or on the number of worker threads, and every rule or
estimator evaluated on the same scenario sees the same data.
"""
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kronml import FlipFlopConfig, flip_flop_scm, tusml_scm
from .linalg import cholesky_masked, hermitian, kron, sample_covariance
from .mos import MosRule, fit_all, score_fits, score_tusml, select
from .symmetry import Symmetry

__all__ = [
    "NOMINAL_CP",
    "nominal_polarimetric",
    "exponential_temporal",
    "draw_samples",
    "Scenario",
    "trial_generator",
    "draw_scm_trials",
    "nrmse",
    "NrmseReport",
    "nrmse_experiment",
    "ConfusionMatrix",
    "confusion_experiment",
    "confusion_experiments",
    "cohens_kappa",
    "CLASS_LABELS",
]

CLASS_LABELS = tuple(h.label for h in Symmetry)

NOMINAL_CP = {
    Symmetry.NONE: np.array([[1.0, 0.2 + 0.3j, 0.5 - 0.3j],
                             [0.2 - 0.3j, 0.25, -0.2 - 0.2j],
                             [0.5 + 0.3j, -0.2 + 0.2j, 0.8]]),
    Symmetry.REFLECTION: np.array([[1.0, 0.0, 0.5 - 0.3j],
                                   [0.0, 0.25, 0.0],
                                   [0.5 + 0.3j, 0.0, 0.4]]),
    Symmetry.ROTATION: np.array([[1.0, 0.3j, 0.2],
                                 [-0.3j, 0.4, 0.3j],
                                 [0.2, -0.3j, 1.0]]),
    Symmetry.AZIMUTH: np.array([[1.0, 0.0, 0.5],
                                [0.0, 0.25, 0.0],
                                [0.5, 0.0, 1.0]], dtype=complex),
}


def nominal_polarimetric(symmetry):
    """Reference 3 x 3 polarimetric covariance for a symmetry class."""
    try:
        h = Symmetry.parse(symmetry)
    except ValueError as exc:
        raise ValueError(f"no nominal covariance for {symmetry!r}") from exc
    return NOMINAL_CP[h].astype(complex).copy()


def exponential_temporal(n_passes, rho):
    """Temporal covariance with entries ``rho ** |n - m|``."""
    if not abs(rho) < 1:
        raise ValueError("need |rho| < 1")
    if n_passes < 1:
        raise ValueError("n_passes must be >= 1")
    i = np.arange(n_passes)
    return (float(rho) ** np.abs(i[:, None] - i[None, :])).astype(complex)


def _standard_complex(rng, shape):
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def draw_samples(C, n_looks, seed=None):
    """Draw ``n_looks`` circular complex Gaussian vectors with covariance ``C``.

    Returns an array of shape (n, n_looks) whose columns are ``F z`` with
    ``F F^H = C`` (Cholesky) and ``z`` standard circular Gaussian.
    """
    C = hermitian(C)
    L, ok = cholesky_masked(C)
    if not np.all(ok):
        raise ValueError("covariance is not positive definite")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return L @ _standard_complex(rng, (C.shape[-1], int(n_looks)))


@dataclass(frozen=True)
class Scenario:
    """One Monte Carlo setting.

    ``rho=None`` means an identity temporal covariance.
    """

    n_passes: int
    n_looks: int
    rho: float = None
    trials: int = 10_000
    seed: int = 0
    config: FlipFlopConfig = field(default_factory=FlipFlopConfig)

    def __post_init__(self):
        if self.n_passes < 1 or self.n_looks < 1:
            raise ValueError("n_passes and n_looks must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.rho is not None and not abs(self.rho) < 1:
            raise ValueError("need |rho| < 1")

    @property
    def temporal(self):
        if self.rho is None:
            return np.eye(self.n_passes, dtype=complex)
        return exponential_temporal(self.n_passes, self.rho)

    def covariance(self, symmetry):
        return kron(self.temporal, nominal_polarimetric(symmetry))

    @property
    def key(self):
        """Stable 64-bit identifier of the data-generating setting."""
        text = f"M={self.n_passes};K={self.n_looks};rho={self.rho!r}"
        return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def trial_generator(seed, scenario_key, symmetry, trial):
    """Independent generator for one trial, addressed by its coordinates."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(scenario_key), int(symmetry), int(trial)))
    return np.random.Generator(np.random.Philox(ss))


def draw_scm_trials(scenario, symmetry, start=0, stop=None):
    """Sample covariance matrices of trials ``start..stop`` for one class."""
    stop = scenario.trials if stop is None else stop
    h = Symmetry.parse(symmetry)
    n = 3 * scenario.n_passes
    L, _ = cholesky_masked(scenario.covariance(h))
    key = scenario.key
    Z = np.stack([
        _standard_complex(trial_generator(scenario.seed, key, h, t), (n, scenario.n_looks))
        for t in range(start, stop)
    ])
    return sample_covariance(L @ Z)


def _chunks(total, size):
    return [(a, min(a + size, total)) for a in range(0, total, size)]


def _map_chunks(fn, scenario, chunk, workers):
    spans = _chunks(scenario.trials, chunk)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda ab: fn(*ab), spans))
    return [fn(a, b) for a, b in spans]


def nrmse(true, estimates):
    """Normalized RMSE ``sqrt(mean(||C - C_hat||_F^2) / ||C||_F^2)`` over trials."""
    true = np.asarray(true)
    estimates = np.asarray(estimates)
    err = np.sum(np.abs(estimates - true) ** 2, axis=(-2, -1))
    return float(np.sqrt(np.mean(err) / np.sum(np.abs(true) ** 2)))


def _trace_match(estimates, true):
    t_est = np.real(np.trace(estimates, axis1=-2, axis2=-1))
    return estimates * (np.real(np.trace(true)) / t_est)[..., None, None]


@dataclass
class NrmseReport:
    scenario: Scenario
    symmetry: Symmetry
    values: dict
    failures: dict


ESTIMATORS = ("flipflop", "tusml")


def nrmse_experiment(scenario, symmetry, estimators=ESTIMATORS, scale="trace", chunk=2000,
                     workers=1):
    """NRMSE of the structured polarimetric estimate for data of class ``symmetry``.

    The estimator enforces the same symmetry that generated the data.

    Parameters
    ----------
    scale : {"trace", "gauge"}
        "trace" rescales each estimate to the nominal trace before comparison,
        removing the Kronecker scale ambiguity; "gauge" compares the flip-flop
        factor normalized to ``trace(C_t) == M`` and the raw TUSML estimate.
    """
    h = Symmetry.parse(symmetry)
    true = nominal_polarimetric(h)
    if scale not in ("trace", "gauge"):
        raise ValueError(f"unknown scale {scale!r}")
    for name in estimators:
        if name not in ESTIMATORS:
            raise ValueError(f"unknown estimator {name!r}")

    def run(a, b):
        S = draw_scm_trials(scenario, h, a, b)
        out = {}
        for name in estimators:
            if name == "flipflop":
                est = flip_flop_scm(S, scenario.n_passes, scenario.n_looks, h, scenario.config,
                                    on_failure="mask")
                Cp, ok = est.Cp, est.ok
            else:
                Cp = tusml_scm(S, scenario.n_passes, h)
                ok = np.all(np.isfinite(Cp), axis=(-2, -1))
            if scale == "trace":
                with np.errstate(invalid="ignore", divide="ignore"):
                    Cp = _trace_match(Cp, true)
            err = np.sum(np.abs(Cp - true) ** 2, axis=(-2, -1))
            out[name] = (err[ok], int(np.sum(~ok)))
        return out

    parts = _map_chunks(run, scenario, chunk, workers)
    values, failures = {}, {}
    norm = np.sum(np.abs(true) ** 2)
    for name in estimators:
        err = np.concatenate([p[name][0] for p in parts])
        failures[name] = sum(p[name][1] for p in parts)
        values[name] = math.sqrt(math.fsum(err) / max(err.size, 1) / norm)
    return NrmseReport(scenario=scenario, symmetry=h, values=values, failures=failures)


def cohens_kappa(counts):
    """Cohen's kappa of a square confusion table (rows true, columns chosen)."""
    c = np.asarray(counts, dtype=float)
    n = c.sum()
    if n <= 0:
        raise ValueError("empty confusion table")
    p_o = np.trace(c) / n
    p_e = float(np.sum(c.sum(axis=0) * c.sum(axis=1))) / n ** 2
    if np.isclose(p_e, 1.0):
        raise ValueError("chance agreement is 1; kappa undefined")
    return (p_o - p_e) / (1.0 - p_e)


@dataclass
class ConfusionMatrix:
    """Selection counts; row = true class, column = selected class.

    ``failures[i]`` counts trials of class ``i`` where no hypothesis could be
    fitted; they are excluded from ``counts``.
    """

    counts: np.ndarray
    failures: np.ndarray = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=int)
        if self.failures is None:
            self.failures = np.zeros(self.counts.shape[0], dtype=int)

    @property
    def percent(self):
        return 100.0 * self.counts / self.counts.sum(axis=1, keepdims=True)

    @property
    def accuracy(self):
        """Per-class accuracy in percent."""
        return np.diag(self.percent).copy()

    @property
    def kappa(self):
        return cohens_kappa(self.counts)


def _tally(choice, n_classes=4):
    valid = choice >= 0
    return np.bincount(choice[valid], minlength=n_classes), int(np.sum(~valid))


def confusion_experiments(scenario, rules, estimator="flipflop", chunk=2000, workers=1):
    """Confusion tables for several rules sharing the same trials and fits.

    Returns a dict mapping each :class:`MosRule` to a :class:`ConfusionMatrix`.
    """
    rules = [MosRule.parse(r) for r in rules]
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    M, K = scenario.n_passes, scenario.n_looks
    counts = {r: np.zeros((4, 4), dtype=int) for r in rules}
    fails = {r: np.zeros(4, dtype=int) for r in rules}
    for h in Symmetry:
        def run(a, b, h=h):
            S = draw_scm_trials(scenario, h, a, b)
            if estimator == "flipflop":
                fits = fit_all(S, M, K, scenario.config, on_failure="mask")
                return {r: select(score_fits(fits, S, K, r)) for r in rules}
            return {r: select(score_tusml(S, M, K, r)) for r in rules}

        parts = _map_chunks(run, scenario, chunk, workers)
        for r in rules:
            row, nf = _tally(np.concatenate([p[r] for p in parts]))
            counts[r][int(h)] = row
            fails[r][int(h)] = nf
    return {r: ConfusionMatrix(counts[r], fails[r]) for r in rules}


def confusion_experiment(scenario, rule, estimator="flipflop", chunk=2000, workers=1):
    """Confusion table of one MOS rule over the four nominal classes."""
    rule = MosRule.parse(rule)
    return confusion_experiments(scenario, [rule], estimator, chunk, workers)[rule]
