import numpy as np
import pytest

from kronpol.linalg import kron, sample_covariance
from kronpol.mos import AIC, BIC, HQC
from kronpol.simulate import (ConfusionMatrix, Scenario, cohens_kappa, confusion_experiment,
                              confusion_experiments, draw_samples, draw_scm_trials,
                              exponential_temporal, nominal_polarimetric, nrmse,
                              nrmse_experiment)
from kronpol.symmetry import Symmetry, structure_residual


def test_nominal_reflection_entries():
    C = nominal_polarimetric(Symmetry.REFLECTION)
    assert C[0, 0] == 1 and C[0, 2] == 0.5 - 0.3j and C[1, 1] == 0.25 and C[2, 2] == 0.4
    assert C[0, 1] == 0 and C[1, 2] == 0


def test_nominal_azimuth_membership_and_pd():
    assert structure_residual(nominal_polarimetric("azimuth"), "azimuth") == 0
    for h in Symmetry:
        C = nominal_polarimetric(h)
        assert np.array_equal(C, C.conj().T)
        assert np.linalg.eigvalsh(C).min() > 0


def test_nominal_out_of_range():
    with pytest.raises(ValueError):
        nominal_polarimetric(4)
    with pytest.raises(ValueError):
        nominal_polarimetric("helix")


def test_nominal_returns_copy():
    nominal_polarimetric("none")[0, 0] = 99
    assert nominal_polarimetric("none")[0, 0] == 1


def test_exponential_temporal():
    assert np.array_equal(exponential_temporal(3, 0.0), np.eye(3))
    assert np.allclose(exponential_temporal(2, 0.9), [[1, 0.9], [0.9, 1]], atol=0)
    assert np.linalg.eigvalsh(exponential_temporal(4, 0.5)).min() > 0
    with pytest.raises(ValueError):
        exponential_temporal(2, 1.0)


def test_draw_samples_identity_lln():
    K = 20_000
    S = sample_covariance(draw_samples(np.eye(6), K, seed=11))
    assert np.abs(S - np.eye(6)).max() < 3 / np.sqrt(K)


def test_draw_samples_deterministic():
    C = kron(exponential_temporal(2, 0.9), nominal_polarimetric("rotation"))
    assert np.array_equal(draw_samples(C, 30, seed=5), draw_samples(C, 30, seed=5))


def test_draw_samples_consistency():
    C = kron(exponential_temporal(2, 0.9), nominal_polarimetric("none"))
    S = sample_covariance(draw_samples(C, 100_000, seed=2))
    assert np.linalg.norm(S - C) / np.linalg.norm(C) <= 0.02


def test_draw_samples_non_pd():
    with pytest.raises(ValueError):
        draw_samples(np.diag([1.0, -1.0]), 4)


def test_nrmse_exact_estimates():
    C = nominal_polarimetric("none")
    assert nrmse(C, np.stack([C] * 10)) == 0


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(2, 25, rho=1.2)
    with pytest.raises(ValueError):
        Scenario(2, 25, trials=0)
    assert Scenario(2, 25).key != Scenario(2, 25, 0.9).key


def test_trials_independent_of_chunking():
    sc = Scenario(2, 9, 0.9, trials=20, seed=3)
    full = draw_scm_trials(sc, "reflection")
    parts = np.concatenate([draw_scm_trials(sc, "reflection", a, a + 7) for a in (0, 7, 14)])
    assert np.array_equal(full[:20], parts[:20])


def test_confusion_reproducible_across_workers():
    sc = Scenario(2, 9, 0.9, trials=300, seed=1)
    a = confusion_experiment(sc, BIC, chunk=1000, workers=1)
    b = confusion_experiment(sc, BIC, chunk=64, workers=3)
    assert np.array_equal(a.counts, b.counts)
    assert np.all(a.counts.sum(axis=1) + a.failures == 300)


def test_confusion_rules_share_trials():
    sc = Scenario(2, 9, None, trials=200, seed=4)
    many = confusion_experiments(sc, [AIC, BIC, HQC])
    assert np.array_equal(many[BIC].counts, confusion_experiment(sc, BIC).counts)


def test_tusml_confusion_runs():
    cm = confusion_experiment(Scenario(2, 25, 0.9, trials=200), BIC, estimator="tusml")
    assert cm.counts.sum() == 800


def test_kappa_examples():
    assert cohens_kappa(np.diag([5, 5, 5, 5])) == 1
    assert cohens_kappa(np.ones((4, 4))) == 0
    with pytest.raises(ValueError):
        cohens_kappa(np.array([[3, 0], [0, 0]]))
    with pytest.raises(ValueError):
        cohens_kappa(np.zeros((4, 4)))


def test_kappa_prefers_diagonal_dominance():
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = rng.integers(0, 10, (4, 4)) + np.diag(rng.integers(50, 100, 4))
        shuffled = c[rng.permutation(4)]
        if np.array_equal(shuffled, c):
            continue
        assert cohens_kappa(c) > cohens_kappa(shuffled)


def test_confusion_matrix_views():
    cm = ConfusionMatrix(np.array([[9, 1, 0, 0], [0, 10, 0, 0], [0, 0, 5, 5], [0, 0, 0, 10]]))
    assert cm.accuracy.tolist() == [90, 100, 50, 100]
    assert cm.failures.tolist() == [0, 0, 0, 0]


def test_identity_temporal_bic_k25_above_90():
    cm = confusion_experiment(Scenario(2, 25, None, trials=10_000, seed=0), BIC)
    assert np.all(cm.accuracy >= 90)


def test_accuracy_non_decreasing_in_looks():
    for M in (1, 2, 3, 4):
        acc = [confusion_experiment(Scenario(M, K, 0.9, trials=2000, seed=0), BIC).accuracy
               for K in (6, 9, 25)]
        for lo, hi in zip(acc, acc[1:]):
            assert np.all(hi >= lo - 1.5)


def test_nrmse_flipflop_decreases_and_beats_tusml():
    for h in Symmetry:
        vals = [nrmse_experiment(Scenario(2, K, 0.9, trials=500, seed=0), h).values
                for K in (6, 25)]
        assert vals[1]["flipflop"] < vals[0]["flipflop"]
        assert vals[1]["tusml"] < vals[0]["tusml"]
        assert vals[1]["flipflop"] < vals[1]["tusml"]


def test_nrmse_scale_options():
    sc = Scenario(2, 9, 0.9, trials=100)
    gauge = nrmse_experiment(sc, "azimuth", scale="gauge")
    trace = nrmse_experiment(sc, "azimuth", scale="trace")
    assert gauge.values.keys() == trace.values.keys() == {"flipflop", "tusml"}
    assert gauge.failures == {"flipflop": 0, "tusml": 0}
    with pytest.raises(ValueError):
        nrmse_experiment(sc, "azimuth", estimators=("scm",))
    with pytest.raises(ValueError):
        nrmse_experiment(sc, "azimuth", scale="max")
