"""Choosing the dominant symmetry with an information criterion.

Each of the four hypotheses is fitted by the flip-flop and scored by penalised
likelihood; the lowest score wins. Confusion tables show how often each true
class is recognised.
"""
import numpy as np

from kronpol import BIC, Scenario, classify, confusion_experiment, kron, nominal_polarimetric
from kronpol.simulate import CLASS_LABELS, confusion_experiments, draw_samples, exponential_temporal

# %% a single decision
X = draw_samples(kron(exponential_temporal(2, 0.9), nominal_polarimetric("reflection")), 25, seed=4)
print("selected:", classify(X, 2, BIC).label)

# %% confusion table, rows = true class
sc = Scenario(n_passes=2, n_looks=25, rho=0.9, trials=2000, seed=0)
cm = confusion_experiment(sc, BIC)
print("      " + " ".join(f"{c:>10s}" for c in CLASS_LABELS))
for label, row in zip(CLASS_LABELS, cm.percent):
    print(f"{label:>10s} " + " ".join(f"{v:10.1f}" for v in row))
print(f"kappa {cm.kappa:.3f}")

# %% all rules on the same trials
for rule, table in confusion_experiments(sc, ["aic", "bic", "gic", "hqc"]).items():
    print(f"{str(rule):>5s} kappa {table.kappa:.3f} accuracy {np.round(table.accuracy, 1)}")

# %% the pass-averaged baseline on the same data
print("baseline kappa", round(confusion_experiment(sc, BIC, estimator="tusml").kappa, 3))
