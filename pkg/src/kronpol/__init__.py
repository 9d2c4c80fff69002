"""Kronecker-structured covariance estimation and symmetry classification for
multipass polarimetric SAR data."""
from .decomposition import HAlpha, h_alpha, zone_index
from .imaging import (MultipassStack, classify_map, decompose_map, load_stack, render_map,
                      save_stack, window_samples)
from .kronml import (FlipFlopConfig, FlipFlopError, KroneckerEstimate, flip_flop, flip_flop_scm,
                     negative_log_likelihood, tusml, tusml_scm)
from .linalg import commutation_matrix, kron, pauli_coherence, sample_covariance
from .mos import AIC, BIC, GIC, HQC, MosRule, classify, classify_tusml, penalty
from .simulate import (ConfusionMatrix, Scenario, cohens_kappa, confusion_experiment,
                       nominal_polarimetric, nrmse_experiment)
from .symmetry import Symmetry, project

__version__ = "0.1.0"
