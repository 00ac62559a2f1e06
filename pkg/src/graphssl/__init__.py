"""Graph-based Bayesian semi-supervised learning.

Similarity graphs, graph Matern Gaussian priors, pCN posterior sampling
for regression and binary classification, and a continuum-limit
verification harness (TL2 metric, circle spectral analytics, acceptance
and contraction studies).
"""

from .data import CLASSIFICATION, REGRESSION, Dataset, load_features_csv, load_labels_csv
from .graph import (
    Graph,
    Laplacian,
    build_epsilon_graph,
    build_knn_graph,
    default_connectivity,
    dirichlet_energy,
    laplacian,
    unit_ball_volume,
)
from .spectral import Spectrum, eigendecompose, spectral_convergence_report
from .prior import (
    LatentField,
    MaternPriorSpec,
    classification_transform,
    make_prior,
    prior_log_density,
    sample_prior,
    sample_prior_nonstationary,
)
from .model import (
    LikelihoodSpec,
    exact_gaussian_posterior,
    log_likelihood,
    log_likelihood_grad,
    map_estimate,
)
from .sampler import (
    ChainConfig,
    PosteriorSummary,
    acceptance_vs_n_study,
    effective_sample_size,
    multi_chain,
    pcn_step,
    run_chain,
    split_rhat,
)
from .continuum import (
    TL2Point,
    UnitCircle,
    circle_eigenpairs,
    contraction_study,
    coupled_prior_discrepancy,
    graph_spectrum_vs_circle,
    tl2_distance,
)

__version__ = "0.1.0"
