"""Low-rank permutation matrices via kissing-number spherical codes.

An n x n permutation matrix is carried by two n x m factors (m much smaller
than n, chosen from kissing-number bounds) plus a nonlinearity: a hard
threshold reproduces the permutation exactly, a row softmax approximates it
to any accuracy.  Solvers for point-set alignment, linear assignment
(dense and sparse) and quadratic assignment optimize the factors directly,
with exact combinatorial oracles for verification.
"""

from .backend import BACKEND
from .kissing import (
    DEFAULT_TABLE,
    KissingTable,
    SphericalCode,
    CodeConstructionError,
    generate_spherical_code,
    rank_for,
)
from .lowrank import (
    Assignment,
    EntrySet,
    FactorPair,
    evaluate_entries,
    exact_factor_pair,
    greedy_round,
    greedy_round_sparse,
    normalize,
    relu_permutation,
    representation_size,
    softmax_permutation,
    validity_metrics,
    validity_metrics_sparse,
)
from .grad import (
    LossEval,
    finite_difference_check,
    lap_loss,
    lap_loss_sparse,
    nll_alignment_loss,
    qap_loss,
)
from .optim import Adam, Schedule, spectral_norm
from .oracle import OracleResult, brute_force_lap, brute_force_qap, hungarian
from .solvers import (
    AlignProblem,
    LapInstance,
    QapInstance,
    SolveReport,
    make_align_problem,
    make_feature_lap,
    make_sparse_lap,
    solve_alignment,
    solve_lap_dense,
    solve_lap_sparse,
    solve_qap,
)

__version__ = "0.1.0"
