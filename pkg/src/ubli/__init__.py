"""Unsupervised bilingual lexicon induction: self-learning alignment, preprocessing
(PCA, linear transformation, fusion), dimension-reduction initialization and
static + contextual combination, with an evaluation harness and experiment runner."""

from .cscbli import CscbliConfig, CscbliResult, SpringParams, build_unified, interpolate_rank, train_cscbli
from .dictionary import Dictionary
from .embeddings import Vocabulary, load_embeddings, save_embeddings
from .evaluation import EvalReport, GoldDictionary, precision_at_k
from .experiments import ExperimentPlan, ResultRow, make_plan, run_matrix, run_pipeline
from .init import InitConfig, iterative_dimred_init, unsupervised_init
from .preprocess import fuse, linear_transform, normalize, pca_reduce
from .retrieval import best_matches, rank_targets
from .selflearn import AlignmentResult, SelfLearnConfig, self_learn, solve_orthogonal_mapping

__version__ = "0.1.0"

__all__ = [
    "CscbliConfig",
    "CscbliResult",
    "SpringParams",
    "build_unified",
    "interpolate_rank",
    "train_cscbli",
    "Dictionary",
    "Vocabulary",
    "load_embeddings",
    "save_embeddings",
    "EvalReport",
    "GoldDictionary",
    "precision_at_k",
    "ExperimentPlan",
    "ResultRow",
    "make_plan",
    "run_matrix",
    "run_pipeline",
    "InitConfig",
    "iterative_dimred_init",
    "unsupervised_init",
    "fuse",
    "linear_transform",
    "normalize",
    "pca_reduce",
    "best_matches",
    "rank_targets",
    "AlignmentResult",
    "SelfLearnConfig",
    "self_learn",
    "solve_orthogonal_mapping",
]
