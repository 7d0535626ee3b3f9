"""weaklabel: a weak-supervision pseudo-labeling engine.

Given dense embeddings of class descriptions, task-domain unlabeled
documents, and a large external corpus, the engine retrieves
class-relevant external documents, diversifies them into a compact
pseudo-labeled training set, and picks retrieval/selection parameters by
maximizing the entropy of the trained classifier's induced label
distribution over the task documents.
"""

from .ann import (
    ExactIndex,
    IvfIndex,
    NeighborList,
    build_default_index,
    build_exact_index,
    build_ivf_index,
    load_ivf_index,
    save_ivf_index,
    search,
)
from .classifier import (
    ClassifierModel,
    TrainConfig,
    TrainingSet,
    load_model,
    predict_labels,
    predict_proba,
    save_model,
    train,
)
from .entmax import (
    GridPoint,
    GridReport,
    entropy,
    entropy_accuracy_report,
    grid_search,
    induced_distribution,
    induced_distribution_soft,
)
from .errors import EngineError
from .evaluation import accuracy, confusion_table, label_weighted_f1
from .pipeline import RunConfig, RunReport, resolve_conflicts, run_pipeline
from .retrieval import (
    CandidatePool,
    SeedSet,
    build_candidate_pool,
    build_candidate_pool_external,
    compute_seed_count,
    select_seeds,
)
from .subsetsel import (
    PseudoLabelSet,
    SimilarityGround,
    facility_location_value,
    greedy_select,
    select_other,
)
from .synth import SyntheticSpec, generate_synthetic
from .vecstore import ClassDescription, EmbeddingStore, cosine, load_store, save_store

__version__ = "0.1.0"

__all__ = [
    "CandidatePool",
    "ClassDescription",
    "ClassifierModel",
    "EmbeddingStore",
    "EngineError",
    "ExactIndex",
    "GridPoint",
    "GridReport",
    "IvfIndex",
    "NeighborList",
    "PseudoLabelSet",
    "RunConfig",
    "RunReport",
    "SeedSet",
    "SimilarityGround",
    "SyntheticSpec",
    "TrainConfig",
    "TrainingSet",
    "accuracy",
    "build_candidate_pool",
    "build_candidate_pool_external",
    "build_default_index",
    "build_exact_index",
    "build_ivf_index",
    "compute_seed_count",
    "confusion_table",
    "cosine",
    "entropy",
    "entropy_accuracy_report",
    "facility_location_value",
    "generate_synthetic",
    "greedy_select",
    "grid_search",
    "induced_distribution",
    "induced_distribution_soft",
    "label_weighted_f1",
    "load_ivf_index",
    "load_model",
    "load_store",
    "predict_labels",
    "predict_proba",
    "resolve_conflicts",
    "run_pipeline",
    "save_ivf_index",
    "save_model",
    "save_store",
    "search",
    "select_other",
    "select_seeds",
    "train",
]
