"""mmidict: compact, discriminative sparse dictionaries via information
maximization, with sequence classification and near-optimal summarization."""

from .data import FeatureDataset, Sequence, flatten, l2_normalize_columns
from .gp import (
    KernelMatrix,
    conditional_entropy,
    conditional_variance,
    kernel_from_codes,
    kernel_linear,
    sparse_support_neighbors,
)
from .labeldist import atom_class_dist, label_cond_entropy, set_class_dist
from .pursuit import Dictionary, SparseCodeTable, ksvd_train, omp_encode, reconstruction_rmse
from .recognize import (
    CodeSequence,
    compactness_histogram,
    dtw_distance,
    encode_sequences,
    histogram_descriptor,
    knn_classify,
    purity_histogram,
)
from .select import (
    SelectionTrace,
    estimate_lambda,
    select_kmeans,
    select_me,
    select_mmi1,
    select_mmi2,
    select_mmi3,
)
from .summarize import Summary, coverage_diversity_report, summarize_sequence

__version__ = "0.1.0"

__all__ = [
    "CodeSequence",
    "Dictionary",
    "FeatureDataset",
    "KernelMatrix",
    "SelectionTrace",
    "Sequence",
    "SparseCodeTable",
    "Summary",
    "atom_class_dist",
    "compactness_histogram",
    "conditional_entropy",
    "conditional_variance",
    "coverage_diversity_report",
    "dtw_distance",
    "encode_sequences",
    "estimate_lambda",
    "flatten",
    "histogram_descriptor",
    "kernel_from_codes",
    "kernel_linear",
    "knn_classify",
    "ksvd_train",
    "l2_normalize_columns",
    "label_cond_entropy",
    "omp_encode",
    "purity_histogram",
    "reconstruction_rmse",
    "select_kmeans",
    "select_me",
    "select_mmi1",
    "select_mmi2",
    "select_mmi3",
    "set_class_dist",
    "sparse_support_neighbors",
    "summarize_sequence",
]
