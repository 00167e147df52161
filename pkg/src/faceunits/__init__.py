"""Localized sparse basis learning for 3D facial-expression coding.

The pipeline: deformation vectors (from any compatible landmark-based
expression model) are decomposed over a learned dictionary of localized,
unit-norm basis units; per-frame coefficients plus head rotations form a
Q-channel behavioral series; windowed cross-correlation turns each video
into a Q^2 feature vector; a linear SVM with nested cross-validation
evaluates group differences.
"""

from .classify import (ComponentWeightSummary, CvConfig, EvaluationReport,
                       LabeledDataset, LinearSvmModel, component_weight_summary,
                       nested_loo_evaluate, subsampled_weight_rows,
                       train_linear_svm)
from .coding import CodingConfig, encode, encode_series, objective_value
from .core import (BasisDictionary, CoefficientSeries, DeformationSample,
                   ExpressionModel, ValidationIssue, ValidationReport,
                   canonical_names, synthesize_deformation,
                   synthesize_from_dictionary, validate_dictionary)
from .errors import (ConfigError, ConvergenceError, DegenerateInputError,
                     FaceUnitsError, GenerationError, InputError,
                     NumericalError, PartialFailure, StratificationError)
from .learning import (IterationRecord, LearnConfig, TrainingLog, assign_names,
                       learn, mean_abs_activation, rank_by_activation,
                       update_dictionary_step)
from .synth import (AtomMatch, CoefficientDistribution, LabeledSeriesSpec,
                    MatchReport, SynthSpec, generate_labeled_series,
                    generate_planted_corpus, match_dictionaries)
from .topology import (GROUP_CODES, LandmarkTopology, ibug51_topology,
                       proportional_allocation)
from .wcc import (FeatureVector, WccConfig, feature_pair_names, video_features,
                  window_wcc)

__version__ = "0.1.0"

__all__ = [
    "AtomMatch", "BasisDictionary", "CodingConfig", "CoefficientDistribution",
    "CoefficientSeries", "ComponentWeightSummary", "ConfigError",
    "ConvergenceError", "CvConfig", "DeformationSample", "DegenerateInputError",
    "EvaluationReport", "ExpressionModel", "FaceUnitsError", "FeatureVector",
    "GROUP_CODES", "GenerationError", "InputError", "IterationRecord",
    "LabeledDataset", "LabeledSeriesSpec", "LandmarkTopology", "LearnConfig",
    "LinearSvmModel", "MatchReport", "NumericalError", "PartialFailure",
    "StratificationError", "SynthSpec", "TrainingLog", "ValidationIssue",
    "ValidationReport", "WccConfig", "assign_names", "canonical_names",
    "component_weight_summary", "encode", "encode_series", "feature_pair_names",
    "generate_labeled_series", "generate_planted_corpus", "ibug51_topology",
    "learn", "match_dictionaries", "mean_abs_activation", "nested_loo_evaluate",
    "objective_value", "proportional_allocation", "rank_by_activation",
    "subsampled_weight_rows", "synthesize_deformation",
    "synthesize_from_dictionary", "train_linear_svm", "update_dictionary_step",
    "validate_dictionary", "video_features", "window_wcc",
]
