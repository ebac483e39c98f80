"""Synthetic evaluation bench for attribute-level privacy filtering.

The package generates labeled synthetic data with planted categorical
dependencies, trains a linear factor model that disentangles chosen
attributes into editable codes, applies opt-in/opt-out privacy filters
to the encoded representation, and measures what the filtered output
still reveals.
"""

from .evaluation import (
    AccuracyMatrix,
    DropCorrelationStudy,
    EvaluationReport,
    UnseenAttributeResult,
    accuracy_matrix,
    build_report,
    drop_correlation_study,
    load_report,
    policy_accuracies,
    run_full_evaluation,
    single_attribute_policy,
    unseen_attribute_study,
    write_report_json,
)
from .filtering import (
    AuditResult,
    FilteredBatch,
    FilteredCodes,
    FilterPolicy,
    PrivacyFilter,
    apply_filter,
    audit_leakage,
    audit_policy,
    batch_audit_summary,
    filter_codes,
    filter_features,
    load_policy,
    save_policy,
)
from .model import (
    EncodedBatch,
    FactorModel,
    TrainingError,
    gradient_check,
    load_model,
    save_model,
    train,
    validation_mask,
)
from .schema import (
    Attribute,
    AttributeSchema,
    Dataset,
    LabeledSample,
    demo_schema,
    load_dataset,
    load_schema,
    save_dataset,
    save_schema,
)
from .softmax import SoftmaxRegression
from .stats import (
    AssociationMatrix,
    ContingencyTable,
    DegenerateTableWarning,
    RegressionSummary,
    association_matrix,
    categorize_cramers_v,
    chi_squared,
    contingency,
    contingency_table,
    cramers_v,
    entropy,
    mutual_information,
    pearson,
    regularized_incomplete_beta,
    student_t_sf,
    uncertainty_coefficient,
    uncertainty_coefficient_labels,
)
from .synthworld import (
    DependencySpec,
    RenderSpec,
    SyntheticWorldSpec,
    demo_world_spec,
    exact_association_matrix,
    exact_joint,
    load_world,
    make_world,
    noisy_copy_table,
    p_same_for_v,
    render_features,
    sample_labels,
    save_world,
    uniform_table,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyMatrix",
    "AssociationMatrix",
    "Attribute",
    "AttributeSchema",
    "AuditResult",
    "ContingencyTable",
    "Dataset",
    "DegenerateTableWarning",
    "DependencySpec",
    "DropCorrelationStudy",
    "EncodedBatch",
    "EvaluationReport",
    "FactorModel",
    "FilterPolicy",
    "FilteredBatch",
    "FilteredCodes",
    "LabeledSample",
    "PrivacyFilter",
    "RegressionSummary",
    "RenderSpec",
    "SoftmaxRegression",
    "SyntheticWorldSpec",
    "TrainingError",
    "UnseenAttributeResult",
    "accuracy_matrix",
    "apply_filter",
    "association_matrix",
    "audit_leakage",
    "audit_policy",
    "batch_audit_summary",
    "build_report",
    "categorize_cramers_v",
    "chi_squared",
    "contingency",
    "contingency_table",
    "cramers_v",
    "demo_schema",
    "demo_world_spec",
    "drop_correlation_study",
    "entropy",
    "exact_association_matrix",
    "exact_joint",
    "filter_codes",
    "filter_features",
    "gradient_check",
    "load_dataset",
    "load_model",
    "load_policy",
    "load_report",
    "load_schema",
    "load_world",
    "make_world",
    "mutual_information",
    "noisy_copy_table",
    "p_same_for_v",
    "pearson",
    "policy_accuracies",
    "regularized_incomplete_beta",
    "render_features",
    "run_full_evaluation",
    "sample_labels",
    "save_dataset",
    "save_model",
    "save_policy",
    "save_schema",
    "save_world",
    "single_attribute_policy",
    "student_t_sf",
    "train",
    "uncertainty_coefficient",
    "uncertainty_coefficient_labels",
    "uniform_table",
    "unseen_attribute_study",
    "validation_mask",
    "write_report_json",
]
