"""Privacy filtering of encoded batches via factor-code replacement.

A filter policy names attributes either to hide (opt_out) or to keep
(opt_in); the hidden set is always resolved within the model's
disentangle set.  Hiding an attribute replaces its predicted label with
a draw that is uniform over all of its classes, original included, so a
filtered sample carries no information about the true class beyond
chance.  The replacement stream for an attribute is keyed by the policy
seed and the attribute's schema index alone, which makes an opt_out
policy and its complementary opt_in policy produce bit-identical
output.

The residual channel is either kept or swapped across the batch by a
uniform random permutation (fixed points allowed); swapping severs any
label information the residual still carries.

Filters consume predicted labels only.  True labels never enter the
filtering path; they appear only in the leakage audit, which trains a
fresh probe classifier on filtered output to check that hidden
attributes really are gone.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .fileio import atomic_write_text, sha256_of_bytes
from .model import EncodedBatch, FactorModel
from .rng import stream
from .schema import AttributeSchema
from .softmax import SoftmaxRegression

_MODES = ("opt_in", "opt_out")
_RESIDUAL_ACTIONS = ("keep", "swap")


@dataclass(frozen=True)
class FilterPolicy:
    """What to hide, what to do with the residual, and the draw seed.

    mode "opt_out": the listed attributes are hidden.
    mode "opt_in": the listed attributes are kept; every other attribute
    in the disentangle set is hidden.
    """

    mode: str
    attributes: tuple[str, ...]
    residual: str = "keep"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.residual not in _RESIDUAL_ACTIONS:
            raise ValueError(
                f"residual must be one of {_RESIDUAL_ACTIONS}, got {self.residual!r}"
            )
        if not self.attributes:
            raise ValueError("policy must list at least one attribute")
        if len(set(self.attributes)) != len(self.attributes):
            raise ValueError("policy lists an attribute twice")

    def hidden_attributes(self, disentangle: tuple[str, ...]) -> tuple[str, ...]:
        """Resolve the hidden set against a model's disentangle set."""
        unknown = [a for a in self.attributes if a not in disentangle]
        if unknown:
            raise ValueError(
                f"policy names attributes outside the disentangle set: {unknown}"
            )
        if self.mode == "opt_out":
            return tuple(a for a in disentangle if a in self.attributes)
        return tuple(a for a in disentangle if a not in self.attributes)

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "attributes": list(self.attributes),
            "residual": self.residual,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FilterPolicy":
        return cls(
            mode=d["mode"],
            attributes=tuple(d["attributes"]),
            residual=d.get("residual", "keep"),
            seed=int(d.get("seed", 0)),
        )


def save_policy(policy: FilterPolicy, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(policy.to_json_dict(), indent=2) + "\n")


def load_policy(path: str | Path) -> FilterPolicy:
    with open(path, "r", encoding="utf-8") as fh:
        return FilterPolicy.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class FilteredCodes:
    """Code-level view of a filtered batch: labels, residual, bookkeeping."""

    labels: np.ndarray
    residual: np.ndarray
    hidden: tuple[str, ...]
    replacement_labels: dict[str, np.ndarray]
    residual_permutation: np.ndarray | None


@dataclass(frozen=True)
class FilteredBatch:
    """Output of a full filtering pass, with enough detail to audit it.

    replacement_labels holds, per hidden attribute, the class drawn for
    every sample.  residual_permutation records the batch permutation
    used for residual swapping (None when the residual was kept); fixed
    points are allowed.
    """

    original_ids: np.ndarray
    filtered_features: np.ndarray
    labels: np.ndarray
    hidden: tuple[str, ...]
    replacement_labels: dict[str, np.ndarray]
    residual_permutation: np.ndarray | None


def filter_codes(
    encoded: EncodedBatch,
    policy: FilterPolicy,
    schema: AttributeSchema,
    disentangle: tuple[str, ...],
) -> FilteredCodes:
    """Replace hidden labels and keep or swap the residual.

    Replacement draws for attribute a come from a stream keyed by
    (policy.seed, "replace", schema index of a) and nothing else, so the
    hidden set's provenance (opt_in vs opt_out) cannot change the draws.
    """
    hidden = policy.hidden_attributes(disentangle)
    n = encoded.n_samples
    if n == 0:
        raise ValueError("cannot filter an empty batch")
    labels = encoded.labels.copy()
    replacements: dict[str, np.ndarray] = {}
    for name in hidden:
        a = schema.index(name)
        k = schema.attributes[a].cardinality
        drawn = stream(policy.seed, "replace", a).integers(0, k, size=n)
        labels[:, a] = drawn
        replacements[name] = drawn
    perm = None
    if policy.residual == "swap":
        if n < 2:
            raise ValueError("residual swap requires >= 2 samples")
        perm = stream(policy.seed, "residual-swap").permutation(n)
        residual = encoded.residual[perm]
    else:
        residual = encoded.residual.copy()
    return FilteredCodes(
        labels=labels,
        residual=residual,
        hidden=hidden,
        replacement_labels=replacements,
        residual_permutation=perm,
    )


def apply_filter(
    model: FactorModel,
    X,
    policy: FilterPolicy,
    ids: np.ndarray | None = None,
) -> FilteredBatch:
    """Encode, filter, decode: the full privacy pass over raw features.

    Works from the model's predicted labels; ground truth never enters.
    """
    X = np.asarray(X, dtype=np.float64)
    enc = model.encode(X)
    codes = filter_codes(enc, policy, model.schema, model.disentangle)
    features = model.decode(codes.labels, codes.residual)
    if ids is None:
        ids = np.arange(X.shape[0], dtype=np.int64)
    else:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape != (X.shape[0],):
            raise ValueError("ids must have one entry per sample")
    return FilteredBatch(
        original_ids=ids,
        filtered_features=features,
        labels=codes.labels,
        hidden=codes.hidden,
        replacement_labels=codes.replacement_labels,
        residual_permutation=codes.residual_permutation,
    )


def filter_features(model: FactorModel, X, policy: FilterPolicy) -> np.ndarray:
    """Just the filtered feature matrix, when the audit trail is not needed."""
    return apply_filter(model, X, policy).filtered_features


class PrivacyFilter(BaseEstimator, TransformerMixin):
    """Transformer wrapping a fitted model and a policy.

    fit() is a no-op kept for pipeline compatibility; all state lives in
    the model and the policy.
    """

    def __init__(self, model: FactorModel, policy: FilterPolicy):
        self.model = model
        self.policy = policy
        # fail fast on policies that do not resolve against this model
        policy.hidden_attributes(model.disentangle)

    def fit(self, X=None, y=None) -> "PrivacyFilter":
        return self

    def transform(self, X) -> np.ndarray:
        return filter_features(self.model, X, self.policy)


# ---------------------------------------------------------------------------
# Leakage audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditResult:
    """Probe performance on one hidden attribute."""

    attribute: str
    probe_accuracy: float
    baseline: float
    margin: float
    leaked: bool


def _probe_one(
    model: FactorModel,
    filtered: np.ndarray,
    Y: np.ndarray,
    name: str,
    min_margin: float,
) -> AuditResult:
    a = model.schema.index(name)
    k = model.schema.attributes[a].cardinality
    n = filtered.shape[0]
    train_mask = np.arange(n) % 2 == 0
    probe = SoftmaxRegression(n_classes=k)
    probe.fit(filtered[train_mask], Y[train_mask, a])
    y_test = Y[~train_mask, a]
    acc = probe.score(filtered[~train_mask], y_test)
    counts = np.bincount(y_test, minlength=k)
    baseline = float(counts.max() / counts.sum())
    se = float(np.sqrt(baseline * (1.0 - baseline) / y_test.shape[0]))
    margin = max(min_margin, 3.0 * se)
    return AuditResult(
        attribute=name,
        probe_accuracy=acc,
        baseline=baseline,
        margin=margin,
        leaked=acc > baseline + margin,
    )


def audit_leakage(
    model: FactorModel,
    X,
    Y,
    policy: FilterPolicy,
    attribute: str,
    min_margin: float = 0.05,
) -> AuditResult:
    """Train a fresh probe for one hidden attribute on filtered output.

    Filtered features are split in half (alternating samples); the probe
    fits on one half and is scored on the other against the majority-class
    baseline of the test half.  The attribute counts as leaked when the
    probe beats that baseline by more than max(min_margin, 3 binomial
    standard errors).  Needs at least 200 samples for the halves to mean
    anything.  A fresh probe is a stronger test than reusing the model's
    own classifier head: it measures what information is present, not
    what one fixed classifier happens to read.
    """
    Y = np.asarray(Y, dtype=np.int64)
    hidden = policy.hidden_attributes(model.disentangle)
    if attribute not in hidden:
        raise ValueError(
            f"attribute {attribute!r} is not hidden under this policy"
        )
    filtered = filter_features(model, X, policy)
    n = filtered.shape[0]
    if n < 200:
        raise ValueError(f"leakage audit needs at least 200 samples, got {n}")
    return _probe_one(model, filtered, Y, attribute, min_margin)


def audit_policy(
    model: FactorModel,
    X,
    Y,
    policy: FilterPolicy,
    min_margin: float = 0.05,
) -> dict[str, AuditResult]:
    """audit_leakage for every attribute the policy hides."""
    Y = np.asarray(Y, dtype=np.int64)
    hidden = policy.hidden_attributes(model.disentangle)
    filtered = filter_features(model, X, policy)
    n = filtered.shape[0]
    if n < 200:
        raise ValueError(f"leakage audit needs at least 200 samples, got {n}")
    return {
        name: _probe_one(model, filtered, Y, name, min_margin) for name in hidden
    }


def batch_audit_summary(batch: FilteredBatch, schema: AttributeSchema) -> dict:
    """JSON-ready record of what a filtering pass actually drew.

    Contains the replacement-label histogram per hidden attribute and a
    digest of the residual permutation, enough to audit the draws
    without shipping per-sample data.
    """
    histograms = {}
    for name in batch.hidden:
        k = schema.attributes[schema.index(name)].cardinality
        counts = np.bincount(batch.replacement_labels[name], minlength=k)
        histograms[name] = {
            cls: int(c)
            for cls, c in zip(schema.attributes[schema.index(name)].class_names, counts)
        }
    if batch.residual_permutation is None:
        digest = None
    else:
        digest = sha256_of_bytes(
            np.ascontiguousarray(batch.residual_permutation, dtype=np.int64).tobytes()
        )
    return {
        "n_samples": int(batch.original_ids.shape[0]),
        "hidden_attributes": list(batch.hidden),
        "replacement_histograms": histograms,
        "residual_permutation_sha256": digest,
    }
