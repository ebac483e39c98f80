"""Evaluation of privacy filters: accuracy matrices, dependency studies.

The central object is the accuracy matrix: entry (i, j) is the accuracy
of the model's classifier for attribute j on samples filtered with the
single-attribute policy built around attribute i (hide i for opt_out
policies, keep only i for opt_in policies).  Accuracies are averaged
over independent filter draws, and every matrix carries three baselines
per classified attribute: accuracy on the plain reconstruction
decode(encode(x)) (what filtering would produce if nothing were
hidden), the majority-class rate, and exact chance 1/k.

On top of the matrices sit two studies.  The drop-correlation study
regresses per-pair accuracy drops against inter-attribute association
strengths: hiding an attribute should cost its correlated neighbours
accuracy in proportion to how strongly they are linked, and keeping
only one attribute should spare its strongest neighbour the most.  The
unseen-attribute study trains two models that differ only in whether
one attribute is disentangled, then compares how well each model's
filtered output preserves that attribute, judged by one independent
probe trained on clean features.

A full report bundles four accuracy matrices ({opt_out, opt_in} x
{keep, swap}), association matrices for both measures, four
drop-correlation studies, and the unseen-attribute study, with
provenance digests; serializing and reloading it is lossless.

Display convention for matrices everywhere (CSV, SVG, JSON "display"):
columns are the filtered/policy attribute, rows the classified one.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fileio import atomic_write_text, sha256_of_json
from .filtering import FilterPolicy, filter_features
from .model import FactorModel, train, validation_mask
from .rng import derive_seed
from .schema import AttributeSchema, Dataset
from .softmax import SoftmaxRegression
from .stats import AssociationMatrix, RegressionSummary, association_matrix, pearson
from .svgplots import heatmap_svg, scatter_svg
from .synthworld import SyntheticWorldSpec, exact_association_matrix, make_world

MATRIX_KEYS = ("opt_out_keep", "opt_out_swap", "opt_in_keep", "opt_in_swap")
CORRELATION_KEYS = ("cramers_v", "uncertainty")
STUDY_KEYS = (
    "cramers_v_opt_out",
    "cramers_v_opt_in",
    "uncertainty_opt_out",
    "uncertainty_opt_in",
)


def _grid_to_json(values: np.ndarray) -> list:
    """Nested lists with NaN mapped to None, so the JSON stays valid."""
    return [
        [None if not np.isfinite(v) else float(v) for v in row] for row in values
    ]


def _grid_from_json(rows: list) -> np.ndarray:
    return np.array(
        [[np.nan if v is None else float(v) for v in row] for row in rows],
        dtype=np.float64,
    )


@dataclass(frozen=True)
class AccuracyMatrix:
    """Filter-vs-classify accuracies for one policy family.

    mean[i, j] and std[i, j] hold the accuracy of classifying attribute
    attributes[j] under the policy built around attributes[i], across
    n_trials independent filter draws.  base[j] is the accuracy on the
    unfiltered reconstruction, majority[j] the majority-class rate of
    the evaluation labels, and random[j] is exactly 1/k_j.
    """

    attributes: tuple[str, ...]
    mode: str
    residual: str
    mean: np.ndarray
    std: np.ndarray
    base: np.ndarray
    majority: np.ndarray
    random: np.ndarray
    n_trials: int
    n_samples: int

    @property
    def relative(self) -> np.ndarray:
        """mean / base per classified attribute; NaN where base is 0.

        A zero base accuracy makes "fraction of baseline retained"
        meaningless, so those cells are undefined rather than zero.
        """
        base = self.base[None, :]
        return np.divide(
            self.mean, base, out=np.full_like(self.mean, np.nan), where=base > 0
        )

    def value(self, policy_attr: str, classified_attr: str) -> float:
        i = self.attributes.index(policy_attr)
        j = self.attributes.index(classified_attr)
        return float(self.mean[i, j])

    def display_values(self) -> np.ndarray:
        """Rows = classified attribute, columns = policy attribute."""
        return self.mean.T

    def to_json_dict(self) -> dict:
        return {
            "attributes": list(self.attributes),
            "mode": self.mode,
            "residual": self.residual,
            "mean": _grid_to_json(self.mean),
            "std": _grid_to_json(self.std),
            "base": [float(v) for v in self.base],
            "majority": [float(v) for v in self.majority],
            "random": [float(v) for v in self.random],
            "relative": _grid_to_json(self.relative),
            "n_trials": self.n_trials,
            "n_samples": self.n_samples,
            "display": {
                "rows": "classified attribute",
                "columns": "policy attribute",
                "values": _grid_to_json(self.display_values()),
            },
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AccuracyMatrix":
        return cls(
            attributes=tuple(d["attributes"]),
            mode=d["mode"],
            residual=d["residual"],
            mean=_grid_from_json(d["mean"]),
            std=_grid_from_json(d["std"]),
            base=np.asarray(d["base"], dtype=np.float64),
            majority=np.asarray(d["majority"], dtype=np.float64),
            random=np.asarray(d["random"], dtype=np.float64),
            n_trials=int(d["n_trials"]),
            n_samples=int(d["n_samples"]),
        )


def single_attribute_policy(
    mode: str, attribute: str, residual: str, seed: int
) -> FilterPolicy:
    """The policy family used by accuracy matrices: one listed attribute."""
    return FilterPolicy(mode=mode, attributes=(attribute,), residual=residual, seed=seed)


def policy_accuracies(
    model: FactorModel, X, Y, policy: FilterPolicy, n_trials: int = 5
) -> np.ndarray:
    """Per-attribute head accuracy on filtered output, one row per trial.

    Trial t reseeds the policy with derive_seed(policy.seed, "trial", t),
    so draws across trials are independent but fully reproducible.
    Returns shape (n_trials, n_schema_attributes).
    """
    Y = np.asarray(Y, dtype=np.int64)
    m = len(model.schema)
    out = np.zeros((n_trials, m))
    for t in range(n_trials):
        trial_policy = dataclasses.replace(
            policy, seed=derive_seed(policy.seed, "trial", t)
        )
        filtered = filter_features(model, X, trial_policy)
        pred = model.predict(filtered)
        out[t] = (pred == Y).mean(axis=0)
    return out


def accuracy_matrix(
    model: FactorModel,
    X,
    Y,
    mode: str = "opt_out",
    residual: str = "keep",
    n_trials: int = 5,
    seed: int = 0,
) -> AccuracyMatrix:
    """Accuracy matrix over the model's disentangle set."""
    Y = np.asarray(Y, dtype=np.int64)
    attrs = model.disentangle
    schema_idx = [model.schema.index(a) for a in attrs]
    cards = [model.schema.attributes[j].cardinality for j in schema_idx]
    base_pred = model.predict(model.reconstruct(X))
    base = np.array(
        [float((base_pred[:, j] == Y[:, j]).mean()) for j in schema_idx]
    )
    majority = np.array(
        [
            float(np.bincount(Y[:, j], minlength=k).max() / Y.shape[0])
            for j, k in zip(schema_idx, cards)
        ]
    )
    random = np.array([1.0 / k for k in cards])
    m = len(attrs)
    mean = np.zeros((m, m))
    std = np.zeros((m, m))
    for i, name in enumerate(attrs):
        policy = single_attribute_policy(
            mode, name, residual, derive_seed(seed, "policy", i)
        )
        trials = policy_accuracies(model, X, Y, policy, n_trials)[:, schema_idx]
        mean[i] = trials.mean(axis=0)
        std[i] = trials.std(axis=0, ddof=1) if n_trials > 1 else 0.0
    return AccuracyMatrix(
        attributes=attrs,
        mode=mode,
        residual=residual,
        mean=mean,
        std=std,
        base=base,
        majority=majority,
        random=random,
        n_trials=n_trials,
        n_samples=int(np.asarray(X).shape[0]),
    )


# ---------------------------------------------------------------------------
# Drop-correlation study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DropCorrelationStudy:
    """Accuracy drop versus association strength over attribute pairs.

    One point per ordered pair (policy attribute, classified attribute),
    diagonal excluded.  drop = base accuracy - filtered accuracy for the
    classified attribute; strength is the association for the pair, read
    as U(classified | policy) when the metric is the uncertainty
    coefficient.  Hiding attributes should produce r > 0 (stronger
    links, bigger drops); keeping a single attribute should produce
    r < 0 (stronger links preserve the neighbour, smaller drops).
    """

    mode: str
    metric: str
    pairs: tuple[tuple[str, str], ...]
    strengths: np.ndarray
    drops: np.ndarray
    regression: RegressionSummary

    def largest_drop_pair(self) -> tuple[str, str]:
        return self.pairs[int(np.argmax(self.drops))]

    def smallest_drop_pair(self) -> tuple[str, str]:
        return self.pairs[int(np.argmin(self.drops))]

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "metric": self.metric,
            "pairs": [list(p) for p in self.pairs],
            "strengths": [float(v) for v in self.strengths],
            "drops": [float(v) for v in self.drops],
            "regression": {
                "slope": self.regression.slope,
                "intercept": self.regression.intercept,
                "r": self.regression.r,
                "p_value": self.regression.p_value,
                "n": self.regression.n,
            },
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DropCorrelationStudy":
        reg = d["regression"]
        return cls(
            mode=d["mode"],
            metric=d["metric"],
            pairs=tuple((p[0], p[1]) for p in d["pairs"]),
            strengths=np.asarray(d["strengths"], dtype=np.float64),
            drops=np.asarray(d["drops"], dtype=np.float64),
            regression=RegressionSummary(
                slope=float(reg["slope"]),
                intercept=float(reg["intercept"]),
                r=float(reg["r"]),
                p_value=float(reg["p_value"]),
                n=int(reg["n"]),
            ),
        )


def drop_correlation_study(
    matrix: AccuracyMatrix, associations: AssociationMatrix
) -> DropCorrelationStudy:
    """Regress pairwise accuracy drops against association strengths.

    Cramér's V is symmetric, so orientation does not matter there; the
    uncertainty coefficient is read as U(classified | policy): how much
    the hidden or kept attribute tells you about the one being
    classified.
    """
    pairs = []
    strengths = []
    drops = []
    for i, pol in enumerate(matrix.attributes):
        for j, cls in enumerate(matrix.attributes):
            if i == j:
                continue
            pairs.append((pol, cls))
            strengths.append(associations.value(cls, pol))
            drops.append(float(matrix.base[j] - matrix.mean[i, j]))
    if len(pairs) < 3:
        raise ValueError(
            f"drop-correlation study needs at least 3 pairs, got {len(pairs)}"
        )
    strengths = np.asarray(strengths)
    drops = np.asarray(drops)
    return DropCorrelationStudy(
        mode=matrix.mode,
        metric=associations.measure,
        pairs=tuple(pairs),
        strengths=strengths,
        drops=drops,
        regression=pearson(strengths, drops),
    )


# ---------------------------------------------------------------------------
# Unseen-attribute study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnseenAttributeResult:
    """How well two models preserve an attribute only one disentangles.

    Both models share the schema and all hyperparameters including the
    seed; the "with" model disentangles every attribute, the "without"
    model every attribute except held_out.  The judge is a single probe
    classifier trained on clean features and true held-out labels, then
    scored on each model's filtered output of a common evaluation set.
    The held-out attribute is never hidden by any policy: opt-in
    policies for the "with" model explicitly keep it.

    acc_with_factor / acc_without_factor are nested as
    mode -> residual -> policy attribute -> probe accuracy.
    """

    held_out: str
    policy_attributes: tuple[str, ...]
    acc_with_factor: dict
    acc_without_factor: dict
    baseline: float
    random: float
    binomial_se: float
    probe_accuracy_clean: float
    n_eval: int

    def accuracy(self, which: str, mode: str, residual: str, attribute: str) -> float:
        grid = self.acc_with_factor if which == "with" else self.acc_without_factor
        return grid[mode][residual][attribute]

    def to_json_dict(self) -> dict:
        return {
            "held_out": self.held_out,
            "policy_attributes": list(self.policy_attributes),
            "acc_with_factor": json.loads(json.dumps(self.acc_with_factor)),
            "acc_without_factor": json.loads(json.dumps(self.acc_without_factor)),
            "baseline": self.baseline,
            "random": self.random,
            "binomial_se": self.binomial_se,
            "probe_accuracy_clean": self.probe_accuracy_clean,
            "n_eval": self.n_eval,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "UnseenAttributeResult":
        return cls(
            held_out=d["held_out"],
            policy_attributes=tuple(d["policy_attributes"]),
            acc_with_factor=d["acc_with_factor"],
            acc_without_factor=d["acc_without_factor"],
            baseline=float(d["baseline"]),
            random=float(d["random"]),
            binomial_se=float(d["binomial_se"]),
            probe_accuracy_clean=float(d["probe_accuracy_clean"]),
            n_eval=int(d["n_eval"]),
        )


def unseen_attribute_study(
    dataset: Dataset,
    held_out: str,
    eval_dataset: Dataset | None = None,
    seed: int = 0,
    **hyper,
) -> UnseenAttributeResult:
    """Compare preservation of an attribute only one model disentangles.

    Trains a "with" model disentangling every schema attribute and a
    "without" model disentangling everything except held_out, from
    identical seeds and data.  A probe classifier for held_out is fit on
    the clean training-split features and judges both models' filtered
    output on the evaluation set (the holdout split of `dataset` unless
    `eval_dataset` is given).  Policies cover every other attribute in
    both modes and both residual actions; the "with" model's opt-in
    policies list held_out as kept so that it is never hidden.
    """
    schema = dataset.schema
    if held_out not in schema.names:
        raise KeyError(f"unknown attribute {held_out!r}")
    a_held = schema.index(held_out)
    k_held = schema.attributes[a_held].cardinality
    policy_attrs = tuple(n for n in schema.names if n != held_out)
    if not policy_attrs:
        raise ValueError("schema needs at least two attributes for this study")

    train_seed = derive_seed(seed, "train")
    model_with = train(dataset, schema.names, seed=train_seed, **hyper)
    model_without = train(dataset, policy_attrs, seed=train_seed, **hyper)

    val = validation_mask(dataset.ids)
    probe = SoftmaxRegression(n_classes=k_held)
    probe.fit(dataset.features[~val], dataset.labels[~val, a_held])
    if eval_dataset is None:
        x_ev = dataset.features[val]
        y_ev = dataset.labels[val, a_held]
    else:
        x_ev = eval_dataset.features
        y_ev = eval_dataset.labels[:, eval_dataset.schema.index(held_out)]

    counts = np.bincount(y_ev, minlength=k_held)
    baseline = float(counts.max() / counts.sum())
    se = float(np.sqrt(baseline * (1.0 - baseline) / y_ev.shape[0]))

    acc_with: dict = {}
    acc_without: dict = {}
    for mode in ("opt_out", "opt_in"):
        acc_with[mode] = {}
        acc_without[mode] = {}
        for residual in ("keep", "swap"):
            acc_with[mode][residual] = {}
            acc_without[mode][residual] = {}
            for attr in policy_attrs:
                pol_seed = derive_seed(seed, "policy", mode, residual, attr)
                if mode == "opt_in":
                    listed_with = (attr, held_out)
                else:
                    listed_with = (attr,)
                pol_with = FilterPolicy(mode, listed_with, residual, pol_seed)
                pol_without = FilterPolicy(mode, (attr,), residual, pol_seed)
                acc_with[mode][residual][attr] = float(
                    probe.score(filter_features(model_with, x_ev, pol_with), y_ev)
                )
                acc_without[mode][residual][attr] = float(
                    probe.score(filter_features(model_without, x_ev, pol_without), y_ev)
                )

    return UnseenAttributeResult(
        held_out=held_out,
        policy_attributes=policy_attrs,
        acc_with_factor=acc_with,
        acc_without_factor=acc_without,
        baseline=baseline,
        random=1.0 / k_held,
        binomial_se=se,
        probe_accuracy_clean=float(probe.score(x_ev, y_ev)),
        n_eval=int(y_ev.shape[0]),
    )


# ---------------------------------------------------------------------------
# Report assembly and writers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationReport:
    """Everything one evaluation run produced, with provenance digests.

    A complete report has all four accuracy matrices, association
    matrices for both measures, all four drop-correlation studies, and
    the unseen-attribute study; build_report refuses anything less.
    Unless noted otherwise the sub-reports come from one dataset and
    one model; the unseen study is inherently a two-model comparison
    and documents its own models.
    """

    seed: int
    schema: AttributeSchema
    disentangle: tuple[str, ...]
    provenance: dict
    model_metrics: dict
    correlations: dict
    matrices: dict
    studies: dict
    unseen: UnseenAttributeResult
    associations_exact: AssociationMatrix | None = None

    def to_json_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "schema": self.schema.to_json_dict(),
            "disentangle": list(self.disentangle),
            "provenance": json.loads(json.dumps(self.provenance)),
            "model_metrics": json.loads(json.dumps(self.model_metrics)),
            "correlations": {
                k: v.to_json_dict() for k, v in self.correlations.items()
            },
            "matrices": {k: v.to_json_dict() for k, v in self.matrices.items()},
            "studies": {k: v.to_json_dict() for k, v in self.studies.items()},
            "unseen": self.unseen.to_json_dict(),
        }
        if self.associations_exact is not None:
            d["associations_exact"] = self.associations_exact.to_json_dict()
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "EvaluationReport":
        schema = AttributeSchema.from_json_dict(d["schema"])
        exact = d.get("associations_exact")
        return cls(
            seed=int(d["seed"]),
            schema=schema,
            disentangle=tuple(d["disentangle"]),
            provenance=d["provenance"],
            model_metrics=d["model_metrics"],
            correlations={
                k: AssociationMatrix.from_json_dict(v, schema)
                for k, v in d["correlations"].items()
            },
            matrices={
                k: AccuracyMatrix.from_json_dict(v) for k, v in d["matrices"].items()
            },
            studies={
                k: DropCorrelationStudy.from_json_dict(v)
                for k, v in d["studies"].items()
            },
            unseen=UnseenAttributeResult.from_json_dict(d["unseen"]),
            associations_exact=(
                AssociationMatrix.from_json_dict(exact, schema)
                if exact is not None
                else None
            ),
        )


def build_report(
    *,
    seed: int,
    dataset: Dataset,
    model: FactorModel,
    correlations: dict | None,
    matrices: dict | None,
    studies: dict | None,
    unseen: UnseenAttributeResult | None,
    world: SyntheticWorldSpec | None = None,
    associations_exact: AssociationMatrix | None = None,
    extra_provenance: dict | None = None,
) -> EvaluationReport:
    """Assemble a report, insisting on every piece that makes it one."""
    for key in MATRIX_KEYS:
        if not matrices or key not in matrices:
            raise ValueError(f"report is missing the accuracy matrix {key!r}")
    for key in CORRELATION_KEYS:
        if not correlations or key not in correlations:
            raise ValueError(f"report is missing the association matrix {key!r}")
    for key in STUDY_KEYS:
        if not studies or key not in studies:
            raise ValueError(f"report is missing the drop-correlation study {key!r}")
    if unseen is None:
        raise ValueError("report is missing the unseen-attribute study")
    metrics = {
        "train_accuracy": {k: float(v) for k, v in model.train_accuracy_.items()},
        "val_accuracy": {k: float(v) for k, v in model.val_accuracy_.items()},
        "reconstruction_error": float(model.reconstruction_error_),
        "final_loss": float(model.loss_history_[-1]),
        "epochs_run": len(model.loss_history_) - 1,
    }
    provenance = {
        "dataset_sha256": dataset.content_digest(),
        "model_sha256": sha256_of_json(model.to_json_dict()),
        "world_sha256": sha256_of_json(world.to_json_dict()) if world else None,
    }
    if extra_provenance:
        provenance.update(extra_provenance)
    return EvaluationReport(
        seed=seed,
        schema=dataset.schema,
        disentangle=model.disentangle,
        provenance=provenance,
        model_metrics=metrics,
        correlations=dict(correlations),
        matrices=dict(matrices),
        studies=dict(studies),
        unseen=unseen,
        associations_exact=associations_exact,
    )


def write_report_json(report: EvaluationReport, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")


def load_report(path: str | Path) -> EvaluationReport:
    with open(path, "r", encoding="utf-8") as fh:
        return EvaluationReport.from_json_dict(json.load(fh))


def write_association_csv(matrix: AssociationMatrix, path: str | Path) -> None:
    names = matrix.schema.names
    lines = ["attribute," + ",".join(names)]
    for i, name in enumerate(names):
        lines.append(name + "," + ",".join(f"{v:.10g}" for v in matrix.values[i]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_association_svg(matrix: AssociationMatrix, path: str | Path, title: str = "") -> None:
    names = matrix.schema.names
    annotations = matrix.categories
    svg = heatmap_svg(
        matrix.values,
        names,
        names,
        title=title or f"{matrix.measure} ({matrix.source})",
        annotations=annotations,
    )
    atomic_write_text(path, svg)


def write_accuracy_csv(matrix: AccuracyMatrix, path: str | Path) -> None:
    """Display convention: one column per policy attribute plus baselines."""
    header = "classified," + ",".join(matrix.attributes) + ",(none),(majority),(random)"
    lines = [header]
    disp = matrix.display_values()
    for j, cls in enumerate(matrix.attributes):
        cells = [f"{v:.10g}" for v in disp[j]]
        cells.append(f"{matrix.base[j]:.10g}")
        cells.append(f"{matrix.majority[j]:.10g}")
        cells.append(f"{matrix.random[j]:.10g}")
        lines.append(cls + "," + ",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_accuracy_svg(matrix: AccuracyMatrix, path: str | Path, title: str = "") -> None:
    disp = matrix.display_values()
    annotations = [
        [f"±{matrix.std[i, j]:.3f}" for i in range(len(matrix.attributes))]
        for j in range(len(matrix.attributes))
    ]
    svg = heatmap_svg(
        disp,
        matrix.attributes,
        matrix.attributes,
        title=title or f"accuracy, {matrix.mode}, residual {matrix.residual}",
        annotations=annotations,
    )
    atomic_write_text(path, svg)


def write_drop_study_csv(study: DropCorrelationStudy, path: str | Path) -> None:
    lines = ["policy_attribute,classified_attribute,strength,drop"]
    for (pol, cls), s, d in zip(study.pairs, study.strengths, study.drops):
        lines.append(f"{pol},{cls},{s:.10g},{d:.10g}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_drop_study_svg(study: DropCorrelationStudy, path: str | Path) -> None:
    reg = study.regression
    svg = scatter_svg(
        study.strengths,
        study.drops,
        title=f"accuracy drop vs association ({study.metric}, {study.mode})",
        xlabel=f"association strength ({study.metric})",
        ylabel="accuracy drop",
        line=(reg.slope, reg.intercept),
        annotation=f"r = {reg.r:.4f}, p = {reg.p_value:.3g}, n = {reg.n}",
    )
    atomic_write_text(path, svg)


def write_unseen_csv(result: UnseenAttributeResult, path: str | Path) -> None:
    lines = ["mode,residual,policy_attribute,acc_with_factor,acc_without_factor"]
    for mode in ("opt_out", "opt_in"):
        for residual in ("keep", "swap"):
            for attr in result.policy_attributes:
                w = result.acc_with_factor[mode][residual][attr]
                wo = result.acc_without_factor[mode][residual][attr]
                lines.append(f"{mode},{residual},{attr},{w:.10g},{wo:.10g}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def run_full_evaluation(
    world: SyntheticWorldSpec,
    disentangle: tuple[str, ...],
    n_samples: int,
    seed: int = 0,
    n_trials: int = 5,
    n_eval: int | None = None,
    held_out: str | None = None,
    out_dir: str | Path | None = None,
    threads: int = 1,
    **hyper,
) -> EvaluationReport:
    """Generate, train, evaluate, and optionally write all artifacts.

    Trains the main model on a fresh training set, then measures
    everything on a disjoint evaluation set drawn from the same world
    (ids continue after the training ids).  held_out names the
    attribute for the unseen-attribute study and defaults to the last
    schema attribute; that study trains its own pair of models on the
    same training data.
    """
    if n_eval is None:
        n_eval = n_samples
    if held_out is None:
        held_out = world.schema.names[-1]
    dataset = make_world(world, n_samples, threads=threads)
    model = train(dataset, disentangle, seed=derive_seed(seed, "train"), **hyper)
    eval_ds = make_world(world, n_eval, start_id=n_samples, threads=threads)
    x_ev, y_ev = eval_ds.features, eval_ds.labels

    correlations = {
        measure: association_matrix(y_ev, world.schema, measure, source="labels")
        for measure in CORRELATION_KEYS
    }
    exact = exact_association_matrix(world)
    matrices = {}
    for key, mode, residual in (
        ("opt_out_keep", "opt_out", "keep"),
        ("opt_out_swap", "opt_out", "swap"),
        ("opt_in_keep", "opt_in", "keep"),
        ("opt_in_swap", "opt_in", "swap"),
    ):
        matrices[key] = accuracy_matrix(
            model, x_ev, y_ev, mode=mode, residual=residual,
            n_trials=n_trials, seed=derive_seed(seed, "matrix", key),
        )
    studies = {}
    for measure in CORRELATION_KEYS:
        for mode in ("opt_out", "opt_in"):
            studies[f"{measure}_{mode}"] = drop_correlation_study(
                matrices[f"{mode}_keep"], correlations[measure]
            )
    unseen = unseen_attribute_study(
        dataset, held_out, eval_dataset=eval_ds,
        seed=derive_seed(seed, "unseen"), **hyper,
    )
    report = build_report(
        seed=seed,
        dataset=dataset,
        model=model,
        correlations=correlations,
        matrices=matrices,
        studies=studies,
        unseen=unseen,
        world=world,
        associations_exact=exact,
        extra_provenance={
            "eval_dataset_sha256": eval_ds.content_digest(),
            "n_train_samples": int(n_samples),
            "n_eval_samples": int(n_eval),
            "n_trials": int(n_trials),
        },
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report_json(report, out / "report.json")
        for measure, corr in correlations.items():
            write_association_csv(corr, out / f"associations_{measure}.csv")
            write_association_svg(corr, out / f"associations_{measure}.svg")
        write_association_csv(exact, out / "associations_exact.csv")
        write_association_svg(exact, out / "associations_exact.svg")
        for key, matrix in matrices.items():
            write_accuracy_csv(matrix, out / f"accuracy_{key}.csv")
            write_accuracy_svg(matrix, out / f"accuracy_{key}.svg")
        for key, study in studies.items():
            write_drop_study_csv(study, out / f"drop_study_{key}.csv")
            write_drop_study_svg(study, out / f"drop_study_{key}.svg")
        write_unseen_csv(unseen, out / "unseen_attribute.csv")
    return report
