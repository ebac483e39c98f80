"""Accuracy matrices, drop-correlation studies, unseen study, reports."""
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from factorfilter import (
    accuracy_matrix,
    association_matrix,
    drop_correlation_study,
    load_report,
    run_full_evaluation,
    unseen_attribute_study,
)
from factorfilter.evaluation import (
    CORRELATION_KEYS,
    MATRIX_KEYS,
    STUDY_KEYS,
    AccuracyMatrix,
    UnseenAttributeResult,
    build_report,
    write_accuracy_csv,
    write_association_csv,
    write_unseen_csv,
)
from factorfilter.stats import AssociationMatrix

from conftest import small_schema


# -- accuracy matrix --------------------------------------------------------------


@pytest.fixture(scope="module")
def ideal_matrix(ideal_model, ideal_dataset):
    X = ideal_dataset.features[:400]
    Y = ideal_dataset.labels[:400]
    return accuracy_matrix(ideal_model, X, Y, n_trials=2, seed=1)


def test_matrix_baseline_columns(ideal_matrix, ideal_dataset):
    Y = ideal_dataset.labels[:400]
    assert np.allclose(ideal_matrix.random, [1 / 3, 1 / 2, 1 / 3])
    for j in range(3):
        counts = np.bincount(Y[:, j])
        assert ideal_matrix.majority[j] == pytest.approx(counts.max() / 400)
    assert ideal_matrix.n_samples == 400
    assert ideal_matrix.n_trials == 2


def test_matrix_hiding_hits_the_hidden_attribute(ideal_matrix):
    mean = ideal_matrix.mean
    diag = np.diag(mean)
    off = mean[~np.eye(3, dtype=bool)]
    # hidden attribute collapses to chance; untouched ones stay near base
    assert diag.max() < 0.65
    assert off.min() > 0.95
    assert ideal_matrix.base.min() > 0.95


def test_matrix_value_and_display(ideal_matrix):
    assert ideal_matrix.value("shape", "tone") == ideal_matrix.mean[0, 1]
    assert np.array_equal(ideal_matrix.display_values(), ideal_matrix.mean.T)


def test_matrix_json_round_trip(ideal_matrix):
    back = AccuracyMatrix.from_json_dict(ideal_matrix.to_json_dict())
    assert back.attributes == ideal_matrix.attributes
    assert back.mode == ideal_matrix.mode
    assert np.array_equal(back.mean, ideal_matrix.mean)
    assert np.array_equal(back.std, ideal_matrix.std)
    assert np.array_equal(back.base, ideal_matrix.base)


def manual_matrix(mean, base, mode="opt_out"):
    m = len(mean)
    names = ("shape", "tone", "size")[:m]
    return AccuracyMatrix(
        attributes=names,
        mode=mode,
        residual="keep",
        mean=np.asarray(mean, dtype=float),
        std=np.zeros((m, m)),
        base=np.asarray(base, dtype=float),
        majority=np.full(m, 0.4),
        random=np.full(m, 1.0 / 3),
        n_trials=1,
        n_samples=100,
    )


def test_relative_is_nan_where_base_is_zero():
    mat = manual_matrix([[0.2, 0.8], [0.1, 0.9]][:2], [0.0, 1.0])
    rel = mat.relative
    assert np.isnan(rel[:, 0]).all()
    assert np.allclose(rel[:, 1], [0.8, 0.9])
    # NaN survives the JSON round trip as null
    d = mat.to_json_dict()
    assert d["relative"][0][0] is None
    back = AccuracyMatrix.from_json_dict(d)
    assert np.isnan(back.relative[:, 0]).all()


def test_swap_never_beats_keep_on_leaky_world(leaky_model, leaky_dataset):
    X = leaky_dataset.features[:500]
    Y = leaky_dataset.labels[:500]
    keep = accuracy_matrix(leaky_model, X, Y, residual="keep", n_trials=2, seed=3)
    swap = accuracy_matrix(leaky_model, X, Y, residual="swap", n_trials=2, seed=3)
    assert np.all(np.diag(swap.mean) <= np.diag(keep.mean) + 0.02)


# -- drop-correlation study --------------------------------------------------------


def asym_associations(schema):
    # U matrix with value(shape|tone) = 0.9 but value(tone|shape) = 0.1
    values = np.array(
        [
            [1.0, 0.9, 0.2],
            [0.1, 1.0, 0.3],
            [0.2, 0.3, 1.0],
        ]
    )
    return AssociationMatrix(schema, "uncertainty", values, None)


def test_drop_study_reads_strength_as_classified_given_policy(schema3):
    # drops equal to the oriented strengths force r = 1 and fix the
    # extreme pairs, so any orientation slip breaks this test
    assoc = asym_associations(schema3)
    base = np.ones(3)
    mean = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            mean[i, j] = 1.0 - assoc.values[j, i]
    study = drop_correlation_study(manual_matrix(mean, base), assoc)
    assert len(study.pairs) == 6
    k = study.pairs.index(("tone", "shape"))
    assert study.strengths[k] == pytest.approx(0.9)
    assert study.drops[k] == pytest.approx(0.9)
    assert study.regression.r == pytest.approx(1.0)
    assert study.largest_drop_pair() == ("tone", "shape")
    assert study.smallest_drop_pair() == ("shape", "tone")
    assert study.metric == "uncertainty"


def test_drop_study_round_trip(schema3):
    from factorfilter.evaluation import DropCorrelationStudy

    assoc = asym_associations(schema3)
    mean = 1.0 - assoc.values.T
    study = drop_correlation_study(manual_matrix(mean, np.ones(3)), assoc)
    back = DropCorrelationStudy.from_json_dict(study.to_json_dict())
    assert back.pairs == study.pairs
    assert np.allclose(back.strengths, study.strengths)
    assert np.allclose(back.drops, study.drops)
    assert back.regression == study.regression


def test_drop_study_needs_three_pairs():
    mat = AccuracyMatrix(
        attributes=("a", "b"),
        mode="opt_out",
        residual="keep",
        mean=np.full((2, 2), 0.5),
        std=np.zeros((2, 2)),
        base=np.ones(2),
        majority=np.full(2, 0.5),
        random=np.full(2, 0.5),
        n_trials=1,
        n_samples=10,
    )
    from factorfilter import Attribute, AttributeSchema

    schema = AttributeSchema(
        (Attribute("a", ("x", "y")), Attribute("b", ("x", "y")))
    )
    assoc = AssociationMatrix(schema, "cramers_v", np.eye(2), None)
    with pytest.raises(ValueError, match="at least 3 pairs"):
        drop_correlation_study(mat, assoc)


# -- unseen-attribute study -------------------------------------------------------


def test_unseen_study_errors(ideal_dataset):
    with pytest.raises(KeyError, match="unknown attribute"):
        unseen_attribute_study(ideal_dataset, "weight")
    from factorfilter import Attribute, AttributeSchema, Dataset

    schema = AttributeSchema((Attribute("only", ("x", "y")),))
    ds = Dataset(
        schema,
        np.arange(10),
        np.zeros((10, 1), dtype=int),
        np.zeros((10, 4)),
    )
    with pytest.raises(ValueError, match="at least two attributes"):
        unseen_attribute_study(ds, "only")


@pytest.fixture(scope="module")
def unseen_result(ideal_dataset):
    return unseen_attribute_study(
        ideal_dataset, "size", seed=1,
        factor_dim=4, residual_dim=6, epochs=300,
    )


def test_unseen_study_structure(unseen_result, ideal_dataset):
    res = unseen_result
    assert res.held_out == "size"
    assert res.policy_attributes == ("shape", "tone")
    assert res.random == pytest.approx(1 / 3)
    assert 1 / 3 <= res.baseline < 1.0
    assert res.binomial_se > 0
    assert res.n_eval == int(_val(ideal_dataset).sum())
    for grid in (res.acc_with_factor, res.acc_without_factor):
        for mode in ("opt_out", "opt_in"):
            for residual in ("keep", "swap"):
                for attr in ("shape", "tone"):
                    v = grid[mode][residual][attr]
                    assert 0.0 <= v <= 1.0


def _val(ds):
    from factorfilter.model import validation_mask

    return validation_mask(ds.ids)


def test_unseen_probe_is_competent_on_clean_features(unseen_result):
    # noise-free world: the clean-feature probe must be near perfect,
    # otherwise the study measures probe failure rather than filtering
    assert unseen_result.probe_accuracy_clean >= 0.97


def test_unseen_with_model_keeps_held_out_under_opt_out(unseen_result):
    for attr in ("shape", "tone"):
        acc = unseen_result.accuracy("with", "opt_out", "keep", attr)
        assert acc >= 0.9


def test_unseen_accuracy_accessor_and_round_trip(unseen_result):
    res = unseen_result
    assert res.accuracy("with", "opt_in", "swap", "tone") == (
        res.acc_with_factor["opt_in"]["swap"]["tone"]
    )
    back = UnseenAttributeResult.from_json_dict(res.to_json_dict())
    assert back == res


# -- full pipeline and artifacts --------------------------------------------------


@pytest.fixture(scope="module")
def full_run(ideal_spec, tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts")
    report = run_full_evaluation(
        ideal_spec,
        ideal_spec.schema.names,
        n_samples=400,
        n_eval=300,
        seed=5,
        n_trials=2,
        factor_dim=4,
        residual_dim=6,
        epochs=60,
        out_dir=out,
    )
    return report, out


def test_report_is_complete(full_run, ideal_spec):
    report, _ = full_run
    assert set(report.matrices) == set(MATRIX_KEYS)
    assert set(report.correlations) == set(CORRELATION_KEYS)
    assert set(report.studies) == set(STUDY_KEYS)
    assert report.unseen.held_out == "size"
    assert report.schema == ideal_spec.schema
    assert report.provenance["dataset_sha256"]
    assert report.provenance["model_sha256"]
    assert report.provenance["world_sha256"]
    assert report.model_metrics["reconstruction_error"] >= 0.0
    assert report.associations_exact.source == "exact"


def test_report_json_round_trip(full_run):
    report, out = full_run
    back = load_report(out / "report.json")
    assert back.to_json_dict() == report.to_json_dict()


def test_artifact_files_written(full_run):
    _, out = full_run
    expected = ["report.json", "unseen_attribute.csv",
                "associations_exact.csv", "associations_exact.svg"]
    expected += [f"associations_{m}.{e}" for m in CORRELATION_KEYS for e in ("csv", "svg")]
    expected += [f"accuracy_{k}.{e}" for k in MATRIX_KEYS for e in ("csv", "svg")]
    expected += [f"drop_study_{k}.{e}" for k in STUDY_KEYS for e in ("csv", "svg")]
    for name in expected:
        assert (out / name).is_file(), name
    for svg in out.glob("*.svg"):
        root = ET.fromstring(svg.read_text())
        assert root.tag.endswith("svg")


def test_csv_shapes(full_run, tmp_path):
    report, out = full_run
    acc_lines = (out / "accuracy_opt_out_keep.csv").read_text().splitlines()
    assert acc_lines[0] == "classified,shape,tone,size,(none),(majority),(random)"
    assert len(acc_lines) == 4
    unseen_lines = (out / "unseen_attribute.csv").read_text().splitlines()
    assert len(unseen_lines) == 1 + 2 * 2 * 2

    # writers are deterministic byte for byte
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_accuracy_csv(report.matrices["opt_out_keep"], p1)
    write_accuracy_csv(report.matrices["opt_out_keep"], p2)
    assert p1.read_bytes() == p2.read_bytes()
    write_association_csv(report.correlations["cramers_v"], p1)
    write_association_csv(report.correlations["cramers_v"], p2)
    assert p1.read_bytes() == p2.read_bytes()
    write_unseen_csv(report.unseen, p1)
    write_unseen_csv(report.unseen, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_build_report_insists_on_every_piece(full_run, ideal_spec):
    report, _ = full_run
    from factorfilter import make_world, train

    ds = make_world(ideal_spec, 400)
    model = train(ds, ideal_spec.schema.names, factor_dim=4, residual_dim=6, epochs=60)
    kwargs = dict(
        seed=0,
        dataset=ds,
        model=model,
        correlations=dict(report.correlations),
        matrices=dict(report.matrices),
        studies=dict(report.studies),
        unseen=report.unseen,
    )
    build_report(**kwargs)  # complete: must not raise

    for key in MATRIX_KEYS:
        broken = dict(kwargs, matrices={k: v for k, v in report.matrices.items() if k != key})
        with pytest.raises(ValueError, match=f"accuracy matrix '{key}'"):
            build_report(**broken)
    for key in CORRELATION_KEYS:
        broken = dict(kwargs, correlations={k: v for k, v in report.correlations.items() if k != key})
        with pytest.raises(ValueError, match=f"association matrix '{key}'"):
            build_report(**broken)
    for key in STUDY_KEYS:
        broken = dict(kwargs, studies={k: v for k, v in report.studies.items() if k != key})
        with pytest.raises(ValueError, match=f"drop-correlation study '{key}'"):
            build_report(**broken)
    with pytest.raises(ValueError, match="unseen-attribute study"):
        build_report(**dict(kwargs, unseen=None))


def test_sampled_associations_track_exact(full_run, ideal_spec):
    report, _ = full_run
    sampled = report.correlations["cramers_v"]
    from factorfilter.synthworld import exact_association_matrix

    exact = exact_association_matrix(ideal_spec)
    # independent world: every off-diagonal exact value is 0; sampled
    # estimates stay near it
    off = ~np.eye(3, dtype=bool)
    assert np.abs(sampled.values[off] - exact.values[off]).max() < 0.15
