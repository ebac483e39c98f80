"""Acceptance gate: ten scenario tests, one pass/fail line each under -v.

Each test is self-contained (no shared fixtures), pins its seeds, and
asserts its own wall-clock budget, so this module alone demonstrates
the full contract: exact statistical golden values, directional claims
about filtering, and numerical hygiene.
"""
import time

import numpy as np
import pytest

from factorfilter import (
    Attribute,
    AttributeSchema,
    DependencySpec,
    FactorModel,
    RenderSpec,
    SyntheticWorldSpec,
    accuracy_matrix,
    cramers_v,
    categorize_cramers_v,
    chi_squared,
    drop_correlation_study,
    gradient_check,
    make_world,
    noisy_copy_table,
    p_same_for_v,
    pearson,
    run_full_evaluation,
    train,
    uncertainty_coefficient,
    uniform_table,
    unseen_attribute_study,
)
from factorfilter.rng import stream
from factorfilter.schema import demo_schema
from factorfilter.stats import association_matrix, contingency


def uniform_world(schema, render, seed):
    deps = tuple(
        DependencySpec(n, (), uniform_table(k))
        for n, k in zip(schema.names, schema.cardinalities)
    )
    return SyntheticWorldSpec(schema, deps, render, seed=seed)


def test_criterion_01_category_threshold_table():
    t0 = time.perf_counter()
    # independent copy of the published threshold table, frozen here
    table = {
        1: (0.10, 0.30, 0.50),
        2: (0.07, 0.21, 0.35),
        3: (0.06, 0.17, 0.29),
        4: (0.05, 0.15, 0.25),
        5: (0.04, 0.13, 0.22),
    }
    eps = 1e-9
    for dof, (small, medium, large) in table.items():
        # every threshold cell is an inclusive lower bound of its band
        assert categorize_cramers_v(small, dof) == "small"
        assert categorize_cramers_v(medium, dof) == "medium"
        assert categorize_cramers_v(large, dof) == "large"
        assert categorize_cramers_v(small - eps, dof) == "negligible"
        assert categorize_cramers_v(medium - eps, dof) == "small"
        assert categorize_cramers_v(large - eps, dof) == "medium"
    assert categorize_cramers_v(0.10, 1) == "small"
    # beyond the table: reuse the dof=5 row
    for dof in (6, 9, 40):
        assert categorize_cramers_v(0.04, dof) == "small"
        assert categorize_cramers_v(0.22, dof) == "large"
    assert time.perf_counter() - t0 < 1.0


def test_criterion_02_chi_squared_golden_values():
    t0 = time.perf_counter()
    # hand oracle: all expected cells are 5, so chi2 = 4 * (3^2 / 5) = 7.2
    # and V = sqrt((7.2 / 20) / 1) = 0.6
    stat, dof = chi_squared([[8, 2], [2, 8]])
    assert abs(stat - 7.2) <= 1e-12
    assert dof == 1
    assert abs(cramers_v([[8, 2], [2, 8]]) - 0.6) <= 1e-12
    # degenerate tables: no variation gives exactly 0, identity exactly 1
    from factorfilter.stats import DegenerateTableWarning

    with pytest.warns(DegenerateTableWarning):
        assert cramers_v([[5, 5], [0, 0]]) == 0.0
    assert cramers_v([[7, 0], [0, 7]]) == 1.0
    assert time.perf_counter() - t0 < 1.0


def test_criterion_03_uncertainty_golden_values():
    t0 = time.perf_counter()
    # entropy-summation oracle for the joint (0.4, 0.1; 0.1, 0.4):
    # H(X) = H(Y) = 1, H(XY) = -0.8 log2 0.4 - 0.2 log2 0.1
    h_joint = -(0.8 * np.log2(0.4) + 0.2 * np.log2(0.1))
    golden = (2.0 - h_joint) / 1.0
    assert abs(golden - 0.278072) < 1e-5  # oracle agrees with the quoted value
    u = uncertainty_coefficient([[0.4, 0.1], [0.1, 0.4]])
    assert abs(u - golden) <= 1e-12
    assert abs(u - 0.278072) <= 1e-5
    # self-information and independence limits
    assert uncertainty_coefficient([[0.5, 0.0], [0.0, 0.5]]) == 1.0
    p = np.array([0.3, 0.7])
    q = np.array([0.2, 0.5, 0.3])
    assert abs(uncertainty_coefficient(np.outer(p, q))) <= 1e-9
    assert time.perf_counter() - t0 < 1.0


def test_criterion_04_planted_correlation_categories():
    t0 = time.perf_counter()
    cases = (
        # (cardinality, planted V, dof_min, expected category)
        (2, 0.12, 1, "small"),
        (5, 0.15, 4, "medium"),
    )
    for k, v, dof, expected in cases:
        schema = AttributeSchema(
            (
                Attribute("x", tuple(f"c{i}" for i in range(k))),
                Attribute("y", tuple(f"c{i}" for i in range(k))),
            )
        )
        deps = (
            DependencySpec("x", (), uniform_table(k)),
            DependencySpec("y", ("x",), noisy_copy_table(k, p_same_for_v(k, v))),
        )
        spec = SyntheticWorldSpec(
            schema, deps, RenderSpec(4 * k, 1, 1, 0, 0, 0), seed=404
        )
        from factorfilter.synthworld import exact_association_matrix, sample_labels

        planted = exact_association_matrix(spec).value("x", "y")
        assert abs(planted - v) <= 1e-12
        assert categorize_cramers_v(planted, dof) == expected
        labels = sample_labels(spec, 200_000)
        measured = cramers_v(contingency(labels[:, 0], labels[:, 1], k, k))
        assert abs(measured - planted) <= 0.01
    assert time.perf_counter() - t0 < 10.0


def test_criterion_05_pearson_p_matches_permutation_oracle():
    t0 = time.perf_counter()
    res = pearson([1.0, 2.0, 3.0], [1.0, 2.0, 2.0])
    assert abs(res.r - np.sqrt(3.0) / 2.0) <= 1e-6

    n_perm = 100_000
    for i in range(20):
        g = stream(505, "dataset", i)
        n = int(g.integers(4, 13))
        x = g.standard_normal(n)
        y = g.standard_normal(n) + 0.5 * x * g.random()
        p_t = pearson(x, y).p_value

        xc = x - x.mean()
        yc = y - y.mean()
        denom = np.sqrt((xc**2).sum() * (yc**2).sum())
        r_obs = float((xc * yc).sum() / denom)
        pg = stream(606, "perm", i)
        perms = pg.permuted(np.tile(yc, (n_perm, 1)), axis=1)
        r_perm = perms @ xc / denom
        p_perm = float(np.mean(np.abs(r_perm) >= abs(r_obs) - 1e-12))
        assert abs(p_t - p_perm) <= 0.03, f"dataset {i}: {p_t} vs {p_perm}"
    assert time.perf_counter() - t0 < 30.0


def test_criterion_06_ideal_world_filtering_is_exact():
    t0 = time.perf_counter()
    schema = demo_schema()
    spec = uniform_world(schema, RenderSpec(48, 8, 16, 0.0, 0.0, 0.0), seed=11)
    ds = make_world(spec, 5000)
    model = train(ds, schema.names, epochs=400, lr=4.0, beta=0.5, seed=3)
    ev = make_world(spec, 10_000, start_id=100_000)
    mat = accuracy_matrix(
        model, ev.features, ev.labels, "opt_out", "keep", n_trials=5, seed=17
    )
    for j, name in enumerate(mat.attributes):
        k = schema.attributes[schema.index(name)].cardinality
        se = np.sqrt((1 / k) * (1 - 1 / k) / (mat.n_samples * mat.n_trials))
        dev = abs(mat.mean[j, j] - 1 / k)
        assert dev <= 3 * se, f"{name}: diag {mat.mean[j, j]:.4f} vs 1/k {1 / k:.4f}"
    off = mat.relative[~np.eye(len(mat.attributes), dtype=bool)]
    assert off.min() >= 0.98, f"off-diagonal relative accuracy {off.min():.4f}"
    assert time.perf_counter() - t0 < 60.0


def test_criterion_07_residual_swap_purges_leakage():
    t0 = time.perf_counter()
    schema = demo_schema()
    spec = uniform_world(schema, RenderSpec(48, 8, 16, 0.0, 1.0, 0.05), seed=23)
    ds = make_world(spec, 5000)
    model = train(ds, schema.names, epochs=400, lr=4.0, beta=0.1, seed=3)
    ev = make_world(spec, 6000, start_id=100_000)
    keep = accuracy_matrix(
        model, ev.features, ev.labels, "opt_out", "keep", n_trials=5, seed=5
    )
    swap = accuracy_matrix(
        model, ev.features, ev.labels, "opt_out", "swap", n_trials=5, seed=5
    )
    for j, name in enumerate(keep.attributes):
        assert swap.mean[j, j] < keep.mean[j, j], name
    off = ~np.eye(len(keep.attributes), dtype=bool)
    assert swap.mean[off].mean() < keep.mean[off].mean()
    assert time.perf_counter() - t0 < 120.0


def test_criterion_08_drop_correlation_signs_over_five_seeds():
    t0 = time.perf_counter()
    schema = AttributeSchema(
        (
            Attribute("a0", ("c0", "c1")),
            Attribute("a1", ("c0", "c1")),
            Attribute("a2", ("c0", "c1", "c2")),
            Attribute("a3", ("c0", "c1", "c2")),
            Attribute("a4", ("c0", "c1", "c2")),
        )
    )
    deps = (
        DependencySpec("a0", (), uniform_table(2)),
        DependencySpec("a1", ("a0",), noisy_copy_table(2, p_same_for_v(2, 0.49))),
        DependencySpec("a2", (), uniform_table(3)),
        DependencySpec("a3", (), uniform_table(3)),
        DependencySpec("a4", (), uniform_table(3)),
    )
    planted = {("a0", "a1"), ("a1", "a0")}
    for w in range(5):
        spec = SyntheticWorldSpec(
            schema, deps, RenderSpec(48, 8, 16, 0.0, 0.0, 1.4), seed=w
        )
        ds = make_world(spec, 12_000)
        model = train(ds, schema.names, epochs=450, lr=4.0, beta=0.1, seed=100 + w)
        ev = make_world(spec, 16_000, start_id=12_000)
        assoc = association_matrix(ev.labels, schema, "cramers_v")
        out_mat = accuracy_matrix(
            model, ev.features, ev.labels, "opt_out", "keep", n_trials=8, seed=17 + w
        )
        in_mat = accuracy_matrix(
            model, ev.features, ev.labels, "opt_in", "keep", n_trials=8, seed=31 + w
        )
        s_out = drop_correlation_study(out_mat, assoc)
        s_in = drop_correlation_study(in_mat, assoc)
        # hiding: stronger association, bigger drop, planted pair on top
        assert s_out.regression.r > 0, f"seed {w}: opt_out r {s_out.regression.r}"
        assert s_out.largest_drop_pair() in planted, f"seed {w}"
        # keeping: stronger association preserves the neighbour, so the
        # planted pair anchors the small-drop end and r flips negative
        assert s_in.regression.r < 0, f"seed {w}: opt_in r {s_in.regression.r}"
        assert s_in.smallest_drop_pair() in planted, f"seed {w}"
    assert time.perf_counter() - t0 < 180.0


def test_criterion_09_unseen_attribute_study():
    t0 = time.perf_counter()
    schema = AttributeSchema(
        (
            Attribute("a", ("c0", "c1", "c2")),
            Attribute("b", ("c0", "c1")),
            Attribute("c", ("c0", "c1", "c2")),
            Attribute("d", tuple(f"c{i}" for i in range(8))),
        )
    )
    spec = uniform_world(schema, RenderSpec(48, 8, 8, 0.0, 0.0, 0.2), seed=0)
    ds = make_world(spec, 6000)
    ev = make_world(spec, 6000, start_id=6000)
    res = unseen_attribute_study(
        ds, "d", eval_dataset=ev, seed=7, epochs=800, lr=4.0, beta=0.5
    )
    for attr in res.policy_attributes:
        with_keep = res.accuracy("with", "opt_out", "keep", attr)
        without_keep = res.accuracy("without", "opt_out", "keep", attr)
        assert abs(with_keep - without_keep) <= 0.05, (
            f"opt_out/keep gap on {attr}: {with_keep:.4f} vs {without_keep:.4f}"
        )
        with_in = res.accuracy("with", "opt_in", "keep", attr)
        without_in = res.accuracy("without", "opt_in", "keep", attr)
        assert with_in > without_in, (
            f"opt_in/keep on {attr}: with {with_in:.4f} not above "
            f"without {without_in:.4f}"
        )
        swapped = res.accuracy("without", "opt_in", "swap", attr)
        assert abs(swapped - res.baseline) <= 3 * res.binomial_se, (
            f"opt_in/swap on {attr}: {swapped:.4f} vs baseline "
            f"{res.baseline:.4f} (3se = {3 * res.binomial_se:.4f})"
        )
    assert time.perf_counter() - t0 < 300.0


def test_criterion_10_numerical_hygiene(tmp_path):
    schema = demo_schema()
    spec = uniform_world(schema, RenderSpec(48, 8, 16, 0.05, 0.3, 0.05), seed=2)
    ds = make_world(spec, 600)
    X, Y = ds.features[:64], ds.labels[:64]

    model = FactorModel(schema, schema.names, factor_dim=4, residual_dim=8, seed=1)
    model.initialize(X.shape[1])
    assert gradient_check(model, X, Y) < 1e-4

    trained = FactorModel(
        schema, schema.names, factor_dim=4, residual_dim=8, epochs=150, seed=1
    )
    trained.fit(ds.features, ds.labels)
    assert gradient_check(trained, X, Y) < 1e-4
    hist = np.asarray(trained.loss_history_)
    assert np.all(np.diff(hist) <= 1e-12), "loss history must never increase"

    # thread count must not change a single bit anywhere in the pipeline
    serial = make_world(spec, 1500, threads=1)
    threaded = make_world(spec, 1500, threads=8)
    assert np.array_equal(serial.features, threaded.features)
    assert np.array_equal(serial.labels, threaded.labels)

    r1 = run_full_evaluation(
        spec, schema.names, n_samples=400, n_eval=300, seed=4, n_trials=2,
        factor_dim=4, residual_dim=8, epochs=60, threads=1,
    )
    r8 = run_full_evaluation(
        spec, schema.names, n_samples=400, n_eval=300, seed=4, n_trials=2,
        factor_dim=4, residual_dim=8, epochs=60, threads=8,
    )
    assert r1.to_json_dict() == r8.to_json_dict()

    from factorfilter.cli import main

    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["gen", "--n", "700", "--threads", "1", "--out", str(a)]) == 0
    assert main(["gen", "--n", "700", "--threads", "8", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
