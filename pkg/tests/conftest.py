"""Shared fixtures: small synthetic worlds and models trained once per session.

Everything here is deterministic, so session scope is safe: no test can
perturb another through these objects (datasets and fitted parameters
are effectively read-only).
"""
import numpy as np
import pytest

from factorfilter import (
    Attribute,
    AttributeSchema,
    DependencySpec,
    RenderSpec,
    SyntheticWorldSpec,
    make_world,
    noisy_copy_table,
    p_same_for_v,
    train,
    uniform_table,
)


def small_schema() -> AttributeSchema:
    return AttributeSchema(
        (
            Attribute("shape", ("circle", "square", "triangle")),
            Attribute("tone", ("dark", "light")),
            Attribute("size", ("small", "medium", "large")),
        )
    )


def independent_deps(schema: AttributeSchema):
    return tuple(
        DependencySpec(name, (), uniform_table(k))
        for name, k in zip(schema.names, schema.cardinalities)
    )


@pytest.fixture(scope="session")
def schema3() -> AttributeSchema:
    return small_schema()


@pytest.fixture(scope="session")
def ideal_spec(schema3) -> SyntheticWorldSpec:
    """Noise-free world: epsilon=0, lambda=0, sigma=0; labels independent."""
    return SyntheticWorldSpec(
        schema=schema3,
        dependencies=independent_deps(schema3),
        render=RenderSpec(
            feature_dim=32, shared_dim=4, residual_dim=6,
            epsilon=0.0, lam=0.0, noise_sigma=0.0,
        ),
        seed=11,
    )


@pytest.fixture(scope="session")
def ideal_dataset(ideal_spec):
    return make_world(ideal_spec, 1200)


@pytest.fixture(scope="session")
def ideal_model(ideal_dataset):
    return train(
        ideal_dataset, ideal_dataset.schema.names,
        factor_dim=6, residual_dim=6, epochs=200, lr=4.0, beta=0.5, seed=3,
    )


@pytest.fixture(scope="session")
def leaky_spec(schema3) -> SyntheticWorldSpec:
    """lambda=1 world: the residual channel carries the labels outright."""
    return SyntheticWorldSpec(
        schema=schema3,
        dependencies=independent_deps(schema3),
        render=RenderSpec(
            feature_dim=32, shared_dim=4, residual_dim=6,
            epsilon=0.0, lam=1.0, noise_sigma=0.05,
        ),
        seed=23,
    )


@pytest.fixture(scope="session")
def leaky_dataset(leaky_spec):
    return make_world(leaky_spec, 1200)


@pytest.fixture(scope="session")
def leaky_model(leaky_dataset):
    return train(
        leaky_dataset, leaky_dataset.schema.names,
        factor_dim=6, residual_dim=6, epochs=200, lr=4.0, beta=0.1, seed=3,
    )


@pytest.fixture(scope="session")
def correlated_spec() -> SyntheticWorldSpec:
    """Three attributes with one strongly dependent pair (planted V=0.6)."""
    schema = AttributeSchema(
        (
            Attribute("a", ("x", "y")),
            Attribute("b", ("x", "y")),
            Attribute("c", ("x", "y", "z")),
        )
    )
    deps = (
        DependencySpec("a", (), uniform_table(2)),
        DependencySpec("b", ("a",), noisy_copy_table(2, p_same_for_v(2, 0.6))),
        DependencySpec("c", (), uniform_table(3)),
    )
    return SyntheticWorldSpec(
        schema=schema,
        dependencies=deps,
        render=RenderSpec(
            feature_dim=28, shared_dim=4, residual_dim=6,
            epsilon=0.0, lam=0.0, noise_sigma=0.8,
        ),
        seed=5,
    )


@pytest.fixture(scope="session")
def correlated_dataset(correlated_spec):
    return make_world(correlated_spec, 1500)


def rng_labels(seed: int, n: int, k: int) -> np.ndarray:
    """Plain uniform labels for statistics tests."""
    from factorfilter.rng import stream

    return stream(seed, "test-labels").integers(0, k, size=n)
