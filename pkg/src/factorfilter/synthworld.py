"""Synthetic labeled worlds with controllable attribute dependencies.

Labels come from ancestral sampling over per-attribute conditional
tables (at most two parents each).  Features are rendered as a sum of
class embeddings living in orthonormal subspaces, a residual component,
and isotropic noise:

    x = sum_a E_a[label_a] + B r + eta

Each embedding splits its unit energy between a subspace private to the
attribute and a subspace shared by all attributes; the shared fraction
``epsilon`` controls how entangled the attributes are in feature space.
The residual r mixes label-dependent means with pure noise via
``lam``; at lam=1 the residual leaks the labels completely, at lam=0 it
carries no label information at all.

Because every conditional table is known, the exact joint distribution
and the exact pairwise association strengths are computable by
enumeration; these serve as oracles for the sample-based estimators.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fileio import atomic_write_text
from .rng import parallel_map, stream
from .schema import AttributeSchema, Dataset, demo_schema
from .stats import AssociationMatrix, categorize_cramers_v, cramers_v

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class DependencySpec:
    """Conditional distribution of one attribute given its parents.

    table has shape (card(parent1), [card(parent2),] card(child)); for a
    root attribute (no parents) it is the marginal of shape (card,).
    Rows must sum to 1.
    """

    child: str
    parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        if len(self.parents) > 2:
            raise ValueError(
                f"attribute {self.child!r} has {len(self.parents)} parents; "
                "at most 2 are supported"
            )
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != len(self.parents) + 1:
            raise ValueError(
                f"dependency table for {self.child!r} must have "
                f"{len(self.parents) + 1} axes, got {table.ndim}"
            )
        if (table < 0).any():
            raise ValueError(f"dependency table for {self.child!r} has negative entries")
        sums = table.sum(axis=-1)
        if not np.allclose(sums, 1.0, rtol=0.0, atol=_ROW_SUM_TOL):
            raise ValueError(
                f"dependency table rows for {self.child!r} must sum to 1 "
                f"(max deviation {float(np.abs(sums - 1.0).max()):.3g})"
            )
        table.setflags(write=False)
        object.__setattr__(self, "table", table)


@dataclass(frozen=True)
class RenderSpec:
    """Feature-space geometry and noise levels for rendering."""

    feature_dim: int = 64
    shared_dim: int = 8
    residual_dim: int = 16
    epsilon: float = 0.0
    lam: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.feature_dim < 1 or self.shared_dim < 1 or self.residual_dim < 1:
            raise ValueError("all dimensions must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if self.noise_sigma < 0.0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class SyntheticWorldSpec:
    """Complete recipe for a synthetic world: schema, dependencies, render, seed.

    Dependencies are given in schema order and every parent must appear
    earlier in the schema than its child, so ancestral sampling can walk
    the attributes left to right.
    """

    schema: AttributeSchema
    dependencies: tuple[DependencySpec, ...]
    render: RenderSpec
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "dependencies", tuple(self.dependencies))
        names = self.schema.names
        cards = self.schema.cardinalities
        if tuple(d.child for d in self.dependencies) != names:
            raise ValueError(
                "dependencies must list every schema attribute exactly once, "
                "in schema order"
            )
        for a, dep in enumerate(self.dependencies):
            expected = tuple(cards[self.schema.index(p)] for p in dep.parents)
            expected += (cards[a],)
            if dep.table.shape != expected:
                raise ValueError(
                    f"dependency table for {dep.child!r} has shape "
                    f"{dep.table.shape}, expected {expected}"
                )
            for p in dep.parents:
                if self.schema.index(p) >= a:
                    raise ValueError(
                        f"parent {p!r} of {dep.child!r} must come earlier "
                        "in the schema"
                    )

    def to_json_dict(self) -> dict:
        return {
            "schema": self.schema.to_json_dict(),
            "dependencies": [
                {
                    "child": d.child,
                    "parents": list(d.parents),
                    "table": d.table.tolist(),
                }
                for d in self.dependencies
            ],
            "render": {
                "feature_dim": self.render.feature_dim,
                "shared_dim": self.render.shared_dim,
                "residual_dim": self.render.residual_dim,
                "epsilon": self.render.epsilon,
                "lam": self.render.lam,
                "noise_sigma": self.render.noise_sigma,
            },
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SyntheticWorldSpec":
        return cls(
            schema=AttributeSchema.from_json_dict(d["schema"]),
            dependencies=tuple(
                DependencySpec(
                    dep["child"], tuple(dep["parents"]), np.asarray(dep["table"])
                )
                for dep in d["dependencies"]
            ),
            render=RenderSpec(**d["render"]),
            seed=int(d["seed"]),
        )


def save_world(spec: SyntheticWorldSpec, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(spec.to_json_dict(), indent=2, sort_keys=True) + "\n")


def load_world(path: str | Path) -> SyntheticWorldSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return SyntheticWorldSpec.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Dependency table builders
# ---------------------------------------------------------------------------


def uniform_table(k: int) -> np.ndarray:
    """Marginal table for an independent uniform root attribute."""
    return np.full(k, 1.0 / k)


def noisy_copy_table(k: int, p_same: float) -> np.ndarray:
    """k-by-k conditional where the child equals the parent with p_same.

    The remaining mass is spread evenly over the other k-1 classes.
    With a uniform parent the planted Cramer's V is exactly
    (k * p_same - 1) / (k - 1), so V can be dialed in directly via
    p_same_for_v().
    """
    if not 0.0 <= p_same <= 1.0:
        raise ValueError(f"p_same must be in [0, 1], got {p_same}")
    off = (1.0 - p_same) / (k - 1)
    table = np.full((k, k), off)
    np.fill_diagonal(table, p_same)
    return table


def p_same_for_v(k: int, v: float) -> float:
    """Invert the noisy-copy V formula: the p_same that plants this V."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"v must be in [0, 1], got {v}")
    return (1.0 + v * (k - 1)) / k


# ---------------------------------------------------------------------------
# Exact oracles by enumeration
# ---------------------------------------------------------------------------


def exact_joint(spec: SyntheticWorldSpec) -> np.ndarray:
    """Exact joint label distribution as an array indexed by class tuples.

    Enumerates every label combination, so it is meant for schemas whose
    cardinality product stays small (the demo world has 768 cells).
    """
    cards = spec.schema.cardinalities
    n_cells = int(np.prod(cards))
    if n_cells > 200_000:
        raise ValueError(
            f"joint enumeration over {n_cells} cells is too large; "
            "this oracle is for small schemas"
        )
    parent_idx = [
        tuple(spec.schema.index(p) for p in dep.parents) for dep in spec.dependencies
    ]
    joint = np.zeros(cards)
    for combo in np.ndindex(*cards):
        p = 1.0
        for a, dep in enumerate(spec.dependencies):
            key = tuple(combo[i] for i in parent_idx[a]) + (combo[a],)
            p *= dep.table[key]
        joint[combo] = p
    return joint


def pairwise_marginal(joint: np.ndarray, i: int, j: int) -> np.ndarray:
    """Marginal P(attr_i, attr_j) from a full joint array."""
    if i == j:
        raise ValueError("need two distinct attributes")
    axes = tuple(a for a in range(joint.ndim) if a not in (i, j))
    marg = joint.sum(axis=axes)
    return marg if i < j else marg.T


def exact_association_matrix(spec: SyntheticWorldSpec) -> AssociationMatrix:
    """Population Cramer's V between all attribute pairs, by enumeration."""
    joint = exact_joint(spec)
    m = len(spec.schema)
    cards = spec.schema.cardinalities
    values = np.zeros((m, m))
    categories = [[""] * m for _ in range(m)]
    for i in range(m):
        values[i, i] = 1.0
        categories[i][i] = categorize_cramers_v(1.0, max(1, cards[i] - 1))
        for j in range(i + 1, m):
            # cramers_v is scale invariant, so a probability table works
            v = cramers_v(pairwise_marginal(joint, i, j))
            values[i, j] = values[j, i] = v
            dof = min(cards[i] - 1, cards[j] - 1)
            categories[i][j] = categories[j][i] = categorize_cramers_v(v, dof)
    return AssociationMatrix(
        schema=spec.schema,
        measure="cramers_v",
        values=values,
        categories=tuple(tuple(row) for row in categories),
        source="exact",
    )


# ---------------------------------------------------------------------------
# Sampling and rendering
# ---------------------------------------------------------------------------


def sample_labels(spec: SyntheticWorldSpec, n: int, seed: int | None = None) -> np.ndarray:
    """Ancestral label sampling; returns an (n, m) int64 matrix.

    Each attribute draws from its own named stream, so sample i's labels
    do not depend on how many samples follow it.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    seed = spec.seed if seed is None else seed
    m = len(spec.schema)
    labels = np.zeros((n, m), dtype=np.int64)
    for a, dep in enumerate(spec.dependencies):
        u = stream(seed, "labels", a).random(n)
        if dep.parents:
            pidx = tuple(spec.schema.index(p) for p in dep.parents)
            rows = dep.table[tuple(labels[:, i] for i in pidx)]
        else:
            rows = np.broadcast_to(dep.table, (n, dep.table.shape[0]))
        cdf = np.cumsum(rows, axis=1)
        cdf[:, -1] = 1.0  # guard against round-off at the top end
        labels[:, a] = (u[:, None] >= cdf).sum(axis=1)
    return labels


class RenderContext:
    """Precomputed embedding geometry for one world spec.

    All matrices are derived deterministically from the world seed, so
    rebuilding the context reproduces them bit for bit.  Embedding rows
    are exactly unit norm with an epsilon share of their energy in the
    shared subspace.
    """

    def __init__(self, spec: SyntheticWorldSpec):
        self.spec = spec
        schema, render = spec.schema, spec.render
        cards = schema.cardinalities
        total = sum(cards) + render.shared_dim + render.residual_dim
        if render.feature_dim < total:
            raise ValueError(
                f"feature_dim={render.feature_dim} is too small: private "
                f"subspaces need {sum(cards)}, shared {render.shared_dim}, "
                f"residual {render.residual_dim} (total {total})"
            )
        basis = _orthonormal_columns(
            stream(spec.seed, "basis").standard_normal((render.feature_dim, total))
        )
        offset = 0
        private_blocks = []
        for k in cards:
            private_blocks.append(basis[:, offset : offset + k])
            offset += k
        shared_block = basis[:, offset : offset + render.shared_dim]
        offset += render.shared_dim
        self.residual_basis = basis[:, offset : offset + render.residual_dim]

        embeddings = []
        for a, k in enumerate(cards):
            coeff = _orthonormal_columns(
                stream(spec.seed, "class-coeff", a).standard_normal((k, k))
            )
            private = (private_blocks[a] @ coeff).T  # (k, D) unit rows
            w = stream(spec.seed, "shared-coeff", a).standard_normal(
                (k, render.shared_dim)
            )
            w /= np.linalg.norm(w, axis=1, keepdims=True)
            shared = w @ shared_block.T  # (k, D) unit rows
            emb = math.sqrt(1.0 - render.epsilon) * private
            emb += math.sqrt(render.epsilon) * shared
            embeddings.append(emb)
        self.embeddings = tuple(embeddings)

        self.label_means = tuple(
            stream(spec.seed, "residual-means", a).standard_normal(
                (k, render.residual_dim)
            )
            for a, k in enumerate(cards)
        )


def _orthonormal_columns(g: np.ndarray) -> np.ndarray:
    """QR orthonormalization with a sign convention for determinism."""
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


_RENDER_BLOCK = 512


def render_features(
    spec: SyntheticWorldSpec,
    ids: np.ndarray,
    labels: np.ndarray,
    ctx: RenderContext | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Render feature vectors for labeled samples.

    Per-sample randomness comes from a stream keyed by the sample id, so
    the rendering of any sample is independent of batch composition.
    Work is split into fixed-size blocks whose boundaries do not depend
    on the worker count, which together with the per-sample streams
    makes the output bit-identical for any number of threads.
    """
    ctx = ctx if ctx is not None else RenderContext(spec)
    ids = np.asarray(ids, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    n = ids.shape[0]
    m = len(spec.schema)
    if labels.shape != (n, m):
        raise ValueError(f"labels must be ({n}, {m}), got {labels.shape}")
    render = spec.render
    if n == 0:
        return np.zeros((0, render.feature_dim))
    det = np.zeros((n, render.feature_dim))
    for a in range(m):
        det += ctx.embeddings[a][labels[:, a]]
    means = np.zeros((n, render.residual_dim))
    for a in range(m):
        means += ctx.label_means[a][labels[:, a]]
    means /= math.sqrt(m)
    det += render.lam * (means @ ctx.residual_basis.T)

    def block(bounds: tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        u = np.empty((hi - lo, render.residual_dim))
        eta = np.empty((hi - lo, render.feature_dim))
        for pos in range(hi - lo):
            rng = stream(spec.seed, "render", int(ids[lo + pos]))
            u[pos] = rng.standard_normal(render.residual_dim)
            eta[pos] = rng.standard_normal(render.feature_dim)
        out = det[lo:hi] + (1.0 - render.lam) * (u @ ctx.residual_basis.T)
        if render.noise_sigma > 0.0:
            out += render.noise_sigma * eta
        return out

    bounds = [(lo, min(lo + _RENDER_BLOCK, n)) for lo in range(0, n, _RENDER_BLOCK)]
    return np.vstack(parallel_map(block, bounds, threads))


def make_world(
    spec: SyntheticWorldSpec, n: int, start_id: int = 0, threads: int = 1
) -> Dataset:
    """Sample a complete labeled dataset from the world."""
    labels = sample_labels(spec, n)
    ids = np.arange(start_id, start_id + n, dtype=np.int64)
    features = render_features(spec, ids, labels, threads=threads)
    return Dataset(spec.schema, ids, labels, features)


def demo_world_spec(seed: int = 7) -> SyntheticWorldSpec:
    """Six-attribute face-style demo world with planted dependencies.

    beard follows gender (V = 0.4), hair_color follows ethnicity
    (V = 0.4), glasses shifts with age; the other attributes are
    independent roots.
    """
    schema = demo_schema()
    glasses_given_age = np.array(
        [
            [0.85, 0.10, 0.05],
            [0.75, 0.15, 0.10],
            [0.60, 0.30, 0.10],
            [0.35, 0.55, 0.10],
        ]
    )
    deps = (
        DependencySpec("age", (), np.array([0.15, 0.15, 0.45, 0.25])),
        DependencySpec("gender", (), uniform_table(2)),
        DependencySpec("ethnicity", (), np.array([0.40, 0.30, 0.20, 0.10])),
        DependencySpec("hair_color", ("ethnicity",), noisy_copy_table(4, p_same_for_v(4, 0.4))),
        DependencySpec("beard", ("gender",), noisy_copy_table(2, p_same_for_v(2, 0.4))),
        DependencySpec("glasses", ("age",), glasses_given_age),
    )
    render = RenderSpec(
        feature_dim=64,
        shared_dim=8,
        residual_dim=16,
        epsilon=0.05,
        lam=0.3,
        noise_sigma=0.05,
    )
    return SyntheticWorldSpec(schema=schema, dependencies=deps, render=render, seed=seed)
