"""Attribute schemas and labeled datasets, with their on-disk formats.

A dataset is a CSV file (UTF-8, LF, mandatory header) with columns
``id``, one label column per schema attribute, then feature columns
``f0..f{d-1}``.  The schema travels in a sidecar JSON file next to the
CSV.  Feature values are written with 17 significant digits so a
save/load round-trip is bit-exact.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .fileio import atomic_write_text
from .validation import check_feature_matrix, check_label_matrix


@dataclass(frozen=True)
class Attribute:
    """One named categorical attribute with its ordered class names."""

    name: str
    class_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if not self.name:
            raise ValueError("attribute name must be non-empty")
        if len(self.class_names) < 2:
            raise ValueError(
                f"attribute {self.name!r} needs cardinality >= 2, "
                f"got {len(self.class_names)}"
            )
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError(f"attribute {self.name!r} has duplicate class names")

    @property
    def cardinality(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered universe of categorical attributes."""

    attributes: tuple[Attribute, ...]

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")

    def __len__(self) -> int:
        return len(self.attributes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(a.cardinality for a in self.attributes)

    def index(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise KeyError(f"unknown attribute {name!r}")

    def to_json_dict(self) -> dict:
        return {
            "attributes": [
                {"name": a.name, "class_names": list(a.class_names)}
                for a in self.attributes
            ]
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AttributeSchema":
        return cls(
            tuple(
                Attribute(a["name"], tuple(a["class_names"]))
                for a in d["attributes"]
            )
        )


@dataclass(frozen=True)
class LabeledSample:
    """A single sample: integer id, one label per attribute, a feature vector."""

    id: int
    labels: np.ndarray
    features: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """An immutable labeled dataset.

    labels has shape (n, m) with m = number of schema attributes; features
    has shape (n, d).  Arrays are made read-only so datasets can be shared
    across threads.
    """

    schema: AttributeSchema
    ids: np.ndarray
    labels: np.ndarray
    features: np.ndarray
    n_samples: int = field(init=False)
    feature_dim: int = field(init=False)

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        labels = check_label_matrix(self.labels, self.schema.cardinalities, "labels")
        features = check_feature_matrix(self.features, name="features")
        if ids.ndim != 1:
            raise ValueError("ids must be 1-d")
        n = ids.shape[0]
        if n == 0:
            # allow empty datasets; preserve the declared shapes
            labels = labels.reshape(0, len(self.schema))
            features = features.reshape(0, features.shape[1] if features.size else self.features.shape[-1])
        if labels.shape[0] != n or features.shape[0] != n:
            raise ValueError(
                f"inconsistent sample counts: ids={n}, labels={labels.shape[0]}, "
                f"features={features.shape[0]}"
            )
        if len(np.unique(ids)) != n:
            raise ValueError("sample ids must be unique")
        for arr in (ids, labels, features):
            arr.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "n_samples", n)
        object.__setattr__(self, "feature_dim", features.shape[1])

    def sample(self, i: int) -> LabeledSample:
        return LabeledSample(int(self.ids[i]), self.labels[i], self.features[i])

    def samples(self) -> Iterator[LabeledSample]:
        for i in range(self.n_samples):
            yield self.sample(i)

    def subset(self, index) -> "Dataset":
        """Dataset restricted to the given row index or boolean mask."""
        return Dataset(self.schema, self.ids[index], self.labels[index], self.features[index])

    def content_digest(self) -> str:
        """Stable digest of schema + data, independent of file encoding."""
        from .fileio import sha256_of_bytes

        head = json.dumps(self.schema.to_json_dict(), sort_keys=True).encode()
        return sha256_of_bytes(
            head + self.ids.tobytes() + self.labels.tobytes() + self.features.tobytes()
        )


def schema_path_for(dataset_path: str | Path) -> Path:
    """Sidecar schema path: data.csv -> data.schema.json."""
    p = Path(dataset_path)
    stem = p.name[:-4] if p.name.endswith(".csv") else p.name
    return p.with_name(stem + ".schema.json")


def save_schema(schema: AttributeSchema, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(schema.to_json_dict(), indent=2) + "\n")


def load_schema(path: str | Path) -> AttributeSchema:
    with open(path, "r", encoding="utf-8") as fh:
        return AttributeSchema.from_json_dict(json.load(fh))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write the dataset CSV plus its sidecar schema JSON.

    Features are formatted with %.17g so reloading reproduces every double
    bit-exactly and a second save is byte-identical.
    """
    path = Path(path)
    header = ["id", *dataset.schema.names]
    header += [f"f{j}" for j in range(dataset.feature_dim)]
    lines = [",".join(header)]
    for i in range(dataset.n_samples):
        row = [str(int(dataset.ids[i]))]
        row += [str(int(v)) for v in dataset.labels[i]]
        row += [f"{v:.17g}" for v in dataset.features[i]]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")
    save_schema(dataset.schema, schema_path_for(path))


def load_dataset(path: str | Path, schema: AttributeSchema | None = None) -> Dataset:
    """Load a dataset CSV; the schema comes from the sidecar unless given.

    Errors name the offending CSV line (header is line 1) and column.
    """
    path = Path(path)
    if schema is None:
        sidecar = schema_path_for(path)
        if not sidecar.exists():
            raise FileNotFoundError(f"schema sidecar not found: {sidecar}")
        schema = load_schema(sidecar)
    m = len(schema)
    cards = schema.cardinalities
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row is mandatory") from None
        expected_prefix = ["id", *schema.names]
        if header[: m + 1] != expected_prefix:
            raise ValueError(
                f"{path}: header {header[:m + 1]!r} does not match schema "
                f"columns {expected_prefix!r}"
            )
        feature_names = header[m + 1 :]
        d = len(feature_names)
        if feature_names != [f"f{j}" for j in range(d)]:
            raise ValueError(f"{path}: feature columns must be named f0..f{d - 1}")
        ids, labels, features = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != m + 1 + d:
                raise ValueError(
                    f"{path}: row {line_no}: expected {m + 1 + d} columns, "
                    f"got {len(row)}"
                )
            try:
                ids.append(int(row[0]))
            except ValueError:
                raise ValueError(
                    f"{path}: row {line_no}: column 'id': not an integer: {row[0]!r}"
                ) from None
            lab = []
            for a in range(m):
                cell = row[1 + a]
                name = schema.names[a]
                try:
                    v = int(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {line_no}: column {name!r}: "
                        f"not an integer label: {cell!r}"
                    ) from None
                if not 0 <= v < cards[a]:
                    raise ValueError(
                        f"{path}: label out of range, row {line_no}: column "
                        f"{name!r}: {v} not in [0, {cards[a]})"
                    )
                lab.append(v)
            labels.append(lab)
            feat = []
            for j in range(d):
                cell = row[m + 1 + j]
                try:
                    x = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {line_no}: column 'f{j}': "
                        f"not a number: {cell!r}"
                    ) from None
                if not np.isfinite(x):
                    raise ValueError(
                        f"{path}: row {line_no}: column 'f{j}': non-finite value"
                    )
                feat.append(x)
            features.append(feat)
    return Dataset(
        schema,
        np.asarray(ids, dtype=np.int64),
        np.asarray(labels, dtype=np.int64).reshape(len(ids), m),
        np.asarray(features, dtype=np.float64).reshape(len(ids), d),
    )


def demo_schema() -> AttributeSchema:
    """Six face-style demo attributes with cardinalities (4,2,4,4,2,3).

    Class names for ethnicity, hair color and glasses are placeholders;
    only the counts matter to the statistics.
    """
    return AttributeSchema(
        (
            Attribute("age", ("child", "teen", "adult", "elderly")),
            Attribute("gender", ("male", "female")),
            Attribute("ethnicity", ("group1", "group2", "group3", "group4")),
            Attribute("hair_color", ("black", "blond", "brown", "gray")),
            Attribute("beard", ("no_beard", "beard")),
            Attribute("glasses", ("none", "clear", "dark")),
        )
    )
