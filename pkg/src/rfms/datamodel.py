"""Core data types: datasets, site roles, splits, hyperparameter spaces.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError
from .seeds import as_rng

# Margin used to close open hyperparameter intervals such as alpha in (0, 1).
OPEN_INTERVAL_EPS = 1e-9

LEARNERS = ("elastic_net", "random_forest", "kernel_svm")


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix with binary labels, the unit held by a data site."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        feats = _frozen_array(self.features, np.float64)
        labels = _frozen_array(self.labels, np.int8)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise InvalidInputError(f"features must be a non-empty 2-d matrix, got shape {feats.shape}")
        if not np.isfinite(feats).all():
            raise InvalidInputError("features contain non-finite values")
        if labels.shape != (feats.shape[0],):
            raise InvalidInputError("labels must be a vector matching the number of rows")
        if not np.isin(labels, (0, 1)).all():
            raise InvalidInputError("labels must be 0 (negative) or 1 (positive)")
        if self.feature_names is not None and len(self.feature_names) != feats.shape[1]:
            raise InvalidInputError("feature_names length must match feature count")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        """(negative count, positive count)."""
        pos = int(self.labels.sum())
        return self.n_rows - pos, pos

    def has_both_classes(self) -> bool:
        neg, pos = self.class_counts()
        return neg > 0 and pos > 0

    def subset(self, indices: np.ndarray | Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.feature_names)


@dataclass(frozen=True)
class SiteAssignment:
    """Roles of the 5 sites: one openbox, three curators, one lockbox."""

    openbox: int
    curators: tuple[int, int, int]
    lockbox: int

    def __post_init__(self):
        object.__setattr__(self, "curators", tuple(int(c) for c in self.curators))
        ids = (self.openbox, *self.curators, self.lockbox)
        if sorted(ids) != list(range(5)):
            raise InvalidInputError(f"site assignment must partition sites 0..4, got {ids}")


@dataclass(frozen=True)
class SplitIndex:
    """Inbag/outbag row partition of one site.

    For a lockbox site, inbag and outbag are both the full row set.
    """

    inbag: np.ndarray
    outbag: np.ndarray
    seed: int
    lockbox: bool = False

    def __post_init__(self):
        inbag = _frozen_array(np.sort(self.inbag), np.int64)
        outbag = _frozen_array(np.sort(self.outbag), np.int64)
        if self.lockbox:
            if not np.array_equal(inbag, outbag):
                raise InvalidInputError("lockbox split must use the same rows for inbag and outbag")
            covered = inbag
        else:
            if np.intersect1d(inbag, outbag).size:
                raise InvalidInputError("inbag and outbag overlap")
            covered = np.union1d(inbag, outbag)
        if not np.array_equal(covered, np.arange(covered.size)):
            raise InvalidInputError("split does not cover rows 0..n-1 exactly")
        object.__setattr__(self, "inbag", inbag)
        object.__setattr__(self, "outbag", outbag)


def stratified_split(
    dataset: Dataset,
    outbag_fraction: float = 0.2,
    seed: int | np.random.Generator = 0,
    lockbox: bool = False,
) -> SplitIndex:
    """Split rows into inbag/outbag, stratified by class.

    Each class is split separately; the outbag share is rounded down so that
    rounding always favors the inbag. With ``lockbox=True`` both parts are the
    full row set.
    """
    seed_val = seed if isinstance(seed, int) else -1
    if lockbox:
        rows = np.arange(dataset.n_rows)
        return SplitIndex(rows, rows, seed=seed_val, lockbox=True)
    if not 0.0 < outbag_fraction < 1.0:
        raise InvalidInputError("outbag_fraction must lie strictly between 0 and 1")
    if not dataset.has_both_classes():
        raise InvalidInputError("stratified split needs both classes present")
    rng = as_rng(seed)
    inbag_parts, outbag_parts = [], []
    for cls in (0, 1):
        rows = np.flatnonzero(dataset.labels == cls)
        perm = rng.permutation(rows)
        n_out = int(np.floor(outbag_fraction * rows.size))
        outbag_parts.append(perm[:n_out])
        inbag_parts.append(perm[n_out:])
    return SplitIndex(np.concatenate(inbag_parts), np.concatenate(outbag_parts), seed=seed_val)


@dataclass(frozen=True)
class ParamDim:
    """One hyperparameter dimension.

    kind is ``real`` (affine in the native scale), ``real_log2`` (affine in
    the base-2 exponent) or ``integer``. Open intervals are closed by
    ``OPEN_INTERVAL_EPS`` on the scale the affine map lives on.
    """

    name: str
    kind: str
    lower: float
    upper: float
    open_interval: bool = False

    def __post_init__(self):
        if self.kind not in ("real", "real_log2", "integer"):
            raise InvalidInputError(f"unknown dimension kind {self.kind!r}")
        if not self.lower < self.upper:
            raise InvalidInputError(f"empty range for {self.name}")
        if self.kind == "real_log2" and self.lower <= 0:
            raise InvalidInputError(f"log2 dimension {self.name} needs positive bounds")

    def _inner_bounds(self) -> tuple[float, float]:
        """Bounds on the scale the unit encoding maps to."""
        if self.kind == "real_log2":
            lo, hi = np.log2(self.lower), np.log2(self.upper)
        else:
            lo, hi = float(self.lower), float(self.upper)
        if self.open_interval:
            lo += OPEN_INTERVAL_EPS
            hi -= OPEN_INTERVAL_EPS
        return lo, hi

    def decode(self, unit: float) -> float | int:
        lo, hi = self._inner_bounds()
        raw = lo + float(np.clip(unit, 0.0, 1.0)) * (hi - lo)
        if self.kind == "integer":
            return int(np.clip(round(raw), self.lower, self.upper))
        if self.kind == "real_log2":
            return float(2.0 ** raw)
        return raw

    def encode(self, value: float) -> float:
        lo, hi = self._inner_bounds()
        inner = np.log2(value) if self.kind == "real_log2" else float(value)
        return float(np.clip((inner - lo) / (hi - lo), 0.0, 1.0))

    def contains(self, value: float) -> bool:
        if self.kind == "integer":
            return self.lower <= value <= self.upper and float(value).is_integer()
        lo, hi = self._inner_bounds()
        inner = np.log2(value) if self.kind == "real_log2" else value
        return lo - 1e-12 <= inner <= hi + 1e-12


@dataclass(frozen=True)
class HyperParamSpace:
    """The tuned hyperparameter box of one learner family."""

    learner: str
    dims: tuple[ParamDim, ...]

    def __post_init__(self):
        if self.learner not in LEARNERS:
            raise InvalidInputError(f"unknown learner {self.learner!r}")
        object.__setattr__(self, "dims", tuple(self.dims))

    @property
    def n_dims(self) -> int:
        return len(self.dims)

    @classmethod
    def for_learner(cls, learner: str) -> "HyperParamSpace":
        if learner == "elastic_net":
            dims = (
                ParamDim("alpha", "real", 0.0, 1.0, open_interval=True),
                ParamDim("s", "real_log2", 2.0 ** -10, 2.0 ** 10, open_interval=True),
            )
        elif learner == "kernel_svm":
            dims = (
                ParamDim("C", "real_log2", 2.0 ** -15, 2.0 ** 15, open_interval=True),
                ParamDim("sigma", "real_log2", 2.0 ** -15, 2.0 ** 15, open_interval=True),
            )
        elif learner == "random_forest":
            dims = (
                ParamDim("num.trees", "integer", 100, 5000),
                ParamDim("min.node.size", "integer", 1, 50),
                ParamDim("sample.fraction", "real", 0.1, 1.0, open_interval=True),
            )
        else:
            raise InvalidInputError(f"unknown learner {learner!r}")
        return cls(learner, dims)

    def decode(self, encoded: Iterable[float]) -> tuple[float | int, ...]:
        u = np.asarray(list(encoded), dtype=np.float64)
        if u.shape != (self.n_dims,):
            raise InvalidInputError(f"expected {self.n_dims} encoded values, got {u.shape}")
        return tuple(dim.decode(v) for dim, v in zip(self.dims, u))

    def encode(self, values: Iterable[float]) -> np.ndarray:
        vals = list(values)
        if len(vals) != self.n_dims:
            raise InvalidInputError(f"expected {self.n_dims} values, got {len(vals)}")
        return np.array([dim.encode(v) for dim, v in zip(self.dims, vals)], dtype=np.float64)


@dataclass(frozen=True)
class Configuration:
    """A point in a learner's hyperparameter space."""

    space: HyperParamSpace
    values: tuple[float | int, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) != self.space.n_dims:
            raise InvalidInputError("configuration arity does not match its space")
        for dim, v in zip(self.space.dims, self.values):
            if not dim.contains(v):
                raise InvalidInputError(f"{dim.name}={v} outside bounds [{dim.lower}, {dim.upper}]")

    @classmethod
    def from_encoded(cls, space: HyperParamSpace, encoded: Iterable[float]) -> "Configuration":
        return cls(space, space.decode(encoded))

    def encoded(self) -> np.ndarray:
        return self.space.encode(self.values)

    def as_dict(self) -> dict[str, float | int]:
        return {dim.name: v for dim, v in zip(self.space.dims, self.values)}

    def __getitem__(self, name: str) -> float | int:
        for dim, v in zip(self.space.dims, self.values):
            if dim.name == name:
                return v
        raise KeyError(name)


def sample_configuration(space: HyperParamSpace, seed: int | np.random.Generator) -> Configuration:
    """Draw uniformly on the encoded unit box and decode to native scale."""
    rng = as_rng(seed)
    return Configuration.from_encoded(space, rng.random(space.n_dims))


@dataclass(frozen=True)
class EvalRecord:
    """One optimization-loop row: configuration plus local and remote losses."""

    config: Configuration
    j_local: float
    j_remote_per_curator: tuple[float, ...]
    j_remote: float
    iteration: int
    phase: str  # "initial_design" | "bo"

    def __post_init__(self):
        object.__setattr__(self, "j_remote_per_curator", tuple(float(v) for v in self.j_remote_per_curator))
        if self.phase not in ("initial_design", "bo"):
            raise InvalidInputError(f"unknown phase {self.phase!r}")

    @classmethod
    def from_parts(
        cls,
        config: Configuration,
        j_local: float,
        j_remote_per_curator: Sequence[float],
        curator_sizes: Sequence[int],
        iteration: int,
        phase: str,
    ) -> "EvalRecord":
        """Build a record, aggregating curator losses weighted by inbag size."""
        losses = np.asarray(j_remote_per_curator, dtype=np.float64)
        sizes = np.asarray(curator_sizes, dtype=np.float64)
        if losses.shape != sizes.shape:
            raise InvalidInputError("one size per curator loss required")
        if (sizes <= 0).any():
            raise InvalidInputError("curator sizes must be positive")
        j_remote = float(np.sum(sizes / sizes.sum() * losses))
        return cls(config, float(j_local), tuple(losses), j_remote, int(iteration), phase)


TARGET_COLUMN = "target"
_LABEL_TOKENS = {"0": 0, "1": 1, "neg": 0, "pos": 1}


def load_dataset_csv(path) -> Dataset:
    """Read a dataset from CSV: header row, one `target` column, numeric features."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if TARGET_COLUMN not in header:
            raise InvalidInputError(f"{path}: no '{TARGET_COLUMN}' column")
        target_idx = header.index(TARGET_COLUMN)
        feature_names = tuple(h for i, h in enumerate(header) if i != target_idx)
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise InvalidInputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            token = rec[target_idx].strip()
            if token not in _LABEL_TOKENS:
                raise InvalidInputError(f"{path}:{lineno}: bad target value {token!r}")
            labels.append(_LABEL_TOKENS[token])
            try:
                rows.append([float(v) for i, v in enumerate(rec) if i != target_idx])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: non-numeric feature: {exc}") from None
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    return Dataset(np.asarray(rows, dtype=np.float64), np.asarray(labels, dtype=np.int8), feature_names)


def save_dataset_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the CSV format read by :func:`load_dataset_csv`."""
    names = dataset.feature_names or tuple(f"f{i}" for i in range(dataset.n_features))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + [TARGET_COLUMN])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
