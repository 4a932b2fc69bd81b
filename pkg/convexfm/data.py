"""
Datasets and the feature encodings that turn factorization problems into
sparse regression.

A :py:class:`Dataset` pairs a sample-major design with targets and records
which columns belong to which named block (users, items, views, side
features, ...).
"""

import logging
import os
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from math import floor

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist, pdist

from .exceptions import ContractError, InputError
from .parsers import libfm as libfm_parser
from .parsers import movielens as movielens_parser
from .protocols.cfm import BlockData, LibfmData, RatingFormat, RatingRecord
from .sparse import SparseDesignMatrix, as_vector, row_squared

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureBlock:
    """A named, contiguous range of feature columns."""
    name: str
    offset: int
    width: int

    @property
    def end(self) -> int:
        return self.offset + self.width

    def as_data(self) -> BlockData:
        return {"name": self.name, "offset": self.offset,
                "width": self.width}


def validate_layout(blocks: Iterable[FeatureBlock], dim: int) -> None:
    """Checks that ``blocks`` partition ``[0, dim)`` in order.

    :raises ContractError: The blocks overlap, leave gaps or repeat names.
    """
    position = 0
    names = set()
    for block in blocks:
        if block.name in names:
            raise ContractError(f"duplicate block name {block.name!r}")
        names.add(block.name)
        if block.offset != position or block.width < 0:
            raise ContractError(
                f"block {block.name!r} does not start at column {position}")
        position = block.end
    if position != dim:
        raise ContractError(f"blocks cover {position} of {dim} columns")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired samples ``(X, y)`` with their feature layout.

    :ivar X: The sample-major design.
    :ivar y: The targets.
    :ivar block_layout: The named feature blocks, in column order.
    :ivar vocabularies: For one-hot blocks, the raw id of every column, in
        order of first appearance.
    :ivar Xsq: ``row_squared(X)``, cached.
    """
    X: SparseDesignMatrix
    y: np.ndarray
    block_layout: tuple[FeatureBlock, ...]
    vocabularies: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    Xsq: SparseDesignMatrix = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "y", as_vector(self.y, self.X.n_rows, "y"))
        object.__setattr__(self, "block_layout", tuple(self.block_layout))
        validate_layout(self.block_layout, self.X.n_cols)
        object.__setattr__(self, "Xsq", row_squared(self.X))

    @property
    def n(self) -> int:
        return self.X.n_rows

    @property
    def d(self) -> int:
        return self.X.n_cols

    def __len__(self) -> int:
        return self.n

    def block(self, name: str) -> FeatureBlock:
        """Returns the block called ``name``.

        :raises ContractError: There is no such block."""
        for block in self.block_layout:
            if block.name == name:
                return block
        raise ContractError(f"dataset has no {name!r} block")

    def has_block(self, name: str) -> bool:
        return any(block.name == name for block in self.block_layout)

    def block_index(self, name: str) -> np.ndarray:
        """For a one-hot block, the active column (relative to the block) of
        every sample; ``-1`` where no column is active."""
        block = self.block(name)
        sub = sp.csr_array(self.X.csr[:, block.offset:block.end])
        sub.sort_indices()
        result = np.full(self.n, -1, dtype=np.int64)
        active = np.diff(sub.indptr) > 0
        result[active] = sub.indices[sub.indptr[:-1][active]]
        return result

    def subset(self, rows) -> "Dataset":
        """Returns the dataset made of the given rows."""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X.take_rows(rows), self.y[rows],
                       self.block_layout, self.vocabularies)

    def to_libfm(self) -> LibfmData:
        return {
            "targets": self.y,
            "row_offsets": self.X.row_offsets,
            "col_indices": self.X.col_indices,
            "values": self.X.values,
            "dim": self.d,
            "blocks": [block.as_data() for block in self.block_layout],
        }


@dataclass(frozen=True)
class SplitSpec:
    """How to split a dataset.

    :ivar train_fraction: Share of samples that go to training, in (0, 1).
    :ivar seed: Seed of the permutation.
    """
    train_fraction: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ContractError("train_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SyntheticTruth:
    """The parameters a synthetic dataset was drawn from.

    :ivar w0: The bias.
    :ivar w: The linear weights.
    :ivar W: The strictly upper triangular interaction weights.
    """
    w0: float
    w: np.ndarray
    W: np.ndarray

    def response(self, features: np.ndarray) -> np.ndarray:
        """``w0 + wᵀx + Σ_{ℓ<ℓ'} W[ℓ, ℓ'] x_ℓ x_ℓ'`` for every row."""
        features = np.asarray(features, dtype=np.float64)
        return self.w0 + features @ self.w \
            + np.einsum("ij,jk,ik->i", features, self.W, features)


def from_libfm(data: LibfmData) -> Dataset:
    """Builds a dataset from parsed libFM data."""
    n = data["targets"].shape[0]
    X = SparseDesignMatrix(n, data["dim"], data["row_offsets"],
                           data["col_indices"], data["values"])
    blocks = [FeatureBlock(**block) for block in data["blocks"]]
    return Dataset(X, data["targets"], blocks)


def parse_libfm(path: str | os.PathLike, d: int | None = None) -> Dataset:
    """Reads a libFM file.

    :param path: The file.
    :param d: Overrides the number of columns.
    :raises ParseError: Malformed token or duplicate index, with the line.
    :rtype: Dataset
    """
    return from_libfm(libfm_parser.read(path, d))


def write_libfm(ds: Dataset, path: str | os.PathLike) -> None:
    """Writes a dataset in libFM format, layout header included."""
    libfm_parser.write(path, ds.to_libfm())


def _one_hot(columns: list[np.ndarray], widths: list[int],
             targets) -> SparseDesignMatrix:
    """Builds a design with exactly one active column per block and row."""
    offsets = np.cumsum([0] + widths[:-1])
    n = len(targets)
    k = len(columns)
    indices = np.column_stack(
        [np.asarray(col, dtype=np.int64) + offset
         for col, offset in zip(columns, offsets)]
    ).reshape(-1) if n else np.zeros(0, dtype=np.int64)
    return SparseDesignMatrix(n, int(sum(widths)),
                              np.arange(0, k * n + 1, k), indices,
                              np.ones(k * n))


def ratings_to_dataset(records: Iterable[RatingRecord]) -> Dataset:
    """Encodes ratings as ``[one-hot user | one-hot item]`` rows.

    Ids map to columns by order of first appearance.
    """
    users: dict[str, int] = {}
    items: dict[str, int] = {}
    user_cols, item_cols, targets = [], [], []
    for record in records:
        user_cols.append(users.setdefault(record["user"], len(users)))
        item_cols.append(items.setdefault(record["item"], len(items)))
        targets.append(record["rating"])
    X = _one_hot([user_cols, item_cols], [len(users), len(items)], targets)
    blocks = [FeatureBlock("users", 0, len(users)),
              FeatureBlock("items", len(users), len(items))]
    return Dataset(X, np.asarray(targets, dtype=np.float64), blocks,
                   {"users": tuple(users), "items": tuple(items)})


def movielens_to_dataset(path: str | os.PathLike,
                         format: RatingFormat | str =
                         RatingFormat.TAB_100K) -> Dataset:
    """Reads a raw MovieLens rating file into a user/item dataset.

    :param path: The file (``u.data`` or ``ratings.dat``).
    :param format: :py:class:`RatingFormat` or its value.
    :raises ParseError: A record is malformed.
    :rtype: Dataset
    """
    ds = ratings_to_dataset(movielens_parser.read(path, RatingFormat(format)))
    logger.info("read %d ratings: %d users, %d items", ds.n,
                ds.block("users").width, ds.block("items").width)
    return ds


def multiview_encode(
        matrices: Iterable[tuple[str, str, str, float]]) -> Dataset:
    """Encodes observed cells of several matrices sharing their column
    entities.

    Every ``(view_id, row_entity, col_entity, value)`` tuple becomes one
    sample ``[one-hot row | one-hot col | one-hot view]`` with target
    ``value``. Vocabularies are built from the data; repeated tuples are kept
    as repeated observations.

    :rtype: Dataset
    """
    vocab: dict[str, dict[str, int]] = {"rows": {}, "cols": {}, "views": {}}
    columns: dict[str, list[int]] = {"rows": [], "cols": [], "views": []}
    targets = []
    for view, row, col, value in matrices:
        for name, key in (("rows", row), ("cols", col), ("views", view)):
            columns[name].append(vocab[name].setdefault(str(key),
                                                        len(vocab[name])))
        targets.append(float(value))
    widths = [len(vocab[name]) for name in ("rows", "cols", "views")]
    X = _one_hot([columns[name] for name in ("rows", "cols", "views")],
                 widths, targets)
    blocks = [FeatureBlock("rows", 0, widths[0]),
              FeatureBlock("cols", widths[0], widths[1]),
              FeatureBlock("views", widths[0] + widths[1], widths[2])]
    return Dataset(X, np.asarray(targets, dtype=np.float64), blocks,
                   {name: tuple(ids) for name, ids in vocab.items()})


def median_bandwidth(base: np.ndarray) -> float:
    """The median pairwise Euclidean distance; 1 if that is zero."""
    distances = pdist(base)
    median = float(np.median(distances)) if distances.size else 0.0
    return median if median > 0 else 1.0


def knn_side_features(similarity_base, m: int,
                      bandwidth: float | None = None
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Summarizes each entity's ``m`` nearest neighbours.

    Similarities are Gaussian kernels
    ``exp(−‖fᵢ − fⱼ‖² / (2·bandwidth²))`` to every other entity; the ``m``
    largest are reduced to their mean and population standard deviation.

    :param similarity_base: One feature row per entity.
    :param m: The number of neighbours, ``1 ≤ m <`` number of entities.
    :param bandwidth: The kernel width; the median pairwise distance by
        default.
    :raises ContractError: Invalid ``m`` or ``bandwidth``.
    :return: The per-entity means and standard deviations.
    """
    base = np.asarray(similarity_base, dtype=np.float64)
    if base.ndim != 2:
        raise ContractError("similarity base must be a 2-D array")
    entities = base.shape[0]
    if not 1 <= m < entities:
        raise ContractError(
            f"m must lie in [1, {entities - 1}] for {entities} entities")
    if bandwidth is None:
        bandwidth = median_bandwidth(base)
    if not bandwidth > 0:
        raise ContractError("bandwidth must be positive")
    kernel = np.exp(-cdist(base, base, "sqeuclidean") / (2 * bandwidth ** 2))
    np.fill_diagonal(kernel, -np.inf)
    nearest = np.partition(kernel, entities - m, axis=1)[:, entities - m:]
    return nearest.mean(axis=1), nearest.std(axis=1)


def append_features(ds: Dataset, columns, name: str) -> Dataset:
    """Concatenates real-valued side information as a new block.

    :param ds: The dataset.
    :param columns: ``n × k`` array (a 1-D array is one column).
    :param name: The name of the new block.
    :rtype: Dataset
    """
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim == 1:
        columns = columns[:, None]
    if columns.ndim != 2 or columns.shape[0] != ds.n:
        raise ContractError(f"expected {ds.n} rows of side features")
    X = SparseDesignMatrix.from_scipy(
        sp.hstack([ds.X.csr, sp.csr_array(columns)], format="csr"))
    blocks = [*ds.block_layout, FeatureBlock(name, ds.d, columns.shape[1])]
    return Dataset(X, ds.y, blocks, ds.vocabularies)


def attach_entity_features(ds: Dataset, block_name: str, table,
                           name: str) -> Dataset:
    """Appends per-entity features, looked up through a one-hot block.

    :param ds: The dataset.
    :param block_name: The one-hot block identifying each sample's entity.
    :param table: One row of features per column of that block.
    :param name: The name of the new block.
    :rtype: Dataset
    """
    table = np.asarray(table, dtype=np.float64)
    if table.ndim == 1:
        table = table[:, None]
    block = ds.block(block_name)
    if table.shape[0] != block.width:
        raise ContractError(
            f"need {block.width} rows of features for block {block_name!r}")
    index = ds.block_index(block_name)
    columns = np.zeros((ds.n, table.shape[1]))
    active = index >= 0
    columns[active] = table[index[active]]
    return append_features(ds, columns, name)


def synth_generate(d: int, n: int,
                   seed: int = 0) -> tuple[Dataset, SyntheticTruth]:
    """Draws a noiseless quadratic regression problem.

    ``x ~ N(0, I)``, ``w0 ~ N(0, 1)``, ``w ~ N(0, I)`` and
    ``W[ℓ, ℓ'] ~ Uniform[0, 1]`` for ``ℓ < ℓ'``. Draws come from numpy's
    PCG64 generator (``numpy.random.default_rng(seed)``) in that order.

    :raises ContractError: ``d < 2`` or ``n < 1``.
    """
    if d < 2 or n < 1:
        raise ContractError("synthetic data needs d >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n, d))
    truth = SyntheticTruth(float(rng.standard_normal()),
                           rng.standard_normal(d),
                           np.triu(rng.uniform(0.0, 1.0, (d, d)), k=1))
    X = SparseDesignMatrix.from_dense(features)
    return Dataset(X, truth.response(features),
                   [FeatureBlock("features", 0, d)]), truth


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Randomly splits a dataset.

    The first ``⌊train_fraction·n⌋`` samples of a seeded permutation go to
    training, the rest to testing.

    :raises ContractError: Fewer than two samples, or an empty side.
    """
    if ds.n < 2:
        raise ContractError("cannot split fewer than 2 samples")
    order = np.random.default_rng(spec.seed).permutation(ds.n)
    cut = floor(spec.train_fraction * ds.n)
    if cut == 0 or cut == ds.n:
        raise ContractError(
            f"train_fraction {spec.train_fraction} leaves one side empty")
    return ds.subset(order[:cut]), ds.subset(order[cut:])


def read_dataset(path: str | os.PathLike, format: str = "libfm",
                 d: int | None = None) -> Dataset:
    """Reads a dataset in any supported format.

    :param format: ``libfm``, ``ml-100k`` or ``ml-1m``.
    :raises InputError: Unknown format.
    """
    if format == "libfm":
        return parse_libfm(path, d)
    if format == "ml-100k":
        return movielens_to_dataset(path, RatingFormat.TAB_100K)
    if format == "ml-1m":
        return movielens_to_dataset(path, RatingFormat.COLON_1M_PLUS)
    raise InputError(f"unknown dataset format {format!r}")
