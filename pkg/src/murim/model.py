"""Local model, datasets, loaders and client partitioning.

The local learner is multinomial logistic regression. Its parameters are a
single flat vector: the ``(num_features, num_classes)`` weight matrix in
row-major order followed by the ``num_classes`` biases.
"""

from __future__ import annotations

import csv
import gzip
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParseError

IID = "iid"
NON_IID = "noniid"

IDX_LABELS_MAGIC = 0x00000801
IDX_IMAGES_MAGIC = 0x00000803


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ConfigError("features must be a 2-D matrix")
        if self.labels.ndim != 1 or len(self.labels) != len(self.features):
            raise ConfigError("labels must be a vector with one entry per feature row")
        if self.num_classes < 1:
            raise ConfigError("num_classes must be positive")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ConfigError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


@dataclass
class ClientDataSplit:
    shards: list[Dataset]
    mode: str
    dirichlet_alpha: float | None = None
    # row indices into the source dataset, one array per shard
    indices: list[np.ndarray] = field(default_factory=list)


# --------------------------------------------------------------------------
# parameter layout


def param_dim(num_features: int, num_classes: int) -> int:
    return (num_features + 1) * num_classes


def init_params(num_features: int, num_classes: int) -> np.ndarray:
    return np.zeros(param_dim(num_features, num_classes))


def _unpack(params: np.ndarray, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    f, k = data.num_features, data.num_classes
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.size != param_dim(f, k):
        raise ConfigError(
            f"model has {params.size} parameters, data needs {param_dim(f, k)} "
            f"({f} features, {k} classes)"
        )
    return params[: f * k].reshape(f, k), params[f * k :]


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def cross_entropy_loss(params: np.ndarray, data: Dataset) -> float:
    """Mean cross-entropy of the model on ``data``."""
    w, b = _unpack(params, data)
    logits = data.features @ w + b
    logits -= logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(logits).sum(axis=1))
    picked = logits[np.arange(len(data)), data.labels]
    return float(np.mean(log_norm - picked))


def cross_entropy_grad(params: np.ndarray, data: Dataset) -> np.ndarray:
    """Analytic gradient of :func:`cross_entropy_loss` w.r.t. the flat parameters."""
    w, b = _unpack(params, data)
    return _grad(w, b, data.features, data.labels)


def _grad(w, b, x, y) -> np.ndarray:
    p = _softmax(x @ w + b)
    p[np.arange(len(y)), y] -= 1.0
    p /= len(y)
    return np.concatenate([(x.T @ p).ravel(), p.sum(axis=0)])


def train_local(
    model: np.ndarray,
    data: Dataset,
    epochs: int,
    lr: float,
    seed: int,
    batch_size: int = 32,
) -> np.ndarray:
    """Run ``epochs`` passes of seeded mini-batch SGD on cross-entropy.

    Returns a new parameter vector; ``model`` is not modified.
    """
    if len(data) == 0:
        raise ConfigError("cannot train on an empty dataset")
    if epochs < 0 or lr <= 0 or batch_size < 1:
        raise ConfigError("epochs must be >= 0, lr > 0 and batch_size >= 1")
    w, b = _unpack(model, data)
    w, b = w.copy(), b.copy()
    if epochs == 0:
        return np.concatenate([w.ravel(), b])
    rng = np.random.default_rng(seed)
    x, y = data.features, data.labels
    n = len(y)
    nf = w.size
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            g = _grad(w, b, x[batch], y[batch])
            w -= lr * g[:nf].reshape(w.shape)
            b -= lr * g[nf:]
    return np.concatenate([w.ravel(), b])


def predict(model: np.ndarray, data: Dataset) -> np.ndarray:
    w, b = _unpack(model, data)
    # argmax returns the first maximum, so ties go to the lowest class index
    return np.argmax(data.features @ w + b, axis=1)


def evaluate(model: np.ndarray, data: Dataset) -> float:
    """Fraction of rows whose predicted class equals the label."""
    if len(data) == 0:
        raise ConfigError("cannot evaluate on an empty dataset")
    return float(np.mean(predict(model, data) == data.labels))


# --------------------------------------------------------------------------
# data sources


def make_synthetic(
    num_classes: int,
    dim: int,
    samples_per_class: int,
    separation: float,
    seed: int,
) -> Dataset:
    """Isotropic unit-variance Gaussian blobs, rows ordered by class.

    When ``num_classes <= dim`` the class means are mutually orthogonal and
    every pair of means is exactly ``separation`` apart. Otherwise means
    point in random unit directions scaled the same way, so pairwise
    distances are only approximately ``separation``.
    """
    if num_classes < 1 or dim < 1 or samples_per_class < 1:
        raise ConfigError("num_classes, dim and samples_per_class must be positive")
    rng = np.random.default_rng(seed)
    if num_classes <= dim:
        q, _ = np.linalg.qr(rng.standard_normal((dim, num_classes)))
        directions = q.T
    else:
        directions = rng.standard_normal((num_classes, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    means = directions * (separation / np.sqrt(2.0))
    noise = rng.standard_normal((num_classes * samples_per_class, dim))
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    return Dataset(means[labels] + noise, labels, num_classes)


def minmax_ranges(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return features.min(axis=0), features.max(axis=0)


def minmax_apply(features: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Scale columns to [0, 1] using ranges fitted elsewhere.

    Constant columns map to 0. Values outside the fitted range are left
    outside [0, 1] rather than clipped.
    """
    span = np.where(hi > lo, hi - lo, 1.0)
    return (features - lo) / span


def load_csv(
    path: str | Path,
    label_column: str,
    schema: dict,
    scale: bool = True,
) -> Dataset:
    """Load a header-first CSV file into a :class:`Dataset`.

    ``schema`` keys:

    * ``numeric``: list of numeric column names.
    * ``categorical``: mapping column name -> list of allowed levels; each
      becomes ``len(levels)`` one-hot columns.
    * ``label_levels`` (optional): ordered label values. Without it, labels
      must be non-negative integers.

    Feature columns appear in header order. Columns in neither list are
    ignored. With ``scale`` the numeric columns are min-max scaled to
    [0, 1] over the file.
    """
    path = Path(path)
    numeric = list(schema.get("numeric", []))
    categorical = {k: list(v) for k, v in schema.get("categorical", {}).items()}
    label_levels = schema.get("label_levels")
    label_index = None if label_levels is None else {str(v): i for i, v in enumerate(label_levels)}

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=str(path)) from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file, header row required", path=str(path), line=1) from None
    header = [h.strip() for h in header]
    if label_column not in header:
        raise ParseError(f"label column {label_column!r} not in header", path=str(path), line=1)
    for col in [*numeric, *categorical]:
        if col not in header:
            raise ParseError(f"schema column {col!r} not in header", path=str(path), line=1)

    label_pos = header.index(label_column)
    plan = []  # (position, kind, levels)
    for pos, name in enumerate(header):
        if name in numeric:
            plan.append((pos, "num", None))
        elif name in categorical:
            plan.append((pos, "cat", {lv: j for j, lv in enumerate(categorical[name])}))
    width = sum(1 if kind == "num" else len(lv) for _, kind, lv in plan)

    rows: list[np.ndarray] = []
    labels: list[int] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", path=str(path), line=line
            )
        vec = np.zeros(width)
        col = 0
        for pos, kind, levels in plan:
            raw = row[pos].strip()
            if kind == "num":
                try:
                    vec[col] = float(raw)
                except ValueError:
                    raise ParseError(
                        f"column {header[pos]!r}: not a number: {raw!r}", path=str(path), line=line
                    ) from None
                col += 1
            else:
                if raw not in levels:
                    raise ParseError(
                        f"column {header[pos]!r}: unknown category {raw!r}", path=str(path), line=line
                    )
                vec[col + levels[raw]] = 1.0
                col += len(levels)
        raw_label = row[label_pos].strip()
        if label_index is not None:
            if raw_label not in label_index:
                raise ParseError(f"unknown label {raw_label!r}", path=str(path), line=line)
            labels.append(label_index[raw_label])
        else:
            try:
                lab = int(raw_label)
            except ValueError:
                raise ParseError(f"label is not an integer: {raw_label!r}", path=str(path), line=line) from None
            if lab < 0:
                raise ParseError(f"negative label {lab}", path=str(path), line=line)
            labels.append(lab)
        rows.append(vec)

    if not rows:
        raise ParseError("no data rows", path=str(path), line=reader.line_num + 1)
    features = np.vstack(rows)
    if scale:
        num_cols = _numeric_columns(plan)
        lo, hi = minmax_ranges(features[:, num_cols])
        features[:, num_cols] = minmax_apply(features[:, num_cols], lo, hi)
    num_classes = len(label_levels) if label_levels is not None else max(labels) + 1
    return Dataset(features, np.array(labels), num_classes)


def _numeric_columns(plan) -> list[int]:
    out, col = [], 0
    for _, kind, levels in plan:
        if kind == "num":
            out.append(col)
            col += 1
        else:
            col += len(levels)
    return out


def _read_bytes(path: Path) -> bytes:
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as fh:
                return fh.read()
        return path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=str(path)) from exc


def _parse_idx(path: Path, expected_magic: int) -> np.ndarray:
    blob = _read_bytes(path)
    if len(blob) < 4:
        raise ParseError("truncated IDX header", path=str(path), offset=len(blob))
    (magic,) = struct.unpack(">I", blob[:4])
    if magic != expected_magic:
        raise ParseError(
            f"bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}", path=str(path), offset=0
        )
    ndim = magic & 0xFF
    head = 4 + 4 * ndim
    if len(blob) < head:
        raise ParseError("truncated IDX dimension block", path=str(path), offset=len(blob))
    dims = struct.unpack(f">{ndim}I", blob[4:head])
    size = int(np.prod(dims))
    if len(blob) != head + size:
        raise ParseError(
            f"payload has {len(blob) - head} bytes, dimensions {dims} need {size}",
            path=str(path),
            offset=head,
        )
    return np.frombuffer(blob, dtype=np.uint8, offset=head).reshape(dims)


def load_idx(images_path: str | Path, labels_path: str | Path, num_classes: int | None = None) -> Dataset:
    """Load an IDX image/label pair (MNIST layout). Pixels are scaled to [0, 1].

    Gzipped files are accepted when the name ends in ``.gz``.
    """
    images = _parse_idx(Path(images_path), IDX_IMAGES_MAGIC)
    labels = _parse_idx(Path(labels_path), IDX_LABELS_MAGIC).astype(np.int64)
    if images.shape[0] != labels.shape[0]:
        raise ParseError(
            f"{images.shape[0]} images but {labels.shape[0]} labels", path=str(labels_path), offset=4
        )
    if images.shape[0] == 0:
        raise ParseError("no samples", path=str(images_path), offset=4)
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    k = num_classes if num_classes is not None else int(labels.max()) + 1
    return Dataset(features, labels, k)


# --------------------------------------------------------------------------
# partitioning


def partition(
    data: Dataset,
    num_clients: int,
    mode: str = IID,
    dirichlet_alpha: float | None = None,
    seed: int = 0,
    max_retries: int = 100,
) -> ClientDataSplit:
    """Split ``data`` into ``num_clients`` disjoint, non-empty shards.

    IID deals a seeded shuffle round-robin, so shard sizes differ by at
    most one. Non-IID draws per-class Dirichlet(alpha) proportions and
    redraws (up to ``max_retries`` times) until no shard is empty.
    Rows inside each shard keep their source order.
    """
    n = len(data)
    if num_clients < 1 or num_clients > n:
        raise ConfigError(f"num_clients must be in [1, {n}], got {num_clients}", key="num_clients")
    rng = np.random.default_rng(seed)

    if mode == IID:
        order = rng.permutation(n)
        indices = [np.sort(order[k::num_clients]) for k in range(num_clients)]
    elif mode == NON_IID:
        if dirichlet_alpha is None or dirichlet_alpha <= 0:
            raise ConfigError("non-IID partition needs dirichlet_alpha > 0", key="dirichlet_alpha")
        indices = None
        for _ in range(max_retries):
            buckets: list[list[np.ndarray]] = [[] for _ in range(num_clients)]
            for c in range(data.num_classes):
                idx_c = rng.permutation(np.flatnonzero(data.labels == c))
                props = rng.dirichlet(np.full(num_clients, dirichlet_alpha))
                cuts = (np.cumsum(props)[:-1] * len(idx_c)).astype(int)
                for k, part in enumerate(np.split(idx_c, cuts)):
                    buckets[k].append(part)
            candidate = [np.sort(np.concatenate(b)) for b in buckets]
            if all(len(s) for s in candidate):
                indices = candidate
                break
        if indices is None:
            raise ConfigError(
                f"could not give every one of {num_clients} clients a sample after "
                f"{max_retries} Dirichlet draws; use a larger alpha or fewer clients",
                key="dirichlet_alpha",
            )
    else:
        raise ConfigError(f"unknown partition mode {mode!r}", key="mode")

    return ClientDataSplit(
        shards=[data.subset(i) for i in indices],
        mode=mode,
        dirichlet_alpha=dirichlet_alpha if mode == NON_IID else None,
        indices=indices,
    )


def split_holdout(
    data: Dataset, fractions: Sequence[float], seed: int
) -> list[Dataset]:
    """Shuffle and cut ``data`` into consecutive pieces of the given fractions."""
    n = len(data)
    order = np.random.default_rng(seed).permutation(n)
    bounds = np.round(np.cumsum(fractions) * n).astype(int)
    bounds[-1] = n
    pieces, start = [], 0
    for end in bounds:
        pieces.append(data.subset(np.sort(order[start:end])))
        start = end
    return pieces
