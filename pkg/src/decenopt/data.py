"""Dataset ingestion and synthetic problem generators.

LIBSVM ("label idx:val ...", 1-based indices) and CSV (header row, last
column label) readers densify into a RawDataset; ``prepare`` then
binarizes labels, unit-normalizes features, and deals samples evenly
across nodes. ``synthesize`` builds self-contained problems with known
structure for oracle testing and experiments that need exact optima.
"""

from __future__ import annotations

import gzip
import warnings
from dataclasses import dataclass

import numpy as np

from .objective import LogisticDataset, LogisticProblem, QuadraticProblem
from .streams import substream


@dataclass(frozen=True)
class RawDataset:
    """Dense feature matrix (N, p) with raw (pre-binarization) labels (N,)."""

    features: np.ndarray
    labels: np.ndarray
    source: str | None = None
    fmt: str | None = None

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


def _open_text(source, mode="r"):
    if hasattr(source, "read") or hasattr(source, "write"):
        return source, False
    path = str(source)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t"), True
    return open(path, mode), True


def parse_libsvm(source, p: int | None = None) -> RawDataset:
    """Parse sparse LIBSVM text into dense vectors.

    Dimension is the largest index seen unless ``p`` is declared. Raises
    ValueError naming the offending line for malformed input; index 0 is
    rejected (the format is 1-based).
    """
    f, own = _open_text(source)
    rows, labels = [], []
    try:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise ValueError(f"line {lineno}: label {parts[0]!r} is not numeric") from None
            entries = {}
            for tok in parts[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise ValueError(f"line {lineno}: malformed feature {tok!r}") from None
                if idx < 1:
                    raise ValueError(f"line {lineno}: feature index {idx} (indices are 1-based)")
                entries[idx] = val
            rows.append(entries)
    finally:
        if own:
            f.close()
    max_idx = max((max(r) for r in rows if r), default=0)
    dim = p if p is not None else max_idx
    if max_idx > dim:
        raise ValueError(f"feature index {max_idx} exceeds declared dimension {dim}")
    X = np.zeros((len(rows), dim))
    for k, entries in enumerate(rows):
        for idx, val in entries.items():
            X[k, idx - 1] = val
    name = getattr(source, "name", None) if not isinstance(source, (str, bytes)) else str(source)
    return RawDataset(features=X, labels=np.asarray(labels, dtype=float),
                      source=name, fmt="libsvm")


def serialize_libsvm(dataset: RawDataset, target) -> None:
    """Write a RawDataset back out in LIBSVM text form (zeros omitted)."""
    f, own = _open_text(target, mode="w")
    try:
        for x, y in zip(dataset.features, dataset.labels):
            toks = [repr(float(y))]
            for idx in np.nonzero(x)[0]:
                toks.append(f"{idx + 1}:{float(x[idx])!r}")
            f.write(" ".join(toks) + "\n")
    finally:
        if own:
            f.close()


def parse_csv(source) -> RawDataset:
    """Parse CSV with a header row; the last column is the label."""
    f, own = _open_text(source)
    try:
        lines = [ln.strip() for ln in f if ln.strip()]
    finally:
        if own:
            f.close()
    if len(lines) < 2:
        raise ValueError("csv input needs a header row and at least one sample")
    width = len(lines[0].split(","))
    X, y = [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != width:
            raise ValueError(f"line {lineno}: expected {width} columns, got {len(cells)}")
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric value") from None
        X.append(vals[:-1])
        y.append(vals[-1])
    name = getattr(source, "name", None) if not isinstance(source, (str, bytes)) else str(source)
    return RawDataset(features=np.asarray(X), labels=np.asarray(y), source=name, fmt="csv")


# ---------------------------------------------------------------------------
# label rules

def sign_rule(label: float) -> int:
    """Positive labels to +1, everything else to -1."""
    return 1 if label > 0 else -1


def pair_rule(positive, negative):
    """Keep only two raw classes, mapping them to +1 / -1; drop the rest."""
    def rule(label: float):
        if label == positive:
            return 1
        if label == negative:
            return -1
        return None
    return rule


# Fashion-MNIST pairing used in the experiments: T-shirt (class 0) vs dress (class 3)
fashion_mnist_tshirt_vs_dress = pair_rule(0, 3)


@dataclass(frozen=True)
class Partition:
    """Assignment of original sample indices to nodes after prepare()."""

    node_indices: np.ndarray        # (n, m) original row indices
    dropped_surplus: int
    dropped_zero: int

    @property
    def n(self) -> int:
        return self.node_indices.shape[0]

    @property
    def m(self) -> int:
        return self.node_indices.shape[1]


def prepare(raw: RawDataset, n: int, seed: int, label_rule=sign_rule,
            reg: float = 1e-3, max_samples: int | None = None):
    """Binarize, normalize and split a raw dataset across n nodes.

    Samples whose label maps to None are dropped, zero feature vectors are
    dropped with a warning (they cannot be unit-normalized), the remainder
    is shuffled with the given seed, optionally capped at ``max_samples``,
    and truncated to m = floor(kept / n) samples per node.

    Returns (LogisticDataset, Partition); a fixed (raw, n, seed, rule)
    yields a byte-identical partition.
    """
    if n < 1:
        raise ValueError("node count must be positive")
    mapped = np.zeros(raw.N, dtype=int)
    for k, label in enumerate(raw.labels):
        r = label_rule(label)
        if r is None:
            continue
        if r not in (1, -1):
            raise ValueError(f"label rule must map to +1, -1 or None, got {r!r}")
        mapped[k] = r
    keep = mapped != 0
    norms = np.linalg.norm(raw.features, axis=1)
    zero = keep & (norms == 0)
    if zero.any():
        warnings.warn(f"dropping {int(zero.sum())} zero feature vectors "
                      "(cannot be unit-normalized)", stacklevel=2)
        keep &= ~zero
    kept_idx = np.nonzero(keep)[0]
    rng = substream(seed)
    order = kept_idx[rng.permutation(kept_idx.size)]
    if max_samples is not None:
        order = order[:max_samples]
    m = order.size // n
    if m < 1:
        raise ValueError(f"{order.size} usable samples cannot cover {n} nodes")
    surplus = order.size - n * m
    assign = order[:n * m].reshape(n, m)
    feats = raw.features[assign]
    feats = feats / np.linalg.norm(feats, axis=2, keepdims=True)
    labels = mapped[assign].astype(float)
    if (labels == 1).all() or (labels == -1).all():
        warnings.warn("label rule left a single class; the classification task is degenerate",
                      stacklevel=2)
    dataset = LogisticDataset(features=feats, labels=labels, reg=reg)
    return dataset, Partition(node_indices=assign, dropped_surplus=int(surplus),
                              dropped_zero=int(zero.sum()))


# ---------------------------------------------------------------------------
# synthetic problems

def synthesize(kind: str, n: int, m: int, p: int, seed: int,
               family: str = "quadratic", heterogeneity: float = 1.0,
               reg: float = 1e-3):
    """Build a synthetic finite-sum problem.

    kind="homogeneous" replicates one node's components at every node, so
    local gradients agree everywhere; kind="heterogeneous" gives each node
    a shifted component distribution (scaled by ``heterogeneity``) to
    stress the local/global gradient dissimilarity. family="quadratic"
    problems expose minimizer()/optimal_value() in closed form;
    family="logistic" builds unit-norm classification data.
    """
    if kind not in ("homogeneous", "heterogeneous"):
        raise ValueError(f"unknown kind {kind!r}")
    if min(n, m, p) < 1:
        raise ValueError("n, m, p must be positive")
    rng = substream(seed)
    h = 0.0 if kind == "homogeneous" else float(heterogeneity)

    if family == "quadratic":
        if kind == "homogeneous":
            a = rng.uniform(0.5, 1.5, size=(1, m, p))
            c = rng.normal(0.0, 0.3, size=(1, m, p))
            return QuadraticProblem(np.repeat(a, n, axis=0), np.repeat(c, n, axis=0))
        a = rng.uniform(0.5, 1.5, size=(n, m, p))
        node_shift = h * rng.normal(0.0, 0.3, size=(n, 1, p))
        c = node_shift + rng.normal(0.0, 0.1, size=(n, m, p))
        return QuadraticProblem(a, c)

    if family == "logistic":
        if kind == "homogeneous":
            theta = rng.normal(size=(1, m, p))
            w = rng.normal(size=p)
            raw_labels = np.sign(np.einsum("imp,p->im", theta, w))
            theta = np.repeat(theta, n, axis=0)
            labels = np.repeat(raw_labels, n, axis=0)
        else:
            node_mean = h * rng.normal(size=(n, 1, p))
            theta = node_mean + rng.normal(size=(n, m, p))
            w = rng.normal(size=(n, p)) + h * rng.normal(size=(n, p))
            raw_labels = np.sign(np.einsum("imp,ip->im", theta, w))
            labels = raw_labels
        labels = np.where(labels == 0, 1.0, labels)
        theta = theta / np.linalg.norm(theta, axis=2, keepdims=True)
        return LogisticProblem(LogisticDataset(features=theta, labels=labels, reg=reg))

    raise ValueError(f"unknown family {family!r}")
