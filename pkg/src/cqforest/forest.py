"""Bagged CART regression trees and the local weights they induce.

Trees are grown by greedy variance-reduction splits on the observed
response, censoring flags ignored. For a test point x, each tree puts
mass 1/|leaf| on every in-bag row sharing x's leaf (bootstrap duplicates
counted), and the forest weight is the average over trees. Those weights
drive everything downstream: weighted means/quantiles and the censoring-
adjusted estimating equation.
"""

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import DataError


@dataclass(frozen=True)
class ForestConfig:
    """Growth parameters.

    ``min_node_size`` is the minimum terminal-leaf sample count (the key
    bias/variance knob). ``min_child_fraction`` additionally forces each
    child of a split to hold at least that fraction of its parent's rows.
    ``mtry`` defaults to ceil(p/3) at fit time.
    """

    min_node_size: int
    n_trees: int = 1000
    mtry: int | None = None
    min_child_fraction: float = 0.1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be >= 1")
        if self.min_node_size < 1:
            raise DataError("min_node_size must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise DataError("mtry must be >= 1")
        if not 0.0 < self.min_child_fraction <= 0.5:
            raise DataError("min_child_fraction must lie in (0, 0.5]")


@dataclass
class Tree:
    """One fitted tree in flat-array form.

    ``feature[i] == -1`` marks node i as a leaf; internal nodes route x to
    ``left`` iff x[feature] <= threshold. ``leaf_rows[i]`` holds the
    original training-row indices in leaf i, bootstrap multiplicity
    included; leaves partition the bag.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_rows: list
    bag: np.ndarray


class WeightVector:
    """Sparse nonnegative weights over training rows, summing to one.

    Stored as parallel arrays ``index`` (sorted, unique row ids) and
    ``value`` (strictly positive); ``n`` is the training-set size.
    """

    __slots__ = ("index", "value", "n")

    def __init__(self, index, value, n):
        index = np.asarray(index, dtype=np.int64)
        value = np.asarray(value, dtype=np.float64)
        if index.shape != value.shape or index.ndim != 1:
            raise DataError("index/value shape mismatch")
        if (value < 0).any() or not np.isfinite(value).all():
            raise DataError("weights must be finite and nonnegative")
        keep = value > 0
        index, value = index[keep], value[keep]
        order = np.argsort(index, kind="stable")
        index, value = index[order], value[order]
        if index.size == 0:
            raise DataError("weight vector has empty support")
        if index[0] < 0 or index[-1] >= n or np.unique(index).size != index.size:
            raise DataError("weight indices must be unique and within [0, n)")
        if abs(float(value.sum()) - 1.0) > 1e-8:
            raise DataError("weights must sum to 1")
        self.index = index
        self.value = value
        self.n = int(n)

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=np.float64)
        idx = np.flatnonzero(dense)
        return cls(idx, dense[idx], dense.size)

    @classmethod
    def uniform(cls, n):
        return cls(np.arange(n), np.full(n, 1.0 / n), n)

    @classmethod
    def uniform_subset(cls, rows, n):
        rows = np.asarray(rows, dtype=np.int64)
        return cls(rows, np.full(rows.size, 1.0 / rows.size), n)

    def dense(self):
        out = np.zeros(self.n)
        out[self.index] = self.value
        return out

    @property
    def support_size(self):
        return self.index.size


@dataclass
class Forest:
    config: ForestConfig
    trees: list
    n_train: int
    n_features: int
    response: np.ndarray
    checksum: str
    feature_names: tuple | None = field(default=None)


def _pure(y):
    return bool((y == y[0]).all())


def _best_split(xb, yb, rows, feats, min_child):
    """Best (feature, cut) by variance reduction, or None.

    Maximizes sum_L^2/n_L + sum_R^2/n_R (equivalent to minimizing child
    SSE); ties resolve to the lowest feature index, then the lowest
    threshold. Candidate cuts keep both children >= min_child rows and
    fall between distinct sorted feature values.
    """
    size = rows.size
    lo, hi = min_child, size - min_child
    if lo > hi:
        return None
    total = yb[rows].sum()
    best_gain = -math.inf
    best = None
    for f in feats:
        xv = xb[rows, f]
        order = np.argsort(xv, kind="stable")
        xs = xv[order]
        ok = xs[lo : hi + 1] > xs[lo - 1 : hi]
        if not ok.any():
            continue
        pos = np.flatnonzero(ok) + lo
        csum = np.cumsum(yb[rows[order]])
        left_sum = csum[pos - 1]
        proxy = left_sum * left_sum / pos + (total - left_sum) * (total - left_sum) / (size - pos)
        j = int(np.argmax(proxy))
        if proxy[j] > best_gain:
            best_gain = proxy[j]
            best = (f, order, int(pos[j]))
    if best is None or best_gain <= total * total / size:
        return None
    f, order, cut = best
    xs = xb[rows[order], f]
    thr = (xs[cut - 1] + xs[cut]) / 2.0
    if thr >= xs[cut]:
        # adjacent floats can round the midpoint up; pin the boundary so
        # "x <= threshold goes left" still separates the two groups
        thr = xs[cut - 1]
    return f, float(thr), rows[order[:cut]], rows[order[cut:]]


def _grow_tree(x, y, cfg, mtry, rng):
    n = y.size
    p = x.shape[1]
    bag = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
    xb, yb = x[bag], y[bag]
    feature, threshold, left, right, leaf_rows = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(None)
        left.append(-1)
        right.append(-1)
        leaf_rows.append(None)
        return len(feature) - 1

    stack = [(new_node(), np.arange(n))]
    while stack:
        nid, node_rows = stack.pop()
        split = None
        if node_rows.size >= 2 * cfg.min_node_size and not _pure(yb[node_rows]):
            feats = np.sort(rng.choice(p, size=mtry, replace=False))
            min_child = max(cfg.min_node_size, int(math.ceil(cfg.min_child_fraction * node_rows.size - 1e-9)))
            split = _best_split(xb, yb, node_rows, feats, min_child)
        if split is None:
            leaf_rows[nid] = np.sort(bag[node_rows])
            continue
        f, thr, lrows, rrows = split
        feature[nid] = f
        threshold[nid] = thr
        lid, rid = new_node(), new_node()
        left[nid], right[nid] = lid, rid
        stack.append((rid, rrows))
        stack.append((lid, lrows))
    thr_arr = np.array([np.nan if t is None else t for t in threshold])
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=thr_arr,
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        leaf_rows=leaf_rows,
        bag=np.sort(bag),
    )


def data_checksum(data):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.features).tobytes())
    h.update(np.ascontiguousarray(data.response).tobytes())
    return h.hexdigest()


def fit(data, cfg, threads=1, feature_names=None):
    """Grow a forest of cfg.n_trees bagged trees on (features, response).

    Each tree draws its own bootstrap bag (n draws with replacement) and
    its own feature subsamples from an independent stream derived from
    ``cfg.seed`` and the tree index, so results do not depend on thread
    scheduling. Censoring flags play no role here.
    """
    if cfg.min_node_size > data.n:
        raise DataError("min_node_size exceeds the number of training rows")
    mtry = cfg.mtry if cfg.mtry is not None else math.ceil(data.p / 3)
    if mtry > data.p:
        raise DataError("mtry exceeds the number of features")
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)
    x, y = data.features, data.response

    def build(seq):
        return _grow_tree(x, y, cfg, mtry, np.random.default_rng(seq))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(build, seeds))
    else:
        trees = [build(s) for s in seeds]
    return Forest(
        config=cfg,
        trees=trees,
        n_train=data.n,
        n_features=data.p,
        response=data.response,
        checksum=data_checksum(data),
        feature_names=tuple(feature_names) if feature_names else None,
    )


def _leaf_of(tree, x):
    nid = 0
    while tree.feature[nid] >= 0:
        nid = tree.left[nid] if x[tree.feature[nid]] <= tree.threshold[nid] else tree.right[nid]
    return nid


def apply(tree, xmat):
    """Leaf node id for every row of xmat, vectorized over rows."""
    out = np.empty(xmat.shape[0], dtype=np.int32)
    stack = [(0, np.arange(xmat.shape[0]))]
    while stack:
        nid, idx = stack.pop()
        if tree.feature[nid] < 0:
            out[idx] = nid
            continue
        go_left = xmat[idx, tree.feature[nid]] <= tree.threshold[nid]
        stack.append((tree.left[nid], idx[go_left]))
        stack.append((tree.right[nid], idx[~go_left]))
    return out


def tree_weights(tree, x, n=None):
    """Weights 1/|leaf| on the in-bag rows co-leafed with x, 0 elsewhere."""
    x = np.asarray(x, dtype=np.float64).ravel()
    rows = tree.leaf_rows[_leaf_of(tree, x)]
    n = int(n) if n is not None else int(tree.bag.max()) + 1
    dense = np.zeros(n)
    np.add.at(dense, rows, 1.0 / rows.size)
    return WeightVector.from_dense(dense)


def weight_matrix(forest, xmat):
    """Dense (n_test, n_train) forest-weight matrix for a batch of points."""
    xmat = np.atleast_2d(np.asarray(xmat, dtype=np.float64))
    if xmat.shape[1] != forest.n_features:
        raise DataError("test features have the wrong dimension")
    out = np.zeros((xmat.shape[0], forest.n_train))
    b = len(forest.trees)
    for tree in forest.trees:
        leaves = apply(tree, xmat)
        for leaf in np.unique(leaves):
            rows = tree.leaf_rows[leaf]
            pts = np.flatnonzero(leaves == leaf)
            np.add.at(out, (pts[:, None], rows[None, :]), 1.0 / (b * rows.size))
    return out


def forest_weights(forest, x):
    """Average of the per-tree weight vectors at x (sparse result)."""
    dense = weight_matrix(forest, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
    return WeightVector.from_dense(dense)


def support_grid(w, y):
    """Distinct support response values and the weight mass strictly above each.

    Returns ``(cands, above)`` with cands ascending and
    above[j] = sum of w_i over rows with y_i > cands[j], built from pure
    suffix additions so downstream comparisons are reproducible.
    """
    ys = np.asarray(y)[w.index]
    order = np.argsort(ys, kind="stable")
    ysort = ys[order]
    wsort = w.value[order]
    last = np.append(np.flatnonzero(np.diff(ysort) > 0), ysort.size - 1)
    cands = ysort[last]
    suffix = np.cumsum(wsort[::-1])[::-1]
    above = np.append(suffix[last[:-1] + 1], 0.0)
    return cands, above


def mass_above(w, y, q):
    """sum_i w_i 1(y_i > q) for scalar or array q."""
    ys = np.asarray(y)[w.index]
    order = np.argsort(ys, kind="stable")
    ysort = ys[order]
    suffix = np.append(np.cumsum(w.value[order][::-1])[::-1], 0.0)
    q = np.asarray(q, dtype=np.float64)
    out = suffix[np.searchsorted(ysort, q, side="right")]
    return float(out) if q.ndim == 0 else out


def quantile_from_weights(w, y, tau):
    """Smallest support value whose weighted CDF reaches tau."""
    cands, above = support_grid(w, y)
    j = int(np.argmax(above <= 1.0 - tau))
    return float(cands[j])


def weighted_mean(forest, x):
    """Forest-weighted mean of the training responses at x."""
    w = forest_weights(forest, x)
    return float(np.dot(w.value, forest.response[w.index]))


def weighted_quantile(forest, x, tau):
    """Forest-weighted tau-quantile of the training responses at x.

    This is the plain quantile-forest read-out of the weighted empirical
    CDF; it knows nothing about censoring.
    """
    if not 0.0 < tau < 1.0:
        raise DataError("tau must lie in (0, 1)")
    return quantile_from_weights(forest_weights(forest, x), forest.response, tau)


FOREST_FORMAT = "cqforest-forest"
FOREST_VERSION = 1


def save_forest(forest, path):
    """Serialize to a versioned JSON model file with exact float round-trip."""
    doc = {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "config": {
            "min_node_size": forest.config.min_node_size,
            "n_trees": forest.config.n_trees,
            "mtry": forest.config.mtry,
            "min_child_fraction": forest.config.min_child_fraction,
            "bootstrap": forest.config.bootstrap,
            "seed": forest.config.seed,
        },
        "n_train": forest.n_train,
        "n_features": forest.n_features,
        "feature_names": list(forest.feature_names) if forest.feature_names else None,
        "checksum": forest.checksum,
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": [None if np.isnan(t) else float(t) for t in tree.threshold],
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "leaf_rows": [None if r is None else [int(v) for v in r] for r in tree.leaf_rows],
            }
            for tree in forest.trees
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_forest(path, data):
    """Load a model file and bind it to its training data.

    The file stores a checksum of the training arrays; a mismatch means
    the supplied data is not what the forest was fitted on.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a valid model file ({exc})") from None
    if doc.get("format") != FOREST_FORMAT:
        raise DataError(f"{path}: unrecognized model format")
    if doc.get("version") != FOREST_VERSION:
        raise DataError(f"{path}: unsupported model version {doc.get('version')!r}")
    if doc["n_train"] != data.n or doc["n_features"] != data.p:
        raise DataError(f"{path}: model was fitted on different data dimensions")
    if doc["checksum"] != data_checksum(data):
        raise DataError(f"{path}: training data does not match this model")
    cfg = ForestConfig(**doc["config"])
    trees = []
    for rec in doc["trees"]:
        trees.append(
            Tree(
                feature=np.asarray(rec["feature"], dtype=np.int32),
                threshold=np.array([np.nan if t is None else t for t in rec["threshold"]]),
                left=np.asarray(rec["left"], dtype=np.int32),
                right=np.asarray(rec["right"], dtype=np.int32),
                leaf_rows=[None if r is None else np.asarray(r, dtype=np.int64) for r in rec["leaf_rows"]],
                bag=np.sort(np.concatenate([r for r in rec["leaf_rows"] if r is not None]).astype(np.int64)),
            )
        )
    names = doc.get("feature_names")
    return Forest(
        config=cfg,
        trees=trees,
        n_train=data.n,
        n_features=data.p,
        response=data.response,
        checksum=doc["checksum"],
        feature_names=tuple(names) if names else None,
    )
