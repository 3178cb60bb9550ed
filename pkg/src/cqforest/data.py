"""Datasets for right-censored regression: containers, CSV ingestion, simulators.

An observation is a triple (x, y, delta): features, the observed response
y = min(t, c) for a latent survival time t and censoring time c, and the
event flag delta = 1{t <= c}. Four synthetic generators with known
conditional quantiles are provided for benchmarking.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri


class DataError(ValueError):
    """Raised for malformed input data (files or arrays)."""


MODELS = ("aft1d", "sine1d", "aft-multi", "complex")

# Fixed coefficient vector of the multi-dimensional log-linear model.
_AFT_MULTI_BETA = np.array([0.1, 0.2, 0.3, 0.4, 0.5])


def _freeze(a):
    a = np.array(a, dtype=a.dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable right-censored sample.

    Parameters
    ----------
    features : ndarray of shape (n, p)
        Covariate matrix, finite reals.
    response : ndarray of shape (n,)
        Observed responses y = min(t, c).
    event : ndarray of shape (n,), bool
        True where the latent time was observed (t <= c).
    latent : ndarray of shape (n,), optional
        True survival times; only available for simulated or oracle data.
    """

    features: np.ndarray
    response: np.ndarray
    event: np.ndarray
    latent: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError("features must be a nonempty 2-d array")
        y = np.asarray(self.response, dtype=np.float64)
        ev = np.asarray(self.event)
        if ev.dtype != np.bool_:
            vals = np.unique(ev)
            if not np.isin(vals, (0, 1)).all():
                raise DataError("event flags must be 0/1 or boolean")
            ev = ev.astype(bool)
        if y.shape != (x.shape[0],) or ev.shape != y.shape:
            raise DataError("features, response and event lengths differ")
        if not np.isfinite(x).all() or not np.isfinite(y).all():
            raise DataError("non-finite value in features or response")
        lat = self.latent
        if lat is not None:
            lat = np.asarray(lat, dtype=np.float64)
            if lat.shape != y.shape or not np.isfinite(lat).all():
                raise DataError("latent vector malformed")
            # observed rows carry the latent time itself; censored rows sit strictly below it
            if not np.array_equal(y[ev], lat[ev]) or not (y[~ev] < lat[~ev]).all():
                raise DataError("response/latent/event are mutually inconsistent")
            lat = _freeze(lat)
        object.__setattr__(self, "features", _freeze(x))
        object.__setattr__(self, "response", _freeze(y))
        object.__setattr__(self, "event", _freeze(ev))
        object.__setattr__(self, "latent", lat)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one synthetic draw.

    ``censor_rate_param`` is the exponential rate of the censoring law
    (the shifted-exponential rate for the sine model).
    """

    model: str
    n: int
    censor_rate_param: float
    noise_sd: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise DataError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.n < 1:
            raise DataError("n must be >= 1")
        if not self.censor_rate_param > 0:
            raise DataError("censor_rate_param must be > 0")
        if not self.noise_sd > 0:
            raise DataError("noise_sd must be > 0")


def model_dim(model):
    """Feature dimension of a named generator."""
    if model in ("aft1d", "sine1d"):
        return 1
    if model in ("aft-multi", "complex"):
        return 5
    raise DataError(f"unknown model {model!r}")


def _signal(model, x):
    """Noise-free location of log(T) (aft models) or T (additive models)."""
    if model == "aft1d":
        return x[:, 0]
    if model == "sine1d":
        return 2.5 + np.sin(x[:, 0])
    if model == "aft-multi":
        return x @ _AFT_MULTI_BETA
    if model == "complex":
        return 5.0 + 0.2 * (
            np.sin(x[:, 0]) + np.cos(x[:, 1]) + x[:, 2] ** 2 + np.exp(x[:, 3]) + x[:, 4]
        )
    raise DataError(f"unknown model {model!r}")


def simulate(cfg):
    """Draw one dataset from a named generator.

    Latent times follow the model's location plus N(0, noise_sd^2) noise
    (on the log scale for the aft models). Censoring times are exponential
    with rate ``censor_rate_param``; the sine model shifts them by
    1 + sin(x) so censoring tracks the signal. Same seed, same bytes.
    """
    rng = np.random.default_rng(cfg.seed)
    p = model_dim(cfg.model)
    high = 2.0 * math.pi if cfg.model == "sine1d" else 2.0
    x = rng.uniform(0.0, high, size=(cfg.n, p))
    eps = rng.normal(0.0, cfg.noise_sd, size=cfg.n)
    loc = _signal(cfg.model, x)
    if cfg.model in ("aft1d", "aft-multi"):
        latent = np.exp(loc + eps)
    else:
        latent = loc + eps
    censor = rng.exponential(1.0 / cfg.censor_rate_param, size=cfg.n)
    if cfg.model == "sine1d":
        censor = 1.0 + np.sin(x[:, 0]) + censor
    response = np.minimum(latent, censor)
    event = latent <= censor
    return Dataset(features=x, response=response, event=event, latent=latent)


def true_quantile(model, x, tau, noise_sd=0.3):
    """Closed-form conditional tau-quantile of the latent time at x.

    Parameters
    ----------
    model : str
        One of the generator names.
    x : array-like
        A single feature vector (p,) or a batch (n, p); scalars are
        accepted for the one-dimensional models.
    tau : float in (0, 1)

    Returns
    -------
    float or ndarray matching the batch shape of ``x``.
    """
    if not 0.0 < tau < 1.0:
        raise DataError("tau must lie in (0, 1)")
    p = model_dim(model)
    xa = np.asarray(x, dtype=np.float64)
    scalar = xa.ndim < 2
    xa = np.atleast_2d(xa)
    if xa.shape[1] != p:
        if p == 1 and xa.shape[0] == 1:
            xa = xa.T
        else:
            raise DataError(f"model {model!r} expects {p} feature(s)")
    z = noise_sd * ndtri(tau)
    loc = _signal(model, xa)
    q = np.exp(loc + z) if model in ("aft1d", "aft-multi") else loc + z
    return float(q[0]) if scalar and q.size == 1 else q


@dataclass(frozen=True)
class CsvSchema:
    """Column selection for :func:`load_csv`."""

    response: str = "y"
    event: str = "delta"
    features: tuple = ()
    latent: str | None = None


def load_csv(path, schema):
    """Read a UTF-8, comma-separated, headered file into a Dataset.

    Rows must be complete and numeric; the event column only accepts 0/1.
    """
    if not schema.features:
        raise DataError("schema must name at least one feature column")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        cols = {}
        wanted = [schema.response, schema.event, *schema.features]
        if schema.latent:
            wanted.append(schema.latent)
        for name in wanted:
            if name not in header:
                raise DataError(f"{path}: missing column {name!r}")
            cols[name] = header.index(name)
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            rows.append(rec)
    if not rows:
        raise DataError(f"{path}: no data rows")

    def column(name, kind="float"):
        out = []
        for i, rec in enumerate(rows):
            cell = rec[cols[name]].strip()
            if cell == "":
                raise DataError(f"{path}: missing value in column {name!r}, data row {i + 1}")
            if kind == "event":
                if cell not in ("0", "1"):
                    raise DataError(f"{path}: invalid event flag {cell!r} in data row {i + 1}")
                out.append(cell == "1")
            else:
                try:
                    val = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell {cell!r} in column {name!r}, data row {i + 1}"
                    ) from None
                if not math.isfinite(val):
                    raise DataError(f"{path}: non-finite value in column {name!r}, data row {i + 1}")
                out.append(val)
        return out

    features = np.column_stack([column(f) for f in schema.features])
    response = np.asarray(column(schema.response))
    event = np.asarray(column(schema.event, kind="event"))
    latent = np.asarray(column(schema.latent)) if schema.latent else None
    try:
        return Dataset(features=features, response=response, event=event, latent=latent)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def _read_header(path):
    with open(path, newline="", encoding="utf-8") as fh:
        try:
            header = next(csv.reader(fh))
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
    return [h.strip() for h in header]


def detect_schema(path, response="y", event="delta", latent="latent"):
    """Schema for a headered CSV, treating every other column as a feature.

    The latent column is optional and is picked up when present; feature
    order follows the header.
    """
    header = _read_header(path)
    for name in (response, event):
        if name not in header:
            raise DataError(f"{path}: missing column {name!r}")
    reserved = {response, event, latent}
    features = tuple(h for h in header if h not in reserved)
    if not features:
        raise DataError(f"{path}: no feature columns found")
    return CsvSchema(
        response=response,
        event=event,
        features=features,
        latent=latent if latent in header else None,
    )


def load_features_csv(path, names=None, n_features=None):
    """Read test-point features from a headered CSV.

    Columns are selected by ``names`` when all are present; otherwise
    every column except y/delta/latent is used, which must then match
    ``n_features`` if given. Returns (matrix, column names).
    """
    header = _read_header(path)
    if names and all(n in header for n in names):
        chosen = list(names)
    else:
        chosen = [h for h in header if h not in {"y", "delta", "latent"}]
        if names and len(chosen) != len(names):
            raise DataError(
                f"{path}: feature columns do not match the model "
                f"(expected {list(names)}, found {chosen})"
            )
    if n_features is not None and len(chosen) != n_features:
        raise DataError(f"{path}: expected {n_features} feature columns, found {len(chosen)}")
    idx = [header.index(c) for c in chosen]
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
            try:
                rows.append([float(rec[j]) for j in idx])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature cell") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    mat = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(mat).all():
        raise DataError(f"{path}: non-finite feature value")
    return mat, chosen


def write_csv(path, data, feature_names=None, latent_name="latent"):
    """Write a Dataset in the same format load_csv reads (x*, y, delta[, latent])."""
    names = list(feature_names or (f"x{j + 1}" for j in range(data.p)))
    if len(names) != data.p:
        raise DataError("feature_names length does not match p")
    header = [*names, "y", "delta"]
    if data.latent is not None:
        header.append(latent_name)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            rec = [repr(float(v)) for v in data.features[i]]
            rec.append(repr(float(data.response[i])))
            rec.append("1" if data.event[i] else "0")
            if data.latent is not None:
                rec.append(repr(float(data.latent[i])))
            writer.writerow(rec)
