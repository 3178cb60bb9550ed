"""Monte-Carlo benchmark harness.

Runs replicated simulation studies and writes two CSV files: a tidy
per-replication table ``results.csv`` with columns

    scenario, method, tau, node_size, replication, metric, value

and an ``aggregate.csv`` of (mean, sd) per metric cell. Scenarios cover
the four generators, a survival-estimator comparison, a node-size sweep,
interval coverage, a one-dimensional illustrative root study, and
runtime scaling. Methods: ``crf`` (censoring-adjusted forest quantiles),
``qrf`` (plain weighted quantiles of the observed response), and
``qrf_oracle`` (plain weighted quantiles from a forest fitted on the
latent, uncensored response — simulation-only upper bound).

Everything is seeded: one spec plus one seed yields identical tables,
except for the wall-clock values measured by runtime-scaling.
"""

import csv
import os
import time
from dataclasses import dataclass

import numpy as np

from .data import DataError, Dataset, SimConfig, simulate, true_quantile
from .estimator import CqrConfig, predict_with_weights
from .forest import ForestConfig, WeightVector, fit, quantile_from_weights, support_grid, weight_matrix
from .metrics import c_index, quantile_losses
from .survival import km

SCENARIOS = (
    "illustrative41",
    "aft1d",
    "sine1d",
    "aft-multi",
    "complex",
    "survival-comparison",
    "node-size-sweep",
    "coverage",
    "runtime-scaling",
)
METHODS = ("crf", "qrf", "qrf_oracle")

_SCENARIO_MODEL = {
    "aft1d": "aft1d",
    "sine1d": "sine1d",
    "aft-multi": "aft-multi",
    "complex": "complex",
    "survival-comparison": "sine1d",
    "node-size-sweep": "sine1d",
    "coverage": "sine1d",
    "runtime-scaling": "aft1d",
}

# default censoring-rate parameters chosen so the generators land on
# their documented censoring fractions
_DEFAULT_RATE = {"aft1d": 0.08, "sine1d": 0.2, "aft-multi": 0.05, "complex": 0.015}

_RUNTIME_SIZES = (500, 1000, 2000)
_ILLUSTRATIVE_SIZES = (100, 500, 1000, 5000)


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark run: scenario, scale, methods, and seeding."""

    scenario: str
    replications: int = 20
    n_train: int = 300
    n_test: int = 300
    taus: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    node_sizes: tuple = ()
    methods: tuple = METHODS
    trees: int = 200
    seed: int = 0
    censor_rate: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise DataError(f"unknown scenario {self.scenario!r}")
        if self.replications < 1:
            raise DataError("replications must be >= 1")
        if self.n_train < 1 or self.n_test < 1:
            raise DataError("n_train and n_test must be positive")
        if self.trees < 1:
            raise DataError("trees must be >= 1")
        taus = tuple(float(t) for t in self.taus)
        if not taus or any(not 0.0 < t < 1.0 for t in taus):
            raise DataError("taus must be nonempty, each in (0, 1)")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise DataError("taus must be strictly increasing")
        object.__setattr__(self, "taus", taus)
        sizes = tuple(int(m) for m in self.node_sizes)
        if any(m < 1 for m in sizes):
            raise DataError("node sizes must be positive")
        object.__setattr__(self, "node_sizes", sizes)
        methods = tuple(self.methods)
        if not methods or any(m not in METHODS for m in methods):
            raise DataError(f"methods must be a nonempty subset of {METHODS}")
        object.__setattr__(self, "methods", methods)
        if self.censor_rate is not None and not self.censor_rate > 0:
            raise DataError("censor_rate must be positive")


def _child_seed(*parts):
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1)[0])


def _node_sizes(spec):
    if spec.node_sizes:
        return spec.node_sizes
    if spec.scenario == "node-size-sweep":
        return tuple(range(5, 61, 5))
    return (max(1, spec.n_train // 10),)


def _first_root(cands, scores):
    nonneg = np.flatnonzero(scores >= 0.0)
    idx = int(nonneg[0]) if nonneg.size else int(np.argmin(np.abs(scores)))
    return float(cands[idx])


def illustrative_roots(n, seed, tau=0.5):
    """Roots of the two one-dimensional estimating equations.

    Draws T ~ Unif(0,1) censored by C ~ N(0.8, 0.2^2) and solves, under
    uniform weights, the latent-data equation (root_u1, the empirical
    tau-quantile of T) and the censoring-adjusted equation on observed
    data (root_u2). Both should approach the tau-quantile of T as n
    grows; root_u1 exists only because simulation reveals T.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, n)
    c = rng.normal(0.8, 0.2, n)
    y = np.minimum(t, c)
    event = t <= c
    w = WeightVector.uniform(n)

    lat_cands, lat_above = support_grid(w, t)
    root_u1 = _first_root(lat_cands, (1.0 - tau) - lat_above)

    cands, above = support_grid(w, y)
    g = km(y, event).evaluate(cands)
    root_u2 = _first_root(cands, (1.0 - tau) * g - above)
    return root_u1, root_u2


def _simulate_pair(model, spec, rep, rate):
    train = simulate(
        SimConfig(model=model, n=spec.n_train, censor_rate_param=rate, seed=_child_seed(spec.seed, rep, 0))
    )
    test = simulate(
        SimConfig(model=model, n=spec.n_test, censor_rate_param=rate, seed=_child_seed(spec.seed, rep, 1))
    )
    return train, test


def _oracle_dataset(train):
    return Dataset(
        features=train.features,
        response=train.latent,
        event=np.ones(train.n, dtype=bool),
        latent=train.latent,
    )


def _emit(rows, scenario, method, tau, node_size, rep, metric, value):
    if value is not None:
        rows.append((scenario, method, tau, node_size, rep, metric, float(value)))


def _emit_report(rows, scenario, method, tau, node_size, rep, report, cidx):
    _emit(rows, scenario, method, tau, node_size, rep, "l_mse", report.l_mse)
    _emit(rows, scenario, method, tau, node_size, rep, "l_mad", report.l_mad)
    _emit(rows, scenario, method, tau, node_size, rep, "l_quantile", report.l_quantile)
    _emit(rows, scenario, method, tau, node_size, rep, "c_index", cidx)


def _safe_c_index(pred, test):
    try:
        return c_index(pred, test.response, test.event)
    except DataError:
        return None


def _crf_variants(spec, node_size):
    """(method label, CqrConfig) pairs to run as censoring-adjusted forests."""
    if spec.scenario == "survival-comparison":
        return (
            ("crf-beran-rf", CqrConfig(taus=spec.taus, survival="beran-rf")),
            ("crf-km-knn", CqrConfig(taus=spec.taus, survival="km-knn", knn=node_size)),
        )
    if "crf" in spec.methods:
        return (("crf", CqrConfig(taus=spec.taus, survival="beran-rf")),)
    return ()


def _run_model_scenario(spec, model, rows, threads):
    rate = spec.censor_rate if spec.censor_rate is not None else _DEFAULT_RATE[model]
    want_qrf = "qrf" in spec.methods and spec.scenario != "survival-comparison"
    want_oracle = "qrf_oracle" in spec.methods and spec.scenario != "survival-comparison"
    for rep in range(spec.replications):
        train, test = _simulate_pair(model, spec, rep, rate)
        true_q = {tau: true_quantile(model, test.features, tau) for tau in spec.taus}
        for m in _node_sizes(spec):
            fcfg = ForestConfig(min_node_size=m, n_trees=spec.trees, seed=_child_seed(spec.seed, rep, 2))
            forest = fit(train, fcfg, threads=threads)
            wmat = weight_matrix(forest, test.features)
            weights = [WeightVector.from_dense(wmat[i]) for i in range(test.n)]
            for label, cfg in _crf_variants(spec, m):
                preds = [predict_with_weights(test.features[i], weights[i], train, cfg) for i in range(test.n)]
                for j, tau in enumerate(spec.taus):
                    q = np.array([p[j].q_hat for p in preds])
                    rep_losses = quantile_losses(test.latent, true_q[tau], q, tau)
                    _emit_report(rows, spec.scenario, label, tau, m, rep, rep_losses, _safe_c_index(q, test))
            if want_qrf:
                for tau in spec.taus:
                    q = np.array([quantile_from_weights(w, train.response, tau) for w in weights])
                    rep_losses = quantile_losses(test.latent, true_q[tau], q, tau)
                    _emit_report(rows, spec.scenario, "qrf", tau, m, rep, rep_losses, _safe_c_index(q, test))
            if want_oracle:
                oracle = fit(_oracle_dataset(train), fcfg, threads=threads)
                womat = weight_matrix(oracle, test.features)
                for tau in spec.taus:
                    q = np.array(
                        [
                            quantile_from_weights(WeightVector.from_dense(womat[i]), oracle.response, tau)
                            for i in range(test.n)
                        ]
                    )
                    rep_losses = quantile_losses(test.latent, true_q[tau], q, tau)
                    _emit_report(rows, spec.scenario, "qrf_oracle", tau, m, rep, rep_losses, _safe_c_index(q, test))


def _run_illustrative(spec, rows):
    for rep in range(spec.replications):
        for n in _ILLUSTRATIVE_SIZES:
            for tau in spec.taus:
                u1, u2 = illustrative_roots(n, _child_seed(spec.seed, rep, n), tau)
                _emit(rows, spec.scenario, "u1", tau, n, rep, "root", u1)
                _emit(rows, spec.scenario, "u2", tau, n, rep, "root", u2)


def _run_coverage(spec, rows, threads, level=0.95):
    model = _SCENARIO_MODEL[spec.scenario]
    rate = spec.censor_rate if spec.censor_rate is not None else _DEFAULT_RATE[model]
    alpha = (1.0 - level) / 2.0
    cfg = CqrConfig(taus=(alpha, 1.0 - alpha))
    m = _node_sizes(spec)[0]
    for rep in range(spec.replications):
        train, test = _simulate_pair(model, spec, rep, rate)
        fcfg = ForestConfig(min_node_size=m, n_trees=spec.trees, seed=_child_seed(spec.seed, rep, 2))
        forest = fit(train, fcfg, threads=threads)
        wmat = weight_matrix(forest, test.features)
        lo = np.empty(test.n)
        hi = np.empty(test.n)
        for i in range(test.n):
            pair = predict_with_weights(test.features[i], WeightVector.from_dense(wmat[i]), train, cfg)
            lo[i], hi[i] = pair[0].q_hat, pair[1].q_hat
        covered = (test.latent >= lo) & (test.latent <= hi)
        _emit(rows, spec.scenario, "crf", level, m, rep, "coverage", covered.mean())
        _emit(rows, spec.scenario, "crf", level, m, rep, "interval_width", (hi - lo).mean())


def _run_runtime(spec, rows, threads):
    model = _SCENARIO_MODEL[spec.scenario]
    rate = spec.censor_rate if spec.censor_rate is not None else _DEFAULT_RATE[model]
    cfg = CqrConfig(taus=(0.5,))
    for rep in range(spec.replications):
        for n in _RUNTIME_SIZES:
            m = max(1, n // 10)
            train = simulate(
                SimConfig(model=model, n=n, censor_rate_param=rate, seed=_child_seed(spec.seed, rep, 0, n))
            )
            test = simulate(
                SimConfig(model=model, n=spec.n_test, censor_rate_param=rate, seed=_child_seed(spec.seed, rep, 1, n))
            )
            fcfg = ForestConfig(min_node_size=m, n_trees=spec.trees, seed=_child_seed(spec.seed, rep, 2, n))
            forest = fit(train, fcfg, threads=threads)
            start = time.perf_counter()
            wmat = weight_matrix(forest, test.features)
            for i in range(test.n):
                predict_with_weights(test.features[i], WeightVector.from_dense(wmat[i]), train, cfg)
            elapsed = time.perf_counter() - start
            _emit(rows, spec.scenario, "crf", 0.5, m, rep, "seconds_per_prediction", elapsed / test.n)


def run(spec, out_dir, threads=1):
    """Execute a benchmark spec and write results.csv + aggregate.csv.

    Returns the two file paths. Tables are deterministic given (spec,
    seed), runtime measurements excepted.
    """
    rows = []
    if spec.scenario == "illustrative41":
        _run_illustrative(spec, rows)
    elif spec.scenario == "coverage":
        _run_coverage(spec, rows, threads)
    elif spec.scenario == "runtime-scaling":
        _run_runtime(spec, rows, threads)
    else:
        _run_model_scenario(spec, _SCENARIO_MODEL[spec.scenario], rows, threads)
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    with open(results_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "method", "tau", "node_size", "replication", "metric", "value"])
        for scenario, method, tau, node_size, rep, metric, value in rows:
            writer.writerow([scenario, method, repr(float(tau)), node_size, rep, metric, repr(value)])
    groups = {}
    for scenario, method, tau, node_size, rep, metric, value in rows:
        groups.setdefault((scenario, method, tau, node_size, metric), []).append(value)
    aggregate_path = os.path.join(out_dir, "aggregate.csv")
    with open(aggregate_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "method", "tau", "node_size", "metric", "mean", "sd", "n_reps"])
        for (scenario, method, tau, node_size, metric), values in groups.items():
            arr = np.asarray(values)
            sd = repr(float(arr.std(ddof=1))) if arr.size > 1 else ""
            writer.writerow(
                [scenario, method, repr(float(tau)), node_size, metric, repr(float(arr.mean())), sd, arr.size]
            )
    return results_path, aggregate_path


_SPEC_INT_KEYS = ("replications", "n_train", "n_test", "trees", "seed")


def load_spec(path):
    """Parse a key=value spec file (# comments and blank lines allowed)."""
    kv = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "scenario":
            kv[key] = value
        elif key in _SPEC_INT_KEYS:
            kv[key] = int(value)
        elif key == "censor_rate":
            kv[key] = float(value)
        elif key == "taus":
            kv[key] = tuple(float(v) for v in value.split(",") if v.strip())
        elif key == "node_sizes":
            kv[key] = tuple(int(v) for v in value.split(",") if v.strip())
        elif key == "methods":
            kv[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        else:
            raise DataError(f"{path}:{lineno}: unknown key {key!r}")
    if "scenario" not in kv:
        raise DataError(f"{path}: spec must set scenario")
    try:
        return ExperimentSpec(**kv)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None
