"""Monte Carlo regret estimation and experiment orchestration.

Every random draw is keyed off (master_seed, rep, purpose), never off the
corruption level or the algorithm variant, so runs across omega values and
variants are coupled by common random numbers: a replication shares its
training set, clean test points, and perturbation directions everywhere it
appears.  Results are fully deterministic given the spec.

For synthetic models the per-replication regret is the exact conditional
expectation over labels,

    mean over test x of |2 eta(x) - 1| * 1{ghat(x_tilde) != g(x)},

which is unbiased for P(Y != ghat(X_tilde)) - P(Y != g(X)) and removes the
label-sampling noise (the raw 0-1 error rate is reported alongside).  Real
datasets have no Bayes oracle, so their rows carry metric='error_rate'.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .corruption import CorruptionSpec, attack_batch, sample_offsets
from .dataspace import Dataset, Model
from .neighbors import SearchIndex, classify_batch
from .rng import RngHandle
from .theory import optimal_k
from .variants import (DistributedIndex, distributed_classify_batch,
                       make_partition, pre1nn_classify_batch, preprocess)

VARIANTS = ("knn", "knn_noise_injected", "pre1nn", "distributed")

RESULT_COLUMNS = ("experiment_id", "variant", "metric", "d", "n", "k",
                  "omega", "corruption_mode", "rep", "value", "seed")
SUMMARY_COLUMNS = ("experiment_id", "variant", "metric", "d", "n", "k",
                   "omega", "corruption_mode", "reps", "mean", "se")


@dataclass(frozen=True)
class ExperimentSpec:
    model: Model = None
    dataset: Dataset = None
    n_grid: tuple = (64,)
    omega_grid: tuple = (0.0,)
    corruption: CorruptionSpec = CorruptionSpec(0.0, mode="random")
    variant: str = "knn"
    shards: int = 1
    reps: int = 1
    test_size: int = 1000
    test_fraction: float = 0.25
    k_rule: str = "cv5"  # fixed:<k> | cv5 | optimal
    master_seed: int = 0
    experiment_id: str = "exp"

    def __post_init__(self):
        if self.reps < 1 or self.test_size < 1:
            raise ValueError("reps and test_size must be >= 1")
        if not self.n_grid or self.omega_grid is None or len(self.omega_grid) == 0:
            raise ValueError("n and omega grids must be non-empty")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.model is None and self.dataset is None:
            raise ValueError("spec needs a model or a dataset")

    @property
    def dimension(self):
        return self.model.dimension if self.model is not None else self.dataset.dimension


@dataclass(frozen=True)
class RegretEstimate:
    mean_regret: float
    std_error: float
    mean_error_rate: float
    reps: int
    k_used: int


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple  # (log2 x, log2 y) pairs actually fitted


# ---------------------------------------------------------------------------
# k selection


def default_k_grid(n) -> list:
    """Odd k from 1 to min(n/2, 301), roughly geometric (~1.3x) spacing."""
    top = int(min(n // 2, 301))
    ks, k = [], 1.0
    while int(k) <= top:
        ki = int(k)
        ki += (ki + 1) % 2  # round up to odd
        if ki <= top and (not ks or ki > ks[-1]):
            ks.append(ki)
        k *= 1.3
    return ks or [1]


def cross_validate_k(dataset: Dataset, folds=5, k_grid=None, rng=None):
    """5-fold CV choice k_tilde plus the sample-size adjustment
    k_hat = round(k_tilde * (5/4)^{4/(4+d)}), clamped to [1, n-1]."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    n = dataset.n
    if k_grid is None:
        k_grid = default_k_grid(n)
    k_grid = sorted(int(k) for k in k_grid)
    if not k_grid:
        raise ValueError("k_grid must be non-empty")
    max_allowed = (folds - 1) * n // folds
    if k_grid[-1] > max_allowed:
        raise ValueError(f"max k {k_grid[-1]} exceeds (folds-1)/folds * n = {max_allowed}")
    gen = rng.generator() if isinstance(rng, RngHandle) else (rng or np.random.default_rng(0))
    k_tilde = _cv_best_k(dataset, folds, k_grid, gen)
    adj = (folds / (folds - 1)) ** (4.0 / (4.0 + dataset.dimension))
    k_hat = int(round(k_tilde * adj))
    k_hat = max(1, min(k_hat, n - 1))
    return k_tilde, k_hat


def _cv_best_k(dataset, folds, k_grid, gen):
    n = dataset.n
    perm = gen.permutation(n)
    fold_of = np.empty(n, dtype=np.intp)
    sizes = np.full(folds, n // folds)
    sizes[: n % folds] += 1
    start = 0
    for f, sz in enumerate(sizes):
        fold_of[perm[start:start + sz]] = f
        start += sz

    kmax = k_grid[-1]
    errors = np.zeros(len(k_grid))
    for f in range(folds):
        val = fold_of == f
        tr = Dataset(dataset.features[~val], dataset.labels[~val])
        index = SearchIndex(tr)
        kq = min(kmax, tr.n)
        _, idx = index.tree.query(dataset.features[val], k=kq, workers=-1)
        if kq == 1:
            idx = idx[:, None]
        lbl = tr.labels[idx].astype(np.float64)
        csum = np.cumsum(lbl, axis=1)
        yv = dataset.labels[val]
        for j, k in enumerate(k_grid):
            kc = min(k, kq)
            pred = csum[:, kc - 1] > kc / 2.0
            errors[j] += np.sum(pred != yv)
    # ties resolve to the smallest k (argmin returns the first minimum)
    return k_grid[int(np.argmin(errors))]


def _select_k(spec: ExperimentSpec, train: Dataset, n, omega, gen_cv):
    rule = spec.k_rule
    if rule.startswith("fixed:"):
        return int(rule.split(":", 1)[1])
    if rule == "optimal":
        return min(optimal_k(n, train.dimension, omega), train.n)
    if rule == "cv5":
        _, k_hat = cross_validate_k(train, 5, None, gen_cv)
        return k_hat
    raise ValueError(f"unknown k_rule {rule!r}")


# ---------------------------------------------------------------------------
# per-replication machinery


def _sample_dataset_gen(model, n, gen) -> Dataset:
    X = model.sample_features(n, gen)
    e = np.asarray(model.eta(X))
    y = (gen.random(n) < e).astype(np.int8)
    return Dataset(X, y)


@dataclass
class _RepContext:
    """Everything a replication shares across omegas and variants."""

    train: Dataset
    X_test: np.ndarray
    y_test: np.ndarray
    g_bayes: np.ndarray
    eta_test: np.ndarray  # None for real data
    unit_test_noise: np.ndarray  # None when corruption mode != random
    unit_inject_noise: np.ndarray
    k: int
    cache: dict = field(default_factory=dict)  # per-rep classifier reuse


def _make_rep_context(spec: ExperimentSpec, n, rep, k_override=None) -> _RepContext:
    rng = RngHandle(spec.master_seed)
    d = spec.dimension
    if spec.model is not None:
        train = _sample_dataset_gen(spec.model, n, rng.substream("train", rep))
        gen_test = rng.substream("test", rep)
        X_test = spec.model.sample_features(spec.test_size, gen_test)
        eta_test = np.asarray(spec.model.eta(X_test), dtype=float)
        y_test = (gen_test.random(spec.test_size) < eta_test).astype(np.int8)
        g_bayes = (eta_test > 0.5).astype(np.int8)
    else:
        train, test = split(spec.dataset, spec.test_fraction, rng.child("split").substream(rep))
        if n < train.n:
            sel = rng.substream("subsample", rep).choice(train.n, size=n, replace=False)
            sel.sort()
            train = Dataset(train.features[sel], train.labels[sel])
        m = min(spec.test_size, test.n)
        X_test, y_test = test.features[:m], test.labels[:m]
        eta_test, g_bayes = None, None

    unit = CorruptionSpec(1.0, spec.corruption.norm_p, spec.corruption.geometry, "random")
    unit_test = sample_offsets(X_test.shape[0], d, unit, rng.substream("testnoise", rep))
    unit_inject = sample_offsets(train.n, d, unit, rng.substream("inject", rep))

    if k_override is not None:
        k = k_override
    else:
        k = _select_k(spec, train, n, spec.omega_grid[0], rng.substream("cv", rep))
    k = max(1, min(k, train.n))
    return _RepContext(train, X_test, y_test, g_bayes, eta_test,
                       unit_test, unit_inject, k)


def _corrupt_test(spec: ExperimentSpec, ctx: _RepContext, omega):
    mode = spec.corruption.mode
    if omega == 0.0 or mode == "none":
        return ctx.X_test
    if mode == "random":
        return ctx.X_test + omega * ctx.unit_test_noise
    if mode == "adversarial":
        if spec.model is None:
            raise ValueError("adversarial corruption needs a model oracle")
        Z, _ = attack_batch(ctx.X_test, spec.model, omega)
        return Z
    raise ValueError(f"unknown corruption mode {mode!r}")


def _predict(spec: ExperimentSpec, ctx: _RepContext, variant, omega, rep, X_tilde):
    train, k = ctx.train, ctx.k
    if variant == "knn":
        index = ctx.cache.get("knn")
        if index is None:
            index = ctx.cache["knn"] = SearchIndex(train)
        return classify_batch(index, X_tilde, k)
    if variant == "knn_noise_injected":
        index = ctx.cache.get(("inj", omega))
        if index is None:
            noisy = Dataset(train.features + omega * ctx.unit_inject_noise,
                            train.labels)
            index = ctx.cache[("inj", omega)] = SearchIndex(noisy)
        return classify_batch(index, X_tilde, k)
    if variant == "pre1nn":
        rel = ctx.cache.get("pre1nn")
        if rel is None:
            rel = ctx.cache["pre1nn"] = preprocess(train, min(k, train.n - 1))
        return pre1nn_classify_batch(rel, X_tilde)
    if variant == "distributed":
        dindex = ctx.cache.get("dist")
        if dindex is None:
            rng = RngHandle(spec.master_seed)
            part = make_partition(train.n, spec.shards, rng.substream("part", rep))
            dindex = ctx.cache["dist"] = DistributedIndex(train, part)
        k_eff = max(k, spec.shards)  # need at least one neighbor per shard
        return distributed_classify_batch(dindex, X_tilde, k_eff)
    raise ValueError(f"unknown variant {variant!r}")


def _rep_metrics(spec, ctx, variant, omega, rep):
    X_tilde = _corrupt_test(spec, ctx, omega)
    pred = np.asarray(_predict(spec, ctx, variant, omega, rep, X_tilde))
    err = float(np.mean(pred != ctx.y_test))
    if ctx.eta_test is None:
        return None, err
    flip = pred != ctx.g_bayes
    regret = float(np.mean(np.abs(2.0 * ctx.eta_test - 1.0) * flip))
    return regret, err


# ---------------------------------------------------------------------------
# public estimators


def estimate_regret(spec: ExperimentSpec, n, k=None, omega=None,
                    variant=None) -> RegretEstimate:
    """Monte Carlo regret (or raw error rate for real data) over spec.reps
    replications; deterministic given spec.master_seed."""
    omega = spec.omega_grid[0] if omega is None else omega
    variant = spec.variant if variant is None else variant
    regs, errs, ks = [], [], []
    for rep in range(spec.reps):
        ctx = _make_rep_context(spec, n, rep, k_override=k)
        r, e = _rep_metrics(spec, ctx, variant, omega, rep)
        regs.append(r)
        errs.append(e)
        ks.append(ctx.k)
    return _aggregate(regs, errs, ks)


def _aggregate(regs, errs, ks) -> RegretEstimate:
    errs = np.asarray(errs, dtype=float)
    k_used = int(np.median(ks))
    if regs[0] is None:
        vals = errs
        mean_regret = float("nan")
    else:
        vals = np.asarray(regs, dtype=float)
        mean_regret = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return RegretEstimate(mean_regret, se, float(errs.mean()), len(errs), k_used)


def run_cells(spec: ExperimentSpec, variants=None, k=None):
    """Evaluate every (variant, n, omega, rep) cell with coupled seeds.

    Returns (rows, estimates): raw per-rep result rows in the output CSV
    schema, and a dict (variant, n, omega) -> RegretEstimate.
    """
    variants = [spec.variant] if variants is None else list(variants)
    rows, estimates = [], {}
    d = spec.dimension
    for n in spec.n_grid:
        per_rep = {}
        for rep in range(spec.reps):
            ctx = _make_rep_context(spec, n, rep, k_override=k)
            for variant in variants:
                for omega in spec.omega_grid:
                    r, e = _rep_metrics(spec, ctx, variant, omega, rep)
                    per_rep.setdefault((variant, omega), []).append((r, e, ctx.k))
                    base = dict(experiment_id=spec.experiment_id, variant=variant,
                                d=d, n=n, k=ctx.k, omega=omega,
                                corruption_mode=spec.corruption.mode, rep=rep,
                                seed=spec.master_seed)
                    if r is not None:
                        rows.append({**base, "metric": "regret", "value": r})
                    rows.append({**base, "metric": "error_rate", "value": e})
        for (variant, omega), recs in per_rep.items():
            regs = [r for r, _, _ in recs]
            errs = [e for _, e, _ in recs]
            ks = [kk for _, _, kk in recs]
            estimates[(variant, n, omega)] = _aggregate(regs, errs, ks)
    return rows, estimates


def phase_transition_scan(spec: ExperimentSpec, n, omega_grid=None):
    """Regret across an omega grid at fixed n, with the ratio to the omega=0
    baseline (common random numbers across the grid)."""
    omega_grid = tuple(spec.omega_grid if omega_grid is None else omega_grid)
    if 0.0 not in omega_grid:
        raise ValueError("omega grid must include 0")
    scan_spec = replace(spec, omega_grid=omega_grid, n_grid=(n,))
    # one k for the whole scan so ratios compare like with like
    probe = _make_rep_context(replace(scan_spec, reps=1), n, 0)
    rows, estimates = run_cells(scan_spec, k=probe.k)
    base = estimates[(spec.variant, n, 0.0)]
    base_val = base.mean_regret if not math.isnan(base.mean_regret) else base.mean_error_rate
    table = []
    for omega in omega_grid:
        est = estimates[(spec.variant, n, omega)]
        val = est.mean_regret if not math.isnan(est.mean_regret) else est.mean_error_rate
        ratio = val / base_val if base_val != 0 else float("inf") if val > 0 else 1.0
        table.append({"omega": omega, "estimate": est, "ratio": ratio})
    return table, rows


def compare_variants(spec: ExperimentSpec, variants=VARIANTS, k=None):
    """Aligned-seed table over variant x n x omega, plus per-variant regret
    ratios against plain knn."""
    rows, estimates = run_cells(spec, variants=variants, k=k)
    ratios = {}
    for (variant, n, omega), est in estimates.items():
        if variant == "knn":
            continue
        base = estimates.get(("knn", n, omega))
        if base is None:
            continue
        a = est.mean_regret if not math.isnan(est.mean_regret) else est.mean_error_rate
        b = base.mean_regret if not math.isnan(base.mean_regret) else base.mean_error_rate
        ratios[(variant, n, omega)] = a / b if b != 0 else float("inf")
    return rows, estimates, ratios


# ---------------------------------------------------------------------------
# log-log rate fitting


def rate_fit(points) -> RateFit:
    """OLS fit of log2(y) on log2(x); non-positive y values are dropped
    with a warning."""
    usable = []
    for x, y in points:
        if y <= 0 or x <= 0:
            warnings.warn(f"dropping non-positive point ({x}, {y}) from rate fit",
                          stacklevel=2)
            continue
        usable.append((math.log2(x), math.log2(y)))
    if len(usable) < 3:
        raise ValueError("rate fit needs at least 3 usable points")
    lx = np.array([p[0] for p in usable])
    ly = np.array([p[1] for p in usable])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), max(0.0, min(1.0, r2)),
                   tuple(usable))


# ---------------------------------------------------------------------------
# real-data CSV pipeline


class CsvParseError(ValueError):
    pass


@dataclass(frozen=True)
class DataSchema:
    feature_columns: tuple
    label_column: str
    label_kind: str = "binary"  # binary | threshold
    label_threshold: float = 10.5  # label 1 iff raw + offset > threshold
    label_offset: float = 1.5


def load_csv(path, schema: DataSchema) -> Dataset:
    """Read a header-ed CSV into an (un-normalized) Dataset."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _load_csv_file(fh, schema)


def _load_csv_file(fh, schema) -> Dataset:
    reader = csv.DictReader(fh)
    cols = list(schema.feature_columns) + [schema.label_column]
    missing = [c for c in cols if c not in (reader.fieldnames or [])]
    if missing:
        raise CsvParseError(f"missing columns: {', '.join(missing)}")
    feats, labels = [], []
    for rownum, row in enumerate(reader, start=2):
        vals = []
        for c in cols:
            try:
                vals.append(float(row[c]))
            except (TypeError, ValueError):
                raise CsvParseError(
                    f"non-numeric value {row[c]!r} at row {rownum}, column {c!r}")
        feats.append(vals[:-1])
        labels.append(_make_label(vals[-1], schema, rownum))
    if not feats:
        raise CsvParseError("no data rows")
    return Dataset(np.array(feats), np.array(labels, dtype=np.int8))


def _make_label(raw, schema, rownum):
    if schema.label_kind == "binary":
        if raw not in (0.0, 1.0):
            raise CsvParseError(f"non-binary label {raw} at row {rownum}")
        return int(raw)
    if schema.label_kind == "threshold":
        return int(raw + schema.label_offset > schema.label_threshold)
    raise ValueError(f"unknown label rule {schema.label_kind!r}")


def split(dataset: Dataset, test_fraction=0.25, rng=None, normalize=True):
    """Deterministic random split; min-max normalization is fit on the
    training part only and applied to both parts."""
    gen = rng.generator() if isinstance(rng, RngHandle) else (rng or np.random.default_rng(0))
    n = dataset.n
    n_test = int(round(test_fraction * n))
    n_test = min(max(n_test, 0), n - 1)
    perm = gen.permutation(n)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    Xtr, Xte = dataset.features[train_idx], dataset.features[test_idx]
    if normalize:
        lo = Xtr.min(axis=0)
        span = Xtr.max(axis=0) - lo
        span[span == 0.0] = 1.0
        Xtr = (Xtr - lo) / span
        Xte = (Xte - lo) / span
    train = Dataset(Xtr, dataset.labels[train_idx])
    test = Dataset(Xte, dataset.labels[test_idx]) if n_test else None
    return train, test


# ---------------------------------------------------------------------------
# result persistence


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(rows, fh):
    """Raw per-rep rows; UTF-8, LF endings, '.' decimal separator."""
    fh.write(",".join(RESULT_COLUMNS) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(row[c]) for c in RESULT_COLUMNS) + "\n")


def write_summary(estimates, spec: ExperimentSpec, fh):
    fh.write(",".join(SUMMARY_COLUMNS) + "\n")
    for (variant, n, omega), est in sorted(estimates.items()):
        metric = "error_rate" if math.isnan(est.mean_regret) else "regret"
        mean = est.mean_error_rate if metric == "error_rate" else est.mean_regret
        vals = [spec.experiment_id, variant, metric, spec.dimension, n,
                est.k_used, omega, spec.corruption.mode, est.reps, mean,
                est.std_error]
        fh.write(",".join(_fmt(v) for v in vals) + "\n")


def rows_to_csv_text(rows) -> str:
    buf = io.StringIO()
    write_rows(rows, buf)
    return buf.getvalue()
