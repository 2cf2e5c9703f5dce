"""Command-line front end.

Subcommands:
  simulate  Monte Carlo regret/error experiment, raw rows to CSV
  theory    asymptotic regret decomposition and rate calculators
  cv        cross-validated k for a sampled or loaded training set
  scan      regret across an omega grid at fixed n (phase transition)
  compare   algorithm variants on coupled seeds
  data      load/inspect a real CSV dataset

All flags can also be given in a `key = value` config file via --config;
command-line values win.  If the optional knnlab-plots package is installed,
--figures DIR renders the standard figures next to the CSV output.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .corruption import CorruptionSpec
from .dataspace import exponential_model, ramp_model, uniform_model
from .config import ConfigError, parse_config
from . import lab, theory
from .rng import RngHandle

MODELS = {"exponential": exponential_model, "uniform": uniform_model, "ramp": ramp_model}


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def _add_model_args(p):
    p.add_argument("--model", choices=sorted(MODELS), default="exponential",
                   help="synthetic model family")
    p.add_argument("--d", type=int, default=5, help="feature dimension")
    p.add_argument("--data", help="CSV dataset path (overrides --model)")
    p.add_argument("--features", help="comma-separated feature column names")
    p.add_argument("--label", help="label column name")
    p.add_argument("--label-kind", choices=["binary", "threshold"], default="binary")
    p.add_argument("--label-threshold", type=float, default=10.5)
    p.add_argument("--label-offset", type=float, default=1.5)


def _add_experiment_args(p, seed_required):
    _add_model_args(p)
    p.add_argument("--n", type=_ints, default=(1024,), dest="n_grid",
                   help="training sizes, comma separated")
    p.add_argument("--omega", type=_floats, default=(0.0,), dest="omega_grid",
                   help="corruption radii, comma separated")
    p.add_argument("--corruption-mode", choices=["none", "random", "adversarial"],
                   default="random")
    p.add_argument("--norm-p", type=float, default=2.0)
    p.add_argument("--geometry", choices=["sphere", "ball"], default="sphere")
    p.add_argument("--variant", choices=lab.VARIANTS, default="knn")
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument("--k-rule", default="cv5",
                   help="fixed:<k> | cv5 | optimal")
    p.add_argument("--seed", type=int, required=seed_required, default=None)
    p.add_argument("--experiment-id", default="exp")
    p.add_argument("--out", help="raw per-rep rows CSV path (default stdout)")
    p.add_argument("--summary-out", help="aggregated summary CSV path")
    p.add_argument("--figures", help="directory for rendered figures")


def _build_model(args):
    if args.data:
        return None
    maker = MODELS[args.model]
    return maker() if args.model == "ramp" else maker(args.d)


def _build_dataset(args):
    if not args.data:
        return None
    if not args.features or not args.label:
        raise SystemExit("--data needs --features and --label")
    schema = lab.DataSchema(tuple(args.features.split(",")), args.label,
                            args.label_kind, args.label_threshold,
                            args.label_offset)
    return lab.load_csv(args.data, schema)


def _build_spec(args) -> lab.ExperimentSpec:
    if args.seed is None:
        raise SystemExit("--seed is required")
    cspec = CorruptionSpec(max(args.omega_grid), args.norm_p, args.geometry,
                           args.corruption_mode)
    return lab.ExperimentSpec(
        model=_build_model(args), dataset=_build_dataset(args),
        n_grid=tuple(args.n_grid), omega_grid=tuple(args.omega_grid),
        corruption=cspec, variant=args.variant, shards=args.shards,
        reps=args.reps, test_size=args.test_size,
        test_fraction=args.test_fraction, k_rule=args.k_rule,
        master_seed=args.seed, experiment_id=args.experiment_id)


def _emit(rows, estimates, spec, args):
    text = lab.rows_to_csv_text(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.summary_out:
        with open(args.summary_out, "w", encoding="utf-8", newline="\n") as fh:
            lab.write_summary(estimates, spec, fh)
    if args.figures:
        _render_figures(args)


def _render_figures(args):
    if not args.summary_out:
        print("figures need --summary-out (they are rendered from the summary CSV)",
              file=sys.stderr)
        return
    try:
        from knnlab_plots import render_standard
    except ImportError:
        print("knnlab-plots is not installed; skipping figure rendering",
              file=sys.stderr)
        return
    written = render_standard(args.summary_out, args.figures)
    for path in written:
        print(f"wrote {path}", file=sys.stderr)


def _cmd_simulate(args):
    spec = _build_spec(args)
    rows, estimates = lab.run_cells(spec)
    _emit(rows, estimates, spec, args)
    for key in sorted(estimates):
        variant, n, omega = key
        est = estimates[key]
        print(f"# {variant} n={n} omega={omega}: regret={est.mean_regret:.6g} "
              f"se={est.std_error:.3g} err={est.mean_error_rate:.4f} k={est.k_used}",
              file=sys.stderr)


def _cmd_scan(args):
    spec = _build_spec(args)
    n = spec.n_grid[0]
    table, rows = lab.phase_transition_scan(spec, n)
    estimates = {(spec.variant, n, row["omega"]): row["estimate"] for row in table}
    _emit(rows, estimates, spec, args)
    for row in table:
        est = row["estimate"]
        print(f"# omega={row['omega']:g} regret={est.mean_regret:.6g} "
              f"ratio={row['ratio']:.4f}", file=sys.stderr)


def _cmd_compare(args):
    spec = _build_spec(args)
    variants = [v for v in lab.VARIANTS
                if v != "distributed" or spec.shards > 1] \
        if args.variants is None else args.variants.split(",")
    rows, estimates, ratios = lab.compare_variants(spec, variants)
    _emit(rows, estimates, spec, args)
    for key in sorted(ratios):
        variant, n, omega = key
        print(f"# {variant}/knn n={n} omega={omega}: ratio={ratios[key]:.4f}",
              file=sys.stderr)


def _cmd_theory(args):
    model = _build_model(args)
    if model is None:
        raise SystemExit("theory needs a synthetic model")
    spec = CorruptionSpec(args.omega, args.norm_p, args.geometry,
                          args.corruption_mode if args.corruption_mode != "none"
                          else "random")
    mesh = theory.boundary_mesh(model, resolution=args.resolution)
    k = args.k if args.k else theory.optimal_k(args.n, model.dimension, args.omega)
    if args.corruption_mode == "adversarial":
        rep = theory.adversarial_theoretical_regret(model, k, args.n, args.omega, mesh)
    else:
        rep = theory.theoretical_regret(model, k, args.n, spec, mesh)
    print(f"model={args.model} d={model.dimension} n={args.n} k={k} "
          f"omega={args.omega} mode={args.corruption_mode}")
    print(f"bias       {rep.bias:.6g}")
    print(f"corruption {rep.corruption:.6g}")
    print(f"variance   {rep.variance:.6g}")
    print(f"total      {rep.total:.6g}")
    print(f"B1={rep.B1:.6g} t_max={rep.t_max:.6g} eps={rep.eps_knw:.6g}")
    print(f"optimal_k(n={args.n}, d={model.dimension}, omega={args.omega}) = "
          f"{theory.optimal_k(args.n, model.dimension, args.omega)}")


def _cmd_cv(args):
    if args.seed is None:
        raise SystemExit("--seed is required")
    rng = RngHandle(args.seed)
    dataset = _build_dataset(args)
    if dataset is None:
        model = _build_model(args)
        gen = rng.substream("train", 0)
        X = model.sample_features(args.n, gen)
        y = (gen.random(args.n) < np.asarray(model.eta(X))).astype(np.int8)
        from .dataspace import Dataset
        dataset = Dataset(X, y)
    else:
        dataset, _ = lab.split(dataset, args.test_fraction, rng.substream("split", 0))
    k_tilde, k_hat = lab.cross_validate_k(dataset, args.folds, None,
                                          rng.substream("cv", 0))
    print(f"n={dataset.n} d={dataset.dimension} folds={args.folds}")
    print(f"k_tilde={k_tilde} k_hat={k_hat}")


def _cmd_data(args):
    dataset = _build_dataset(args)
    if dataset is None:
        raise SystemExit("data needs --data, --features, --label")
    frac = float(np.mean(dataset.labels))
    print(f"rows={dataset.n} features={dataset.dimension} positive_fraction={frac:.4f}")
    if args.seed is not None:
        train, test = lab.split(dataset, args.test_fraction,
                                RngHandle(args.seed).substream("split", 0))
        print(f"split: train={train.n} test={test.n if test is not None else 0} "
              f"(normalized to [0,1] on train ranges)")


def build_parser():
    parser = argparse.ArgumentParser(prog="knnlab",
                                     description="nearest-neighbor robustness lab")
    parser.add_argument("--config", help="key = value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo regret experiment")
    _add_experiment_args(p, seed_required=False)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("scan", help="regret vs omega at fixed n")
    _add_experiment_args(p, seed_required=False)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("compare", help="algorithm variants on coupled seeds")
    _add_experiment_args(p, seed_required=False)
    p.add_argument("--variants", help="comma-separated subset of variants")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("theory", help="asymptotic regret decomposition")
    _add_model_args(p)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--k", type=int, default=0, help="0 = use the rate-optimal k")
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--norm-p", type=float, default=2.0)
    p.add_argument("--geometry", choices=["sphere", "ball"], default="sphere")
    p.add_argument("--corruption-mode", choices=["random", "adversarial"],
                   default="random")
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("cv", help="cross-validated k")
    _add_model_args(p)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("data", help="inspect a CSV dataset")
    _add_model_args(p)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_data)
    return parser


def _apply_config(parser, argv):
    # pre-scan for --config so file values become defaults, CLI flags win
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = parse_config(known.config)
    for action in parser._subparsers._group_actions[0].choices.values():
        # config keys may be flag names (--n, --k-rule) or argparse dests
        by_name = {}
        for a in action._actions:
            by_name[a.dest] = a
            for opt in a.option_strings:
                by_name[opt.lstrip("-").replace("-", "_")] = a
        defaults = {}
        for key, raw in values.items():
            a = by_name.get(key)
            if a is None:
                continue
            defaults[a.dest] = a.type(raw) if a.type else raw
            a.required = False  # config-supplied values satisfy required flags
        action.set_defaults(**defaults)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args) or 0
    except (ConfigError, lab.CsvParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
