"""
Command-line entry point.

    qwloc simulate --config run.yaml --out results/
    qwloc sweep    --config sweep.yaml
    qwloc ml train|scan|samplesize|regions --config ml.yaml
    qwloc scaling  --config scaling.yaml --threads 4

Exit codes: 0 success, 2 configuration error, 3 detector or training
failure, 4 partial results (some estimates failed, the rest were written).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, config_hash, load_config, to_dict
from .core import InvalidConfigError, InvalidParameterError
from .detect import (
    ALL_METHODS,
    DetectionError,
    SweepGrid,
    default_param_max,
    detect_manual,
    param_grid,
    run_sweep,
    scaling_sweep,
)
from .parallel import ordered_map
from .randomness import ensemble_mean, make_model
from .tables import write_csv

log = logging.getLogger("qwloc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILED = 3
EXIT_PARTIAL = 4


def _status(n_ok: int, n_total: int) -> int:
    if n_total and n_ok == n_total:
        return EXIT_OK
    return EXIT_PARTIAL if n_ok else EXIT_FAILED


def _error_text(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _write_metadata(out: Path, command: str, cfg: ExperimentConfig) -> None:
    meta = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "config": to_dict(cfg),
    }
    (out / "run.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _scan_params(cfg: ExperimentConfig, model_kind: str, n_points: int | None = None) -> np.ndarray:
    pmax = cfg.sweep.param_max if cfg.sweep.param_max is not None else default_param_max(model_kind, cfg.theta0)
    if not pmax > 0:
        raise ConfigError(f"model kind {model_kind!r} has no randomness magnitude to scan", "model.kind")
    return param_grid(pmax, n_points or cfg.sweep.n_points, cfg.sweep.spacing, cfg.sweep.param_min)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg: ExperimentConfig, out: Path, plots: bool, threads: int) -> int:
    walk = cfg.walk_config()
    model = make_model(cfg.model.kind, cfg.model.magnitude)
    rec = ensemble_mean(walk, model, cfg.simulate.realizations)
    n_max = walk.n_max
    sites = range(-n_max, n_max + 1)
    rows = (
        (t, x, float(p))
        for t in range(walk.n_t + 1)
        for x, p in zip(sites, rec.distributions[t])
    )
    dist_csv = write_csv(out / "distribution.csv", ["t", "x", "P"], rows)
    if cfg.simulate.full_ipr:
        d = rec.distributions[1:]
        ipr = np.sum(d, axis=1) ** 2 / np.sum(d * d, axis=1)
    else:
        ipr = rec.ipr
    diag_csv = write_csv(
        out / "diagnostics.csv",
        ["t", "MoI", "IPR"],
        ((t + 1, float(m), float(i)) for t, (m, i) in enumerate(zip(rec.moi, ipr))),
    )
    log.info("simulated %s n_t=%d n_max=%d realizations=%d", model, walk.n_t, n_max, rec.n_realizations)
    if plots:
        from .plotting import plot_diagnostics, plot_distribution

        plot_distribution(dist_csv, out / "distribution.svg", cfg.simulate.plot_times or None)
        plot_diagnostics(diag_csv, out / "diagnostics.svg")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _sweep_task(args) -> tuple[SweepGrid, dict]:
    walk, kind, params, methods, refine, peaks = args
    grid = run_sweep(walk, kind, params)
    return grid, detect_manual(grid, methods, refine, peaks)


def cmd_sweep(cfg: ExperimentConfig, out: Path, plots: bool, threads: int) -> int:
    kind = cfg.model.kind
    params = _scan_params(cfg, kind)
    base = cfg.walk_config()
    tasks = [
        (dataclasses.replace(base, seed=(base.seed + r) % 2**64), kind, params,
         tuple(cfg.sweep.methods), cfg.sweep.refine_factor, cfg.peaks)
        for r in range(cfg.sweep.replicates)
    ]
    results = ordered_map(_sweep_task, tasks, threads)
    grid = results[0][0]
    labels = grid.labels(cfg.peaks)
    sweep_csv = write_csv(
        out / "sweep.csv",
        ["param", "MoI", "IPR", "label"],
        ((float(p), float(m), float(i), lab.value) for p, m, i, lab in zip(grid.param_values, grid.moi, grid.ipr, labels)),
    )
    crit_rows = []
    n_ok = 0
    for method in cfg.sweep.methods:
        values = [res[method] for _, res in results]
        good = [v for v in values if not isinstance(v, Exception)]
        errors = sorted({_error_text(v) for v in values if isinstance(v, Exception)})
        value = float(np.median(good)) if good else None
        n_ok += value is not None
        crit_rows.append((method, value, len(good), len(values), "; ".join(errors)))
        if value is None:
            log.warning("%s failed: %s", method, "; ".join(errors))
        else:
            log.info("%s critical value %.6g", method, value)
    crit_csv = write_csv(out / "critical.csv", ["method", "critical_value", "successes", "replicates", "error"], crit_rows)
    if plots:
        from .plotting import plot_sweep

        plot_sweep(sweep_csv, crit_csv, out / "sweep.svg")
    return _status(n_ok, len(cfg.sweep.methods))


# ---------------------------------------------------------------------------
# ml


def _train_kwargs(cfg: ExperimentConfig) -> dict[str, dict]:
    ml = cfg.ml
    return {
        "svm": dict(
            epochs=ml.svm_epochs, eta0=ml.svm_eta0, l2_penalty=ml.svm_l2_penalty,
            holdout_fraction=ml.holdout_fraction, normalize=ml.svm_normalize,
        ),
        "mlp": dict(
            layer_sizes=tuple(ml.mlp_hidden), l2_alpha=ml.mlp_alpha, holdout_fraction=ml.holdout_fraction,
            batch_size=ml.mlp_batch_size, learning_rate=ml.mlp_learning_rate, patience=ml.mlp_patience,
            max_epochs=ml.mlp_max_epochs, normalize=ml.mlp_normalize,
        ),
    }


def _training_set(cfg: ExperimentConfig):
    from .ml.data import generate_training_set

    walk = cfg.walk_config()
    return generate_training_set(
        cfg.model.kind, cfg.theta0, walk.n_t, cfg.ml.n_samples,
        band_width=cfg.ml.band_width, seed=cfg.seed, n_max=walk.n_max,
        param_lo=cfg.ml.param_lo, param_hi=cfg.ml.param_hi, coin_phis=walk.coin_phis,
    )


def _train(name: str, samples, cfg: ExperimentConfig):
    from .ml.mlp import train_mlp
    from .ml.svm import train_svm

    train = train_svm if name == "svm" else train_mlp
    return train(samples, seed=cfg.seed, **_train_kwargs(cfg)[name])


def _model_dir(cfg: ExperimentConfig, out: Path) -> Path:
    return Path(cfg.ml.model_dir) if cfg.ml.model_dir else out


def ml_train(cfg: ExperimentConfig, out: Path, plots: bool, threads: int) -> int:
    from .ml.io import save_model

    samples = _training_set(cfg)
    rows = []
    model_dir = _model_dir(cfg, out)
    model_dir.mkdir(parents=True, exist_ok=True)
    for name in cfg.ml.classifiers:
        model, acc = _train(name, samples, cfg)
        save_model(model, model_dir / f"model_{name}.json")
        rows.append((name, acc, len(samples), model.normalization, model.warning or ""))
        log.info("%s holdout accuracy %.4f", name, acc)
    write_csv(out / "train_report.csv", ["classifier", "holdout_accuracy", "n_samples", "normalization", "warning"], rows)
    return EXIT_OK


def ml_scan(cfg: ExperimentConfig, out: Path, plots: bool, threads: int) -> int:
    from .ml.confusion import crossing_rule, first_below_rule, scan_curve
    from .ml.io import load_model

    walk = cfg.walk_config()
    params = _scan_params(cfg, cfg.model.kind, cfg.ml.scan_points)
    rules = {"crossing": crossing_rule, "first_below": first_below_rule}
    default = {"svm": "crossing", "mlp": "first_below"}
    crit_rows = []
    n_ok = 0
    for name in cfg.ml.classifiers:
        path = _model_dir(cfg, out) / f"model_{name}.json"
        if not path.exists():
            raise ConfigError(f"model file not found (run 'ml train' first): {path}", "ml.model_dir")
        model = load_model(path)
        curve = scan_curve(
            model, cfg.model.kind, params, walk.n_t, walk.seed, cfg.theta0, walk.n_max,
            n_realizations=cfg.ml.scan_realizations, coin_phis=walk.coin_phis,
        )
        csv_path = write_csv(
            out / f"confusion_{name}.csv", ["param", "p_delocalized"],
            zip(curve.param_values.tolist(), curve.p_delocalized.tolist()),
        )
        chosen = None
        for rule_name, rule in rules.items():
            try:
                value, err = rule(curve.param_values, curve.p_delocalized), ""
            except DetectionError as exc:
                value, err = None, _error_text(exc)
            crit_rows.append((name, rule_name, rule_name == default[name], value, err))
            if rule_name == default[name]:
                chosen = value
                n_ok += value is not None
        log.info("%s critical value %s", name, chosen)
        if plots:
            from .plotting import plot_confusion

            plot_confusion(csv_path, out / f"confusion_{name}.svg", chosen)
    write_csv(out / "critical.csv", ["classifier", "rule", "default", "critical_value", "error"], crit_rows)
    return _status(n_ok, len(cfg.ml.classifiers))


def ml_samplesize(cfg: ExperimentConfig, out: Path, plots: bool, threads: int) -> int:
    from .ml.confusion import sample_size_study

    walk = cfg.walk_config()
    kwargs = _train_kwargs(cfg)
    rows = []
    for name in cfg.ml.classifiers:
        table = sample_size_study(
            cfg.model.kind, cfg.ml.sizes, cfg.ml.repetitions, cfg.seed, cfg.theta0, walk.n_t,
            classifier=name, n_points=cfg.ml.scan_points, band_width=cfg.ml.band_width,
            train_kwargs=kwargs[name],
        )
        rows.extend((name, size, rep, value) for size, rep, value in table)
    csv_path = write_csv(out / "samplesize.csv", ["classifier", "size", "repetition", "critical_value"], rows)
    if plots:
        from .plotting import plot_sample_size

        plot_sample_size(csv_path, out / "samplesize.svg")
    n_ok = sum(r[3] is not None for r in rows)
    return _status(n_ok, len(rows))


def ml_regions(cfg: ExperimentConfig, out: Path, plots: bool, threads: int) -> int:
    from .ml.confusion import confusion_curve, default_rule
    from .ml.data import region_indices, region_split, simulate_distributions

    walk = cfg.walk_config()
    samples = _training_set(cfg)
    params = _scan_params(cfg, cfg.model.kind, cfg.ml.scan_points)
    dists = simulate_distributions(walk, cfg.model.kind, params, [walk.seed] * len(params))
    rows = []
    n_ok = 0
    for name in cfg.ml.classifiers:
        for region in ["all", *cfg.ml.regions]:
            if region == "all":
                part, cols = samples, slice(None)
            else:
                part = [region_split(s, region) for s in samples]
                cols = region_indices(walk.n_max, region)
            model, acc = _train(name, part, cfg)
            try:
                curve = confusion_curve(model, params, dists[:, cols])
                value, err = default_rule(model)(curve.param_values, curve.p_delocalized), ""
                n_ok += 1
            except (DetectionError, ValueError) as exc:
                value, err = None, _error_text(exc)
            rows.append((name, region, len(part[0].features), acc, value, err))
            log.info("%s region %s: accuracy %.3f critical %s", name, region, acc, value)
    write_csv(out / "regions.csv", ["classifier", "region", "feature_length", "holdout_accuracy", "critical_value", "error"], rows)
    return _status(n_ok, len(rows))


ML_ACTIONS = {"train": ml_train, "scan": ml_scan, "samplesize": ml_samplesize, "regions": ml_regions}


def cmd_ml(cfg: ExperimentConfig, out: Path, plots: bool, threads: int, action: str) -> int:
    return ML_ACTIONS[action](cfg, out, plots, threads)


# ---------------------------------------------------------------------------
# scaling


def cmd_scaling(cfg: ExperimentConfig, out: Path, plots: bool, threads: int) -> int:
    sc = cfg.scaling
    kwargs = _train_kwargs(cfg)
    crit_rows, rep_rows, exp_rows = [], [], []
    n_fits_ok = 0
    partial = False
    for kind in sc.model_kinds:
        base = cfg.walk_config(n_t=max(sc.n_values))
        result = scaling_sweep(
            base, kind, sc.n_values, sc.methods, sc.replicates, threads, sc.unreliable_fraction,
            n_max=cfg.n_max, n_points=cfg.sweep.n_points, spacing=cfg.sweep.spacing,
            refine_factor=cfg.sweep.refine_factor, peak_config=cfg.peaks,
            n_samples=cfg.ml.n_samples, band_width=cfg.ml.band_width, ml_options=kwargs,
        )
        for e in result.estimates:
            crit_rows.append((kind, e.method, e.n, e.critical_value, e.diagnostics["successes"],
                              e.diagnostics["replicates"], e.diagnostics.get("error", "")))
            partial |= not e.ok
        for e in result.replicates:
            rep_rows.append((kind, e.method, e.n, e.diagnostics["replicate"], e.critical_value, e.diagnostics.get("error", "")))
        for method, fit in result.fits.items():
            reliable = method not in result.unreliable
            if isinstance(fit, Exception):
                exp_rows.append((kind, method, None, None, None, reliable, _error_text(fit)))
                partial = True
            else:
                exp_rows.append((kind, method, fit.exponent, fit.r_squared, fit.prefactor, reliable, ""))
                n_fits_ok += 1
                log.info("%s %s exponent %.4f (r2 %.3f)%s", kind, method, fit.exponent, fit.r_squared,
                         "" if reliable else " [unreliable]")
            partial |= not reliable

    order = {m: i for i, m in enumerate(ALL_METHODS)}
    crit_rows.sort(key=lambda r: (r[0], order[r[1]], r[2]))
    rep_rows.sort(key=lambda r: (r[0], order[r[1]], r[2], r[3]))
    exp_rows.sort(key=lambda r: (r[0], order[r[1]]))
    crit_csv = write_csv(out / "criticals.csv", ["model", "method", "N", "critical_value", "successes", "replicates", "error"], crit_rows)
    write_csv(out / "replicates.csv", ["model", "method", "N", "replicate", "critical_value", "error"], rep_rows)
    exp_csv = write_csv(out / "exponents.csv", ["model", "method", "exponent", "r2", "prefactor", "reliable", "error"], exp_rows)
    if plots:
        from .plotting import plot_scaling

        for kind in sc.model_kinds:
            plot_scaling(crit_csv, exp_csv, out / f"scaling_{kind}.svg", model=kind)
    if n_fits_ok == 0:
        return EXIT_FAILED
    return EXIT_PARTIAL if partial else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment configuration (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override the seed from the configuration (unsigned 64-bit)")
    common.add_argument("--threads", type=int, default=None, help="worker processes (default: available cores)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    common.add_argument("--plots", choices=("on", "off"), default="on", help="write SVG figures next to the CSVs")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    parser = argparse.ArgumentParser(prog="qwloc", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"qwloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="evolve one walk and write P(x, t), MoI(t), IPR(t)")
    sub.add_parser("sweep", parents=[common], help="sweep the randomness magnitude and run the manual detectors")
    ml = sub.add_parser("ml", parents=[common], help="train and apply the classifiers")
    ml.add_argument("action", choices=sorted(ML_ACTIONS))
    sub.add_parser("scaling", parents=[common], help="critical value versus run length and power-law exponents")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is also the config-error code
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = dataclasses.replace(cfg, seed=args.seed)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        args.out.mkdir(parents=True, exist_ok=True)
        plots = args.plots == "on"
        label = args.command if args.command != "ml" else f"ml {args.action}"
        _write_metadata(args.out, label, cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, plots, args.threads)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, plots, args.threads)
        if args.command == "ml":
            return cmd_ml(cfg, args.out, plots, args.threads, args.action)
        return cmd_scaling(cfg, args.out, plots, args.threads)
    except (ConfigError, InvalidConfigError, InvalidParameterError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except DetectionError as exc:
        log.error("detector failure: %s", exc)
        return EXIT_FAILED
    except Exception as exc:
        from .ml.data import InvalidBandError
        from .ml.io import ModelFormatError
        from .ml.svm import TrainingFailedError

        if isinstance(exc, (InvalidBandError, ModelFormatError)):
            log.error("configuration error: %s", exc)
            return EXIT_CONFIG
        if isinstance(exc, TrainingFailedError):
            log.error("training failure: %s", exc)
            return EXIT_FAILED
        raise


if __name__ == "__main__":
    sys.exit(main())
