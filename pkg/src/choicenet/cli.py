"""Experiment runner: config parsing, sweeps, CSV results, SVG plots.

Config files are flat ``key = value`` lines with ``#`` comments and dotted
keys.  A config describes a (method x corruption-rate x seed) sweep; results
land in one CSV with the fixed column order documented in RESULT_COLUMNS.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .autodiff import RngState
from .block import CholeskyBlockConfig
from .data import (
    CorruptionSpec,
    corrupt_labels,
    corrupt_regression,
    gen_blobs,
    gen_synthetic,
    load_csv_regression,
    load_idx,
    split_labeled,
    split_regression,
)
from .errors import (
    ChoiceNetError,
    ConfigurationError,
    DataError,
    NumericDomainError,
)
from .losses import ClassificationLossConfig, RegressionLossConfig
from .models import MlpSpec, build_model
from .plotting import Series, SvgPlot
from .train import (
    OptimizerConfig,
    TrainReport,
    evaluate_accuracy,
    evaluate_rmse,
    evaluate_rmse_vs_reference,
    fit,
)


def _truthy(v: str) -> bool:
    return str(v).strip().lower() in ("1", "true", "yes", "on")


class _ScaledPredictor:
    """Prediction view of a model trained on standardized targets: maps
    outputs back to the original target units for evaluation and overlays."""

    def __init__(self, inner, mean: float, std: float):
        self.inner = inner
        self.mean = mean
        self.std = std

    def predict(self, x) -> np.ndarray:
        return self.inner.predict(x) * self.std + self.mean

RESULT_COLUMNS = [
    "experiment",
    "method",
    "dataset",
    "corruption_kind",
    "corruption_rate",
    "seed",
    "epoch",
    "train_loss",
    "train_metric",
    "test_metric",
    "wall_seconds",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines with '#' comments into a dict."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigurationError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def parse_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_config_text(f.read(), source=path)
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v.strip()]


def _strs(s: str) -> list[str]:
    return [v.strip() for v in s.split(",") if v.strip()]


@dataclass
class ExperimentConfig:
    experiment: str
    task: str  # regression | classification
    methods: list
    dataset: dict
    corruption_kind: str | None
    corruption_rates: list
    corruption_params: dict
    model_params: dict
    loss_params: dict
    opt: OptimizerConfig
    epochs: int
    batch_size: int
    seeds: list
    output_dir: str
    eval_every: int = 1
    raw: dict = field(default_factory=dict)


def _get(cfg: dict, key: str, default=None, required: bool = False) -> str:
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigurationError(f"missing required config field {key!r}")
    return default


def load_experiment_config(path: str) -> ExperimentConfig:
    cfg = parse_config(path)
    experiment = _get(cfg, "experiment", required=True)
    task = _get(cfg, "task", "regression")
    if task not in ("regression", "classification"):
        raise ConfigurationError(f"task must be regression/classification, got {task!r}")
    methods = _strs(_get(cfg, "methods", required=True))
    seeds = _ints(_get(cfg, "seeds", required=True))
    if not seeds:
        raise ConfigurationError("seeds must be non-empty")

    dataset = {k[len("dataset.") :]: v for k, v in cfg.items() if k.startswith("dataset.")}
    if "kind" not in dataset:
        raise ConfigurationError("missing required config field 'dataset.kind'")
    if dataset["kind"] == "csv":
        p = dataset.get("path")
        if not p:
            raise ConfigurationError("missing required config field 'dataset.path'")
    if dataset["kind"] == "idx":
        for k in ("train_images", "train_labels", "test_images", "test_labels"):
            if k not in dataset:
                raise ConfigurationError(f"missing required config field 'dataset.{k}'")

    corruption_kind = _get(cfg, "corruption.kind")
    if "corruption.rates" in cfg:
        rates = _floats(cfg["corruption.rates"])
    elif "corruption.rate" in cfg:
        rates = [float(cfg["corruption.rate"])]
    else:
        rates = [0.0]
    corruption_params = {
        k[len("corruption.") :]: v
        for k, v in cfg.items()
        if k.startswith("corruption.") and k not in ("corruption.kind", "corruption.rates", "corruption.rate")
    }

    model_params = {k[len("model.") :]: v for k, v in cfg.items() if k.startswith("model.")}
    loss_params = {k[len("loss.") :]: v for k, v in cfg.items() if k.startswith("loss.")}

    opt = OptimizerConfig(
        kind=_get(cfg, "opt.kind", "adam"),
        learning_rate=float(_get(cfg, "opt.lr", "1e-3")),
        momentum=float(_get(cfg, "opt.momentum", "0.9")),
        weight_decay=float(_get(cfg, "opt.weight_decay", "0")),
        clip_norm=(float(cfg["opt.clip_norm"]) if "opt.clip_norm" in cfg else None),
        schedule=[
            (int(e), float(m))
            for e, m in (
                pair.split(":") for pair in _strs(_get(cfg, "opt.schedule", ""))
            )
        ],
    )

    return ExperimentConfig(
        experiment=experiment,
        task=task,
        methods=methods,
        dataset=dataset,
        corruption_kind=corruption_kind,
        corruption_rates=rates,
        corruption_params=corruption_params,
        model_params=model_params,
        loss_params=loss_params,
        opt=opt,
        epochs=int(_get(cfg, "epochs", required=True)),
        batch_size=int(_get(cfg, "batch_size", "128")),
        seeds=seeds,
        output_dir=_get(cfg, "output_dir", required=True),
        eval_every=int(_get(cfg, "eval_every", "1")),
        raw=cfg,
    )


def _corruption_spec(cfg: ExperimentConfig, rate: float) -> CorruptionSpec | None:
    if cfg.corruption_kind is None:
        return None
    p = cfg.corruption_params
    return CorruptionSpec(
        kind=cfg.corruption_kind,
        rate=rate,
        range_lo=float(p.get("range_lo", -1.0)),
        range_hi=float(p.get("range_hi", 3.0)),
        region_lo=float(p["region_lo"]) if "region_lo" in p else None,
        region_hi=float(p["region_hi"]) if "region_hi" in p else None,
        reflection=p.get("reflection", "negation"),
        target_class=int(p.get("target_class", 0)),
        permutation=_ints(p["permutation"]) if "permutation" in p else [],
        exact_count=p.get("exact_count", "true").lower() != "false",
    )


@dataclass
class PreparedData:
    """Train/test arrays plus the evaluation hooks for one (rate, seed) cell."""

    x_train: np.ndarray
    y_train: np.ndarray  # targets or one-hot labels
    in_dim: int
    out_dim: int
    eval_fn: object  # model -> (train_metric, test_metric)
    dataset_name: str
    overlay: dict | None = None  # synthetic-only fit overlay inputs


def _prepare_data(cfg: ExperimentConfig, rate: float, seed: int) -> PreparedData:
    kind = cfg.dataset["kind"]
    data_rng = RngState(seed * 7919 + 13)
    spec = _corruption_spec(cfg, rate)

    if kind == "synthetic":
        fn = cfg.dataset.get("fn", "cosexp")
        n = int(cfg.dataset.get("n", "1000"))
        x_lo = float(cfg.dataset.get("x_lo", "-3"))
        x_hi = float(cfg.dataset.get("x_hi", "3"))
        ds = gen_synthetic(fn, n, (x_lo, x_hi), data_rng)
        if spec is not None and rate > 0:
            ds = corrupt_regression(ds, spec, data_rng)

        def eval_fn(model, ds=ds, fn=fn, x_range=(x_lo, x_hi)):
            train = evaluate_rmse(model, ds.x, ds.y)
            test = evaluate_rmse_vs_reference(model, fn, x_range)
            return train, test

        return PreparedData(
            x_train=ds.x,
            y_train=ds.y,
            in_dim=1,
            out_dim=1,
            eval_fn=eval_fn,
            dataset_name=fn,
            overlay={"ds": ds, "fn": fn, "x_range": (x_lo, x_hi)},
        )

    if kind == "csv":
        loaded = load_csv_regression(cfg.dataset["path"], cfg.dataset.get("target", "MEDV"))
        train, test = split_regression(
            loaded.dataset, float(cfg.dataset.get("test_fraction", "0.2")), data_rng
        )
        if spec is not None and rate > 0:
            if spec.kind == "uniform_replace" and "range_lo" not in cfg.corruption_params:
                # default outlier range: the training target span
                spec.range_lo = float(train.y.min())
                spec.range_hi = float(train.y.max())
            train = corrupt_regression(train, spec, data_rng)

        def eval_fn(model, train=train, test=test):
            return (
                evaluate_rmse(model, train.x, train.y),
                evaluate_rmse(model, test.x, test.y_clean),
            )

        return PreparedData(
            x_train=train.x,
            y_train=train.y,
            in_dim=train.x.shape[1],
            out_dim=1,
            eval_fn=eval_fn,
            dataset_name=os.path.basename(cfg.dataset["path"]),
        )

    if kind == "idx":
        train = load_idx(cfg.dataset["train_images"], cfg.dataset["train_labels"])
        test = load_idx(cfg.dataset["test_images"], cfg.dataset["test_labels"])
        limit = int(cfg.dataset.get("limit", "0"))
        if limit:
            train = split_labeled(train, 0.0, data_rng)[0]
            train.x, train.labels, train.true_labels = (
                train.x[:limit],
                train.labels[:limit],
                train.true_labels[:limit],
            )
        if spec is not None and rate > 0:
            train = corrupt_labels(train, spec, data_rng)
        return _labeled_prepared(train, test, "mnist")

    if kind == "blobs":
        n_per = int(cfg.dataset.get("n_per_class", "200"))
        classes = int(cfg.dataset.get("classes", "10"))
        dim = int(cfg.dataset.get("dim", "16"))
        sep = float(cfg.dataset.get("separation", "4"))
        # train and test must share class centers: draw one pool, then split
        both = gen_blobs(2 * n_per, classes, dim, sep, data_rng)
        train, test = split_labeled(both, 0.5, data_rng)
        if spec is not None and rate > 0:
            train = corrupt_labels(train, spec, data_rng)
        return _labeled_prepared(train, test, "blobs")

    raise ConfigurationError(f"unknown dataset.kind {kind!r}")


def _labeled_prepared(train, test, name: str) -> PreparedData:
    def eval_fn(model, train=train, test=test):
        return (
            evaluate_accuracy(model, train, use_true_labels=False),
            evaluate_accuracy(model, test, use_true_labels=True),
        )

    return PreparedData(
        x_train=train.x,
        y_train=train.one_hot(),
        in_dim=train.x.shape[1],
        out_dim=train.num_classes,
        eval_fn=eval_fn,
        dataset_name=name,
    )


def _build_method_model(cfg: ExperimentConfig, method: str, in_dim: int, out_dim: int, rng: RngState):
    mp = cfg.model_params
    hidden = _ints(mp.get("hidden", "64,64,64"))
    spec = MlpSpec(
        layer_widths=hidden,
        activation=mp.get("activation", "relu"),
        output_dim=out_dim,
    )
    block_cfg = None
    mixture_k = None
    if method == "choicenet":
        block_cfg = CholeskyBlockConfig(
            K=int(mp.get("K", "5")),
            Q=hidden[-1] + 1,
            D=out_dim,
            tau_inv=float(mp.get("tau_inv", "1e-2")),
            rho_max=float(mp.get("rho_max", "0.95")),
        )
    if method == "mdn":
        mixture_k = int(mp.get("mdn_k", mp.get("K", "5")))
    lp = cfg.loss_params
    reg_loss = RegressionLossConfig(
        lambda1=float(lp.get("lambda1", "1")),
        lambda2=float(lp.get("lambda2", "1")),
        lambda_kl=float(lp.get("lambda_kl", "0.01")),
    )
    cls_loss = ClassificationLossConfig(
        lambda_reg=float(lp.get("lambda_reg", "1e-4")),
        lambda_kl=float(lp.get("lambda_kl_cls", lp.get("lambda_kl", "0.01"))),
    )
    return build_model(
        method,
        in_dim,
        spec,
        rng,
        block_cfg=block_cfg,
        mixture_k=mixture_k,
        task=cfg.task,
        reg_loss=reg_loss,
        cls_loss=cls_loss,
        loss_samples=int(mp.get("loss_samples", "1")),
    )


def run_experiment(config_path: str, single_thread: bool = True, quiet: bool = False) -> str:
    """Run the full sweep described by the config; returns the results CSV path.

    Runs are executed sequentially in a fixed order, so reruns with the same
    config produce byte-identical CSVs (the wall_seconds column is zeroed in
    the file for that reason; per-epoch timings stay in the TrainReport).
    """
    cfg = load_experiment_config(config_path)
    os.makedirs(cfg.output_dir, exist_ok=True)
    ckpt_dir = os.path.join(cfg.output_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    results_path = os.path.join(cfg.output_dir, "results.csv")

    rows: list[list] = []
    for method in cfg.methods:
        for rate in cfg.corruption_rates:
            for seed in cfg.seeds:
                prepared = _prepare_data(cfg, rate, seed)
                rng = RngState(seed)
                model = _build_method_model(
                    cfg, method, prepared.in_dim, prepared.out_dim, rng.spawn(7)
                )
                opt = cfg.opt
                if method != "choicenet" and opt.clip_norm is not None:
                    # clipping is part of the choicenet recipe only
                    opt = OptimizerConfig(
                        kind=opt.kind,
                        learning_rate=opt.learning_rate,
                        momentum=opt.momentum,
                        weight_decay=opt.weight_decay,
                        clip_norm=None,
                        schedule=list(opt.schedule),
                    )
                y_train = prepared.y_train
                eval_model = model
                if cfg.task == "regression" and _truthy(cfg.raw.get("train.standardize_y", "false")):
                    y_mean, y_std = float(y_train.mean()), float(y_train.std())
                    if y_std <= 0:
                        raise DataError("standardize_y: training targets are constant")
                    y_train = (y_train - y_mean) / y_std
                    eval_model = _ScaledPredictor(model, y_mean, y_std)
                eval_fn = (lambda _m, em=eval_model, ef=prepared.eval_fn: ef(em))

                warmup = int(cfg.raw.get("train.pi_warmup_epochs", "0"))
                warmup = min(warmup, cfg.epochs) if method == "choicenet" else 0
                report = TrainReport()
                if warmup > 0:
                    model.freeze_pi = True
                    head = fit(
                        model,
                        prepared.x_train,
                        y_train,
                        opt,
                        warmup,
                        cfg.batch_size,
                        rng,
                        eval_fn=eval_fn,
                        eval_every=cfg.eval_every,
                    )
                    model.freeze_pi = False
                    report.records.extend(head.records)
                if cfg.epochs - warmup > 0:
                    tail = fit(
                        model,
                        prepared.x_train,
                        y_train,
                        opt,
                        cfg.epochs - warmup,
                        cfg.batch_size,
                        rng,
                        eval_fn=eval_fn,
                        eval_every=cfg.eval_every,
                        start_epoch=warmup,
                    )
                    report.records.extend(tail.records)
                base = [
                    cfg.experiment,
                    method,
                    prepared.dataset_name,
                    cfg.corruption_kind or "none",
                    rate,
                    seed,
                ]
                for rec in report.records:
                    rows.append(
                        base
                        + [rec.epoch, rec.train_loss, rec.train_metric, rec.test_metric, rec.wall_seconds]
                    )
                final = report.final()
                rows.append(
                    base
                    + [
                        "final",
                        final.train_loss if final else float("nan"),
                        final.train_metric if final else float("nan"),
                        final.test_metric if final else float("nan"),
                        final.wall_seconds if final else 0.0,
                    ]
                )
                model.save(os.path.join(ckpt_dir, f"{method}_r{rate:g}_s{seed}.ckpt"))
                if prepared.overlay is not None:
                    _write_overlay(cfg, method, rate, seed, eval_model, prepared.overlay)
                if not quiet:
                    tm = final.test_metric if final else float("nan")
                    print(
                        f"[{cfg.experiment}] {method} rate={rate:g} seed={seed} "
                        f"test_metric={tm:.4f}",
                        file=sys.stderr,
                    )

    _write_results(results_path, rows)
    return results_path


def _format_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _write_results(path: str, rows: list):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(RESULT_COLUMNS) + "\n")
        for row in rows:
            cells = list(row)
            # wall seconds are not reproducible; zero them for byte-stable output
            cells[-1] = 0.0
            f.write(",".join(_format_cell(c) for c in cells) + "\n")


def _write_overlay(cfg: ExperimentConfig, method, rate, seed, model, overlay):
    ds = overlay["ds"]
    lo, hi = overlay["x_range"]
    grid = np.linspace(lo, hi, 400)
    from .data import _fn_on_range

    ref = _fn_on_range(overlay["fn"], (lo, hi))(grid)
    pred = model.predict(grid.reshape(-1, 1)).reshape(-1)
    path = os.path.join(cfg.output_dir, f"fit_{method}_r{rate:g}_s{seed}.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("series,x,y\n")
        for xv, yv in zip(ds.x[:, 0], ds.y[:, 0]):
            f.write(f"train,{xv:.6g},{yv:.6g}\n")
        for xv, yv in zip(grid, ref):
            f.write(f"reference,{xv:.6g},{yv:.6g}\n")
        for xv, yv in zip(grid, pred):
            f.write(f"prediction,{xv:.6g},{yv:.6g}\n")


# -- summaries ------------------------------------------------------------------------


def read_results(path: str) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            rows = []
            for i, row in enumerate(reader, start=2):
                if None in row or any(v is None for v in row.values()):
                    raise DataError(f"{path}:{i}: malformed row")
                rows.append(row)
            return rows
    except OSError as e:
        raise DataError(f"cannot read results {path}: {e}") from e


def emit_summary(results_csv: str, group_keys: list, out_path: str, direction: str = "min") -> str:
    """Median/mean/std of the final test metric per group, plus the best-epoch
    metric across each seed's learning curve ('best' per ``direction``)."""
    rows = read_results(results_csv)
    finals: dict[tuple, list] = {}
    bests: dict[tuple, dict] = {}
    for row in rows:
        key = tuple(row[k] for k in group_keys)
        seed = row["seed"]
        metric = float(row["test_metric"])
        if row["epoch"] == "final":
            finals.setdefault(key, []).append(metric)
        else:
            per_seed = bests.setdefault(key, {})
            cur = per_seed.get(seed)
            better = (
                cur is None
                or (direction == "min" and metric < cur)
                or (direction == "max" and metric > cur)
            )
            if better:
                per_seed[seed] = metric

    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(
            ",".join(group_keys)
            + ",n_seeds,final_median,final_mean,final_std,best_median\n"
        )
        for key in sorted(finals):
            vals = np.asarray(finals[key])
            best_vals = np.asarray(list(bests.get(key, {}).values()) or [np.nan])
            f.write(
                ",".join(key)
                + f",{len(vals)},{np.median(vals):.6g},{vals.mean():.6g},"
                f"{vals.std():.6g},{np.median(best_vals):.6g}\n"
            )
    return out_path


# -- plots ----------------------------------------------------------------------------


def emit_plot(input_csv: str, kind: str, out_path: str):
    if kind == "rmse_vs_rate":
        rows = [r for r in read_results(input_csv) if r["epoch"] == "final"]
        if not rows:
            raise DataError("rmse_vs_rate: no final rows in input")
        methods = sorted({r["method"] for r in rows})
        plot = SvgPlot(title="Final test metric vs corruption rate", xlabel="corruption rate", ylabel="test metric")
        for m in methods:
            grouped: dict[float, list] = {}
            for r in rows:
                if r["method"] == m:
                    grouped.setdefault(float(r["corruption_rate"]), []).append(
                        float(r["test_metric"])
                    )
            xs = sorted(grouped)
            ys = [float(np.median(grouped[x])) for x in xs]
            plot.add(Series(name=m, xs=xs, ys=ys, style="line+markers"))
        plot.save(out_path)
        return

    if kind == "learning_curve":
        rows = [r for r in read_results(input_csv) if r["epoch"] != "final"]
        if not rows:
            raise DataError("learning_curve: no epoch rows in input")
        keys = sorted({(r["method"], r["corruption_rate"], r["seed"]) for r in rows})
        plot = SvgPlot(title="Learning curves", xlabel="epoch", ylabel="test metric")
        for m, rate, seed in keys:
            pts = [
                (int(r["epoch"]), float(r["test_metric"]))
                for r in rows
                if (r["method"], r["corruption_rate"], r["seed"]) == (m, rate, seed)
            ]
            pts.sort()
            plot.add(
                Series(
                    name=f"{m} r={rate} s={seed}",
                    xs=[p[0] for p in pts],
                    ys=[p[1] for p in pts],
                )
            )
        plot.save(out_path)
        return

    if kind == "fit_overlay":
        rows = read_results(input_csv)
        if not rows:
            raise DataError("fit_overlay: empty input")
        plot = SvgPlot(title="Fit overlay", xlabel="x", ylabel="y")
        for name, style in (("train", "scatter"), ("reference", "line"), ("prediction", "line")):
            pts = [(float(r["x"]), float(r["y"])) for r in rows if r["series"] == name]
            if pts:
                plot.add(
                    Series(name=name, xs=[p[0] for p in pts], ys=[p[1] for p in pts], style=style)
                )
        plot.save(out_path)
        return

    raise ConfigurationError(f"unknown plot kind {kind!r}")


# -- selfcheck ---------------------------------------------------------------------------


def selfcheck() -> bool:
    """Quick statistical and gradient sanity suite for the core modules."""
    from . import autodiff as ad
    from .cholesky import cholesky_transform, empirical_correlation, sample_correlated_weights

    ok = True

    def check(name, cond):
        nonlocal ok
        status = "ok" if cond else "FAIL"
        print(f"  [{status}] {name}")
        ok = ok and cond

    rng = RngState(2024)
    n = 200_000
    w = 2.0 + rng.standard_normal(n).data
    z = rng.standard_normal(n).data
    for rho in (-0.9, -0.5, 0.0, 0.5, 0.9):
        wt = cholesky_transform(w, z, rho, 2.0, 1.0, 1.0).data
        check(f"mean@rho={rho}", abs(wt.mean() - 2.0 * rho) < 0.02)
        expected_var = 1.0 - rho * rho
        check(f"var@rho={rho}", abs(wt.var() - expected_var) <= 0.02 * max(expected_var, 0.25) + 0.005)
        if abs(rho) < 1.0 and expected_var > 0:
            check(f"corr@rho={rho}", abs(empirical_correlation(w, wt) - rho) < 0.02)

    gc = ad.grad_check(
        lambda t: ad.tsum(ad.square(ad.tanh(t))), ad.Tensor(rng.standard_normal((3, 4)).data)
    )
    check("tanh/square gradients", gc.passed)

    mu = np.full((4, 3), 2.0)
    sets = sample_correlated_weights(mu, np.full((4, 3), 1.0), np.full((4, 3), 1.0), [1.0, 0.5], RngState(7))
    check("rho=1 component equals mu", np.allclose(sets.tilde[0].data, mu))
    return ok


# -- entry point ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="choicenet", description="Robust-regression experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--single-thread", action="store_true", default=True)
    p_run.add_argument("--quiet", action="store_true")

    p_sum = sub.add_parser("summarize", help="aggregate a results CSV")
    p_sum.add_argument("results_csv")
    p_sum.add_argument("--group-by", default="method,corruption_rate")
    p_sum.add_argument("--out", default=None)
    p_sum.add_argument("--direction", choices=["min", "max"], default="min")

    p_plot = sub.add_parser("plot", help="render an SVG from a results CSV")
    p_plot.add_argument("input_csv")
    p_plot.add_argument("--kind", required=True, choices=["rmse_vs_rate", "learning_curve", "fit_overlay"])
    p_plot.add_argument("--out", required=True)

    sub.add_parser("selfcheck", help="run the core property suites")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            path = run_experiment(args.config, single_thread=args.single_thread, quiet=args.quiet)
            print(path)
            return EXIT_OK
        if args.command == "summarize":
            out = args.out or (os.path.splitext(args.results_csv)[0] + "_summary.csv")
            print(emit_summary(args.results_csv, _strs(args.group_by), out, args.direction))
            return EXIT_OK
        if args.command == "plot":
            emit_plot(args.input_csv, args.kind, args.out)
            print(args.out)
            return EXIT_OK
        if args.command == "selfcheck":
            return EXIT_OK if selfcheck() else EXIT_NUMERIC
    except ConfigurationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericDomainError as e:
        print(f"numeric abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ChoiceNetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
