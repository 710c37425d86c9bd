"""Batch experiment runner: cells, manifest, reports and figures.

A cell is one (model, density, seed) training run evaluated at every
configured noise level. Completed cells are cached in the run manifest and
skipped on identical re-runs unless forced; report CSVs are rebuilt from
all cached rows so re-runs are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import data as data_mod
from .baselines import NeighborModel, factor_fit, uipcc_predict
from .metrics import (
    AGG_COLUMNS,
    REPORT_COLUMNS,
    MetricsReport,
    aggregate,
    aggregate_row,
    evaluate_predictions,
    report_row,
)
from .model import QoSDiffModel
from .train import LossConfig, fit

log = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"


def cell_seed(base_seed, density, noise, model):
    """Stable per-cell seed; adding cells never perturbs existing ones."""
    key = f"{base_seed}|{density:g}|{noise:g}|{model}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little")


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def load_dataset(cfg):
    ds_cfg = cfg.dataset
    if ds_cfg.format == "wsdream":
        ds = data_mod.load_wsdream(
            ds_cfg.matrix, ds_cfg.user_list, ds_cfg.service_list,
            user_fields=ds_cfg.user_fields,
            service_fields=ds_cfg.service_fields,
        )
    else:
        ds = data_mod.load_triplets_csv(
            ds_cfg.path,
            user_fields=ds_cfg.user_fields,
            service_fields=ds_cfg.service_fields,
        )
    return data_mod.normalize(ds)


def _train_predictor(model_name, ds, split, cfg, seed):
    """Fit the requested model; returns pred(users, services) -> normalized."""
    base = cfg.baseline
    if model_name == "qosdiff":
        q = cfg.qosdiff
        model = QoSDiffModel(
            ds, d=q.dim, heads=q.heads, d_h=q.d_h, d_g=q.d_g, d_o=q.d_o,
            d_d=q.d_d, tau=q.tau, gamma=q.gamma,
            leaky_slope=q.leaky_slope, dropout_keep=q.dropout_keep,
            seed=seed,
        )
        loss_cfg = LossConfig(
            lam=q.lam, batch_size=q.batch_size, max_epochs=q.max_epochs,
            patience=q.patience, lr=q.lr, weight_decay=q.weight_decay,
            eval_batch_size=q.eval_batch_size,
        )
        fit(model, ds, split, loss_cfg, seed)
        return lambda u, s: model.predict(u, s, batch_size=q.eval_batch_size)
    if model_name == "upcc":
        nm = NeighborModel("user", base.top_k).fit(ds, split)
        return nm.predict_many
    if model_name == "ipcc":
        nm = NeighborModel("service", base.top_k).fit(ds, split)
        return nm.predict_many
    if model_name == "uipcc":
        um = NeighborModel("user", base.top_k).fit(ds, split)
        sm = NeighborModel("service", base.top_k).fit(ds, split)
        return lambda u, s: uipcc_predict(um, sm, u, s, base.mix_weight)
    if model_name in ("pmf", "biasmf"):
        fm = factor_fit(
            ds, split, variant=model_name, factors=base.factors,
            lr=base.lr, reg=base.reg, epochs=base.epochs, seed=seed,
        )
        return fm.predict_many
    raise ValueError(f"unknown model {model_name!r}")


def run_cell(cfg, ds, model_name, density, base_seed):
    """Train one cell and evaluate it at every configured noise level."""
    seed = cell_seed(base_seed, density, 0.0, model_name)
    split = data_mod.make_split(ds, density, seed)
    predict = _train_predictor(model_name, ds, split, cfg, seed)
    rows = []
    for noise in cfg.experiment.noise_levels:
        if noise == 0.0:
            test = data_mod.clean_test_set(split, ds)
        else:
            test = data_mod.corrupt_test(
                split, ds, noise,
                cell_seed(base_seed, density, noise, model_name),
            )
        pred = predict(test.users, test.services)
        for scale in ("raw", "normalized"):
            rows.append(evaluate_predictions(
                pred, test.values, ds.global_max,
                dataset=cfg.dataset.name, model=model_name,
                density=density, seed=base_seed, noise=noise, scale=scale,
            ))
    return rows


# ----------------------------------------------------------------------
# manifest
# ----------------------------------------------------------------------
def _load_manifest(output_dir):
    path = os.path.join(output_dir, MANIFEST_NAME)
    if os.path.exists(path):
        with open(path) as f:
            return json.load(f)
    return {"version": 1, "config_text": None, "cells": {}}


def _save_manifest(output_dir, manifest):
    _atomic_write(
        os.path.join(output_dir, MANIFEST_NAME),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )


def _rows_to_json(rows):
    return [vars(r) for r in rows]


def _rows_from_json(items):
    return [MetricsReport(**item) for item in items]


def write_reports(output_dir, rows):
    """Deterministically ordered per-seed and aggregate CSVs."""
    rows = sorted(rows, key=lambda r: (
        r.dataset, r.model, r.density, r.noise, r.seed, r.scale
    ))
    text = REPORT_COLUMNS + "\n" + "".join(report_row(r) + "\n" for r in rows)
    _atomic_write(os.path.join(output_dir, "reports.csv"), text)
    aggs = aggregate(rows)
    text = AGG_COLUMNS + "\n" + "".join(aggregate_row(a) + "\n" for a in aggs)
    _atomic_write(os.path.join(output_dir, "aggregates.csv"), text)
    return aggs


def plot_density_curves(output_dir, aggs):
    """SVG line plot of raw-scale MAE/RMSE vs density per model."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    clean = [a for a in aggs if a.noise == 0.0 and a.scale == "raw"]
    if not clean:
        return None
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for metric, ax in zip(("mae_mean", "rmse_mean"), axes):
        models = sorted({a.model for a in clean})
        for model in models:
            pts = sorted(
                (a.density, getattr(a, metric)) for a in clean if a.model == model
            )
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", label=model)
        ax.set_xlabel("matrix density")
        ax.set_ylabel(metric.split("_")[0].upper())
        ax.legend()
    fig.tight_layout()
    path = os.path.join(output_dir, "density_curves.svg")
    fig.savefig(path)
    plt.close(fig)
    return path


def run(cfg, config_text="", force=False):
    """Execute every (density, seed) cell; returns (ok, aggregates)."""
    exp = cfg.experiment
    os.makedirs(exp.output_dir, exist_ok=True)
    manifest = _load_manifest(exp.output_dir)
    if manifest.get("config_text") not in (None, config_text):
        log.info("config changed; previously cached cells are discarded")
        manifest["cells"] = {}
    manifest["config_text"] = config_text

    ds = load_dataset(cfg)
    cells = [
        (exp.model, density, seed)
        for density in exp.densities
        for seed in exp.seeds
    ]
    threads = max(1, int(os.environ.get("QOSDIFF_THREADS", "1")))

    def execute(cell):
        model_name, density, seed = cell
        key = f"{model_name}|{density:g}|{seed}"
        cached = manifest["cells"].get(key)
        if cached and not force and "rows" in cached:
            log.info("cell %s cached; skipping", key)
            return key, cached
        start = time.time()
        try:
            rows = run_cell(cfg, ds, model_name, density, seed)
            return key, {
                "rows": _rows_to_json(rows),
                "wall_clock_s": round(time.time() - start, 3),
            }
        except Exception as exc:  # keep remaining cells running
            log.error("cell %s failed: %s", key, exc)
            return key, {"error": str(exc),
                         "wall_clock_s": round(time.time() - start, 3)}

    if threads == 1:
        results = [execute(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(execute, cells))

    ok = True
    all_rows = []
    for key, outcome in results:
        manifest["cells"][key] = outcome
        if "rows" in outcome:
            all_rows.extend(_rows_from_json(outcome["rows"]))
        else:
            ok = False
    _save_manifest(exp.output_dir, manifest)

    aggs = write_reports(exp.output_dir, all_rows) if all_rows else []
    if aggs:
        plot_density_curves(exp.output_dir, aggs)
    return ok, aggs


# ----------------------------------------------------------------------
# hyperparameter sweeps
# ----------------------------------------------------------------------
SWEEP_AXES = ("lambda", "dimension", "heads")


def sweep(cfg, axis, values, config_text="", force=False):
    """One run per axis value; emits a sweep CSV and figure."""
    if cfg.experiment.model != "qosdiff":
        raise ValueError("sweeps apply to the qosdiff model only")
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")

    base_dir = cfg.experiment.output_dir
    all_ok = True
    sweep_rows = []
    for value in values:
        if axis == "lambda":
            q = replace(cfg.qosdiff, lam=float(value))
        elif axis == "dimension":
            q = replace(cfg.qosdiff, dim=int(value))
        else:
            q = replace(cfg.qosdiff, heads=int(value))
        sub = replace(
            cfg,
            qosdiff=q,
            experiment=replace(
                cfg.experiment,
                output_dir=os.path.join(base_dir, f"{axis}_{value:g}"),
            ),
        )
        ok, _ = run(sub, config_text=f"{config_text}\n# {axis}={value:g}",
                    force=force)
        all_ok = all_ok and ok
        with open(os.path.join(sub.experiment.output_dir, "reports.csv")) as f:
            header = f.readline()
            for line in f:
                sweep_rows.append(f"{axis},{value:g},{line.rstrip()}")

    os.makedirs(base_dir, exist_ok=True)
    text = (
        f"axis,value,{REPORT_COLUMNS}\n" + "".join(r + "\n" for r in sweep_rows)
    )
    _atomic_write(os.path.join(base_dir, f"sweep_{axis}.csv"), text)
    _plot_sweep(base_dir, axis, sweep_rows)
    return all_ok


def _plot_sweep(base_dir, axis, sweep_rows):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # rows: axis,value,dataset,model,density,noise,seed,mae,rmse,scale
    series = {}
    for row in sweep_rows:
        parts = row.split(",")
        value, density, noise, scale = (
            float(parts[1]), float(parts[4]), float(parts[5]), parts[9]
        )
        if noise != 0.0 or scale != "raw":
            continue
        series.setdefault(density, {}).setdefault(value, []).append(
            float(parts[7])
        )
    fig, ax = plt.subplots(figsize=(6, 4))
    for density in sorted(series):
        pts = sorted(
            (v, float(np.mean(maes))) for v, maes in series[density].items()
        )
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=f"density {density:g}")
    ax.set_xlabel(axis)
    ax.set_ylabel("MAE")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(base_dir, f"sweep_{axis}.svg"))
    plt.close(fig)


# ----------------------------------------------------------------------
# consolidated reporting
# ----------------------------------------------------------------------
def consolidate(output_dir):
    """Merge every reports.csv under a directory into model x density grids.

    Returns printable text.
    """
    rows = []
    for root, _, files in os.walk(output_dir):
        if "reports.csv" in files:
            with open(os.path.join(root, "reports.csv")) as f:
                f.readline()
                for line in f:
                    parts = line.rstrip().split(",")
                    rows.append(MetricsReport(
                        dataset=parts[0], model=parts[1],
                        density=float(parts[2]), noise=float(parts[3]),
                        seed=int(parts[4]), mae=float(parts[5]),
                        rmse=float(parts[6]), scale=parts[7],
                    ))
    if not rows:
        return "no runs\n"
    aggs = [a for a in aggregate(rows) if a.noise == 0.0 and a.scale == "raw"]
    lines = []
    for dataset in sorted({a.dataset for a in aggs}):
        sub = [a for a in aggs if a.dataset == dataset]
        densities = sorted({a.density for a in sub})
        lines.append(f"dataset: {dataset} (raw-scale MAE, mean±std)")
        header = "model".ljust(10) + "".join(
            f"d={d:g}".rjust(18) for d in densities
        )
        lines.append(header)
        for model in sorted({a.model for a in sub}):
            cells = []
            for d in densities:
                match = [a for a in sub if a.model == model and a.density == d]
                if match:
                    a = match[0]
                    cells.append(f"{a.mae_mean:.4f}±{a.mae_std:.4f}".rjust(18))
                else:
                    cells.append("-".rjust(18))
            lines.append(model.ljust(10) + "".join(cells))
        lines.append("")
    return "\n".join(lines) + "\n"
