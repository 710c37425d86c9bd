"""Prediction metrics, multi-seed aggregation and robustness degradation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    dataset: str
    model: str
    density: float
    seed: int
    noise: float
    mae: float
    rmse: float
    scale: str  # "normalized" | "raw"


@dataclass
class AggregateReport:
    dataset: str
    model: str
    density: float
    noise: float
    scale: str
    n_seeds: int
    mae_mean: float
    mae_std: float
    rmse_mean: float
    rmse_std: float
    degradation: float | None = None  # percent vs the 0-noise group


def mae(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError("prediction and truth must be equal-length, nonempty")
    return float(np.mean(np.abs(pred - truth)))


def rmse(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError("prediction and truth must be equal-length, nonempty")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def degradation(mae_p, mae_0):
    """Relative MAE increase in percent against the clean-test value."""
    if mae_0 <= 0:
        raise ValueError("reference MAE must be positive")
    return (mae_p - mae_0) / mae_0 * 100.0


def evaluate_predictions(pred, truth, global_max, *, dataset="", model="",
                         density=0.0, seed=0, noise=0.0, scale="raw"):
    """Metrics on normalized predictions/truths, optionally denormalized.

    Predictions are clamped to [0, 1] first; for the raw scale both sides
    are multiplied by the global maximum before computing metrics.
    """
    pred = np.clip(np.asarray(pred, dtype=np.float64), 0.0, 1.0)
    truth = np.asarray(truth, dtype=np.float64)
    if scale == "raw":
        pred = pred * global_max
        truth = truth * global_max
    elif scale != "normalized":
        raise ValueError(f"unknown scale {scale!r}")
    return MetricsReport(
        dataset=dataset, model=model, density=density, seed=seed,
        noise=noise, mae=mae(pred, truth), rmse=rmse(pred, truth),
        scale=scale,
    )


def aggregate(reports):
    """Group by (dataset, model, density, noise, scale); sample std over seeds.

    Adds a degradation column relative to each group's 0-noise counterpart
    when that counterpart exists.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    groups = {}
    for r in reports:
        key = (r.dataset, r.model, r.density, r.noise, r.scale)
        groups.setdefault(key, []).append(r)

    def sample_std(xs):
        return float(np.std(xs, ddof=1)) if len(xs) > 1 else 0.0

    out = []
    for key in sorted(groups):
        dataset, model, density, noise, scale = key
        rs = groups[key]
        maes = [r.mae for r in rs]
        rmses = [r.rmse for r in rs]
        agg = AggregateReport(
            dataset=dataset, model=model, density=density, noise=noise,
            scale=scale, n_seeds=len(rs),
            mae_mean=float(np.mean(maes)), mae_std=sample_std(maes),
            rmse_mean=float(np.mean(rmses)), rmse_std=sample_std(rmses),
        )
        base_key = (dataset, model, density, 0.0, scale)
        if noise != 0.0 and base_key in groups:
            base = float(np.mean([r.mae for r in groups[base_key]]))
            agg.degradation = degradation(agg.mae_mean, base)
        out.append(agg)
    return out


REPORT_COLUMNS = "dataset,model,density,noise,seed,mae,rmse,scale"
AGG_COLUMNS = (
    "dataset,model,density,noise,scale,n_seeds,"
    "mae_mean,mae_std,rmse_mean,rmse_std,degradation_pct"
)


def report_row(r):
    return (
        f"{r.dataset},{r.model},{r.density:g},{r.noise:g},{r.seed},"
        f"{r.mae:.10g},{r.rmse:.10g},{r.scale}"
    )


def aggregate_row(a):
    deg = "" if a.degradation is None else f"{a.degradation:.10g}"
    return (
        f"{a.dataset},{a.model},{a.density:g},{a.noise:g},{a.scale},"
        f"{a.n_seeds},{a.mae_mean:.10g},{a.mae_std:.10g},"
        f"{a.rmse_mean:.10g},{a.rmse_std:.10g},{deg}"
    )
