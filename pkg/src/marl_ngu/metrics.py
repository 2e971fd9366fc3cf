"""Learning-curve smoothing, cross-run aggregation and result files."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from html import escape

import numpy as np

Z_95 = 1.96

RAW_COLUMNS = ("episode_index", "return", "smoothed_return", "intrinsic_return", "length", "complete")
AGGREGATE_COLUMNS = ("episode_index", "mean_smoothed_return", "ci_low", "ci_high", "n_runs")


@dataclass
class RunSeries:
    """Per-episode logs of one training run."""

    seed: int
    returns: np.ndarray
    intrinsic: np.ndarray
    lengths: np.ndarray
    partial: tuple | None = None  # (return, intrinsic, length) of an unfinished last episode

    def smoothed(self, window: int = 100) -> np.ndarray:
        return smooth(self.returns, window)


@dataclass
class AggregateSeries:
    name: str
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_runs: int
    shared_buffer: bool = False
    runs: list = field(default_factory=list)

    @property
    def episode_index(self) -> np.ndarray:
        return np.arange(len(self.mean))


def smooth(series, window: int = 100) -> np.ndarray:
    """Trailing moving average; early entries average the available prefix."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    out = np.empty(n)
    head = min(window - 1, n)
    for i in range(head):
        out[i] = x[: i + 1].mean()
    if n >= window:
        out[window - 1:] = np.lib.stride_tricks.sliding_window_view(x, window).mean(axis=1)
    return out


def mean_ci(samples, z: float = Z_95):
    """Mean and normal-approximation half-width ``z * sd / sqrt(n)`` along axis 0."""
    a = np.asarray(samples, dtype=np.float64)
    n = a.shape[0]
    mean = a.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    sd = a.std(axis=0, ddof=1)
    return mean, z * sd / math.sqrt(n)


def aggregate(runs, name: str = "experiment", window: int = 100, shared_buffer: bool = False) -> AggregateSeries:
    if not runs:
        raise ValueError("nothing to aggregate")
    length = min(len(r.returns) for r in runs)
    curves = np.stack([r.smoothed(window)[:length] for r in runs])
    mean, half = mean_ci(curves)
    return AggregateSeries(name, mean, mean - half, mean + half, len(runs), shared_buffer, list(runs))


def final_window_means(runs, last_steps: int, episode_length: int, window: int = 100) -> np.ndarray:
    """Per-run mean of the smoothed curve over the episodes covering the last ``last_steps``."""
    k = max(1, last_steps // episode_length)
    return np.array([r.smoothed(window)[-k:].mean() for r in runs])


def _fmt(x) -> str:
    return repr(float(x))


def write_raw_csv(run: RunSeries, path, window: int = 100) -> None:
    sm = run.smoothed(window)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_COLUMNS)
        for i in range(len(run.returns)):
            w.writerow([i, _fmt(run.returns[i]), _fmt(sm[i]), _fmt(run.intrinsic[i]), int(run.lengths[i]), 1])
        if run.partial is not None:
            ret, intr, length = run.partial
            w.writerow([len(run.returns), _fmt(ret), "", _fmt(intr), int(length), 0])


def read_raw_csv(path, seed: int) -> RunSeries:
    returns, intrinsic, lengths, partial = [], [], [], None
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["complete"] == "1":
                returns.append(float(row["return"]))
                intrinsic.append(float(row["intrinsic_return"]))
                lengths.append(int(row["length"]))
            else:
                partial = (float(row["return"]), float(row["intrinsic_return"]), int(row["length"]))
    return RunSeries(seed, np.array(returns), np.array(intrinsic), np.array(lengths, dtype=np.int64), partial)


def write_aggregate_csv(agg: AggregateSeries, path, with_name: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        _write_aggregate_rows(csv.writer(fh, lineterminator="\n"), [agg], with_name)


def write_combined_csv(aggs, path) -> None:
    with open(path, "w", newline="") as fh:
        _write_aggregate_rows(csv.writer(fh, lineterminator="\n"), aggs, True)


def _write_aggregate_rows(w, aggs, with_name: bool) -> None:
    w.writerow((("config",) if with_name else ()) + AGGREGATE_COLUMNS)
    for agg in aggs:
        prefix = [agg.name] if with_name else []
        for i in range(len(agg.mean)):
            w.writerow(prefix + [i, _fmt(agg.mean[i]), _fmt(agg.ci_low[i]), _fmt(agg.ci_high[i]), agg.n_runs])


def read_aggregate_csv(path, name: str | None = None) -> AggregateSeries:
    mean, lo, hi, n_runs = [], [], [], 0
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            mean.append(float(row["mean_smoothed_return"]))
            lo.append(float(row["ci_low"]))
            hi.append(float(row["ci_high"]))
            n_runs = int(row["n_runs"])
    name = name or os.path.basename(os.path.dirname(os.path.abspath(path)))
    return AggregateSeries(name, np.array(mean), np.array(lo), np.array(hi), n_runs)


PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def render_svg(aggs, title: str = "", width: int = 720, height: int = 420) -> str:
    """Static learning-curve plot: one polyline per aggregate over its CI band."""
    left, right, top, bottom = 60, 180, 30, 40
    pw, ph = width - left - right, height - top - bottom
    n_max = max((len(a.mean) for a in aggs), default=1)
    lows = [a.ci_low.min() for a in aggs if len(a.mean)]
    highs = [a.ci_high.max() for a in aggs if len(a.mean)]
    y0 = min(lows + [0.0])
    y1 = max(highs + [y0 + 1.0])

    def sx(i):
        return left + (pw * i / max(n_max - 1, 1))

    def sy(v):
        return top + ph * (1.0 - (v - y0) / (y1 - y0))

    def pts(xs, ys):
        return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="18" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.0f}" y="{height - 8}" font-family="sans-serif" font-size="12" '
        f'text-anchor="middle">episode</text>',
        f'<text x="{left - 8}" y="{sy(y1) + 4:.2f}" font-family="sans-serif" font-size="11" '
        f'text-anchor="end">{y1:.3g}</text>',
        f'<text x="{left - 8}" y="{sy(y0) + 4:.2f}" font-family="sans-serif" font-size="11" '
        f'text-anchor="end">{y0:.3g}</text>',
    ]
    for k, a in enumerate(aggs):
        color = PALETTE[k % len(PALETTE)]
        idx = np.arange(len(a.mean))
        band = pts(idx, a.ci_high) + " " + pts(idx[::-1], a.ci_low[::-1])
        out.append(f'<polygon class="ci-band" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline class="curve" points="{pts(idx, a.mean)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"><title>{escape(a.name)}</title></polyline>')
        ly = top + 16 * k + 10
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{escape(a.name)} (n={a.n_runs})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(aggs, path, title: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(render_svg(aggs, title))


def emit_results(agg: AggregateSeries, root, window: int = 100) -> str:
    """Write ``<root>/<name>/{<seed>/raw.csv, aggregate.csv, curve.svg}``; returns the config dir."""
    cfg_dir = os.path.join(str(root), agg.name)
    os.makedirs(cfg_dir, exist_ok=True)
    for run in agg.runs:
        run_dir = os.path.join(cfg_dir, str(run.seed))
        os.makedirs(run_dir, exist_ok=True)
        write_raw_csv(run, os.path.join(run_dir, "raw.csv"), window)
    write_aggregate_csv(agg, os.path.join(cfg_dir, "aggregate.csv"))
    write_svg([agg], os.path.join(cfg_dir, "curve.svg"), title=agg.name)
    return cfg_dir
