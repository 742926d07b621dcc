"""Scoring: normalized RMSE (omega), desired-action accuracy, confusion.

Omega = RMS(filtered - clean) / RMS(noisy - clean); 0 is a perfect
reconstruction and 1 means the method did no better than leaving the noise
in place.  Methods are compared on the 4 x 8 grid of noise levels by test
datasets, each cell scored over the whole 32 s signal, with per-segment
breakdowns emitted for diagnostics.  Reports are written as byte-stable CSV
plus plain SVG line plots (action traces and signal overlays).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .agent import AgentCheckpoint, act
from .contamination import NoiseKind, NoisyDataset
from .filters import BASELINE_NAMES, FilterAction, static_baseline
from .signals import SEGMENT_LEN, SampledSignal

METHODS = ("WD_db4", "WD_sym4", "LPF", "NF", "HPF", "supDQN")


def level_tag(level_db: float) -> str:
    """Directory-friendly label, e.g. snr_-5dB or snr_+1dB."""
    return f"snr_{level_db:+g}dB"


@dataclass
class EvalReport:
    """Aggregated comparison results, keyed by (level, dataset[, method])."""

    omega: dict = field(default_factory=dict)
    accuracy: dict = field(default_factory=dict)
    confusion: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    mean_omega: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# metrics


def _samples(x) -> np.ndarray:
    return x.samples if hasattr(x, "samples") else np.asarray(x, dtype=np.float64)


def omega(filtered, clean, noisy) -> Optional[float]:
    """RMS(filtered - clean) / RMS(noisy - clean); None when inapplicable.

    The denominator is zero exactly when noisy equals clean, in which case
    no meaningful normalization exists and None (a skip flag) is returned.
    """
    f, c, n = _samples(filtered), _samples(clean), _samples(noisy)
    if not (f.shape == c.shape == n.shape):
        raise ValueError("signals must have equal length")
    denom = float(np.mean((n - c) ** 2))
    if denom == 0.0:
        return None
    return float(np.sqrt(np.mean((f - c) ** 2) / denom))


def action_accuracy(taken, desired) -> float:
    """(T - missed) / T x 100 over the two equal-length action lists."""
    taken = list(taken)
    desired = list(desired)
    if len(taken) != len(desired):
        raise ValueError("action lists must have equal length")
    if not taken:
        raise ValueError("action lists must be non-empty")
    missed = sum(1 for t, d in zip(taken, desired) if FilterAction(t) != FilterAction(d))
    return (len(taken) - missed) / len(taken) * 100.0


def confusion(taken, noise_kinds) -> np.ndarray:
    """3x3 counts: rows MOA/PLI/WGN, columns HPF/NF/LPF."""
    taken = list(taken)
    noise_kinds = list(noise_kinds)
    if len(taken) != len(noise_kinds):
        raise ValueError("action and noise lists must have equal length")
    matrix = np.zeros((3, 3), dtype=int)
    for action, kind in zip(taken, noise_kinds):
        matrix[int(NoiseKind(kind)) - 1, int(FilterAction(action)) - 1] += 1
    return matrix


# ---------------------------------------------------------------------------
# comparison harness


def _method_signal(
    method: str, dataset: NoisyDataset, checkpoint: Optional[AgentCheckpoint]
):
    """Filtered signal (and actions for supDQN) of one method on one dataset."""
    if method == "supDQN":
        actions, filtered = act(checkpoint, dataset)
        return filtered, actions
    if method == "identity":
        return dataset.noisy, None
    if method in BASELINE_NAMES:
        return static_baseline(method, dataset), None
    raise ValueError(f"unknown method {method!r}")


def _segment_omegas(filtered, clean, noisy) -> list:
    out = []
    f, c, n = _samples(filtered), _samples(clean), _samples(noisy)
    for i in range(len(c) // SEGMENT_LEN):
        sl = slice(i * SEGMENT_LEN, (i + 1) * SEGMENT_LEN)
        out.append(omega(f[sl], c[sl], n[sl]))
    return out


def _score_dataset(level: float, dataset: NoisyDataset, checkpoint, methods):
    """All per-method scores of one (level, dataset) cell."""
    cell = {"omega": {}, "segment_omega": {}}
    for method in methods:
        filtered, actions = _method_signal(method, dataset, checkpoint)
        cell["omega"][method] = omega(filtered, dataset.clean, dataset.noisy)
        cell["segment_omega"][method] = _segment_omegas(filtered, dataset.clean, dataset.noisy)
        if method == "supDQN":
            desired = dataset.desired_actions
            cell["taken"] = actions
            cell["desired"] = desired
            cell["accuracy"] = action_accuracy(actions, desired)
            cell["confusion"] = confusion(actions, dataset.sequence.kinds)
            cell["filtered"] = filtered
    return cell


def compare(
    checkpoints: dict,
    corpora: dict,
    out_dir,
    methods: tuple = METHODS,
    jobs: int = 1,
) -> EvalReport:
    """Score every method on every test dataset at every level.

    Parameters
    ----------
    checkpoints : dict level_db -> AgentCheckpoint (required iff supDQN is
        among the methods).
    corpora : dict level_db -> list of NoisyDataset (the level's ND1..ND9;
        only test-role datasets are scored).
    out_dir : report directory; receives omega.csv, omega_mean.csv,
        accuracy.csv, and per-level confusion CSVs plus SVG plots.
    """
    levels = sorted(corpora)
    if "supDQN" in methods:
        missing = [lv for lv in levels if lv not in checkpoints]
        if missing:
            raise ValueError(
                "missing agent checkpoint(s) for level(s): "
                + ", ".join(f"{lv:+g} dB" for lv in missing)
            )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = []
    for level in levels:
        for ds in corpora[level]:
            if ds.role == "test":
                tasks.append((level, ds))

    def run(task):
        level, ds = task
        return level, ds, _score_dataset(level, ds, checkpoints.get(level), methods)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    report = EvalReport()
    cells = {}
    for level, ds, cell in results:
        cells[(level, ds.id)] = (ds, cell)
        for method in methods:
            report.omega[(level, ds.id, method)] = cell["omega"][method]
        if "accuracy" in cell:
            report.accuracy[(level, ds.id)] = cell["accuracy"]
            report.confusion[(level, ds.id)] = cell["confusion"]
            report.traces[(level, ds.id)] = (cell["desired"], cell["taken"])
    for method in methods:
        vals = [v for (_, _, m), v in report.omega.items() if m == method and v is not None]
        report.mean_omega[method] = float(np.mean(vals)) if vals else float("nan")

    _write_reports(report, cells, out_dir, methods, levels)
    return report


def _ds_order(item) -> int:
    return int(item[1].lstrip("ND") or 0)


def _write_reports(report, cells, out_dir, methods, levels):
    with open(out_dir / "omega.csv", "w") as fh:
        fh.write("level,dataset,method,omega\n")
        for level in levels:
            ids = sorted((k for k in cells if k[0] == level), key=_ds_order)
            for key in ids:
                for method in methods:
                    v = report.omega[(level, key[1], method)]
                    cellv = "NA" if v is None else f"{v:.6f}"
                    fh.write(f"{level:g},{key[1]},{method},{cellv}\n")
    with open(out_dir / "omega_mean.csv", "w") as fh:
        fh.write("method,mean_omega\n")
        for method in methods:
            fh.write(f"{method},{report.mean_omega[method]:.6f}\n")
    if report.accuracy:
        with open(out_dir / "accuracy.csv", "w") as fh:
            fh.write("level,dataset,accuracy_pct\n")
            for level in levels:
                ids = sorted((k for k in report.accuracy if k[0] == level), key=_ds_order)
                for key in ids:
                    fh.write(f"{level:g},{key[1]},{report.accuracy[key]:.2f}\n")
    for level in levels:
        level_dir = out_dir / level_tag(level)
        level_dir.mkdir(exist_ok=True)
        ids = sorted((k for k in cells if k[0] == level), key=_ds_order)
        for key in ids:
            ds, cell = cells[key]
            if "confusion" in cell:
                with open(level_dir / f"confusion_{ds.id}.csv", "w") as fh:
                    fh.write("noise,HPF,NF,LPF\n")
                    for i, kind in enumerate(("MOA", "PLI", "WGN")):
                        row = ",".join(str(int(v)) for v in cell["confusion"][i])
                        fh.write(f"{kind},{row}\n")
                svg_action_plot(
                    level_dir / f"actions_{ds.id}.svg", cell["desired"], cell["taken"]
                )
                svg_overlay(
                    level_dir / f"overlay_{ds.id}.svg",
                    ds.clean,
                    ds.noisy,
                    cell["filtered"],
                )
            with open(level_dir / f"omega_segments_{ds.id}.csv", "w") as fh:
                fh.write("segment," + ",".join(methods) + "\n")
                n_seg = len(cell["segment_omega"][methods[0]])
                for i in range(n_seg):
                    vals = []
                    for method in methods:
                        v = cell["segment_omega"][method][i]
                        vals.append("NA" if v is None else f"{v:.6f}")
                    fh.write(f"{i}," + ",".join(vals) + "\n")


# ---------------------------------------------------------------------------
# SVG plots (plain polylines, no plotting framework)


def _svg_document(width, height, body) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n' + body + "</svg>\n"
    )


def _polyline(xs, ys, color, dash=None) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="1"{extra} points="{pts}"/>\n'


def svg_action_plot(path, desired, taken) -> None:
    """Step plot of desired vs taken action indices over timesteps."""
    width, height, pad = 640, 200, 30
    n = len(desired)
    xs = [pad + (width - 2 * pad) * i / max(n - 1, 1) for i in range(n)]

    def ys(actions):
        return [height - pad - (height - 2 * pad) * (int(a) - 1) / 2 for a in actions]

    body = _polyline(xs, ys(desired), "#2060c0")
    body += _polyline(xs, ys(taken), "#c03020", dash="4 3")
    for idx, name in enumerate(("HPF", "NF", "LPF")):
        y = height - pad - (height - 2 * pad) * idx / 2
        body += f'<text x="4" y="{y + 4:.0f}" font-size="10">{name}</text>\n'
    body += (
        f'<text x="{pad}" y="12" font-size="10" fill="#2060c0">desired</text>\n'
        f'<text x="{pad + 60}" y="12" font-size="10" fill="#c03020">taken</text>\n'
    )
    with open(path, "w") as fh:
        fh.write(_svg_document(width, height, body))


def svg_overlay(path, clean, noisy, filtered, n_samples: int = 4000) -> None:
    """Clean / noisy / filtered amplitude overlay of the first segments."""
    width, height, pad = 640, 240, 10
    c = _samples(clean)[:n_samples]
    n = _samples(noisy)[:n_samples]
    f = _samples(filtered)[:n_samples]
    span = max(float(np.max(np.abs(np.concatenate([c, n, f])))), 1e-12)
    xs = np.linspace(pad, width - pad, c.size)

    def ys(sig):
        return height / 2 - (height / 2 - pad) * sig / span

    body = _polyline(xs, ys(n), "#b0b0b0")
    body += _polyline(xs, ys(c), "#2060c0")
    body += _polyline(xs, ys(f), "#c03020")
    body += (
        '<text x="12" y="12" font-size="10" fill="#b0b0b0">noisy</text>\n'
        '<text x="52" y="12" font-size="10" fill="#2060c0">clean</text>\n'
        '<text x="92" y="12" font-size="10" fill="#c03020">filtered</text>\n'
    )
    with open(path, "w") as fh:
        fh.write(_svg_document(width, height, body))
