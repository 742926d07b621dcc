"""Artificial contamination: MOA, PLI and WGN noise injected per segment.

Each 500 ms segment of a clean signal receives exactly one noise kind,
chosen by a seeded random sequence, scaled to a target SNR.  Three clean
signals crossed with three noise sequences give the nine datasets ND1-ND9,
of which ND1 is the training environment.

Two scaling modes exist.  The `standard` mode scales noise amplitude by
sqrt(P_clean / (P_noise * 10^(SNR/10))), which makes every segment's
measured SNR hit the target exactly.  The `paper_eq5` mode applies the
published expression P_c / (P_n * (10^(0.1 * P_req) - 1)) verbatim as an
amplitude multiplier; it is singular at 0 dB and goes negative for negative
targets, so it is kept only for fidelity, not as the default.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import NumericError
from .filters import FilterAction
from .signals import (
    RATE,
    SEGMENT_LEN,
    SampledSignal,
    _raised_cos_rise,
    _shaped_noise,
    read_semg1,
    write_semg1,
)

SEQUENCE_LEN = 64
STANDARD_LEVELS = (-5.0, -1.0, 1.0, 5.0)


class NoiseKind(IntEnum):
    """The three contaminants, with their fixed 1/2/3 codes."""

    MOA = 1
    PLI = 2
    WGN = 3


# The filter intuitively matched to each contaminant; ground truth for
# desired-action accuracy and for the reward labeling rule.
DESIRED_ACTION = {
    NoiseKind.MOA: FilterAction.HPF,
    NoiseKind.PLI: FilterAction.NF,
    NoiseKind.WGN: FilterAction.LPF,
}


@dataclass
class NoiseSequence:
    """Which noise kind hits each of the 64 timesteps."""

    kinds: tuple
    seed: int

    def __post_init__(self):
        self.kinds = tuple(NoiseKind(k) for k in self.kinds)
        if len(self.kinds) != SEQUENCE_LEN:
            raise ValueError(f"noise sequence must cover {SEQUENCE_LEN} timesteps")

    @classmethod
    def random(cls, seed: int) -> "NoiseSequence":
        rng = np.random.default_rng(seed)
        return cls(tuple(int(k) for k in rng.integers(1, 4, SEQUENCE_LEN)), seed)


@dataclass
class ContaminationConfig:
    """Noise level and scaling mode for one corpus."""

    target_snr_db: float
    alpha_mode: str = "standard"
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.target_snr_db):
            raise ValueError("target_snr_db must be finite")
        if self.alpha_mode not in ("standard", "paper_eq5"):
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}")


@dataclass
class NoisyDataset:
    """A clean signal, its contaminated counterpart, and how it was made."""

    id: str
    clean: SampledSignal
    noisy: SampledSignal
    sequence: NoiseSequence
    config: ContaminationConfig
    role: str = "test"

    def __post_init__(self):
        if len(self.clean) != len(self.noisy):
            raise ValueError("clean and noisy signals must have equal length")
        if len(self.clean) // SEGMENT_LEN != SEQUENCE_LEN:
            raise ValueError(f"dataset must hold exactly {SEQUENCE_LEN} segments")
        if self.role not in ("train", "test"):
            raise ValueError("role must be 'train' or 'test'")

    @property
    def desired_actions(self) -> list:
        return [DESIRED_ACTION[k] for k in self.sequence.kinds]


# ---------------------------------------------------------------------------
# noise generators


def _moa_parts(duration_s: float, seed: int):
    """Low-frequency base noise plus the seeded tap-transient table."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * RATE))
    base = _shaped_noise(
        n, RATE, lambda f: np.sqrt(1.0 - _raised_cos_rise(f, 15.0, 20.0)) * (f > 0.2), rng
    )
    base = base / (np.sqrt(np.mean(base**2)) + 1e-30)
    per_minute = int(rng.integers(50, 61))
    n_taps = int(round(duration_s / 60.0 * per_minute))
    taps = [
        {
            "time_s": float(rng.uniform(0.0, duration_s)),
            "freq_hz": float(rng.uniform(5.0, 15.0)),
            "tau_s": float(rng.uniform(0.05, 0.15)),
            "amplitude": float(rng.uniform(3.0, 8.0)),
        }
        for _ in range(n_taps)
    ]
    return base, taps


def moa_transients(duration_s: float, seed: int) -> list:
    """Tap-transient table (time, frequency, decay, amplitude) of `gen_moa`.

    Exposed so the transient rate (50-60 per minute) can be inspected
    without fragile peak detection on the waveform.
    """
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    return _moa_parts(duration_s, seed)[1]


def gen_moa(duration_s: float, seed: int) -> SampledSignal:
    """Motion-artifact surrogate: colored noise below 20 Hz plus tap bursts.

    The base is Gaussian noise low-pass shaped below 20 Hz (unit RMS); on
    top of it, 50-60 randomly timed damped sinusoids per minute (5-15 Hz,
    50-150 ms decay, amplitude 3-8) mimic electrode taps.  At least 95
    percent of the output power sits below 35 Hz.
    """
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    base, taps = _moa_parts(duration_s, seed)
    t = np.arange(base.size) / RATE
    out = base.copy()
    for tap in taps:
        m = t >= tap["time_s"]
        dt = t[m] - tap["time_s"]
        out[m] += (
            tap["amplitude"] * np.exp(-dt / tap["tau_s"]) * np.sin(2.0 * np.pi * tap["freq_hz"] * dt)
        )
    return SampledSignal(out, RATE)


def gen_pli(duration_s: float) -> SampledSignal:
    """Powerline interference: sin(2 pi 50 t) + sin(2 pi 150 t) / 3."""
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    t = np.arange(int(round(duration_s * RATE))) / RATE
    return SampledSignal(
        np.sin(2.0 * np.pi * 50.0 * t) + np.sin(2.0 * np.pi * 150.0 * t) / 3.0, RATE
    )


def gen_wgn(duration_s: float, seed: int) -> SampledSignal:
    """White Gaussian noise at a power level drawn uniformly from [-8, -4] dB."""
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    rng = np.random.default_rng(seed)
    power_db = rng.uniform(-8.0, -4.0)
    sigma = math.sqrt(10.0 ** (power_db / 10.0))
    return SampledSignal(rng.normal(0.0, sigma, int(round(duration_s * RATE))), RATE)


# ---------------------------------------------------------------------------
# scaling and injection


def alpha(p_clean: float, p_noise: float, p_req_db: float) -> float:
    """Published noise-level scale: P_c / (P_n * (10^(0.1 P_req) - 1)).

    Evaluated exactly as written.  Singular at p_req_db == 0 and negative
    for negative targets; see the module docstring for the `standard`
    alternative used by default.
    """
    if p_clean <= 0 or p_noise <= 0:
        raise ValueError("powers must be strictly positive")
    denom = 10.0 ** (0.1 * p_req_db) - 1.0
    if denom == 0.0:
        raise NumericError("p_req_db = 0 dB makes the scale singular")
    return p_clean / (p_noise * denom)


def measured_snr(clean_seg, noisy_seg) -> float:
    """10 log10 of clean power over residual-noise power, in dB.

    Returns +inf when the two inputs are identical (zero noise power).
    """
    clean = clean_seg.samples if hasattr(clean_seg, "samples") else np.asarray(clean_seg)
    noisy = noisy_seg.samples if hasattr(noisy_seg, "samples") else np.asarray(noisy_seg)
    if clean.shape != noisy.shape:
        raise ValueError("segments must have equal length")
    p_noise = float(np.mean((noisy - clean) ** 2))
    if p_noise == 0.0:
        return math.inf
    p_clean = float(np.mean(clean**2))
    if p_clean == 0.0:
        return -math.inf
    return 10.0 * math.log10(p_clean / p_noise)


def contaminate(
    clean: SampledSignal,
    seq: NoiseSequence,
    cfg: ContaminationConfig,
    dataset_id: str = "ND1",
    role: str = "test",
) -> NoisyDataset:
    """Inject one noise kind per segment, scaled per-segment to the target.

    One realization of each noise kind spans the whole signal (so PLI keeps
    phase continuity across segments); segment i receives its sequence's
    kind, scaled by a factor computed from that segment's clean power and
    that noise slice's power.
    """
    n_seg = len(clean) // SEGMENT_LEN
    if n_seg != len(seq.kinds):
        raise ValueError(
            f"sequence/segment count mismatch ({len(seq.kinds)} kinds, {n_seg} segments)"
        )
    duration_s = len(clean) / clean.rate
    realizations = {
        NoiseKind.MOA: gen_moa(duration_s, cfg.seed).samples,
        NoiseKind.PLI: gen_pli(duration_s).samples,
        NoiseKind.WGN: gen_wgn(duration_s, cfg.seed + 1).samples,
    }
    noisy = clean.samples.copy()
    for i, kind in enumerate(seq.kinds):
        sl = slice(i * SEGMENT_LEN, (i + 1) * SEGMENT_LEN)
        noise = realizations[kind][sl]
        p_clean = float(np.mean(clean.samples[sl] ** 2))
        p_noise = float(np.mean(noise**2))
        if p_noise <= 0 or p_clean <= 0:
            raise ValueError(f"degenerate power in segment {i}")
        if cfg.alpha_mode == "standard":
            scale = math.sqrt(p_clean / (p_noise * 10.0 ** (cfg.target_snr_db / 10.0)))
        else:
            scale = alpha(p_clean, p_noise, cfg.target_snr_db)
        noisy[sl] = clean.samples[sl] + scale * noise
    return NoisyDataset(
        dataset_id, clean, SampledSignal(noisy, clean.rate), seq, cfg, role
    )


# ---------------------------------------------------------------------------
# corpus construction and persistence


def _child_seed(root: int, role_code: int, k: int) -> int:
    """Stable derived seed for the (clean signal / sequence / noise) streams."""
    return int(np.random.SeedSequence([root, role_code, k]).generate_state(1)[0])


def build_corpus(
    cfg: ContaminationConfig,
    n_signals: int = 3,
    n_sequences: int = 3,
    duration_s: float = 32.0,
) -> list:
    """Cross clean signals with noise sequences into datasets ND1, ND2, ...

    ND1 (first signal, first sequence) is the training dataset; all others
    are test datasets.  Every dataset draws its own noise realizations from
    seeds derived deterministically from cfg.seed.
    """
    from .signals import synth_clean_semg

    datasets = []
    for i in range(n_signals):
        clean = synth_clean_semg(duration_s, _child_seed(cfg.seed, 0, i))
        for j in range(n_sequences):
            k = i * n_sequences + j
            seq = NoiseSequence.random(_child_seed(cfg.seed, 1, j))
            ds_cfg = replace(cfg, seed=_child_seed(cfg.seed, 2, k))
            dataset_id = f"ND{k + 1}"
            datasets.append(
                contaminate(
                    clean,
                    seq,
                    ds_cfg,
                    dataset_id=dataset_id,
                    role="train" if k == 0 else "test",
                )
            )
    return datasets


def save_corpus(directory, datasets: list) -> dict:
    """Write SEMG1 signal pairs plus a JSON manifest; returns the manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for ds in datasets:
        clean_path = f"{ds.id}_clean.semg1"
        noisy_path = f"{ds.id}_noisy.semg1"
        write_semg1(directory / clean_path, ds.clean)
        write_semg1(directory / noisy_path, ds.noisy)
        entries.append(
            {
                "id": ds.id,
                "role": ds.role,
                "clean_path": clean_path,
                "noisy_path": noisy_path,
                "sequence": [int(k) for k in ds.sequence.kinds],
                "sequence_seed": ds.sequence.seed,
                "config": {
                    "target_snr_db": ds.config.target_snr_db,
                    "alpha_mode": ds.config.alpha_mode,
                    "seed": ds.config.seed,
                },
            }
        )
    manifest = {"format": "emgdecon-corpus-v1", "datasets": entries}
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_corpus(directory) -> list:
    """Load the datasets referenced by a directory's manifest."""
    directory = Path(directory)
    with open(directory / "manifest.json") as fh:
        manifest = json.load(fh)
    datasets = []
    for entry in manifest["datasets"]:
        cfg = ContaminationConfig(**entry["config"])
        seq = NoiseSequence(tuple(entry["sequence"]), entry["sequence_seed"])
        datasets.append(
            NoisyDataset(
                entry["id"],
                read_semg1(directory / entry["clean_path"]),
                read_semg1(directory / entry["noisy_path"]),
                seq,
                cfg,
                entry["role"],
            )
        )
    return datasets
