"""The six spectral observations that form the RL state and the purity gate.

All ratios come from a Welch density estimate with 2 Hz resolution (1000
sample windows at 2 kHz), which places the powerline bins exactly on the
grid.  The EMG band B is 20-450 Hz.  With P(f) the estimated density:

    SMR = 10 log10( P[B] / P[0, 20] )          motion-artifact band ratio
    SNR = 10 log10( P[B] / P[500, 1000] )      broadband high-frequency ratio
    SPR = 10 log10( P[B minus PLI] / P[PLI] )  PLI = 50k +- 2.5 Hz, k = 1..3
    SER = 10 log10( P[B] / P[5, 15] )          low-band (ECG-range) ratio
    DPR = 10 log10( max P over B / median P over B )
    DEF = max(MNF, MNF_ref) / min(MNF, MNF_ref), MNF over 0-1000 Hz

Log ratios are clamped to [-80, +80] dB so silent bands cannot produce
infinities.  Every feature is scale-invariant.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .filters import FilterAction, apply_filter, get_filter
from .signals import PowerSpectrum, Segment, synth_clean_semg, welch_psd

FEATURE_NAMES = ("DEF", "DPR", "SMR", "SNR", "SPR", "SER")

EMG_BAND = (20.0, 450.0)
MOA_BAND = (0.0, 20.0)
NOISE_BAND = (500.0, 1000.0)
ECG_BAND = (5.0, 15.0)
PLI_HALF_WIDTH = 2.5
LOG_CLAMP_DB = 80.0

# Spectral settings shared by feature extraction and the purity gate.
PSD_WINDOW = 1000
PSD_OVERLAP = 0.5


@dataclass
class FeatureVector:
    """One observation of the environment, in fixed serialization order."""

    deformation: float
    dpr: float
    smr: float
    snr: float
    spr: float
    ser: float

    def as_array(self) -> np.ndarray:
        """(DEF, DPR, SMR, SNR, SPR, SER), the order every model consumes."""
        return np.array(
            [self.deformation, self.dpr, self.smr, self.snr, self.spr, self.ser]
        )

    @classmethod
    def from_array(cls, arr) -> "FeatureVector":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (6,):
            raise ValueError("feature array must hold exactly 6 values")
        return cls(*[float(v) for v in arr])


@dataclass
class SpectralReference:
    """Clean-generator reference spectrum used by the deformation ratio."""

    mnf: float
    psd: PowerSpectrum

    def __post_init__(self):
        if not EMG_BAND[0] <= self.mnf <= EMG_BAND[1]:
            raise ValueError("reference mean frequency must lie inside the EMG band")


def make_reference(duration_s: float = 120.0, seed: int = 12345) -> SpectralReference:
    """Derive the DEF reference from a long clean-generator sample."""
    sig = synth_clean_semg(duration_s, seed)
    psd = welch_psd(sig, window_len=PSD_WINDOW, overlap=PSD_OVERLAP)
    mnf = float(np.sum(psd.freqs * psd.power) / np.sum(psd.power))
    return SpectralReference(mnf, psd)


@lru_cache(maxsize=1)
def default_reference() -> SpectralReference:
    return make_reference()


def _log_ratio(num: float, den: float) -> float:
    """10 log10(num/den), clamped to +-80 dB, tolerant of empty bands."""
    if den <= 0.0:
        return LOG_CLAMP_DB
    if num <= 0.0:
        return -LOG_CLAMP_DB
    return float(np.clip(10.0 * np.log10(num / den), -LOG_CLAMP_DB, LOG_CLAMP_DB))


def _psd_metrics(psd: PowerSpectrum, ref: SpectralReference) -> dict:
    f, p = psd.freqs, psd.power
    in_band = (f >= EMG_BAND[0]) & (f <= EMG_BAND[1])
    pli = np.zeros_like(f, dtype=bool)
    for k in (1, 2, 3):
        centre = 50.0 * k
        pli |= (f >= centre - PLI_HALF_WIDTH) & (f <= centre + PLI_HALF_WIDTH)
    df = psd.df
    band_power = float(np.sum(p[in_band]) * df)
    mnf = float(np.sum(f * p) / np.sum(p))
    return {
        "smr": _log_ratio(band_power, psd.band_power(*MOA_BAND)),
        "snr": _log_ratio(band_power, psd.band_power(*NOISE_BAND)),
        "spr": _log_ratio(
            float(np.sum(p[in_band & ~pli]) * df), float(np.sum(p[pli]) * df)
        ),
        "ser": _log_ratio(band_power, psd.band_power(*ECG_BAND)),
        "dpr": _log_ratio(float(np.max(p[in_band])), float(np.median(p[in_band]))),
        "deformation": max(mnf, ref.mnf) / min(mnf, ref.mnf),
        "mnf": mnf,
    }


def window_metrics(samples, ref: Optional[SpectralReference] = None) -> dict:
    """Spectral quality metrics of an arbitrary window (>= 1000 samples).

    Used by the purity gate on 1 s windows; returns the same formulas as
    `extract_features`, keyed by lowercase name, plus the window's MNF.
    """
    if ref is None:
        ref = default_reference()
    x = np.asarray(samples, dtype=np.float64)
    if not np.any(x):
        raise ValueError("window has zero energy")
    psd = welch_psd(x, window_len=PSD_WINDOW, overlap=PSD_OVERLAP)
    return _psd_metrics(psd, ref)


def extract_features(seg: Segment, ref: Optional[SpectralReference] = None) -> FeatureVector:
    """Observation vector of one 500 ms segment (pre- or post-filter)."""
    if ref is None:
        ref = default_reference()
    if not np.any(seg.samples):
        raise ValueError("segment has zero energy")
    psd = welch_psd(seg, window_len=PSD_WINDOW, overlap=PSD_OVERLAP)
    m = _psd_metrics(psd, ref)
    return FeatureVector(
        deformation=m["deformation"],
        dpr=m["dpr"],
        smr=m["smr"],
        snr=m["snr"],
        spr=m["spr"],
        ser=m["ser"],
    )


def affected_features(
    seg: Segment, action: FilterAction, ref: Optional[SpectralReference] = None
) -> FeatureVector:
    """Observation of the segment after applying the chosen action's filter.

    The segment is filtered from zero state (actions are independent across
    timesteps), then measured like any other segment.
    """
    filtered, _ = apply_filter(get_filter(FilterAction(action)), seg)
    return extract_features(filtered, ref)


def write_feature_csv(path, matrix, labels=None) -> None:
    """Write a feature matrix (rows of 6) as CSV in the fixed column order.

    An optional `labels` sequence adds a trailing `label` column.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.shape[1] != len(FEATURE_NAMES):
        raise ValueError("feature matrix must have 6 columns")
    if labels is not None and len(labels) != matrix.shape[0]:
        raise ValueError("labels length must match row count")
    with open(path, "w") as fh:
        header = ",".join(FEATURE_NAMES)
        fh.write(header + (",label" if labels is not None else "") + "\n")
        for i, row in enumerate(matrix):
            line = ",".join(f"{v:.10g}" for v in row)
            if labels is not None:
                line += f",{labels[i]}"
            fh.write(line + "\n")
