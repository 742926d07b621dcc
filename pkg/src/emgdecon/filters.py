"""Elliptic IIR filters for the agent's three actions, plus denoising baselines.

Three cascaded-biquad designs cover the three contaminant bands: a 20 Hz
high-pass against motion artifact, a pair of narrow band-stops at 50 and
150 Hz against powerline interference, and a 500 Hz low-pass against
broadband noise.  All share 1 dB passband ripple and 80 dB stopband
attenuation.  The module also provides orthogonal wavelet denoisers (db4,
sym4) with soft universal thresholding, and the five static baselines used
for comparison scoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy import signal as sps

from .errors import NumericError
from .signals import RATE, SEGMENT_LEN, SampledSignal, Segment

if TYPE_CHECKING:
    from .contamination import NoisyDataset

BASELINE_NAMES = ("WD_db4", "WD_sym4", "NF", "LPF", "HPF")


class FilterAction(IntEnum):
    """The agent's three actions, with their fixed 1/2/3 encoding."""

    HPF = 1
    NF = 2
    LPF = 3


# ---------------------------------------------------------------------------
# IIR design and application


@dataclass
class IirFilter:
    """A stable cascade of second-order sections.

    Attributes
    ----------
    sos : ndarray, shape (n_sections, 6)
        Rows of (b0, b1, b2, a0, a1, a2) with a0 == 1.
    kind : str
        Design label (HPF, NF, LPF, or custom).
    rate : float
        Sampling rate the design targets, Hz.
    metadata : dict
        Design parameters (cutoffs, ripple, attenuation, order).
    """

    sos: np.ndarray
    kind: str = "custom"
    rate: float = float(RATE)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sos = np.atleast_2d(np.asarray(self.sos, dtype=np.float64))
        if self.sos.shape[1] != 6:
            raise ValueError("sos rows must hold 6 coefficients")
        if not np.allclose(self.sos[:, 3], 1.0):
            raise ValueError("each section must be normalized to a0 == 1")
        for section in self.sos:
            poles = np.roots(section[3:])
            if poles.size and np.any(np.abs(poles) >= 1.0):
                raise NumericError("unstable section (pole on or outside unit circle)")

    @property
    def n_sections(self) -> int:
        return self.sos.shape[0]


def design_elliptic(kind: FilterAction, rate: float = RATE) -> IirFilter:
    """Design one of the three action filters for a 2 kHz rate.

    HPF: order-4 high-pass, 20 Hz edge.  NF: two cascaded order-4 band-stops
    with 5 Hz wide stopbands around 50 Hz and 150 Hz.  LPF: order-5 low-pass,
    500 Hz edge (order 5 is needed to reach 60 dB of attenuation by 800 Hz).
    All elliptic, 1 dB ripple, 80 dB attenuation, bilinear-transformed from
    the analog prototype with frequency pre-warping (scipy's `ellip`).
    """
    if rate != RATE:
        raise ValueError(f"unsupported rate {rate}; designs are fixed at {RATE} Hz")
    kind = FilterAction(kind)
    ripple, atten = 1.0, 80.0
    if kind == FilterAction.HPF:
        sos = sps.ellip(4, ripple, atten, 20.0, btype="highpass", fs=rate, output="sos")
        meta = {"edge_hz": 20.0, "order": 4}
    elif kind == FilterAction.LPF:
        sos = sps.ellip(5, ripple, atten, 500.0, btype="lowpass", fs=rate, output="sos")
        meta = {"edge_hz": 500.0, "order": 5}
    else:
        stops = [[47.5, 52.5], [147.5, 152.5]]
        sos = np.vstack(
            [sps.ellip(4, ripple, atten, s, btype="bandstop", fs=rate, output="sos") for s in stops]
        )
        meta = {"stopbands_hz": stops, "order": 4}
    meta.update({"ripple_db": ripple, "atten_db": atten})
    return IirFilter(sos, kind=kind.name, rate=rate, metadata=meta)


@lru_cache(maxsize=None)
def get_filter(kind: FilterAction) -> IirFilter:
    """Cached access to the three fixed designs (treat the result as frozen)."""
    return design_elliptic(kind)


def zero_state(f: IirFilter) -> np.ndarray:
    """Initial (all-zero) direct-form-II-transposed state for a filter."""
    return np.zeros((f.n_sections, 2))


def apply_filter(f: IirFilter, seg, carry: Optional[np.ndarray] = None):
    """Causally filter one segment, optionally carrying state across calls.

    Parameters
    ----------
    f : IirFilter
    seg : Segment or ndarray
        Input samples; a Segment keeps its index on output.
    carry : ndarray, optional
        State returned by a previous call; zero state when omitted.

    Returns
    -------
    (filtered, state) : same container type as the input, plus the updated
    filter state for streaming across consecutive segments.
    """
    if carry is None:
        carry = zero_state(f)
    if isinstance(seg, Segment):
        out, state = sps.sosfilt(f.sos, seg.samples, zi=carry)
        return Segment(out, seg.rate, seg.index), state
    x = np.asarray(seg, dtype=np.float64)
    out, state = sps.sosfilt(f.sos, x, zi=carry)
    return out, state


def filter_signal(f: IirFilter, sig: SampledSignal) -> SampledSignal:
    """Filter a whole signal in one streaming pass from zero state."""
    out, _ = sps.sosfilt(f.sos, sig.samples, zi=zero_state(f))
    return SampledSignal(out, sig.rate)


def magnitude_response(f: IirFilter, freqs) -> np.ndarray:
    """Magnitude response in dB at the given frequencies.

    Evaluated independently of scipy's frequency-response helpers: each
    section's transfer function is evaluated on the unit circle and the
    per-section decibel values are summed.  Magnitudes are floored at
    -400 dB per section to keep logs finite.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    if np.any(freqs < 0) or np.any(freqs > f.rate / 2):
        raise ValueError("frequencies must lie within [0, rate/2]")
    w = 2.0 * np.pi * freqs / f.rate
    z = np.exp(-1j * w)
    total = np.zeros(freqs.shape)
    for sec in f.sos:
        num = sec[0] + sec[1] * z + sec[2] * z**2
        den = sec[3] + sec[4] * z + sec[5] * z**2
        mag = np.abs(num / den)
        total += 20.0 * np.log10(np.maximum(mag, 1e-20))
    return total


def filter_to_json(f: IirFilter) -> str:
    """Serialize a design (sections plus metadata) for golden-file tests."""
    return json.dumps(
        {
            "kind": f.kind,
            "rate": f.rate,
            "metadata": f.metadata,
            "sos": [[float(c) for c in row] for row in f.sos],
        },
        indent=2,
        sort_keys=True,
    )


def filter_from_json(text: str) -> IirFilter:
    doc = json.loads(text)
    return IirFilter(
        np.array(doc["sos"]), kind=doc["kind"], rate=doc["rate"], metadata=doc["metadata"]
    )


# ---------------------------------------------------------------------------
# orthogonal wavelets (periodized) and denoising

# Scaling (analysis low-pass) coefficients of the 8-tap Daubechies-4 and
# Symlet-4 orthonormal wavelets; each sums to sqrt(2).
_DEC_LO = {
    "db4": np.array(
        [
            0.23037781330885523,
            0.7148465705525415,
            0.6308807679295904,
            -0.02798376941698385,
            -0.18703481171888114,
            0.030841381835986965,
            0.032883011666982945,
            -0.010597401784997278,
        ]
    ),
    "sym4": np.array(
        [
            -0.07576571478927333,
            -0.02963552764599851,
            0.49761866763201545,
            0.8037387518059161,
            0.29785779560527736,
            -0.09921954357684722,
            -0.012603967262037833,
            0.0322231006040427,
        ]
    ),
}


def _qmf(h: np.ndarray) -> np.ndarray:
    """Quadrature-mirror high-pass for an orthonormal scaling filter."""
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


def _dwt_step(x: np.ndarray, h: np.ndarray, g: np.ndarray):
    n = x.size
    if n % 2:
        raise ValueError("periodized DWT needs an even input length")
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(h.size)[None, :]) % n
    windows = x[idx]
    return windows @ h, windows @ g


def _idwt_step(approx: np.ndarray, detail: np.ndarray, h: np.ndarray, g: np.ndarray):
    n = 2 * approx.size
    pos = (2 * np.arange(approx.size)[:, None] + np.arange(h.size)[None, :]) % n
    x = np.zeros(n)
    np.add.at(x, pos, np.outer(approx, h) + np.outer(detail, g))
    return x


def wavedec(x: np.ndarray, family: str, levels: int):
    """Multi-level periodized DWT.  Returns (approximation, [d1, d2, ...])."""
    h = _DEC_LO[family]
    g = _qmf(h)
    approx = np.asarray(x, dtype=np.float64)
    details = []
    for _ in range(levels):
        approx, d = _dwt_step(approx, h, g)
        details.append(d)
    return approx, details


def waverec(approx: np.ndarray, details, family: str) -> np.ndarray:
    """Inverse of `wavedec`."""
    h = _DEC_LO[family]
    g = _qmf(h)
    x = approx
    for d in reversed(details):
        x = _idwt_step(x, d, h, g)
    return x


@dataclass
class WaveletDenoiser:
    """Wavelet shrinkage settings: family, depth, and threshold rule.

    Construction verifies perfect reconstruction of the analysis/synthesis
    pair on a random probe (orthonormality check, error <= 1e-8).
    """

    family: str = "db4"
    levels: int = 3
    threshold_rule: str = "universal-soft"

    def __post_init__(self):
        if self.family not in _DEC_LO:
            raise ValueError(f"unknown wavelet family {self.family!r}")
        if self.threshold_rule != "universal-soft":
            raise ValueError(f"unknown threshold rule {self.threshold_rule!r}")
        if not 1 <= self.levels or SEGMENT_LEN % (2**self.levels):
            raise ValueError("invalid level count for 1000-sample segments")
        probe = np.random.default_rng(0).standard_normal(SEGMENT_LEN)
        approx, details = wavedec(probe, self.family, self.levels)
        err = np.max(np.abs(waverec(approx, details, self.family) - probe))
        if err > 1e-8:
            raise NumericError(f"wavelet pair fails perfect reconstruction ({err:.2e})")


def wavelet_denoise(seg, spec: WaveletDenoiser) -> "Segment | np.ndarray":
    """Soft-threshold wavelet shrinkage of one segment.

    The universal threshold sigma * sqrt(2 ln N) uses the robust noise
    estimate sigma = median(|d1|) / 0.6745 from the finest detail level.
    """
    is_segment = isinstance(seg, Segment)
    x = seg.samples if is_segment else np.asarray(seg, dtype=np.float64)
    approx, details = wavedec(x, spec.family, spec.levels)
    sigma = np.median(np.abs(details[0])) / 0.6745
    threshold = sigma * np.sqrt(2.0 * np.log(x.size))
    details = [np.sign(d) * np.maximum(np.abs(d) - threshold, 0.0) for d in details]
    out = waverec(approx, details, spec.family)
    if is_segment:
        return Segment(out, seg.rate, seg.index)
    return out


# ---------------------------------------------------------------------------
# static baselines


def static_baseline(name: str, dataset: "NoisyDataset") -> SampledSignal:
    """Apply one fixed method uniformly to every segment of a noisy signal.

    IIR baselines (HPF, NF, LPF) run as a single streaming pass; wavelet
    baselines (WD_db4, WD_sym4) denoise each 1000-sample segment on its own,
    since the threshold is a per-segment statistic.
    """
    if name not in BASELINE_NAMES:
        raise ValueError(f"unknown baseline {name!r}; expected one of {BASELINE_NAMES}")
    noisy = dataset.noisy
    if name.startswith("WD_"):
        spec = WaveletDenoiser(family=name[3:])
        n_seg = len(noisy.samples) // SEGMENT_LEN
        parts = [
            wavelet_denoise(noisy.samples[i * SEGMENT_LEN : (i + 1) * SEGMENT_LEN], spec)
            for i in range(n_seg)
        ]
        return SampledSignal(np.concatenate(parts), noisy.rate)
    return filter_signal(get_filter(FilterAction[name]), noisy)
