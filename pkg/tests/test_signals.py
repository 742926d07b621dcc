"""Signal substrate: generator, segmentation, Welch PSD, purity, file formats."""

import numpy as np
import pytest

from emgdecon.signals import (
    PURITY_THRESHOLDS,
    RATE,
    SEGMENT_LEN,
    PowerSpectrum,
    QualityReport,
    SampledSignal,
    Segment,
    purity_check,
    read_semg1,
    read_signal_csv,
    segment_signal,
    synth_clean_semg,
    welch_psd,
    write_semg1,
    write_signal_csv,
)


def test_constants():
    assert RATE == 2000
    assert SEGMENT_LEN == 1000
    assert PURITY_THRESHOLDS == {"smr": 12.0, "snr": 15.0, "dpr": 30.0, "deformation": 1.4}


def test_sampled_signal_validation():
    sig = SampledSignal(np.zeros(4000), 2000.0)
    assert len(sig) == 4000
    assert sig.duration_s == 2.0
    with pytest.raises(ValueError):
        SampledSignal(np.array([1.0, np.nan]), 2000.0)
    with pytest.raises(ValueError):
        SampledSignal(np.zeros((2, 100)), 2000.0)
    with pytest.raises(ValueError):
        SampledSignal(np.zeros(100), 0.0)


def test_segment_validation():
    Segment(np.zeros(1000), 2000.0, index=0)
    with pytest.raises(ValueError):
        Segment(np.zeros(999), 2000.0, index=0)
    with pytest.raises(ValueError):
        Segment(np.zeros(1000), 1000.0, index=0)
    with pytest.raises(ValueError):
        Segment(np.zeros(1000), 2000.0, index=-1)


def test_generator_basic_shape(clean32):
    assert clean32.rate == RATE
    assert len(clean32) == 64000
    assert abs(float(clean32.samples.mean())) < 1e-12
    assert float(np.sqrt(np.mean(clean32.samples**2))) == pytest.approx(1.0, abs=1e-12)


def test_generator_deterministic():
    a = synth_clean_semg(4.0, seed=42)
    b = synth_clean_semg(4.0, seed=42)
    c = synth_clean_semg(4.0, seed=43)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    with pytest.raises(ValueError):
        synth_clean_semg(0.0, seed=1)


def test_segment_signal_counts(clean32):
    segs = segment_signal(clean32)
    assert len(segs) == 64
    assert [s.index for s in segs] == list(range(64))
    one = segment_signal(SampledSignal(clean32.samples[:1000], RATE))
    assert len(one) == 1
    assert np.array_equal(one[0].samples, clean32.samples[:1000])
    with pytest.warns(UserWarning):
        partial = segment_signal(SampledSignal(clean32.samples[:1500], RATE))
    assert len(partial) == 1
    with pytest.raises(ValueError):
        segment_signal(SampledSignal(clean32.samples[:999], RATE))


def test_segments_concatenate_back(clean32):
    segs = segment_signal(clean32)
    rebuilt = np.concatenate([s.samples for s in segs])
    assert np.array_equal(rebuilt, clean32.samples)


def test_welch_parseval_sine():
    t = np.arange(1000) / RATE
    x = np.sin(2.0 * np.pi * 50.0 * t)
    psd = welch_psd(x, window_len=256, overlap=0.5)
    peak = psd.freqs[int(np.argmax(psd.power))]
    assert abs(peak - 50.0) <= psd.df
    total = float(np.sum(psd.power) * psd.df)
    assert total == pytest.approx(float(np.mean(x**2)), rel=0.05)
    assert total == pytest.approx(0.5, rel=0.05)


def test_welch_white_noise_and_zero():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(8000)
    psd = welch_psd(x, window_len=256)
    assert float(np.sum(psd.power) * psd.df) == pytest.approx(float(np.var(x)), rel=0.10)
    zero = welch_psd(np.zeros(1000))
    assert np.all(zero.power == 0.0)


def test_welch_scaling_property():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(2000)
    base = welch_psd(x, window_len=250)
    scaled = welch_psd(3.0 * x, window_len=250)
    assert np.allclose(scaled.power, 9.0 * base.power, rtol=1e-12)


def test_welch_preconditions():
    x = np.zeros(1000)
    with pytest.raises(ValueError):
        welch_psd(x, window_len=4)
    with pytest.raises(ValueError):
        welch_psd(x, window_len=2000)
    with pytest.raises(ValueError):
        welch_psd(x, overlap=1.0)


def test_power_spectrum_band_power_inclusive():
    psd = PowerSpectrum(np.arange(0.0, 10.0, 2.0), np.ones(5))
    assert psd.df == 2.0
    assert psd.band_power(0.0, 4.0) == pytest.approx(3 * 2.0)
    assert psd.band_power(0.0, 4.0, include_hi=False) == pytest.approx(2 * 2.0)
    with pytest.raises(ValueError):
        PowerSpectrum(np.array([0.0, 0.0, 1.0]), np.ones(3))
    with pytest.raises(ValueError):
        PowerSpectrum(np.array([0.0, 1.0]), np.array([1.0, -1.0]))


def test_purity_clean_signal(clean32):
    report = purity_check(clean32)
    assert len(report.good) == 32
    assert report.percent_good >= 90.0
    assert np.all(np.isfinite(report.smr))


def test_purity_rejects_contaminated(nd_train):
    report = purity_check(nd_train.noisy)
    assert report.percent_good < 90.0


def test_purity_too_short():
    with pytest.raises(ValueError):
        purity_check(SampledSignal(np.ones(1999), RATE))


def test_quality_report_percent():
    good = np.array([True] * 62 + [False] * 2)
    metric = np.zeros(64)
    report = QualityReport(good, metric, metric, metric, metric)
    assert report.percent_good == pytest.approx(96.875)


def test_semg1_roundtrip(tmp_path, clean32):
    path = tmp_path / "x.semg1"
    write_semg1(path, clean32)
    back = read_semg1(path)
    assert back.rate == clean32.rate
    assert np.array_equal(back.samples, clean32.samples.astype("<f4").astype(np.float64))
    raw = path.read_bytes()
    assert raw[:6] == b"SEMG1\x00"
    assert int.from_bytes(raw[6:10], "little") == 2000
    assert int.from_bytes(raw[10:18], "little") == len(clean32)


def test_semg1_rejects_garbage(tmp_path):
    path = tmp_path / "bad.semg1"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(ValueError):
        read_semg1(path)
    truncated = tmp_path / "trunc.semg1"
    good = tmp_path / "good.semg1"
    write_semg1(good, SampledSignal(np.ones(100), RATE))
    truncated.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(ValueError):
        read_semg1(truncated)


def test_signal_csv_roundtrip(tmp_path):
    sig = SampledSignal(np.array([0.0, 1.5, -2.25]), RATE)
    path = tmp_path / "sig.csv"
    write_signal_csv(path, sig)
    assert path.read_text().splitlines()[0] == "sample"
    back = read_signal_csv(path)
    assert np.allclose(back.samples, sig.samples, rtol=1e-9)
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n1.0\n")
    with pytest.raises(ValueError):
        read_signal_csv(bad)
