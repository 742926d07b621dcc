"""Noise generators, scaling, per-segment injection, and corpus assembly."""

import dataclasses
import math

import numpy as np
import pytest

from emgdecon.contamination import (
    DESIRED_ACTION,
    ContaminationConfig,
    NoiseKind,
    NoiseSequence,
    alpha,
    build_corpus,
    contaminate,
    gen_moa,
    gen_pli,
    gen_wgn,
    load_corpus,
    measured_snr,
    moa_transients,
    save_corpus,
)
from emgdecon.errors import NumericError
from emgdecon.filters import FilterAction
from emgdecon.signals import RATE, SEGMENT_LEN, synth_clean_semg, welch_psd


def test_desired_action_mapping():
    assert DESIRED_ACTION[NoiseKind.MOA] == FilterAction.HPF
    assert DESIRED_ACTION[NoiseKind.PLI] == FilterAction.NF
    assert DESIRED_ACTION[NoiseKind.WGN] == FilterAction.LPF


def test_noise_sequence():
    seq = NoiseSequence.random(9)
    assert len(seq.kinds) == 64
    assert set(seq.kinds) <= {NoiseKind.MOA, NoiseKind.PLI, NoiseKind.WGN}
    assert seq.kinds == NoiseSequence.random(9).kinds
    with pytest.raises(ValueError):
        NoiseSequence((1, 2, 3), seed=0)


def test_moa_transient_rate():
    taps = moa_transients(60.0, seed=7)
    assert 50 <= len(taps) <= 60
    for tap in taps:
        assert 5.0 <= tap["freq_hz"] <= 15.0
        assert 0.05 <= tap["tau_s"] <= 0.15
        assert 3.0 <= tap["amplitude"] <= 8.0


def test_moa_power_concentrated_low():
    sig = gen_moa(30.0, seed=2)
    psd = welch_psd(sig, window_len=1000)
    low = psd.band_power(0.0, 35.0)
    total = psd.band_power(0.0, 1000.0)
    assert low / total >= 0.95
    assert np.array_equal(sig.samples, gen_moa(30.0, seed=2).samples)
    with pytest.raises(ValueError):
        gen_moa(0.0, seed=2)


def test_pli_is_the_stated_sine():
    sig = gen_pli(1.0)
    t = np.arange(len(sig)) / RATE
    expected = np.sin(2 * np.pi * 50 * t) + np.sin(2 * np.pi * 150 * t) / 3.0
    assert np.allclose(sig.samples, expected, atol=1e-12)
    assert sig.samples[0] == 0.0
    i = int(round(0.005 * RATE))
    assert sig.samples[i] == pytest.approx(1.0 - 1.0 / 3.0, abs=1e-12)
    # periodic with the 50 Hz fundamental (20 ms = 40 samples)
    assert np.allclose(sig.samples[:-40], sig.samples[40:], atol=1e-9)


def test_wgn_power_band():
    for seed in (0, 1, 2, 3):
        sig = gen_wgn(60.0, seed=seed)
        power_db = 10 * math.log10(float(np.mean(sig.samples**2)))
        assert -8.5 <= power_db <= -3.5
        assert abs(float(sig.samples.mean())) < 3 * sig.samples.std() / math.sqrt(len(sig))
    assert np.array_equal(gen_wgn(1.0, 5).samples, gen_wgn(1.0, 5).samples)


def test_alpha_known_values():
    assert alpha(1.0, 1.0, 10 * math.log10(2.0)) == pytest.approx(1.0, abs=1e-12)
    assert alpha(2.0, 0.5, 10.0) == pytest.approx(2.0 / 4.5, abs=1e-12)
    with pytest.raises(NumericError):
        alpha(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        alpha(0.0, 1.0, 5.0)
    with pytest.raises(ValueError):
        alpha(1.0, -1.0, 5.0)


def test_alpha_monotonic():
    targets = np.linspace(0.5, 20.0, 25)
    values = [alpha(1.0, 1.0, t) for t in targets]
    assert np.all(np.diff(values) < 0)
    cleans = np.linspace(0.5, 5.0, 20)
    values = [alpha(c, 1.0, 3.0) for c in cleans]
    assert np.all(np.diff(values) > 0)


def test_measured_snr_cases():
    rng = np.random.default_rng(0)
    clean = rng.standard_normal(1000)
    assert measured_snr(clean, clean) == math.inf
    noise = rng.standard_normal(1000)
    noise *= np.sqrt(np.mean(clean**2) / np.mean(noise**2))
    assert measured_snr(clean, clean + noise) == pytest.approx(0.0, abs=1e-9)
    assert measured_snr(clean, clean + 0.5 * noise) == pytest.approx(
        10 * math.log10(4.0), abs=1e-9
    )
    with pytest.raises(ValueError):
        measured_snr(clean, clean[:999])


def test_contaminate_hits_target_exactly(nd_train):
    clean, noisy = nd_train.clean.samples, nd_train.noisy.samples
    for i in range(64):
        sl = slice(i * SEGMENT_LEN, (i + 1) * SEGMENT_LEN)
        assert measured_snr(clean[sl], noisy[sl]) == pytest.approx(-1.0, abs=1e-9)


def test_contaminate_single_kind_per_segment(nd_train):
    """The injected difference is exactly collinear with one realization."""
    cfg = nd_train.config
    duration = len(nd_train.clean) / RATE
    realizations = {
        NoiseKind.MOA: gen_moa(duration, cfg.seed).samples,
        NoiseKind.PLI: gen_pli(duration).samples,
        NoiseKind.WGN: gen_wgn(duration, cfg.seed + 1).samples,
    }
    diff = nd_train.noisy.samples - nd_train.clean.samples
    for i, kind in enumerate(nd_train.sequence.kinds):
        sl = slice(i * SEGMENT_LEN, (i + 1) * SEGMENT_LEN)
        noise = realizations[kind][sl]
        scale = diff[sl][np.argmax(np.abs(noise))] / noise[np.argmax(np.abs(noise))]
        assert scale > 0
        assert np.allclose(diff[sl], scale * noise, rtol=1e-9, atol=1e-12)


def test_contaminate_sequence_mismatch(clean32):
    short = synth_clean_semg(8.0, seed=1)
    with pytest.raises(ValueError):
        contaminate(short, NoiseSequence.random(0), ContaminationConfig(-1.0))


def test_paper_eq5_mode_used_verbatim(clean32):
    cfg = ContaminationConfig(3.0, alpha_mode="paper_eq5", seed=4)
    ds = contaminate(clean32, NoiseSequence.random(2), cfg)
    diff = ds.noisy.samples - ds.clean.samples
    assert np.any(diff != 0)
    # the verbatim scale is not the exact-SNR scale, so targets are missed
    snrs = [
        measured_snr(
            ds.clean.samples[i * SEGMENT_LEN : (i + 1) * SEGMENT_LEN],
            ds.noisy.samples[i * SEGMENT_LEN : (i + 1) * SEGMENT_LEN],
        )
        for i in range(64)
    ]
    assert not np.allclose(snrs, 3.0, atol=0.5)
    with pytest.raises(NumericError):
        contaminate(clean32, NoiseSequence.random(2), dataclasses.replace(cfg, target_snr_db=0.0))


def test_config_validation():
    with pytest.raises(ValueError):
        ContaminationConfig(math.nan)
    with pytest.raises(ValueError):
        ContaminationConfig(-1.0, alpha_mode="bogus")


def test_build_corpus_layout():
    cfg = ContaminationConfig(-5.0, seed=21)
    datasets = build_corpus(cfg, duration_s=32.0)
    assert [ds.id for ds in datasets] == [f"ND{k}" for k in range(1, 10)]
    assert [ds.role for ds in datasets] == ["train"] + ["test"] * 8
    assert all(ds.config.target_snr_db == -5.0 for ds in datasets)
    # 3 clean signals x 3 sequences: ND1-ND3 share a clean signal, ND1/ND4/ND7
    # share a sequence
    assert np.array_equal(datasets[0].clean.samples, datasets[1].clean.samples)
    assert not np.array_equal(datasets[0].clean.samples, datasets[3].clean.samples)
    assert datasets[0].sequence.kinds == datasets[3].sequence.kinds
    assert datasets[0].sequence.kinds != datasets[1].sequence.kinds
    # distinct noise seeds per dataset
    assert len({ds.config.seed for ds in datasets}) == 9


def test_corpus_reproducible():
    cfg = ContaminationConfig(1.0, seed=33)
    a = build_corpus(cfg, duration_s=32.0)
    b = build_corpus(cfg, duration_s=32.0)
    for da, db in zip(a, b):
        assert np.array_equal(da.noisy.samples, db.noisy.samples)


def test_save_load_corpus(tmp_path):
    cfg = ContaminationConfig(-1.0, seed=2)
    datasets = build_corpus(cfg, n_signals=1, n_sequences=1, duration_s=32.0)
    manifest = save_corpus(tmp_path, datasets)
    assert manifest["format"] == "emgdecon-corpus-v1"
    assert (tmp_path / "manifest.json").exists()
    back = load_corpus(tmp_path)
    assert len(back) == 1
    assert back[0].id == datasets[0].id
    assert back[0].role == datasets[0].role
    assert back[0].sequence.kinds == datasets[0].sequence.kinds
    # storage is float32; equality after one quantization round
    assert np.array_equal(
        back[0].noisy.samples, datasets[0].noisy.samples.astype("<f4").astype(np.float64)
    )


def test_dataset_invariants(nd_train):
    assert len(nd_train.clean) == len(nd_train.noisy)
    assert len(nd_train.desired_actions) == 64
    assert nd_train.desired_actions[0] == DESIRED_ACTION[nd_train.sequence.kinds[0]]
