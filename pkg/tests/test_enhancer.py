import json
import warnings

import numpy as np
import pytest

from gtf0.dsp import Waveform, frame_params, interior_slice
from gtf0.enhancer import (DEFAULT_GAINS_DB, EnhanceConfig, GainProfile, enhance_frame,
                           enhance_signal)
from gtf0.gammatone import BankTruncatedWarning, build_bank, cascade
from gtf0.hht import EemdConfig
from gtf0.mixer import SyntheticVoice, gen_noise, gen_sentence, gen_voice, mix_at_snr

from conftest import FS, tone, wave_of

UNIT = GainProfile((0.0, 0.0, 0.0, 0.0))


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

class TestConfig:
    def test_defaults(self):
        cfg = EnhanceConfig()
        assert cfg.frame_ms == 32 and cfg.overlap == 0.5 and cfg.L == 4
        assert cfg.gain_profile.gains_db == DEFAULT_GAINS_DB
        assert cfg.bandwidth_factor == 0.25 and cfg.f0_range == (70.0, 400.0)
        assert cfg.normalize is None

    def test_linear_gains(self):
        assert np.allclose(GainProfile().linear, [1.778, 1.778, 1.585, 1.334], atol=1e-3)

    def test_attenuation_rejected(self):
        with pytest.raises(ValueError):
            GainProfile((5.0, -1.0))

    def test_length_must_match_L(self):
        with pytest.raises(ValueError):
            EnhanceConfig(L=5)
        cfg = EnhanceConfig(L=5, gain_profile=(3.0,) * 5)
        assert cfg.gain_profile.linear.size == 5

    def test_dict_round_trip(self):
        cfg = EnhanceConfig(L=2, gain_profile=(3.0, 1.0), eemd=EemdConfig(ensemble_size=4, seed=9),
                            normalize="rms")
        d = json.loads(json.dumps(cfg.to_dict()))
        assert d["gains_db"] == [3.0, 1.0]
        assert EnhanceConfig.from_dict(d) == cfg

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            EnhanceConfig.from_dict({"gainz": [1]})

    def test_with_seed(self):
        cfg = EnhanceConfig().with_seed(42)
        assert cfg.eemd.seed == 42 and cfg.eemd.ensemble_size == 50

    def test_bad_normalize(self):
        with pytest.raises(ValueError):
            EnhanceConfig(normalize="peak")


# ---------------------------------------------------------------------------
# Single frame
# ---------------------------------------------------------------------------

class TestEnhanceFrame:
    def test_unit_gain_identity(self, rng):
        x = rng.standard_normal(512)
        y = enhance_frame(x, 150.0, EnhanceConfig(gain_profile=UNIT))
        assert np.max(np.abs(y - x)) <= 1e-9 * np.max(np.abs(x))

    def test_rearranged_form(self, rng):
        x = rng.standard_normal(512)
        cfg = EnhanceConfig()
        out = cascade(x, build_bank(170.0, 4, FS))
        expect = x + np.sum((cfg.gain_profile.linear[:, None] - 1) * out.bands, axis=0)
        y = enhance_frame(x, 170.0, cfg)
        assert np.max(np.abs(y - expect)) <= 1e-9 * np.max(np.abs(x))

    @pytest.mark.parametrize("f0", [100.0, 200.0, 300.0])
    def test_tone_at_f0_gets_g1(self, f0):
        x = tone(f0, 0.128)
        y = enhance_frame(x, f0, EnhanceConfig())
        sl = slice(512, -512)  # clear of convolution edges
        ratio = np.sqrt(np.mean(y[sl] ** 2) / np.mean(x[sl] ** 2))
        assert ratio == pytest.approx(10 ** (5.0 / 20), rel=0.05)

    def test_length_preserved(self, rng):
        x = rng.standard_normal(333)
        assert enhance_frame(x, 120.0).shape == x.shape

    def test_truncation_warning(self, rng):
        with pytest.warns(BankTruncatedWarning):
            enhance_frame(rng.standard_normal(512), 3000.0)


# ---------------------------------------------------------------------------
# Signal pipeline
# ---------------------------------------------------------------------------

class TestEnhanceSignal:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_unit_gain_identity(self, seed, fast_cfg):
        x = mix_at_snr(gen_sentence(seed, duration=1.0), gen_noise("white", 2.0, FS, seed), 5.0, seed)
        cfg = EnhanceConfig.from_dict({**fast_cfg.to_dict(), "gains_db": [0, 0, 0, 0]})
        y, rep = enhance_signal(x, cfg)
        assert rep.enhanced_frames  # the identity is not vacuous
        sl = interior_slice(len(x), rep.frame_len)
        assert np.max(np.abs(y.samples[sl] - x.samples[sl])) <= 1e-9 * np.max(np.abs(x.samples))

    def test_white_noise_passthrough(self, fast_cfg):
        x = gen_noise("white", 1.0, FS, 3)
        y, rep = enhance_signal(Waveform(0.1 * x.samples, FS), fast_cfg)
        assert not rep.voicing.any()
        sl = interior_slice(len(x), rep.frame_len)
        assert np.max(np.abs(y.samples[sl] - 0.1 * x.samples[sl])) <= 1e-9

    def test_report(self, fast_cfg):
        x = gen_voice(SyntheticVoice((140.0,), duration=0.5))
        y, rep = enhance_signal(x, fast_cfg)
        assert len(y) == len(x)
        assert (rep.frame_len, rep.hop) == frame_params(FS, 32, 0.5)
        voiced = [f for f in rep.frames if f.voiced]
        assert voiced and all(f.f0_hz == pytest.approx(140.0, rel=0.05) for f in voiced if f.f0_hz)
        assert all(f.gains_db == list(DEFAULT_GAINS_DB) for f in voiced if f.f0_hz)
        assert all(not f.gains_db for f in rep.frames if not f.voiced)
        d = json.loads(rep.to_json())
        assert d["frame_len"] == 512 and len(d["frames"]) == len(rep.frames)
        assert np.isnan(rep.f0_track[~rep.voicing]).all()

    def test_deterministic(self, fast_cfg):
        x = mix_at_snr(gen_sentence(1, duration=1.0), gen_noise("speech_shaped", 2.0, FS, 1), 0.0, 1)
        a, _ = enhance_signal(x, fast_cfg)
        b, _ = enhance_signal(x, fast_cfg)
        assert np.array_equal(a.samples, b.samples)

    def test_first_harmonic_emphasis(self, fast_cfg):
        x = mix_at_snr(gen_voice(SyntheticVoice((160.0,), n_harmonics=12, harmonic_rolloff=1.0,
                                                duration=1.0)),
                       gen_noise("speech_shaped", 2.0, FS, 0), 0.0, 0)
        y, rep = enhance_signal(x, fast_cfg)
        from gtf0.dsp import frame_array, hann
        fx = frame_array(x.samples, 512, 256) * hann(512)
        fy = frame_array(y.samples, 512, 256) * hann(512)
        k = int(round(160.0 * 8192 / FS))
        gains = [20 * np.log10(abs(np.fft.rfft(fy[i], 8192)[k]) / abs(np.fft.rfft(fx[i], 8192)[k]))
                 for i in rep.enhanced_frames[1:-1]]
        assert 4.0 <= np.mean(gains) <= 6.0

    def test_normalize_rms(self, fast_cfg):
        x = gen_voice(SyntheticVoice((180.0,), duration=0.5))
        cfg = EnhanceConfig.from_dict({**fast_cfg.to_dict(), "normalize": "rms"})
        y, _ = enhance_signal(x, cfg)
        assert y.power() == pytest.approx(x.power(), rel=1e-9)
        y0, _ = enhance_signal(x, fast_cfg)
        assert y0.power() > x.power()

    def test_too_short(self):
        with pytest.raises(ValueError, match="too short"):
            enhance_signal(wave_of(np.ones(100)))
