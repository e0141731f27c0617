import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_toeplitz
from scipy.signal import butter, sosfiltfilt

from gtf0.metrics import MetricReport, evaluate, gross_error, levinson, mae, seg_snr
from gtf0.metrics.estoi import estoi, remove_silent_frames, third_octave_bands
from gtf0.metrics.quality import autocorr, llr, llr_frames, trimmed_mean, wss, wss_frames
from gtf0.mixer import SyntheticVoice, gen_noise, gen_sentence, gen_voice, mix_at_snr

from conftest import FS, wave_of


@pytest.fixture(scope="module")
def sentence():
    return gen_sentence(11, duration=2.0)


# ---------------------------------------------------------------------------
# ESTOI
# ---------------------------------------------------------------------------

class TestEstoi:
    def test_identity(self, sentence):
        assert estoi(sentence.samples, sentence.samples) == pytest.approx(1.0, abs=1e-6)

    def test_independent_noise(self):
        scores = [estoi(gen_sentence(s, duration=3.0).samples,
                        gen_noise("white", 3.0, FS, 100 + s).samples) for s in range(3)]
        assert max(abs(v) for v in scores) < 0.1

    def test_noise_lowers_score(self, sentence):
        n = gen_noise("speech_shaped", 3.0, FS, 0)
        s5 = estoi(sentence.samples, mix_at_snr(sentence, n, 5.0).samples)
        s_5 = estoi(sentence.samples, mix_at_snr(sentence, n, -5.0).samples)
        assert 1.0 > s5 > s_5 > 0.0

    def test_gain_invariant(self, sentence, rng):
        y = sentence.samples + 0.1 * rng.standard_normal(len(sentence))
        a = estoi(sentence.samples, y)
        assert estoi(3 * sentence.samples, 3 * y) == pytest.approx(a, abs=1e-9)
        # ESTOI normalizes test level on its own
        assert estoi(sentence.samples, 7 * y) == pytest.approx(a, abs=1e-9)

    def test_length_alignment(self, sentence):
        x = sentence.samples
        assert estoi(x, np.concatenate([x, np.ones(500)])) == pytest.approx(1.0, abs=1e-6)

    def test_band_matrix(self):
        obm = third_octave_bands()
        assert obm.shape == (15, 257)
        assert np.all(obm.sum(axis=0) <= 1)  # bands do not overlap

    def test_silent_frames_dropped(self, rng):
        x = np.concatenate([rng.standard_normal(5000), np.zeros(5000), rng.standard_normal(5000)])
        xs, _ = remove_silent_frames(x, x)
        assert xs.size < 12000

    def test_too_short(self):
        with pytest.raises(ValueError, match="shorter than one ESTOI segment"):
            estoi(np.ones(3000), np.ones(3000))


# ---------------------------------------------------------------------------
# LLR and WSS
# ---------------------------------------------------------------------------

class TestLpc:
    def test_levinson_matches_toeplitz_solve(self, rng):
        r = autocorr(rng.standard_normal(480) * np.hanning(480), 16)
        a, err = levinson(r, 16)
        ref = solve_toeplitz(r[:16], -r[1:17])
        assert np.allclose(a[1:], ref, atol=1e-10)
        assert err == pytest.approx(r[0] + a[1:] @ r[1:17])

    def test_zero_frame(self):
        with pytest.raises(ValueError):
            levinson(np.zeros(5), 4)


class TestLlr:
    def test_identity(self, sentence):
        assert llr(sentence.samples, sentence.samples) <= 1e-9

    def test_lowpass_mismatch(self):
        x = gen_voice(SyntheticVoice((150.0,), n_harmonics=20, duration=1.0)).samples
        y = sosfiltfilt(butter(8, 400, fs=FS, output="sos"), x)
        assert llr(x, y) > 0.2

    def test_range_random_pairs(self):
        r = np.random.default_rng(5)
        for _ in range(100):
            x, y = r.standard_normal(2000), r.standard_normal(2000) * r.uniform(0.1, 10)
            assert 0.0 <= llr(x, y) <= 2.0

    def test_frames_clipped(self, sentence, rng):
        d = llr_frames(sentence.samples, rng.standard_normal(len(sentence)))
        assert d.min() >= 0 and d.max() <= 2

    def test_silence_skipped(self, rng):
        x = np.concatenate([np.zeros(2000), rng.standard_normal(4000)])
        assert llr_frames(x, x).size < llr_frames(x + 1e-3, x + 1e-3).size
        assert llr(x, x) <= 1e-9

    def test_gain_invariant(self, sentence, rng):
        y = sentence.samples + 0.05 * rng.standard_normal(len(sentence))
        assert llr(2 * sentence.samples, 2 * y) == pytest.approx(llr(sentence.samples, y), abs=1e-9)

    def test_misaligned(self):
        with pytest.raises(ValueError):
            llr(np.ones(1000), np.ones(999))


class TestWss:
    def test_identity(self, sentence):
        assert wss(sentence.samples, sentence.samples) <= 1e-9

    def test_white_vs_shaped(self):
        a = gen_noise("white", 1.0, FS, 0).samples
        b = gen_noise("speech_shaped", 1.0, FS, 0).samples
        assert wss(a, b) > 0

    def test_nonnegative_frames(self, sentence, rng):
        assert wss_frames(sentence.samples, rng.standard_normal(len(sentence))).min() >= 0

    def test_gain_invariant(self, sentence, rng):
        y = sentence.samples + 0.05 * rng.standard_normal(len(sentence))
        assert wss(4 * sentence.samples, 4 * y) == pytest.approx(wss(sentence.samples, y), rel=1e-6)

    def test_monotone_in_snr(self):
        totals = {s: [] for s in (-5.0, 0.0, 5.0)}
        for i in range(20):
            clean = gen_sentence(i)
            noise = gen_noise("speech_shaped", 3.0, FS, 50 + i)
            for s in totals:
                totals[s].append(wss(clean.samples, mix_at_snr(clean, noise, s, i).samples))
        m = [np.mean(totals[s]) for s in (-5.0, 0.0, 5.0)]
        assert m[0] >= m[1] >= m[2]

    def test_trimmed_mean(self):
        assert trimmed_mean(np.arange(20.0)) == pytest.approx(np.mean(np.arange(19.0)))
        with pytest.raises(ValueError):
            trimmed_mean([])


# ---------------------------------------------------------------------------
# Segmental SNR and pitch errors
# ---------------------------------------------------------------------------

class TestSegSnrPitch:
    def test_identity_clips(self, sentence):
        assert seg_snr(sentence.samples, sentence.samples) == 35.0

    def test_known_snr(self, rng):
        x = rng.standard_normal(16000)
        assert seg_snr(x, x + 0.1 * x) == pytest.approx(20.0, abs=1e-9)
        assert seg_snr(x, x - 10 * x) == -10.0

    def test_voiced_mask(self, rng):
        x = rng.standard_normal(2048)
        with pytest.raises(ValueError, match="no voiced frames"):
            seg_snr(x, x, voiced=np.zeros(7, dtype=bool))

    def test_ge_mae(self):
        assert gross_error([100, 100], [112, 100]) == 0.5
        assert mae([100, 100], [112, 100]) == 0.0
        assert gross_error([100, 200], [100, 200]) == 0.0
        assert mae([100, 200], [103, 195]) == pytest.approx(4.0)

    def test_missing_estimate_is_gross(self):
        assert gross_error([100, 200], [np.nan, 200]) == 0.5

    def test_unvoiced_reference_ignored(self):
        assert gross_error([0, np.nan, 150], [300, 300, 150]) == 0.0
        with pytest.raises(ValueError, match="no voiced frames"):
            mae([0, 0], [100, 100])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(70, 400), min_size=1, max_size=30), st.floats(-0.3, 0.3))
    def test_ge_bounds(self, track, rel):
        est = [t * (1 + rel) for t in track]
        ge = gross_error(track, est)
        if abs(rel) > 0.1 + 1e-9:
            assert ge == 1.0
        elif abs(rel) < 0.1 - 1e-9:
            assert ge == 0.0


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

class TestEvaluate:
    def test_identity_report(self, sentence):
        r = evaluate(sentence, sentence)
        assert r == MetricReport(estoi=pytest.approx(1.0, abs=1e-6), llr=pytest.approx(0.0, abs=1e-9),
                                 wss=pytest.approx(0.0, abs=1e-9), seg_snr_db=35.0)
        assert set(r.to_dict()) == {"estoi", "llr", "wss", "seg_snr_db"}

    def test_pads_test(self, sentence):
        short = wave_of(sentence.samples[:-100])
        assert evaluate(sentence, short).estoi > 0.95
