"""SNR-controlled mixing and a synthetic corpus of harmonic voices and noises."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .dsp import Waveform


class NoiseKind(str, Enum):
    WHITE = "white"
    SPEECH_SHAPED = "speech_shaped"
    AMPLITUDE_MODULATED = "amplitude_modulated"
    FILE = "file"


@dataclass(frozen=True)
class MixSpec:
    snr_db: float
    seed: int = 0
    noise_kind: NoiseKind = NoiseKind.SPEECH_SHAPED
    noise_path: str | None = None

    def __post_init__(self):
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError("snr_db must be finite (or +inf for clean passthrough)")
        object.__setattr__(self, "noise_kind", NoiseKind(self.noise_kind))


@dataclass(frozen=True)
class SyntheticVoice:
    """Harmonic voice description.

    ``f0_track`` holds F0 knots in Hz spread evenly over ``duration``: one
    value is a constant pitch, two values a linear glide. With
    ``step=True`` the knots are held piecewise-constant instead.
    """

    f0_track: tuple
    n_harmonics: int = 10
    harmonic_rolloff: float = 0.0  # dB per harmonic
    duration: float = 1.0
    step: bool = False

    def __post_init__(self):
        track = tuple(float(f) for f in np.atleast_1d(self.f0_track))
        if not track or min(track) <= 0:
            raise ValueError("f0_track needs positive values")
        if self.n_harmonics < 1:
            raise ValueError("n_harmonics must be >= 1")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "f0_track", track)


def scaled_noise(clean: Waveform, noise: Waveform, snr_db: float, seed: int = 0) -> np.ndarray:
    """Noise segment aligned to ``clean`` and scaled to the target SNR.

    SNR uses whole-signal powers. Noise shorter than the clean signal is tiled;
    the start offset is drawn from ``seed`` in every case.
    """
    if clean.sample_rate != noise.sample_rate:
        raise ValueError("sample rates differ")
    n = len(clean)
    p_clean = clean.power()
    if p_clean <= 0:
        raise ValueError("clean signal has zero power")
    if noise.power() <= 0:
        raise ValueError("noise has zero power")
    rng = np.random.default_rng(seed)
    src = noise.samples
    if src.size >= n:
        start = int(rng.integers(0, src.size - n + 1))
        seg = src[start:start + n]
    else:
        start = int(rng.integers(0, src.size))
        reps = math.ceil((n + start) / src.size)
        seg = np.tile(src, reps)[start:start + n]
    p_noise = float(np.mean(seg**2))
    if p_noise <= 0:
        raise ValueError("noise segment has zero power")
    gain = math.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return gain * seg


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float, seed: int = 0) -> Waveform:
    """Add noise to ``clean`` at ``snr_db``; ``+inf`` returns the clean signal."""
    if snr_db == math.inf:
        return clean
    return Waveform(clean.samples + scaled_noise(clean, noise, snr_db, seed), clean.sample_rate)


def achieved_snr(clean: Waveform, mixture: Waveform) -> float:
    residual = mixture.samples - clean.samples
    return 10.0 * math.log10(clean.power() / float(np.mean(residual**2)))


def f0_contour(spec: SyntheticVoice, sample_rate: int) -> np.ndarray:
    n = int(round(spec.duration * sample_rate))
    knots = np.asarray(spec.f0_track)
    if knots.size == 1:
        return np.full(n, knots[0])
    if spec.step:
        return knots[np.arange(n) * knots.size // n]
    pos = np.arange(n) / max(n - 1, 1) * (knots.size - 1)
    return np.interp(pos, np.arange(knots.size), knots)


def gen_voice(spec: SyntheticVoice, sample_rate: int = 16000) -> Waveform:
    """Phase-continuous harmonic signal, peak-normalized to 0.5."""
    f0 = f0_contour(spec, sample_rate)
    if spec.n_harmonics * f0.max() >= sample_rate / 2:
        raise ValueError("harmonic exceeds Nyquist")
    phase = 2.0 * np.pi * np.concatenate([[0.0], np.cumsum(f0[:-1])]) / sample_rate
    y = np.zeros(f0.size)
    for k in range(1, spec.n_harmonics + 1):
        y += 10.0 ** (-spec.harmonic_rolloff * (k - 1) / 20.0) * np.cos(k * phase)
    peak = np.max(np.abs(y))
    if peak > 0:
        y *= 0.5 / peak
    return Waveform(y, sample_rate)


def _unit_power(x: np.ndarray) -> np.ndarray:
    return x / math.sqrt(float(np.mean(x**2)))


def speech_shape(x: np.ndarray, sample_rate: int, corner_hz: float = 500.0) -> np.ndarray:
    """Apply a flat-then-6-dB/octave spectral tilt above ``corner_hz``."""
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1.0 / sample_rate)
    tilt = np.where(f > corner_hz, corner_hz / np.maximum(f, corner_hz), 1.0)
    return np.fft.irfft(spec * tilt, x.size)


def gen_noise(kind, duration: float, sample_rate: int = 16000, seed: int = 0) -> Waveform:
    """Unit-power synthetic noise, deterministic per seed.

    ``amplitude_modulated`` multiplies speech-shaped noise by
    ``1 + 0.8 m(t)``, where ``m`` is ``|gaussian|`` low-passed at 4 Hz,
    standardized to zero mean and unit variance, then clipped to [-1, 1].
    """
    kind = NoiseKind(kind)
    if duration <= 0:
        raise ValueError("duration must be positive")
    if kind is NoiseKind.FILE:
        raise ValueError("file noise is loaded from disk, not generated")
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    if kind is NoiseKind.WHITE:
        return Waveform(_unit_power(x), sample_rate)
    x = speech_shape(x, sample_rate)
    if kind is NoiseKind.AMPLITUDE_MODULATED:
        sos = butter(2, 4.0, fs=sample_rate, output="sos")
        m = sosfiltfilt(sos, np.abs(rng.standard_normal(n)))
        m = np.clip((m - m.mean()) / m.std(), -1.0, 1.0)
        x = x * (1.0 + 0.8 * m)
    return Waveform(_unit_power(x), sample_rate)


def gen_sentence(seed: int, sample_rate: int = 16000, duration: float = 2.0,
                 f0_range: Sequence[float] = (90.0, 240.0)) -> Waveform:
    """Speech-like test utterance.

    Voiced syllables (harmonic, gliding F0, raised-cosine loudness contour)
    alternate with pauses, some holding a weak fricative-like noise burst.
    Peak-normalized to 0.5.
    """
    rng = np.random.default_rng([seed, 0x5E47])
    n_total = int(round(duration * sample_rate))
    out = np.zeros(n_total)
    base = rng.uniform(*f0_range)
    pos = int(rng.uniform(0.05, 0.15) * sample_rate)
    while True:
        syl = rng.uniform(0.15, 0.32)
        n_syl = int(syl * sample_rate)
        if pos + n_syl > n_total - int(0.05 * sample_rate):
            break
        start_f0 = base * rng.uniform(0.9, 1.12)
        end_f0 = start_f0 * rng.uniform(0.85, 1.12)
        n_h = int(min(40, 3800.0 // max(start_f0, end_f0)))
        voice = gen_voice(SyntheticVoice((start_f0, end_f0), n_harmonics=n_h,
                                         harmonic_rolloff=rng.uniform(0.8, 1.6),
                                         duration=n_syl / sample_rate), sample_rate)
        n_syl = len(voice)
        taper = np.sin(np.pi * (np.arange(n_syl) + 0.5) / n_syl) ** 0.6
        out[pos:pos + n_syl] += voice.samples * taper * rng.uniform(0.6, 1.0)
        pos += n_syl
        gap = int(rng.uniform(0.06, 0.16) * sample_rate)
        if rng.uniform() < 0.5 and pos + gap <= n_total:
            burst = rng.standard_normal(gap)
            burst = np.diff(burst, prepend=0.0)  # high-pass tilt
            burst *= np.hanning(gap) * 0.02
            out[pos:pos + gap] += burst
        pos += gap
    out *= 0.5 / np.max(np.abs(out))
    return Waveform(out, sample_rate)
