"""Extended short-time objective intelligibility (ESTOI)."""

from __future__ import annotations

from math import gcd

import numpy as np
from scipy.signal import resample_poly

FS = 10000
N_FRAME = 256
HOP = 128
NFFT = 512
NUM_BANDS = 15
MIN_FREQ = 150.0
SEGMENT = 30
DYN_RANGE = 40.0
_EPS = np.finfo(np.float64).eps


def third_octave_bands(fs=FS, nfft=NFFT, num_bands=NUM_BANDS, min_freq=MIN_FREQ):
    """0/1 matrix mapping one-sided FFT bins to one-third octave bands."""
    f = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(num_bands, dtype=np.float64)
    lo = min_freq * 2.0 ** ((2 * k - 1) / 6)
    hi = min_freq * 2.0 ** ((2 * k + 1) / 6)
    obm = np.zeros((num_bands, f.size))
    for i in range(num_bands):
        a = int(np.argmin((f - lo[i]) ** 2))
        b = int(np.argmin((f - hi[i]) ** 2))
        obm[i, a:b] = 1.0
    return obm


def _frames(x, n, hop):
    starts = range(0, len(x) - n, hop)
    return np.array([x[i:i + n] for i in starts]).reshape(-1, n)


def _window():
    return np.hanning(N_FRAME + 2)[1:-1]


def _ola(frames, hop):
    n = frames.shape[1]
    out = np.zeros((frames.shape[0] - 1) * hop + n) if len(frames) else np.zeros(0)
    for i, fr in enumerate(frames):
        out[i * hop: i * hop + n] += fr
    return out


def remove_silent_frames(x, y, dyn_range=DYN_RANGE, n=N_FRAME, hop=HOP):
    """Drop frames where ``x`` is more than ``dyn_range`` dB below its loudest frame."""
    w = _window()
    xf = _frames(x, n, hop) * w
    yf = _frames(y, n, hop) * w
    energy = 20 * np.log10(np.linalg.norm(xf, axis=1) + _EPS)
    keep = energy > energy.max() - dyn_range
    return _ola(xf[keep], hop), _ola(yf[keep], hop)


def _stft(x):
    return np.fft.rfft(_frames(x, N_FRAME, HOP) * _window(), NFFT, axis=1)


def _normalize(v, axis):
    v = v - v.mean(axis=axis, keepdims=True)
    norm = np.sqrt(np.sum(v**2, axis=axis, keepdims=True))
    return np.divide(v, norm, out=np.zeros_like(v), where=norm > 0)


def _resample(x, fs):
    if fs == FS:
        return np.asarray(x, dtype=np.float64)
    g = gcd(int(fs), FS)
    return resample_poly(x, FS // g, int(fs) // g)


def estoi(clean, test, fs: int = 16000) -> float:
    """ESTOI score in [-1, 1] of ``test`` against ``clean``.

    ``test`` is trimmed or zero-padded to the length of ``clean``.
    """
    x = np.asarray(clean, dtype=np.float64)
    y = np.asarray(test, dtype=np.float64)
    y = y[: x.size] if y.size >= x.size else np.concatenate([y, np.zeros(x.size - y.size)])
    x, y = _resample(x, fs), _resample(y, fs)
    x, y = remove_silent_frames(x, y)
    if x.size <= N_FRAME:
        raise ValueError("signal shorter than one ESTOI segment")

    obm = third_octave_bands()
    x_tob = np.sqrt(obm @ (np.abs(_stft(x)) ** 2).T)
    y_tob = np.sqrt(obm @ (np.abs(_stft(y)) ** 2).T)
    n_frames = x_tob.shape[1]
    if n_frames < SEGMENT:
        raise ValueError("signal shorter than one ESTOI segment")

    idx = np.arange(SEGMENT)[None, :] + np.arange(n_frames - SEGMENT + 1)[:, None]
    xs = x_tob[:, idx].transpose(1, 0, 2)  # (segments, bands, frames)
    ys = y_tob[:, idx].transpose(1, 0, 2)
    xn = _normalize(_normalize(xs, axis=2), axis=1)
    yn = _normalize(_normalize(ys, axis=2), axis=1)
    return float(np.sum(xn * yn) / (SEGMENT * xn.shape[0]))
