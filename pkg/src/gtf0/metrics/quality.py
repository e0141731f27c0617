"""Frame-based quality distances: log-likelihood ratio and weighted spectral slope.

Both follow the classical composite-measure recipes: 30 ms Hann frames at
75 % overlap, and a final score that averages the lowest 95 % of frames.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import toeplitz

# Critical-band centres and bandwidths (Hz) of the classical WSS filterbank.
WSS_CENTERS = np.array([
    50.0, 120.0, 190.0, 260.0, 330.0, 400.0, 470.0, 540.0, 617.372, 703.378,
    798.717, 904.128, 1020.38, 1148.30, 1288.72, 1442.54, 1610.70, 1794.16,
    1993.93, 2211.08, 2446.71, 2701.97, 2978.04, 3276.17, 3597.63])
WSS_BANDWIDTHS = np.array([
    70.0, 70.0, 70.0, 70.0, 70.0, 70.0, 70.0, 77.3724, 86.0056, 95.3398,
    105.411, 116.256, 127.914, 140.423, 153.823, 168.154, 183.457, 199.776,
    217.153, 235.631, 255.255, 276.072, 298.126, 321.465, 346.136])
K_MAX = 20.0
K_LOCMAX = 1.0
TRIM = 0.95


def _check_pair(clean, test):
    x = np.asarray(clean, dtype=np.float64)
    y = np.asarray(test, dtype=np.float64)
    if x.size != y.size:
        raise ValueError("clean and test must be aligned (equal length)")
    return x, y


def _frame_layout(n_samples: int, fs: int):
    win = int(round(0.030 * fs))
    skip = win // 4
    if n_samples < win:
        raise ValueError("signal shorter than one 30 ms frame")
    n_frames = (n_samples - win) // skip + 1
    window = 0.5 * (1 - np.cos(2 * np.pi * np.arange(1, win + 1) / (win + 1)))
    return win, skip, n_frames, window


def trimmed_mean(scores, keep: float = TRIM) -> float:
    """Mean of the lowest ``keep`` fraction of ``scores``."""
    s = np.sort(np.asarray(scores, dtype=np.float64))
    if s.size == 0:
        raise ValueError("no frames to average")
    n = max(1, int(round(keep * s.size)))
    return float(np.mean(s[:n]))


def autocorr(frame: np.ndarray, order: int) -> np.ndarray:
    n = frame.size
    return np.array([frame[: n - k] @ frame[k:] for k in range(order + 1)])


def levinson(r: np.ndarray, order: int) -> tuple[np.ndarray, float]:
    """Levinson-Durbin recursion.

    Returns the prediction polynomial ``[1, a_1, ..., a_p]`` and the final
    prediction error. Raises ``ValueError`` on a non-positive error, which
    signals a degenerate (e.g. silent) frame.
    """
    a = np.zeros(order + 1)
    a[0] = 1.0
    err = float(r[0])
    if err <= 0:
        raise ValueError("zero-energy frame")
    for i in range(1, order + 1):
        acc = r[i] + a[1:i] @ r[i - 1:0:-1]
        k = -acc / err
        a[1:i] = a[1:i] + k * a[i - 1:0:-1]
        a[i] = k
        err *= 1.0 - k * k
        if err <= 0:
            raise ValueError("unstable LPC fit")
    return a, err


def lpc(frame: np.ndarray, order: int) -> np.ndarray:
    return levinson(autocorr(frame, order), order)[0]


def llr_frames(clean, test, fs: int = 16000) -> np.ndarray:
    """Per-frame LLR distances (clipped to [0, 2]); silent frames are skipped."""
    x, y = _check_pair(clean, test)
    win, skip, n_frames, window = _frame_layout(x.size, fs)
    order = 10 if fs < 10000 else 16
    out = []
    for f in range(n_frames):
        cf = x[f * skip: f * skip + win] * window
        tf = y[f * skip: f * skip + win] * window
        r_c = autocorr(cf, order)
        try:
            a_c = levinson(r_c, order)[0]
            a_t = lpc(tf, order)
        except ValueError:
            continue
        rc = toeplitz(r_c)
        num = a_t @ rc @ a_t
        den = a_c @ rc @ a_c
        if den <= 0 or num <= 0:
            continue
        out.append(min(max(math.log(num / den), 0.0), 2.0))
    return np.array(out)


def llr(clean, test, fs: int = 16000) -> float:
    """Log-likelihood ratio in [0, 2]; lower is better."""
    d = llr_frames(clean, test, fs)
    if d.size == 0:
        raise ValueError("no frame with a stable LPC fit")
    return trimmed_mean(d)


def _critical_filters(n_half: int, fs: int) -> np.ndarray:
    max_freq = fs / 2.0
    bw_min = WSS_BANDWIDTHS[0]
    min_factor = math.exp(-30.0 / (2.0 * 2.303))
    j = np.arange(n_half)
    filt = np.empty((WSS_CENTERS.size, n_half))
    for i, (fc, bw_hz) in enumerate(zip(WSS_CENTERS, WSS_BANDWIDTHS)):
        f0 = math.floor(fc / max_freq * n_half)
        bw = bw_hz / max_freq * n_half
        g = np.exp(-11.0 * (j - f0) ** 2 / bw**2 + math.log(bw_min) - math.log(bw_hz))
        filt[i] = np.where(g > min_factor, g, 0.0)
    return filt


def _nearest_peaks(energy: np.ndarray, slope: np.ndarray) -> np.ndarray:
    # Energy of the spectral peak each band climbs or descends towards.
    n = slope.size
    peaks = np.empty(n)
    for i in range(n):
        j = i
        if slope[i] > 0:
            while j < n and slope[j] > 0:
                j += 1
            peaks[i] = energy[j]
        else:
            while j >= 0 and slope[j] <= 0:
                j -= 1
            peaks[i] = energy[j + 1]
    return peaks


def wss_frames(clean, test, fs: int = 16000) -> np.ndarray:
    x, y = _check_pair(clean, test)
    win, skip, n_frames, window = _frame_layout(x.size, fs)
    n_fft = 1 << int(math.ceil(math.log2(2 * win)))
    n_half = n_fft // 2
    filt = _critical_filters(n_half, fs)
    out = np.empty(n_frames)
    for f in range(n_frames):
        spectra = []
        for sig in (x, y):
            fr = sig[f * skip: f * skip + win] * window
            power = np.abs(np.fft.fft(fr, n_fft)[:n_half]) ** 2
            spectra.append(10 * np.log10(np.maximum(filt @ power, 1e-10)))
        weights = []
        slopes = []
        for e in spectra:
            s = np.diff(e)
            w_max = K_MAX / (K_MAX + e.max() - e[:-1])
            w_loc = K_LOCMAX / (K_LOCMAX + _nearest_peaks(e, s) - e[:-1])
            weights.append(w_max * w_loc)
            slopes.append(s)
        w = 0.5 * (weights[0] + weights[1])
        out[f] = np.sum(w * (slopes[0] - slopes[1]) ** 2) / np.sum(w)
    return out


def wss(clean, test, fs: int = 16000) -> float:
    """Weighted spectral slope distance; zero for identical inputs."""
    return trimmed_mean(wss_frames(clean, test, fs))
