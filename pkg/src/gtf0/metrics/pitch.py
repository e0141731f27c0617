"""Segmental SNR and F0 tracking errors."""

from __future__ import annotations

import numpy as np

from ..dsp import frame_array

GROSS_THRESHOLD = 0.1
SEG_SNR_RANGE = (-10.0, 35.0)


def seg_snr(clean, test, fs: int = 16000, voiced=None, frame_ms: float = 32.0) -> float:
    """Mean per-frame SNR in dB, each frame clipped to [-10, 35].

    Frames are 50 % overlapping rectangular slices. ``voiced`` selects frames;
    when omitted, frames within 40 dB of the loudest clean frame count.
    """
    x = np.asarray(clean, dtype=np.float64)
    y = np.asarray(test, dtype=np.float64)
    if x.size != y.size:
        raise ValueError("clean and test must be aligned (equal length)")
    n = int(round(fs * frame_ms / 1000.0))
    xf = frame_array(x, n, n // 2)
    ef = xf - frame_array(y, n, n // 2)
    sig = np.sum(xf**2, axis=1)
    err = np.sum(ef**2, axis=1)
    if voiced is None:
        peak = sig.max()
        mask = (sig > 0) & (sig >= peak * 1e-4)
    else:
        mask = np.asarray(voiced, dtype=bool) & (sig > 0)
    if not mask.any():
        raise ValueError("no voiced frames")
    with np.errstate(divide="ignore"):
        snr = 10.0 * np.log10(sig[mask] / err[mask])
    return float(np.mean(np.clip(snr, *SEG_SNR_RANGE)))


def _tracks(f0_true, f0_est):
    t = np.asarray(f0_true, dtype=np.float64)
    e = np.asarray(f0_est, dtype=np.float64)
    if t.shape != e.shape:
        raise ValueError("tracks must be aligned per frame")
    ref = np.isfinite(t) & (t > 0)
    if not ref.any():
        raise ValueError("no voiced frames")
    t, e = t[ref], e[ref]
    gross = ~np.isfinite(e) | (np.abs(e - t) / t > GROSS_THRESHOLD)
    return t, e, gross


def gross_error(f0_true, f0_est) -> float:
    """Fraction of reference-voiced frames off by more than 10 %.

    Missing estimates (NaN) count as gross errors.
    """
    _, _, gross = _tracks(f0_true, f0_est)
    return float(np.mean(gross))


def mae(f0_true, f0_est) -> float:
    """Mean absolute F0 error in Hz over the non-gross frames (NaN if none)."""
    t, e, gross = _tracks(f0_true, f0_est)
    ok = ~gross
    return float(np.mean(np.abs(e[ok] - t[ok]))) if ok.any() else float("nan")
