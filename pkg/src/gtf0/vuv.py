"""Voiced/unvoiced frame classification.

A frame is voiced when its energy clears a signal-wide percentile and its
normalized autocorrelation peaks high enough inside the pitch lag range. Both
gates are relative, so the decision ignores the overall signal level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dsp import FrameSet
from .hht import lag_window, normalized_acf


@dataclass(frozen=True)
class VuvConfig:
    acf_peak_threshold: float = 0.35
    energy_percentile: float = 0.30
    f0_range: tuple = (70.0, 400.0)

    def __post_init__(self):
        if not 0.0 < self.acf_peak_threshold < 1.0:
            raise ValueError("acf_peak_threshold must lie in (0, 1)")
        if not 0.0 <= self.energy_percentile < 1.0:
            raise ValueError("energy_percentile must lie in [0, 1)")
        f_min, f_max = self.f0_range
        if not 0 < f_min < f_max:
            raise ValueError("f0_range must satisfy 0 < F_min < F_max")
        object.__setattr__(self, "f0_range", (float(f_min), float(f_max)))


def acf_peak(frame: np.ndarray, fs: int, f0_range) -> float:
    """Largest normalized ACF value inside the pitch lag window (0 for silence)."""
    lo, hi = lag_window(f0_range, fs)
    hi = min(hi, frame.size - 1)
    r = normalized_acf(frame, hi)
    if r is None or hi < lo:
        return 0.0
    return float(np.max(r[lo:hi + 1]))


def classify_frames(frames: FrameSet, cfg: VuvConfig = VuvConfig()) -> FrameSet:
    """Return ``frames`` with its voicing mask filled."""
    fs = frames.sample_rate
    if cfg.f0_range[1] >= fs / 2:
        raise ValueError("F_max must lie below Nyquist")
    energy = np.sum(frames.frames**2, axis=1)
    gate = np.quantile(energy, cfg.energy_percentile)
    voiced = np.zeros(len(frames), dtype=bool)
    for i, fr in enumerate(frames.frames):
        if energy[i] <= gate or energy[i] <= 0.0:
            continue
        voiced[i] = acf_peak(fr, fs, cfg.f0_range) >= cfg.acf_peak_threshold
    return frames.with_voicing(voiced)


def voicing_json(frames: FrameSet) -> str:
    if frames.voicing is None:
        raise ValueError("frames have not been classified")
    return json.dumps([int(v) for v in frames.voicing])
