"""Index of non-stationarity (INS) against phase-randomized surrogates.

For a window length ``Th`` the signal's spectrogram is compared frame by frame
with its time-averaged spectrum. The spread of those distances is measured for
the signal and for a family of surrogates sharing its power spectrum but
nothing else; the ratio is the INS. A gamma law fitted to the surrogate spread
gives the 95 % stationarity threshold.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import gamma as gamma_dist

from .dsp import Waveform, hann

DEFAULT_SCALES = (0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5)
DEFAULT_SURROGATES = 32
CONFIDENCE = 0.95
MIN_WINDOW = 64
MIN_FRAMES = 4


class ScaleTooCoarse(ValueError):
    pass


@dataclass
class InsResult:
    scales: list
    ins: list
    gamma: list

    @property
    def verdicts(self) -> list[str]:
        return ["non-stationary" if i > g else "stationary" for i, g in zip(self.ins, self.gamma)]

    @property
    def max_ins(self) -> float:
        return max(self.ins)

    def rows(self):
        return list(zip(self.scales, self.ins, self.gamma, self.verdicts))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scale", "ins", "gamma", "verdict"])
            for s, i, g, v in self.rows():
                w.writerow([f"{s:.6g}", f"{i:.9g}", f"{g:.9g}", v])

    def to_json(self, **kw) -> str:
        return json.dumps({"scales": self.scales, "ins": self.ins, "gamma": self.gamma,
                           "verdicts": self.verdicts}, **kw)


def make_surrogates(x: Waveform, count: int = DEFAULT_SURROGATES, seed: int = 0) -> list[Waveform]:
    """Phase-randomized copies of ``x`` with its exact magnitude spectrum."""
    if count < 8:
        raise ValueError("need at least 8 surrogates")
    n = len(x)
    spec = np.fft.rfft(x.samples)
    mag = np.abs(spec)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        phase = rng.uniform(0.0, 2.0 * np.pi, mag.size)
        s = mag * np.exp(1j * phase)
        s[0] = spec[0]
        if n % 2 == 0:
            s[-1] = spec[-1]
        out.append(Waveform(np.fft.irfft(s, n), x.sample_rate))
    return out


def _window_size(n_samples: int, th_fraction: float) -> int:
    if not 0.0 < th_fraction < 1.0:
        raise ValueError("th_fraction must lie in (0, 1)")
    win = int(round(th_fraction * n_samples))
    if win < MIN_WINDOW:
        raise ScaleTooCoarse(f"window of {win} samples is below {MIN_WINDOW}")
    if (n_samples - win) // (win // 2) + 1 < MIN_FRAMES:
        raise ScaleTooCoarse("scale too coarse")
    return win


def distance_spread(x: np.ndarray, win: int) -> float:
    """Variance over frames of the local-vs-average spectral distance.

    The distance is the symmetric Kullback-Leibler divergence between the
    unit-sum frame spectrum and the unit-sum mean spectrum, weighted by
    ``1 + |log(E_frame / E_mean)|``.
    """
    hop = win // 2
    q = (x.size - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(q)[:, None]
    power = np.abs(np.fft.rfft(x[idx] * hann(win), axis=1)) ** 2
    floor = 1e-12 * power.max() if power.max() > 0 else 1e-300
    power = power + floor
    energy = power.sum(axis=1)
    local = power / energy[:, None]
    mean_spec = power.mean(axis=0)
    mean_spec = mean_spec / mean_spec.sum()
    kl = np.sum((local - mean_spec) * np.log(local / mean_spec), axis=1)
    d = kl * (1.0 + np.abs(np.log(energy / energy.mean())))
    return float(np.var(d))


def _threshold(theta_surr: np.ndarray) -> float:
    z = theta_surr / theta_surr.mean()
    var = float(np.var(z, ddof=1))
    if var <= 0:
        return 1.0
    shape, scale = 1.0 / var, var
    return math.sqrt(gamma_dist.ppf(CONFIDENCE, shape, scale=scale))


def ins_at_scale(x: Waveform, th_fraction: float, J: int = DEFAULT_SURROGATES,
                 seed: int = 0, surrogates: Sequence[Waveform] | None = None) -> tuple[float, float]:
    """INS and its 95 % threshold at window length ``th_fraction * duration``."""
    win = _window_size(len(x), th_fraction)
    if surrogates is None:
        surrogates = make_surrogates(x, J, seed)
    theta_x = distance_spread(x.samples, win)
    theta_s = np.array([distance_spread(s.samples, win) for s in surrogates])
    ins = math.sqrt(theta_x / theta_s.mean())
    return ins, _threshold(theta_s)


def ins_profile(x: Waveform, scales: Sequence[float] = DEFAULT_SCALES,
                J: int = DEFAULT_SURROGATES, seed: int = 0) -> InsResult:
    """INS over several scales; scales too coarse for the signal are skipped."""
    surrogates = make_surrogates(x, J, seed)
    res = InsResult([], [], [])
    for s in scales:
        try:
            i, g = ins_at_scale(x, s, J, seed, surrogates)
        except ScaleTooCoarse:
            continue
        res.scales.append(float(s))
        res.ins.append(i)
        res.gamma.append(g)
    if not res.scales:
        raise ScaleTooCoarse("no valid scale for this signal length")
    return res
