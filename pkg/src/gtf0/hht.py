"""HHT-Amp pitch estimation.

Each voiced frame is decomposed by ensemble EMD. The Hilbert amplitude
envelope of every mode is autocorrelated, the first in-range ACF peak of each
mode gives a period candidate, and the strongest candidate wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np
from scipy.signal import hilbert

ACF_PEAK_FLOOR = 0.2
_MIRROR_POINTS = 2


class NoPitchError(ValueError):
    """Raised when no decomposition mode yields a period candidate."""


@dataclass(frozen=True)
class EemdConfig:
    ensemble_size: int = 50
    noise_std_factor: float = 0.2
    max_imfs: int = 8
    sift_stop_sd: float = 0.2
    max_sift_iters: int = 12
    seed: int = 0
    acf_floor: float = ACF_PEAK_FLOOR

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.noise_std_factor < 0:
            raise ValueError("noise_std_factor must be >= 0")
        if self.max_imfs < 1:
            raise ValueError("max_imfs must be >= 1")
        if self.max_sift_iters < 1:
            raise ValueError("max_sift_iters must be >= 1")
        if not 0.0 <= self.acf_floor < 1.0:
            raise ValueError("acf_floor must lie in [0, 1)")


@dataclass
class ImfSet:
    imfs: np.ndarray  # shape (M, N)
    residual: np.ndarray

    @property
    def count(self) -> int:
        return self.imfs.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.imfs.sum(axis=0) + self.residual


@dataclass(frozen=True)
class PitchCandidate:
    mode: int
    tau0: int
    sample_rate: int
    peak_value: float

    @property
    def period(self) -> float:
        return self.tau0 / self.sample_rate

    @property
    def f0(self) -> float:
        return self.sample_rate / self.tau0


@dataclass(frozen=True)
class PitchEstimate:
    f0_hz: float
    chosen_mode: int
    confidence: float
    candidates: tuple = field(default=(), compare=False, repr=False)


# ---------------------------------------------------------------------------
# EMD
# ---------------------------------------------------------------------------


def find_extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of local maxima and minima (plateaus report their first sample)."""
    d = np.diff(x)
    maxima = np.flatnonzero((d[:-1] > 0) & (d[1:] <= 0)) + 1
    minima = np.flatnonzero((d[:-1] < 0) & (d[1:] >= 0)) + 1
    return maxima, minima


def count_zero_crossings(x: np.ndarray) -> int:
    s = np.signbit(x)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _mirror_knots(x, imax, imin):
    # Rilling-style boundary mirroring: reflect the first/last extrema about
    # the outermost extremum or the endpoint, whichever keeps alternation.
    n = x.size
    nb = _MIRROR_POINTS
    last = n - 1

    def left():
        if imax[0] < imin[0]:
            if x[0] > x[imin[0]]:
                lmax, lmin, sym = imax[1:nb + 1][::-1], imin[:nb][::-1], imax[0]
            else:
                lmax, lmin, sym = imax[:nb][::-1], np.r_[imin[:nb - 1][::-1], 0], 0
        else:
            if x[0] < x[imax[0]]:
                lmax, lmin, sym = imax[:nb][::-1], imin[1:nb + 1][::-1], imin[0]
            else:
                lmax, lmin, sym = np.r_[imax[:nb - 1][::-1], 0], imin[:nb][::-1], 0
        tlmax, tlmin = 2 * sym - lmax, 2 * sym - lmin
        if (tlmin.size and tlmin[0] > 0) or (tlmax.size and tlmax[0] > 0):
            if sym == imax[0]:
                lmax = imax[:nb][::-1]
            else:
                lmin = imin[:nb][::-1]
            sym = 0
            tlmax, tlmin = 2 * sym - lmax, 2 * sym - lmin
        return tlmax, lmax, tlmin, lmin

    def right():
        if imax[-1] < imin[-1]:
            if x[last] < x[imax[-1]]:
                rmax, rmin, sym = imax[-nb:][::-1], imin[-nb - 1:-1][::-1], imin[-1]
            else:
                rmax, rmin, sym = np.r_[last, imax[-nb + 1:][::-1]], imin[-nb:][::-1], last
        else:
            if x[last] > x[imin[-1]]:
                rmax, rmin, sym = imax[-nb - 1:-1][::-1], imin[-nb:][::-1], imax[-1]
            else:
                rmax, rmin, sym = imax[-nb:][::-1], np.r_[last, imin[-nb + 1:][::-1]], last
        trmax, trmin = 2 * sym - rmax, 2 * sym - rmin
        if (trmin.size and trmin[-1] < last) or (trmax.size and trmax[-1] < last):
            if sym == imax[-1]:
                rmax = imax[-nb:][::-1]
            else:
                rmin = imin[-nb:][::-1]
            sym = last
            trmax, trmin = 2 * sym - rmax, 2 * sym - rmin
        return trmax, rmax, trmin, rmin

    tlmax, lmax, tlmin, lmin = left()
    trmax, rmax, trmin, rmin = right()
    tmax = np.concatenate([tlmax, imax, trmax])
    vmax = x[np.concatenate([lmax, imax, rmax]).astype(int)]
    tmin = np.concatenate([tlmin, imin, trmin])
    vmin = x[np.concatenate([lmin, imin, rmin]).astype(int)]
    return tmax, vmax, tmin, vmin


@numba.njit(cache=True)
def _natural_spline(t, v, n_out):
    # Natural cubic spline through (t, v), evaluated at 0, 1, ..., n_out - 1.
    # t must be strictly increasing and bracket the output grid.
    k = t.size
    m = np.zeros(k)
    if k > 2:
        sub = np.empty(k)
        diag = np.empty(k)
        rhs = np.empty(k)
        for i in range(1, k - 1):
            h0 = t[i] - t[i - 1]
            h1 = t[i + 1] - t[i]
            sub[i] = h0
            diag[i] = 2.0 * (h0 + h1)
            rhs[i] = 6.0 * ((v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0)
        # Thomas elimination on rows 1..k-2 (m[0] = m[k-1] = 0)
        for i in range(2, k - 1):
            w = sub[i] / diag[i - 1]
            diag[i] -= w * (t[i] - t[i - 1])
            rhs[i] -= w * rhs[i - 1]
        m[k - 2] = rhs[k - 2] / diag[k - 2]
        for i in range(k - 3, 0, -1):
            m[i] = (rhs[i] - (t[i + 1] - t[i]) * m[i + 1]) / diag[i]
    out = np.empty(n_out)
    j = 0
    for g in range(n_out):
        x = float(g)
        while j < k - 2 and x > t[j + 1]:
            j += 1
        h = t[j + 1] - t[j]
        a = (t[j + 1] - x) / h
        b = (x - t[j]) / h
        out[g] = (a * v[j] + b * v[j + 1]
                  + ((a**3 - a) * m[j] + (b**3 - b) * m[j + 1]) * h * h / 6.0)
    return out


def _spline(t, v, n_out):
    order = np.argsort(t, kind="stable")
    t, v = t[order], v[order]
    keep = np.r_[True, np.diff(t) > 0]
    t, v = t[keep], v[keep]
    if t.size < 2:
        return None
    return _natural_spline(t.astype(np.float64), v.astype(np.float64), n_out)


def _envelope_mean(x):
    imax, imin = find_extrema(x)
    if imax.size + imin.size < 3 or imax.size < 1 or imin.size < 1:
        return None
    tmax, vmax, tmin, vmin = _mirror_knots(x, imax, imin)
    upper = _spline(tmax, vmax, x.size)
    lower = _spline(tmin, vmin, x.size)
    if upper is None or lower is None:
        return None
    return 0.5 * (upper + lower)


def _is_imf(h: np.ndarray) -> bool:
    imax, imin = find_extrema(h)
    return abs(imax.size + imin.size - count_zero_crossings(h)) <= 1


def emd_sift(frame, cfg: EemdConfig = EemdConfig()) -> ImfSet:
    """Plain EMD of one frame.

    Each IMF is sifted until the Huang SD criterion falls below
    ``cfg.sift_stop_sd`` while the extrema and zero-crossing counts differ by
    at most one, or ``cfg.max_sift_iters`` is reached. Extraction stops when the
    residual has fewer than three extrema or ``cfg.max_imfs`` IMFs exist.
    Completeness is exact: each IMF is subtracted from the running residual.
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.size < 16:
        raise ValueError("frame must hold at least 16 samples")
    residual = x.copy()
    imfs = []
    while len(imfs) < cfg.max_imfs:
        if _envelope_mean(residual) is None:
            break
        h = residual.copy()
        for _ in range(cfg.max_sift_iters):
            m = _envelope_mean(h)
            if m is None:
                break
            h_new = h - m
            denom = np.sum(h**2)
            sd = np.sum((h - h_new) ** 2) / denom if denom > 0 else 0.0
            h = h_new
            if sd < cfg.sift_stop_sd and _is_imf(h):
                break
        imfs.append(h)
        residual = residual - h
    stack = np.array(imfs) if imfs else np.zeros((0, x.size))
    return ImfSet(imfs=stack, residual=residual)


def _member_rng(seed: int, frame_index: int, pair_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, frame_index, pair_index])


def eemd(frame, cfg: EemdConfig = EemdConfig(), frame_index: int = 0) -> ImfSet:
    """Complementary ensemble EMD.

    Noise is added in ``+n``/``-n`` pairs so it cancels from the averaged
    decomposition and completeness survives. Members are truncated to the
    smallest IMF count in the ensemble, the surplus IMFs folding into the
    residual. Each pair draws its noise from ``(seed, frame_index, pair)`` so
    results do not depend on evaluation order.
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.size < 16:
        raise ValueError("frame must hold at least 16 samples")
    sigma = cfg.noise_std_factor * float(np.std(x))
    if sigma == 0.0:
        return emd_sift(x, cfg)

    members = []
    for p in range(math.ceil(cfg.ensemble_size / 2)):
        noise = sigma * _member_rng(cfg.seed, frame_index, p).standard_normal(x.size)
        members.append(emd_sift(x + noise, cfg))
        members.append(emd_sift(x - noise, cfg))

    m = min(s.count for s in members)
    imfs = np.zeros((m, x.size))
    residual = np.zeros(x.size)
    for s in members:
        imfs += s.imfs[:m]
        residual += s.residual + s.imfs[m:].sum(axis=0)
    k = len(members)
    return ImfSet(imfs=imfs / k, residual=residual / k)


# ---------------------------------------------------------------------------
# Envelopes and candidates
# ---------------------------------------------------------------------------


def amplitude_envelopes(imfs: ImfSet) -> np.ndarray:
    """Instantaneous amplitude ``|IMF + j H{IMF}|`` of every mode."""
    if imfs.count == 0:
        raise ValueError("ImfSet holds no modes")
    return np.abs(hilbert(imfs.imfs, axis=-1))


def lag_window(f0_range: Sequence[float], fs: int) -> tuple[int, int]:
    f_min, f_max = f0_range
    return int(round(fs / f_max)), int(round(fs / f_min))


def normalized_acf(x: np.ndarray, max_lag: int) -> Optional[np.ndarray]:
    """Biased, mean-removed ACF scaled so that lag 0 equals one."""
    a = np.asarray(x, dtype=np.float64) - np.mean(x)
    r0 = float(a @ a)
    if r0 <= 1e-300:
        return None
    n = a.size
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(a, nfft)
    r = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    return r / r[0]


def acf_candidate(envelope, f0_range: Sequence[float], fs: int,
                  mode: int = 0, floor: float = ACF_PEAK_FLOOR) -> Optional[PitchCandidate]:
    """First ACF peak above the acceptance floor inside the lag window."""
    env = np.asarray(envelope, dtype=np.float64)
    lo, hi = lag_window(f0_range, fs)
    if env.size <= hi:
        raise ValueError("envelope shorter than the longest admissible period")
    r = normalized_acf(env, min(hi + 1, env.size - 1))
    if r is None:
        return None
    for tau in range(max(lo, 1), hi + 1):
        if tau + 1 >= r.size:
            break
        if r[tau] > floor and r[tau] > r[tau - 1] and r[tau] >= r[tau + 1]:
            return PitchCandidate(mode=mode, tau0=tau, sample_rate=fs,
                                  peak_value=float(min(r[tau], 1.0)))
    return None


def select_candidate(cands: Sequence[PitchCandidate]) -> PitchEstimate:
    """Highest normalized ACF peak wins; ties go to the lowest mode index."""
    if not cands:
        raise NoPitchError("unvoiced frame leaked into estimator")
    best = min(cands, key=lambda c: (-c.peak_value, c.mode))
    return PitchEstimate(f0_hz=best.f0, chosen_mode=best.mode,
                         confidence=best.peak_value, candidates=tuple(cands))


def estimate_f0(frame, fs: int, cfg: EemdConfig = EemdConfig(),
                f0_range: Sequence[float] = (70.0, 400.0),
                frame_index: int = 0) -> PitchEstimate:
    imfs = eemd(frame, cfg, frame_index=frame_index)
    if imfs.count == 0:
        raise NoPitchError("no pitch found")
    cands = []
    for m, env in enumerate(amplitude_envelopes(imfs), start=1):
        c = acf_candidate(env, f0_range, fs, mode=m, floor=cfg.acf_floor)
        if c is not None:
            cands.append(c)
    if not cands:
        raise NoPitchError("no pitch found")
    return select_candidate(cands)
