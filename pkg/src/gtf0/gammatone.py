"""Phase-compensated Gammatone filters centred on F0 harmonics.

Each filter is the FIR sampling of

    h(t) = a (t + t_c)^(n-1) cos(2 pi f_c t) exp(-2 pi b (t + t_c)),  t >= -t_c

with ``t_c = (n - 1) / (2 pi b)`` so that every envelope peaks at ``t = 0``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dsp import convolve_noncausal

TRUNCATION_LEVEL = 1e-3
_MIN_RESPONSE_FFT = 1 << 16


class BankTruncatedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GammatoneSpec:
    order: int
    center_hz: float
    bandwidth_hz: float
    amplitude: float
    t_c: float
    sample_rate: int
    ir: np.ndarray = field(repr=False, compare=False)
    origin_index: int = 0

    @property
    def ir_len(self) -> int:
        return self.ir.size

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.ir.size) - self.origin_index) / self.sample_rate

    def envelope(self) -> np.ndarray:
        """Sampled ``a (t + t_c)^(n-1) exp(-2 pi b (t + t_c))``."""
        return self.amplitude * _raw_envelope(self.times + self.t_c, self.order, self.bandwidth_hz)

    def frequency_response(self, n_fft: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Frequencies (Hz) and complex response, phase referenced to ``t = 0``."""
        n_fft = n_fft or _response_fft_size(self.ir.size)
        spec = np.fft.rfft(self.ir, n_fft)
        freqs = np.fft.rfftfreq(n_fft, 1.0 / self.sample_rate)
        spec = spec * np.exp(2j * np.pi * freqs * self.origin_index / self.sample_rate)
        return freqs, spec

    def response_at(self, freq_hz: float) -> complex:
        """Direct Fourier sum of the impulse response at one frequency."""
        return complex(np.sum(self.ir * np.exp(-2j * np.pi * freq_hz * self.times)))


@dataclass(frozen=True)
class GammatoneBank:
    f0: float
    filters: tuple
    bandwidth_factor: float = 0.25
    requested: int = 4

    @property
    def size(self) -> int:
        return len(self.filters)

    @property
    def truncated(self) -> bool:
        return self.size < self.requested

    @property
    def centers(self) -> list[float]:
        return [f.center_hz for f in self.filters]


@dataclass
class CascadeOutput:
    bands: np.ndarray  # shape (L, N)
    residual: np.ndarray

    def reconstruct(self, gains=None) -> np.ndarray:
        if gains is None:
            return self.bands.sum(axis=0) + self.residual
        g = np.asarray(gains, dtype=np.float64).reshape(-1, 1)
        return (g * self.bands).sum(axis=0) + self.residual


def _raw_envelope(u, order, b):
    u = np.maximum(u, 0.0)
    return u ** (order - 1) * np.exp(-2.0 * np.pi * b * u)


def _response_fft_size(n: int) -> int:
    return max(_MIN_RESPONSE_FFT, 1 << int(math.ceil(math.log2(8 * n))))


def design_filter(f0: float, k: int, fs: int, bandwidth_factor: float = 0.25,
                  order: int = 4) -> GammatoneSpec:
    """Filter for harmonic ``k`` of ``f0``, normalized to 0 dB peak gain.

    The impulse response spans ``[-t_c, T_end]`` where ``T_end`` is where the
    envelope first drops below 1e-3 of its peak.
    """
    if f0 <= 0 or k < 1:
        raise ValueError("need f0 > 0 and k >= 1")
    if order < 2:
        raise ValueError("order must be >= 2 for a positive t_c")
    if bandwidth_factor <= 0:
        raise ValueError("bandwidth_factor must be positive")
    fc = k * f0
    if fc >= fs / 2:
        raise ValueError("harmonic exceeds Nyquist")
    b = bandwidth_factor * f0
    t_c = (order - 1) / (2.0 * np.pi * b)

    origin = int(math.floor(t_c * fs))
    # Envelope relative to its peak is s^(n-1) exp(-(n-1)(s-1)), s = u / t_c.
    s = 1.0
    while s ** (order - 1) * math.exp(-(order - 1) * (s - 1.0)) >= TRUNCATION_LEVEL:
        s += 0.01
    n_after = int(math.ceil((s - 1.0) * t_c * fs)) + 1
    t = (np.arange(origin + n_after + 1) - origin) / fs
    env = _raw_envelope(t + t_c, order, b)
    raw = env * np.cos(2.0 * np.pi * fc * t)

    peak = np.max(np.abs(np.fft.rfft(raw, _response_fft_size(raw.size))))
    a = 1.0 / peak
    return GammatoneSpec(order=order, center_hz=fc, bandwidth_hz=b, amplitude=a,
                         t_c=t_c, sample_rate=fs, ir=a * raw, origin_index=origin)


def build_bank(f0: float, L: int, fs: int, bandwidth_factor: float = 0.25,
               order: int = 4) -> GammatoneBank:
    """Filters at ``f0, 2 f0, ..., L f0`` sharing bandwidth ``bandwidth_factor * f0``.

    Harmonics at or above Nyquist are dropped with a :class:`BankTruncatedWarning`.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    usable = min(L, int(math.ceil(fs / 2 / f0)) - 1)
    if usable < 1:
        raise ValueError("harmonic exceeds Nyquist")
    if usable < L:
        warnings.warn(f"bank truncated to {usable} filters below Nyquist",
                      BankTruncatedWarning, stacklevel=2)
    filters = tuple(design_filter(f0, k, fs, bandwidth_factor, order)
                    for k in range(1, usable + 1))
    return GammatoneBank(f0=f0, filters=filters, bandwidth_factor=bandwidth_factor,
                         requested=L)


def cascade(frame, bank: GammatoneBank) -> CascadeOutput:
    """Successive filter-and-subtract decomposition.

    Band ``k`` filters what the previous bands left behind; the residual is
    what remains after the last band, so bands plus residual telescope back to
    the input.
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.size == 0:
        raise ValueError("frame must not be empty")
    bands = np.empty((bank.size, x.size))
    rest = x.copy()
    for i, spec in enumerate(bank.filters):
        bands[i] = convolve_noncausal(rest, spec.ir, spec.origin_index)
        rest = rest - bands[i]
    return CascadeOutput(bands=bands, residual=rest)


def write_response_csv(spec: GammatoneSpec, impulse_path, frequency_path=None,
                       max_freq: float | None = None) -> None:
    """Dump impulse response and magnitude response (dB) for plotting."""
    with open(impulse_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "impulse", "envelope"])
        for t, h, e in zip(spec.times, spec.ir, spec.envelope()):
            w.writerow([f"{t:.9g}", f"{h:.9g}", f"{e:.9g}"])
    if frequency_path is None:
        return
    freqs, resp = spec.frequency_response()
    limit = max_freq if max_freq is not None else spec.sample_rate / 2
    with open(frequency_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "magnitude_db"])
        for f, r in zip(freqs, resp):
            if f > limit:
                break
            w.writerow([f"{f:.6g}", f"{20 * math.log10(max(abs(r), 1e-300)):.6g}"])
