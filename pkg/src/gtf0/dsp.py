"""Shared signal primitives: framing, overlap-add, convolution, STFT and WAV I/O."""

from __future__ import annotations

import csv
import math
import wave
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class Window(str, Enum):
    HANN = "hann"
    RECT = "rect"


@dataclass(frozen=True)
class Waveform:
    """Mono signal with its sampling rate.

    Samples are stored as a read-only float64 array.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64).reshape(-1)
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def power(self) -> float:
        return float(np.mean(self.samples**2)) if self.samples.size else 0.0


@dataclass(frozen=True)
class FrameSet:
    """Equal-length overlapping frames cut from one signal.

    ``frames`` has shape ``(Q, frame_len)``. ``voicing`` is ``None`` until a
    voiced/unvoiced classifier fills it.
    """

    frames: np.ndarray
    frame_len: int
    hop: int
    window: Window = Window.HANN
    sample_rate: int = 16000
    signal_len: int = 0
    voicing: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError("FrameSet needs at least one frame")
        if frames.shape[1] != self.frame_len:
            raise ValueError("frame width does not match frame_len")
        if self.hop < 1 or self.hop > self.frame_len:
            raise ValueError("hop must lie in [1, frame_len]")
        if self.voicing is not None:
            v = np.asarray(self.voicing, dtype=bool)
            if v.shape != (frames.shape[0],):
                raise ValueError("voicing must hold one flag per frame")
            object.__setattr__(self, "voicing", v)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "window", Window(self.window))

    def __len__(self) -> int:
        return self.frames.shape[0]

    def with_voicing(self, voicing) -> "FrameSet":
        return replace(self, voicing=np.asarray(voicing, dtype=bool))


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude STFT, rows are frames and columns are frequency bins."""

    magnitudes: np.ndarray
    frame_len: int
    hop: int
    sample_rate: int

    @property
    def freq_resolution(self) -> float:
        return self.sample_rate / self.frame_len

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.magnitudes.shape[1]) * self.freq_resolution

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.magnitudes.shape[0]) * self.hop / self.sample_rate

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"{f:.6g}" for f in self.frequencies])
            for row in self.magnitudes:
                writer.writerow([f"{v:.9g}" for v in row])


def hann(n: int) -> np.ndarray:
    """Periodic Hann window; sums to exactly one at 50 % overlap."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def make_window(kind, n: int) -> np.ndarray:
    kind = Window(kind)
    if kind is Window.HANN:
        return hann(n)
    return np.ones(n)


def frame_count(n_samples: int, frame_len: int, hop: int) -> int:
    if n_samples < frame_len:
        raise ValueError("signal too short")
    return math.ceil((n_samples - frame_len) / hop) + 1


def frame_params(sample_rate: int, frame_ms: float, overlap: float) -> tuple[int, int]:
    """Frame length and hop in samples for a duration and overlap fraction."""
    if frame_ms <= 0:
        raise ValueError("frame_ms must be positive")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    frame_len = int(round(sample_rate * frame_ms / 1000.0))
    hop = max(1, int(round(frame_len * (1.0 - overlap))))
    return frame_len, hop


def frame_array(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Slice ``x`` into ``(Q, frame_len)`` frames, zero-padding the tail."""
    x = np.asarray(x, dtype=np.float64)
    q = frame_count(x.size, frame_len, hop)
    padded = np.zeros((q - 1) * hop + frame_len)
    padded[: x.size] = x
    idx = np.arange(frame_len)[None, :] + hop * np.arange(q)[:, None]
    return padded[idx]


def frame_signal(x: Waveform, frame_ms: float = 32.0, overlap: float = 0.5,
                 window=Window.HANN) -> FrameSet:
    """Split a waveform into windowed overlapping frames.

    The window is applied once here; :func:`overlap_add` only sums.

    Parameters
    ----------
    x : Waveform
    frame_ms : float
        Frame duration in milliseconds.
    overlap : float
        Fraction of overlap between consecutive frames, in ``[0, 1)``.
    window : Window or str
        ``"hann"`` or ``"rect"``.

    Returns
    -------
    FrameSet
        ``Q = ceil((len - frame_len) / hop) + 1`` frames; the last one is
        zero-padded.
    """
    frame_len, hop = frame_params(x.sample_rate, frame_ms, overlap)
    if len(x) == 0:
        raise ValueError("signal too short")
    frames = frame_array(x.samples, frame_len, hop) * make_window(window, frame_len)
    return FrameSet(frames=frames, frame_len=frame_len, hop=hop,
                    window=Window(window), sample_rate=x.sample_rate,
                    signal_len=len(x))


def overlap_add(frames: FrameSet, out_len: Optional[int] = None) -> Waveform:
    """Sum frames at their hop offsets.

    ``out_len`` defaults to the length of the signal the frames were cut from.
    """
    q, n = frames.frames.shape
    total = (q - 1) * frames.hop + n
    out = np.zeros(total)
    for i in range(q):
        out[i * frames.hop: i * frames.hop + n] += frames.frames[i]
    if out_len is None:
        out_len = frames.signal_len or total
    if out_len > total:
        out = np.concatenate([out, np.zeros(out_len - total)])
    return Waveform(out[:out_len], frames.sample_rate)


def interior_slice(n_samples: int, frame_len: int) -> slice:
    """Samples covered by two Hann frames (first and last half-frame dropped)."""
    half = frame_len // 2
    return slice(half, max(half, n_samples - half))


def convolve_noncausal(x, h, origin_index: int) -> np.ndarray:
    """Linear convolution with ``h[origin_index]`` acting as the ``t = 0`` tap.

    The output has the length of ``x``; samples outside ``x`` count as zero.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if h.size == 0:
        raise ValueError("filter must not be empty")
    if not 0 <= origin_index < h.size:
        raise ValueError("origin_index outside the filter support")
    if not np.all(np.isfinite(h)):
        raise ValueError("filter must be finite")
    if x.size == 0:
        return x.copy()
    full = np.convolve(x, h)
    return full[origin_index: origin_index + x.size]


def stft_spectrogram(x: Waveform, frame_len: int = 512, hop: int = 256) -> Spectrogram:
    """Hann-windowed magnitude STFT (one-sided bins)."""
    if not frame_len >= hop >= 1:
        raise ValueError("need frame_len >= hop >= 1")
    frames = frame_array(x.samples, frame_len, hop) * hann(frame_len)
    mags = np.abs(np.fft.rfft(frames, axis=1))
    return Spectrogram(magnitudes=mags, frame_len=frame_len, hop=hop,
                       sample_rate=x.sample_rate)


class WavFormatError(ValueError):
    pass


def read_wav(path) -> Waveform:
    """Read a 16-bit PCM mono RIFF/WAVE file, scaled by 1/32768."""
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise WavFormatError(f"{path}: not a PCM16 WAV file ({exc})") from exc
    except EOFError as exc:
        raise WavFormatError(f"{path}: malformed WAV header") from exc
    if channels != 1:
        raise WavFormatError(f"{path}: mono required, file has {channels} channels")
    if width != 2:
        raise WavFormatError(f"{path}: PCM16 required, file has {8 * width}-bit samples")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(data, rate)


def write_wav(path, w: Waveform) -> None:
    """Write ``w`` as 16-bit PCM mono, clipping to [-1, 1] first."""
    q = np.round(np.clip(w.samples, -1.0, 1.0) * 32768.0)
    q = np.clip(q, -32768, 32767).astype("<i2")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(q.tobytes())


def rms(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean(x**2))) if x.size else 0.0
