"""F0-driven harmonic emphasis (GTF_F0).

Pipeline per signal: frame, classify voicing, estimate F0 on voiced frames,
split each voiced frame into harmonic bands with a Gammatone cascade, amplify
the bands and overlap-add the frames back together.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .dsp import FrameSet, Waveform, frame_array, frame_params, hann, overlap_add
from .gammatone import BankTruncatedWarning, build_bank, cascade
from .hht import EemdConfig, NoPitchError, estimate_f0
from .vuv import VuvConfig, classify_frames

log = logging.getLogger(__name__)

DEFAULT_GAINS_DB = (5.0, 5.0, 4.0, 2.5)


@dataclass(frozen=True)
class GainProfile:
    gains_db: tuple = DEFAULT_GAINS_DB

    def __post_init__(self):
        g = tuple(float(v) for v in self.gains_db)
        if not g:
            raise ValueError("gain profile must not be empty")
        if min(g) < 0:
            raise ValueError("gains must be >= 0 dB (linear gain >= 1)")
        object.__setattr__(self, "gains_db", g)

    @property
    def linear(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.gains_db) / 20.0)

    def __len__(self) -> int:
        return len(self.gains_db)


@dataclass(frozen=True)
class EnhanceConfig:
    frame_ms: float = 32.0
    overlap: float = 0.5
    L: int = 4
    gain_profile: GainProfile = field(default_factory=GainProfile)
    bandwidth_factor: float = 0.25
    f0_range: tuple = (70.0, 400.0)
    order: int = 4
    eemd: EemdConfig = field(default_factory=EemdConfig)
    vuv: VuvConfig = field(default_factory=VuvConfig)
    normalize: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.gain_profile, (list, tuple)):
            object.__setattr__(self, "gain_profile", GainProfile(tuple(self.gain_profile)))
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if len(self.gain_profile) != self.L:
            raise ValueError(f"gain profile has {len(self.gain_profile)} entries, L = {self.L}")
        if self.normalize not in (None, "rms"):
            raise ValueError("normalize must be None or 'rms'")
        object.__setattr__(self, "f0_range", tuple(float(f) for f in self.f0_range))

    @classmethod
    def from_dict(cls, d: dict) -> "EnhanceConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"gains_db"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "gains_db" in d:
            d["gain_profile"] = GainProfile(tuple(d.pop("gains_db")))
        elif isinstance(d.get("gain_profile"), dict):
            d["gain_profile"] = GainProfile(tuple(d["gain_profile"]["gains_db"]))
        if isinstance(d.get("eemd"), dict):
            d["eemd"] = EemdConfig(**d["eemd"])
        if isinstance(d.get("vuv"), dict):
            v = dict(d["vuv"])
            if "f0_range" in v:
                v["f0_range"] = tuple(v["f0_range"])
            d["vuv"] = VuvConfig(**v)
        if "L" in d and "gain_profile" not in d and d["L"] != len(DEFAULT_GAINS_DB):
            raise ValueError("changing L requires gains_db")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gains_db"] = list(d.pop("gain_profile")["gains_db"])
        d["f0_range"] = list(self.f0_range)
        d["vuv"]["f0_range"] = list(self.vuv.f0_range)
        return d

    def with_seed(self, seed: int) -> "EnhanceConfig":
        eemd = EemdConfig(**{**asdict(self.eemd), "seed": int(seed)})
        return EnhanceConfig(**{**{f.name: getattr(self, f.name) for f in fields(self)},
                                "eemd": eemd})


@dataclass
class FrameRecord:
    index: int
    time_s: float
    voiced: bool
    f0_hz: Optional[float] = None
    confidence: Optional[float] = None
    chosen_mode: Optional[int] = None
    gains_db: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


@dataclass
class EnhanceReport:
    sample_rate: int
    frame_len: int
    hop: int
    frames: list

    @property
    def voicing(self) -> np.ndarray:
        return np.array([f.voiced for f in self.frames], dtype=bool)

    @property
    def f0_track(self) -> np.ndarray:
        return np.array([np.nan if f.f0_hz is None else f.f0_hz for f in self.frames])

    @property
    def enhanced_frames(self) -> list:
        return [f.index for f in self.frames if f.gains_db]

    def to_dict(self) -> dict:
        return {"sample_rate": self.sample_rate, "frame_len": self.frame_len,
                "hop": self.hop, "frames": [asdict(f) for f in self.frames]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _enhance(frame, f0: float, cfg: EnhanceConfig, fs: int):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BankTruncatedWarning)
        bank = build_bank(f0, cfg.L, fs, cfg.bandwidth_factor, cfg.order)
    out = cascade(frame, bank)
    gains = cfg.gain_profile.linear[: bank.size]
    msgs = [str(w.message) for w in caught]
    return out.reconstruct(gains), list(cfg.gain_profile.gains_db[: bank.size]), msgs


def enhance_frame(frame, f0: float, cfg: EnhanceConfig = EnhanceConfig(),
                  sample_rate: int = 16000) -> np.ndarray:
    """Amplify the first harmonics of one frame.

    Returns ``sum_k G_k y_k + r``, same length as ``frame``. A bank truncated at
    Nyquist is reported through :class:`BankTruncatedWarning`.
    """
    out, _, msgs = _enhance(frame, f0, cfg, sample_rate)
    for m in msgs:
        warnings.warn(m, BankTruncatedWarning, stacklevel=2)
    return out


def enhance_signal(x: Waveform, cfg: EnhanceConfig = EnhanceConfig()) -> tuple[Waveform, EnhanceReport]:
    """Run the full pipeline on a waveform.

    Unvoiced frames, and voiced frames whose pitch search fails, pass through
    untouched. Voicing and F0 are computed on unwindowed frames; the Hann
    window is applied before filtering so overlap-add restores the signal.
    """
    fs = x.sample_rate
    frame_len, hop = frame_params(fs, cfg.frame_ms, cfg.overlap)
    raw = frame_array(x.samples, frame_len, hop)
    windowed = raw * hann(frame_len)

    voicing = classify_frames(
        FrameSet(raw, frame_len, hop, "rect", fs, len(x)), cfg.vuv).voicing

    out_frames = windowed.copy()
    records = []
    for i in range(raw.shape[0]):
        rec = FrameRecord(index=i, time_s=i * hop / fs, voiced=bool(voicing[i]))
        if voicing[i]:
            try:
                est = estimate_f0(raw[i], fs, cfg.eemd, cfg.f0_range, frame_index=i)
            except NoPitchError:
                rec.warnings.append("no pitch found; frame passed through")
                log.debug("frame %d: no pitch found", i)
            else:
                rec.f0_hz, rec.confidence, rec.chosen_mode = est.f0_hz, est.confidence, est.chosen_mode
                out_frames[i], rec.gains_db, msgs = _enhance(windowed[i], est.f0_hz, cfg, fs)
                rec.warnings.extend(msgs)
        records.append(rec)

    y = overlap_add(FrameSet(out_frames, frame_len, hop, "hann", fs, len(x)), len(x)).samples
    if cfg.normalize == "rms":
        ref = math.sqrt(float(np.mean(x.samples**2)))
        cur = math.sqrt(float(np.mean(y**2)))
        if cur > 0:
            y = y * (ref / cur)
    report = EnhanceReport(sample_rate=fs, frame_len=frame_len, hop=hop, frames=records)
    return Waveform(y, fs), report
