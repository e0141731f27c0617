"""Objective intelligibility and quality measures."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..dsp import Waveform
from .estoi import estoi
from .pitch import gross_error, mae, seg_snr
from .quality import levinson, llr, lpc, wss

__all__ = ["MetricReport", "evaluate", "estoi", "llr", "wss", "seg_snr",
           "gross_error", "mae", "levinson", "lpc"]


@dataclass(frozen=True)
class MetricReport:
    estoi: float
    llr: float
    wss: float
    seg_snr_db: float

    def to_dict(self) -> dict:
        return asdict(self)


def _aligned(clean: Waveform, test: Waveform) -> np.ndarray:
    if clean.sample_rate != test.sample_rate:
        raise ValueError("sample rates differ")
    y = test.samples
    n = len(clean)
    return y[:n] if y.size >= n else np.concatenate([y, np.zeros(n - y.size)])


def evaluate(clean: Waveform, test: Waveform) -> MetricReport:
    """All metrics of ``test`` against ``clean`` (test trimmed/padded to clean)."""
    fs = clean.sample_rate
    x = clean.samples
    y = _aligned(clean, test)
    return MetricReport(estoi=estoi(x, y, fs), llr=llr(x, y, fs),
                        wss=wss(x, y, fs), seg_snr_db=seg_snr(x, y, fs))
