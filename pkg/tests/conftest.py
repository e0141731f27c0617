import numpy as np
import pytest

from gtf0.dsp import Waveform
from gtf0.enhancer import EnhanceConfig
from gtf0.hht import EemdConfig

FS = 16000


@pytest.fixture
def fs():
    return FS


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fast_cfg():
    # small ensemble keeps pipeline tests quick; accuracy is covered elsewhere
    return EnhanceConfig(eemd=EemdConfig(ensemble_size=6))


def tone(freq, duration=0.5, fs=FS, amp=1.0, phase=0.0):
    t = np.arange(int(round(duration * fs))) / fs
    return amp * np.cos(2 * np.pi * freq * t + phase)


def wave_of(x, fs=FS):
    return Waveform(np.asarray(x, dtype=float), fs)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
