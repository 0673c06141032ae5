import numpy as np
import pytest

from huevitals import synth
from huevitals.signal import UniformSeries


def tone(freq, rate=9.0, duration=11.0, amp=1.0, phase=0.0, n=None):
    n = n if n is not None else int(round(rate * duration))
    t = np.arange(n) / rate
    return UniformSeries(0.0, rate, amp * np.cos(2 * np.pi * freq * t + phase))


@pytest.fixture(scope="session")
def small_clip(tmp_path_factory):
    """A 12 s clean synthetic clip on disk: (out_dir, spec, truth)."""
    out = tmp_path_factory.mktemp("clip")
    spec = synth.SynthSpec(hr_hz=1.2, rr_hz=0.25, fps=9.0, duration_s=12.0,
                           width=96, height=72, seed=3)
    truth = synth.generate(spec, out)
    return out, spec, truth
