import io
import json

import numpy as np
import pytest
from sklearn.base import clone

from huevitals import estimator as est_mod
from huevitals import synth
from huevitals.estimator import (
    EstimatorConfig,
    StreamingEstimator,
    VitalsEstimator,
    final_rates,
    run_offline,
    write_estimates,
)
from huevitals.exceptions import ConfigError, InsufficientDataError, OrderingError
from huevitals.ingest import open_stream
from huevitals.roi import ForeheadRect, RoiSample, parse_landmark_sidecar


def _samples(values, rate=9.0, t0=0.0, channel="hue"):
    return [RoiSample(t0 + i / rate, float(v), 10, channel) for i, v in enumerate(values)]


def _two_tone(hr_hz=1.1, rr_hz=0.3, seconds=20, rate=9.0, amp=0.01, noise=0.0, seed=0):
    t = np.arange(int(seconds * rate)) / rate
    x = 0.05 + amp * (np.sin(2 * np.pi * hr_hz * t) + 0.5 * np.sin(2 * np.pi * rr_hz * t))
    if noise:
        x = x + np.random.default_rng(seed).normal(0, noise, t.size)
    return x


def test_one_estimate_per_second_and_warmup():
    out = StreamingEstimator().run(_samples(_two_tone(seconds=12)))
    assert [e.t_s for e in out] == list(range(12))
    for e in out:
        if e.t_s < 2:
            assert e.hr_bpm is None and e.rr_bpm is None and e.reason == "warming-up"
        elif e.t_s < 6:
            assert e.hr_bpm is not None and e.rr_bpm is None
        else:
            assert e.hr_bpm is not None and e.rr_bpm is not None and e.reason is None


def test_first_rr_not_before_six_seconds():
    out = StreamingEstimator().run(_samples(_two_tone(seconds=20)))
    first_rr = min(e.t_s for e in out if e.rr_bpm is not None)
    first_hr = min(e.t_s for e in out if e.hr_bpm is not None)
    assert first_hr == 2 and first_rr == 6


def test_converges_on_clean_tones():
    out = StreamingEstimator().run(_samples(_two_tone(seconds=30)))
    hr, rr = final_rates(out)
    assert hr == pytest.approx(66, abs=1.0)
    assert rr == pytest.approx(18, abs=1.0)


def test_flat_signal_reason():
    out = StreamingEstimator().run(_samples(np.full(9 * 12, 0.05)))
    late = [e for e in out if e.t_s >= 2]
    assert late and all(e.reason == "flat-signal" and e.hr_bpm is None for e in late)


def test_out_of_order_timestamp_raises():
    est = StreamingEstimator()
    est.push_sample(RoiSample(1.0, 0.05, 1, "hue"))
    with pytest.raises(OrderingError):
        est.push_sample(RoiSample(1.0, 0.05, 1, "hue"))
    with pytest.raises(OrderingError):
        est.push_sample(RoiSample(0.5, 0.05, 1, "hue"))


def test_smoothing_is_mean_of_last_ten_raws():
    x = _two_tone(seconds=40, noise=0.004, seed=9)
    out = StreamingEstimator().run(_samples(x))
    hr_raws = []
    for e in out:
        if e.hr_raw is None:
            continue
        hr_raws.append(e.hr_raw)
        tail = hr_raws[-10:]
        assert e.hr_bpm == pytest.approx(sum(tail) / len(tail), rel=1e-12)
    assert len(hr_raws) > 20


def test_window_bounds_history():
    out = StreamingEstimator().run(_samples(_two_tone(seconds=25)))
    assert max(e.window_used_s for e in out) <= 11.0
    assert out[-1].window_used_s == pytest.approx(11.0, abs=0.12)


def test_estimates_stay_inside_bands():
    rng = np.random.default_rng(1)
    out = StreamingEstimator().run(_samples(rng.normal(size=9 * 30)))
    for e in out:
        if e.hr_bpm is not None:
            assert 48 <= e.hr_bpm <= 132 and 48 <= e.hr_raw <= 132
        if e.rr_bpm is not None:
            assert 10.8 <= e.rr_bpm <= 30


@pytest.mark.parametrize("k", [1e-3, 7.0, 1e4])
def test_amplitude_invariance(k):
    x = _two_tone(seconds=20, noise=0.003, seed=2) - 0.05
    a = StreamingEstimator().run(_samples(x))
    b = StreamingEstimator().run(_samples(k * x))
    for ea, eb in zip(a, b):
        assert (ea.hr_raw is None) == (eb.hr_raw is None)
        if ea.hr_raw is not None:
            assert eb.hr_raw == pytest.approx(ea.hr_raw, abs=1e-6)


def test_missing_samples_give_no_face_reason():
    est = StreamingEstimator()
    results = []
    for s in _samples(_two_tone(seconds=5)):
        results.append(est.push_sample(s))
    for i in range(5 * 9, 9 * 9):
        results.append(est.push_missing(i / 9.0))
    emitted = [e for e in results if e is not None]
    assert emitted[-1].reason == "no-face" and emitted[-1].hr_bpm is None


def test_invalid_config():
    with pytest.raises(ConfigError):
        EstimatorConfig(channel="purple")
    with pytest.raises(ConfigError):
        EstimatorConfig(smooth_n=0)
    with pytest.raises(ConfigError):
        EstimatorConfig(hr_warmup_s=7, rr_warmup_s=6)
    with pytest.raises(ConfigError):
        EstimatorConfig(resample_hz=4.0)


def _offline(spec, cfg=None, n_jobs=1, **kw):
    lms = {lm.frame_index: lm for lm in synth.landmarks_for(spec)}
    return run_offline(synth.iter_synthetic_frames(spec), lms, cfg, n_jobs=n_jobs, **kw)


def test_offline_synthetic_recovers_truth():
    spec = synth.SynthSpec(hr_hz=1.2, rr_hz=0.25, duration_s=20, width=96, height=72,
                           noise_sigma=1.0, seed=4)
    hr, rr = final_rates(_offline(spec, keep_rate=0.3, drop_seed=4))
    assert hr == pytest.approx(72, abs=2)
    assert rr == pytest.approx(15, abs=1.5)


def test_offline_green_channel():
    spec = synth.SynthSpec(duration_s=20, width=96, height=72, noise_sigma=1.0, seed=5)
    out = _offline(spec, EstimatorConfig(channel="green"), keep_rate=0.3, drop_seed=5)
    assert all(e.channel == "green" for e in out)
    hr, _ = final_rates(out)
    assert hr == pytest.approx(66, abs=2)


def test_offline_from_disk(small_clip):
    out_dir, spec, truth = small_clip
    stream = open_stream(synth.video_path(out_dir, spec))
    lms = parse_landmark_sidecar(out_dir / synth.LANDMARK_NAME)
    hr, _ = final_rates(run_offline(stream, lms))
    assert hr == pytest.approx(truth.hr_bpm, abs=2)


def test_offline_fixed_roi_matches_landmarks():
    spec = synth.SynthSpec(duration_s=8, fps=9, width=96, height=72, seed=1)
    rect = synth.face_geometry(96, 72).forehead
    a = _offline(spec)
    b = run_offline(synth.iter_synthetic_frames(spec), roi=rect)
    assert [e.to_record() for e in a] == [e.to_record() for e in b]


def test_offline_deterministic_across_jobs():
    spec = synth.SynthSpec(duration_s=10, width=96, height=72, noise_sigma=2.0, seed=6)
    runs = []
    for n_jobs in (1, 1, 3):
        buf = io.StringIO()
        write_estimates(_offline(spec, n_jobs=n_jobs, keep_rate=0.3, drop_seed=6), buf)
        runs.append(buf.getvalue())
    assert runs[0] == runs[1] == runs[2]


def test_offline_zero_frames():
    with pytest.raises(InsufficientDataError):
        run_offline([], roi=ForeheadRect(0, 0, 4, 4))


def test_offline_needs_landmarks_or_roi():
    with pytest.raises(ConfigError):
        run_offline([])


def test_rect_outside_frame_is_no_face():
    spec = synth.SynthSpec(duration_s=4, fps=9, width=64, height=48)
    out = run_offline(synth.iter_synthetic_frames(spec), roi=ForeheadRect(500, 500, 510, 510))
    assert all(e.reason in ("warming-up", "no-face") for e in out)
    assert out[-1].reason == "no-face"


def test_write_estimates_formats():
    out = StreamingEstimator().run(_samples(_two_tone(seconds=8)))
    buf = io.StringIO()
    write_estimates(out, buf, "jsonl")
    rows = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert len(rows) == 8 and set(rows[0]) >= {"t", "hr", "rr", "reason", "channel"}
    buf = io.StringIO()
    write_estimates(out, buf, "csv")
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("t,hr,rr") and len(lines) == 9
    with pytest.raises(ValueError):
        write_estimates(out, io.StringIO(), "xml")


# scikit-learn facade

def _as_array(x, rate=9.0):
    return np.column_stack([np.arange(x.size) / rate, x])


def test_sklearn_params_round_trip():
    model = VitalsEstimator(smooth_n=5)
    params = model.get_params()
    assert params["smooth_n"] == 5 and params["channel"] == "hue"
    twin = clone(model).set_params(window_s=9.0)
    assert twin.window_s == 9.0 and model.window_s == 11.0


def test_sklearn_fit_validates():
    with pytest.raises(ConfigError):
        VitalsEstimator(channel="blue").fit()
    assert isinstance(VitalsEstimator().fit().config_, EstimatorConfig)


def test_sklearn_predict_and_transform():
    X = [_as_array(_two_tone(seconds=25)), _as_array(_two_tone(1.5, 0.4, seconds=25))]
    model = VitalsEstimator().fit()
    pred = model.predict(X)
    assert pred.shape == (2, 2)
    assert pred[0] == pytest.approx([66, 18], abs=1.0)
    assert pred[1] == pytest.approx([90, 24], abs=1.0)
    per_second = model.transform(X)
    assert len(per_second) == 2 and per_second[0].shape == (25, 3)
    assert np.isnan(per_second[0][:2, 1]).all()


def test_sklearn_single_series_and_short_input():
    model = VitalsEstimator()
    pred = model.predict(_as_array(_two_tone(seconds=3)))
    assert pred.shape == (1, 2) and np.isnan(pred[0, 1])


def test_sklearn_rejects_bad_shape():
    with pytest.raises(ValueError):
        VitalsEstimator().predict(np.zeros((10, 3)))


def test_config_to_dict_is_json():
    d = est_mod.config_to_dict(EstimatorConfig())
    assert json.loads(json.dumps(d))["hr_band"] == [0.8, 2.2]
