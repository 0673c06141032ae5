import csv
import json
import subprocess
import sys

import pytest

from huevitals import synth
from huevitals.cli import main


@pytest.fixture(scope="module")
def clip(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_clip")
    assert main(["synth", "--out", str(out), "--fps", "9", "--duration-s", "12",
                 "--width", "96", "--height", "72", "--hr-hz", "1.2", "--rr-hz", "0.25",
                 "--seed", "2"]) == 0
    return out


def _estimate(clip, *extra):
    return ["estimate", "--input", str(clip / synth.VIDEO_NAME),
            "--landmarks", str(clip / synth.LANDMARK_NAME), *extra]


def test_synth_writes_outputs(clip, capsys):
    for name in (synth.VIDEO_NAME, synth.LANDMARK_NAME, synth.TRUTH_NAME):
        assert (clip / name).exists()


def test_estimate_jsonl(clip, capsys):
    assert main(_estimate(clip)) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [r["t"] for r in rows] == list(range(12))
    assert rows[0]["reason"] == "warming-up"
    assert rows[-1]["hr"] == pytest.approx(72, abs=2)


def test_estimate_csv_to_file(clip, tmp_path):
    out = tmp_path / "est.csv"
    assert main(_estimate(clip, "--format", "csv", "--out", str(out), "--channel", "green")) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 12 and rows[-1]["channel"] == "green"


def test_estimate_with_fixed_roi(clip, capsys):
    rect = ",".join(str(v) for v in synth.face_geometry(96, 72).forehead.as_tuple())
    args = ["estimate", "--input", str(clip / synth.VIDEO_NAME), "--roi", rect]
    assert main(args) == 0
    by_roi = capsys.readouterr().out
    assert main(_estimate(clip)) == 0
    assert capsys.readouterr().out == by_roi


def test_estimate_jobs_identical(clip, capsys):
    assert main(_estimate(clip, "--keep-rate", "0.6", "--drop-seed", "3")) == 0
    a = capsys.readouterr().out
    assert main(_estimate(clip, "--keep-rate", "0.6", "--drop-seed", "3", "--jobs", "3")) == 0
    assert capsys.readouterr().out == a


@pytest.mark.parametrize("args", [
    ["estimate", "--channel", "purple"],
    ["estimate", "--keep-rate", "1.5"],
    ["estimate", "--hr-band", "2,1"],
    ["estimate", "--hue-mask", "abc"],
])
def test_usage_errors_exit_1(clip, capsys, args):
    full = _estimate(clip) + args[1:]
    assert main(full) == 1
    assert "error" in capsys.readouterr().err


def test_missing_geometry_is_usage_error(clip, capsys):
    assert main(["estimate", "--input", str(clip / synth.VIDEO_NAME)]) == 1


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 1


def test_data_errors_exit_2(clip, tmp_path, capsys):
    assert main(["estimate", "--input", str(tmp_path / "none.y4m"), "--roi", "0,0,4,4"]) == 2
    bad = tmp_path / "bad.y4m"
    bad.write_bytes(b"YUV4MPEG2 W4 H4\n")
    assert main(["estimate", "--input", str(bad), "--roi", "0,0,4,4"]) == 2
    lm = tmp_path / "lm.lmjsonl"
    lm.write_text('{"frame": 0, "face_box": [0, 0, 5, 5], "points": [[1, 1]]}\n')
    assert main(["estimate", "--input", str(clip / synth.VIDEO_NAME),
                 "--landmarks", str(lm)]) == 2
    err = capsys.readouterr().err
    assert "line 1" in err


def test_synth_invalid_spec_is_usage_error(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--hr-hz", "3.0"]) == 1


def test_eval_default_table(capsys):
    assert main(["eval"]) == 0
    captured = capsys.readouterr()
    assert "1.7014" in captured.out
    assert "swapped" in captured.out


def test_eval_json_with_estimates(clip, tmp_path, capsys):
    est = tmp_path / "mine.jsonl"
    assert main(_estimate(clip, "--out", str(est))) == 0
    ref = tmp_path / "ref.csv"
    ref.write_text("time_s,dev_hr\n" + "".join(f"{t},72\n" for t in range(12)))
    assert main(["eval", "--reference", str(ref), "--reference-method", "dev",
                 "--estimates", f"cam={est}", "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    entry = report["entries"][0]
    assert entry["method"] == "cam" and entry["n"] == 10
    assert entry["rmse"] < 5 and report["aami"]["cam"] is True


def test_spectrum_peak(clip, tmp_path, capsys):
    out = tmp_path / "sp.csv"
    assert main(["spectrum", "--input", str(clip / synth.VIDEO_NAME),
                 "--landmarks", str(clip / synth.LANDMARK_NAME), "--band", "0.8,2.2",
                 "--out", str(out)]) == 0
    rows = [(float(r["freq_hz"]), float(r["magnitude"])) for r in csv.DictReader(out.open())]
    assert all(0.8 <= f <= 2.2 for f, _ in rows)
    peak = max(rows, key=lambda r: r[1])[0]
    assert peak == pytest.approx(1.2, abs=0.05)


def test_help_lists_defaults():
    res = subprocess.run([sys.executable, "-m", "huevitals", "estimate", "--help"],
                         capture_output=True, text=True, check=True)
    for text in ("default: 0.8,2.2", "default: 0.18,0.5", "default: 9", "default: 10",
                 "default: 11", "default: 0,0.1"):
        assert text in res.stdout
    assert main(["--version"]) == 0
