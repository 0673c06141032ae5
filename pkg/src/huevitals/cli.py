"""Command-line entry point: ``estimate``, ``synth``, ``eval`` and ``spectrum``.

Exit codes: 0 success, 1 usage error, 2 data or format error.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import sys

import numpy as np

from . import __version__
from . import signal as sig
from .estimator import EstimatorConfig, iter_samples, run_offline, write_estimates
from .eval import table_report
from .exceptions import ConfigError, VitalsError
from .ingest import open_stream, simulate_drops
from .roi import CHANNELS, ForeheadRect, HueMask, parse_landmark_sidecar
from .synth import SynthSpec, generate

log = logging.getLogger("huevitals")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    return lo, hi


def _band(text: str) -> sig.Band:
    try:
        return sig.Band(*_pair(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _mask(text: str) -> HueMask:
    try:
        return HueMask.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _rect(text: str) -> ForeheadRect:
    try:
        return ForeheadRect.parse(text)
    except (ValueError, VitalsError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(kind):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a valid {kind.__name__}: {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _keep_rate(text: str) -> float:
    value = _positive(float)(text)
    if value > 1:
        raise argparse.ArgumentTypeError("keep rate must be in (0, 1]")
    return value


def _add_input_flags(p):
    p.add_argument("--input", required=True, metavar="PATH",
                   help="Y4M file, image-sequence directory or raw RGB24 file")
    p.add_argument("--format-hint", choices=("y4m", "image_sequence", "raw_rgb"),
                   help="container type (default: detect from extension/magic)")
    p.add_argument("--landmarks", metavar="PATH", help="landmark sidecar (JSON lines)")
    p.add_argument("--roi", type=_rect, metavar="L,T,R,B",
                   help="fixed forehead rectangle used when no sidecar is given")
    p.add_argument("--channel", choices=CHANNELS, default="hue",
                   help="observable: masked mean hue or mean green (default: hue)")
    p.add_argument("--hue-mask", type=_mask, default=HueMask(0.0, 0.1), metavar="LO,HI",
                   help="open hue interval kept in hue mode (default: 0,0.1)")
    p.add_argument("--keep-rate", type=_keep_rate, default=1.0, metavar="F",
                   help="probability of keeping each frame (default: 1.0, no drops)")
    p.add_argument("--drop-seed", type=int, default=0, metavar="N",
                   help="seed for the frame-drop pattern (default: 0)")
    p.add_argument("--resample-hz", type=_positive(float), default=sig.DEFAULT_RESAMPLE_HZ,
                   metavar="F", help="uniform resampling rate in Hz (default: 9)")
    p.add_argument("--zero-pad", type=_positive(int), default=sig.DEFAULT_ZERO_PAD,
                   metavar="N", help="DFT zero-padding factor (default: 4)")
    p.add_argument("--max-gap-s", type=_positive(float), default=sig.DEFAULT_MAX_GAP_S,
                   metavar="F", help="gap flag threshold in seconds (default: 0.5)")
    p.add_argument("--window-s", type=_positive(float), default=11.0, metavar="F",
                   help="seconds of history analyzed (default: 11)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="huevitals",
                     description="Heart and respiration rate from facial video hue.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command", metavar="{estimate,synth,eval,spectrum}")
    sub.required = True

    p = sub.add_parser("estimate", help="per-second HR/RR estimates from a video")
    _add_input_flags(p)
    p.add_argument("--hr-band", type=_band, default=sig.HR_BAND, metavar="LO,HI",
                   help="HR search band in Hz (default: 0.8,2.2)")
    p.add_argument("--rr-band", type=_band, default=sig.RR_BAND, metavar="LO,HI",
                   help="RR search band in Hz (default: 0.18,0.5)")
    p.add_argument("--hr-warmup-s", type=float, default=2.0, metavar="F",
                   help="seconds before the first HR (default: 2)")
    p.add_argument("--rr-warmup-s", type=float, default=6.0, metavar="F",
                   help="seconds before the first RR (default: 6)")
    p.add_argument("--smooth-n", type=_positive(int), default=10, metavar="N",
                   help="trailing raw estimates averaged (default: 10)")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl",
                   help="output format (default: jsonl)")
    p.add_argument("--jobs", type=_positive(int), default=1, metavar="N",
                   help="threads for per-frame ROI reduction (default: 1)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("synth", help="render a synthetic face video with ground truth")
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--hr-hz", type=float, default=1.1, help="planted HR frequency (default: 1.1)")
    p.add_argument("--rr-hz", type=float, default=0.3, help="planted RR frequency (default: 0.3)")
    p.add_argument("--hue-amp", type=float, default=0.008,
                   help="hue oscillation amplitude (default: 0.008)")
    p.add_argument("--green-amp", type=float, default=2.0,
                   help="green oscillation amplitude, 8-bit units (default: 2.0)")
    p.add_argument("--noise-sigma", type=float, default=0.0,
                   help="per-pixel Gaussian noise sigma (default: 0)")
    p.add_argument("--brightness-drift", action="store_true",
                   help="multiply frames by a 0.7-1.0 gain at 0.05 Hz")
    p.add_argument("--fps", type=_positive(float), default=30.0, help="frame rate (default: 30)")
    p.add_argument("--duration-s", type=_positive(float), default=20.0,
                   help="clip length in seconds (default: 20)")
    p.add_argument("--width", type=_positive(int), default=160, help="frame width (default: 160)")
    p.add_argument("--height", type=_positive(int), default=120,
                   help="frame height (default: 120)")
    p.add_argument("--seed", type=int, default=0, help="noise seed (default: 0)")
    p.add_argument("--chroma", choices=("420", "444"), default="420",
                   help="Y4M chroma subsampling (default: 420)")
    p.add_argument("--container", choices=("y4m", "image_sequence"), default="y4m",
                   help="output container (default: y4m)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="RMSE report against a reference CSV")
    p.add_argument("--reference", metavar="PATH",
                   help="comparison CSV (default: bundled device comparison table)")
    p.add_argument("--estimates", action="append", default=[], metavar="[LABEL=]PATH",
                   help="estimator JSONL to score; repeatable")
    p.add_argument("--reference-method", default="hexoskin",
                   help="column prefix used as ground truth (default: hexoskin)")
    p.add_argument("--format", choices=("text", "json"), default="text",
                   help="report format (default: text)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("spectrum", help="dump the iPPG magnitude spectrum as CSV")
    _add_input_flags(p)
    p.add_argument("--band", type=_band, metavar="LO,HI",
                   help="band-isolate the series first and only print bins in the band")
    p.set_defaults(func=cmd_spectrum)
    return parser


@contextlib.contextmanager
def _output(path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh
    else:
        yield sys.stdout


def _load_geometry(args):
    if args.landmarks is None and args.roi is None:
        raise UsageError("one of --landmarks or --roi is required")
    landmarks = parse_landmark_sidecar(args.landmarks) if args.landmarks else None
    return landmarks, args.roi


def cmd_estimate(args) -> int:
    try:
        cfg = EstimatorConfig(
            channel=args.channel, window_s=args.window_s, hr_band=args.hr_band,
            rr_band=args.rr_band, hr_warmup_s=args.hr_warmup_s, rr_warmup_s=args.rr_warmup_s,
            smooth_n=args.smooth_n, resample_hz=args.resample_hz,
            zero_pad_factor=args.zero_pad, max_gap_s=args.max_gap_s, hue_mask=args.hue_mask)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    landmarks, roi = _load_geometry(args)
    meta, frames = open_stream(args.input, args.format_hint)
    log.info("stream %dx%d @ %.3f fps (%s)", meta.width, meta.height, meta.nominal_fps,
             meta.source_kind)
    estimates = run_offline((meta, frames), landmarks, cfg, roi, keep_rate=args.keep_rate,
                            drop_seed=args.drop_seed, n_jobs=args.jobs)
    with _output(args.out) as fh:
        write_estimates(estimates, fh, args.format)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = SynthSpec(hr_hz=args.hr_hz, rr_hz=args.rr_hz, hue_amp=args.hue_amp,
                         green_amp=args.green_amp, noise_sigma=args.noise_sigma,
                         brightness_drift=args.brightness_drift, fps=args.fps,
                         duration_s=args.duration_s, width=args.width, height=args.height,
                         seed=args.seed, chroma=args.chroma, container=args.container)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    truth = generate(spec, args.out)
    print(json.dumps({"out": args.out, "frames": spec.n_frames, "hr_bpm": truth.hr_bpm,
                      "rr_bpm": truth.rr_bpm, "forehead_rect": list(truth.forehead_rect)}))
    return EXIT_OK


def cmd_eval(args) -> int:
    estimates = []
    for item in args.estimates:
        label, sep, path = item.partition("=")
        estimates.append((label, path) if sep else item)
    report = table_report(args.reference, estimates, args.reference_method)
    with _output(args.out) as fh:
        fh.write((report.to_json() if args.format == "json" else report.to_text()) + "\n")
    for note in report.notes:
        log.warning(note)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    landmarks, roi = _load_geometry(args)
    cfg = EstimatorConfig(channel=args.channel, hue_mask=args.hue_mask,
                          resample_hz=args.resample_hz, max_gap_s=args.max_gap_s)
    _, frames = open_stream(args.input, args.format_hint)
    if args.keep_rate < 1.0:
        frames = simulate_drops(frames, args.keep_rate, args.drop_seed)
    samples = [s for _f, s, _m in iter_samples(frames, landmarks, cfg, roi) if s is not None]
    if samples:
        t_end = samples[-1].timestamp_s
        samples = [s for s in samples if s.timestamp_s >= t_end - args.window_s]
    series = sig.IppgSeries.from_samples(samples, args.channel)
    u = sig.resample_uniform(series, args.resample_hz, args.max_gap_s)
    if args.band is not None:
        u = sig.band_filter(u, args.band)
    sp = sig.spectrum(u, args.zero_pad)
    keep = np.ones(sp.freqs_hz.size, dtype=bool)
    if args.band is not None:
        keep = (sp.freqs_hz >= args.band.lo_hz) & (sp.freqs_hz <= args.band.hi_hz)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "magnitude"])
        for f, m in zip(sp.freqs_hz[keep], sp.mags[keep]):
            w.writerow([repr(float(f)), repr(float(m))])
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"huevitals {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VitalsError as exc:
        print(f"huevitals {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
