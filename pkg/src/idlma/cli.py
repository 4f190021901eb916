"""Command-line front end: mix, separate, eval, inspect-weights.

Exit codes: 0 success, 2 validation failure, 3 numerical failure, 4 I/O or
file-format failure.  Flag combinations are validated before any input file
is opened, and seeded runs are deterministic.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import metrics, report, separation, signal_io
from .linalg import SingularMatrixError
from .network import WeightFormatError, load_network, payload_checksum
from .signal_io import (
    ClippingWarning,
    MultichannelSignal,
    UnreadableFileError,
    UnsupportedEncodingError,
)
from .source_models import DnnModel, FloorPolicy, OracleModel
from .stft import StftConfig, stft, istft

__all__ = ["main", "run"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class ValidationError(Exception):
    """Bad flag combination or inconsistent inputs."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idlma",
        description="Determined multichannel source separation with deep or low-rank "
        "source spectrogram models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mix = sub.add_parser("mix", help="synthesize a determined mixture from source WAVs")
    mix.add_argument("sources", nargs="+", help="single-channel source WAV files")
    mix.add_argument("--spec", required=True, help="mixing spec JSON ({type, rows})")
    mix.add_argument("--out", required=True, help="output mixture WAV")
    mix.add_argument("--encoding", choices=["pcm16", "float32"], default="float32")

    sep = sub.add_parser("separate", help="estimate demixing filters and write sources")
    sep.add_argument("mixture", help="multichannel mixture WAV")
    sep.add_argument("--out-dir", required=True, help="directory for separated WAVs")
    sep.add_argument("--model", choices=["gauss", "t"], default="gauss")
    sep.add_argument("--nu", type=float, default=1000.0, help="degrees of freedom (t model)")
    sep.add_argument(
        "--source-model", choices=["oracle", "nmf", "dnn"], default="nmf", dest="source_model"
    )
    sep.add_argument("--references", nargs="*", default=[], help="reference WAVs (oracle)")
    sep.add_argument("--weights", nargs="*", default=[], help="IDLM1 weight files (dnn)")
    sep.add_argument("--nmf-bases", type=int, default=20)
    sep.add_argument("--outer-rounds", type=int, default=10)
    sep.add_argument("--inner-iters", type=int, default=10)
    sep.add_argument("--window-ms", type=float, default=512.0)
    sep.add_argument("--hop-ms", type=float, default=256.0)
    sep.add_argument("--ref-channel", type=int, default=0, help="0-based reference channel")
    sep.add_argument(
        "--floor-mode",
        choices=["fixed", "relative"],
        default=None,
        help="variance floor rule (default: relative 0.1 for oracle/dnn, fixed 1e-12 for nmf)",
    )
    sep.add_argument("--floor-value", type=float, default=None)
    sep.add_argument("--seed", type=int, default=0)
    sep.add_argument("--trace", default=None, help="trace path (default: OUT_DIR/trace.jsonl)")
    sep.add_argument("--figure", default=None, help="render the cost trace to this PNG")
    sep.add_argument("--encoding", choices=["pcm16", "float32"], default="float32")

    ev = sub.add_parser("eval", help="score separated signals against references")
    ev.add_argument("--estimates", nargs="+", required=True)
    ev.add_argument("--references", nargs="+", required=True)
    ev.add_argument("--mixture", required=True, help="mixture WAV for the improvement baseline")
    ev.add_argument("--ref-channel", type=int, default=0)
    ev.add_argument("--report", default=None, help="also write the report lines to this file")
    ev.add_argument("--figure", default=None, help="render per-source scores to this PNG")

    insp = sub.add_parser("inspect-weights", help="describe an IDLM1 weight container")
    insp.add_argument("path")
    return parser


def _validate_separate(args) -> None:
    if args.source_model == "oracle" and not args.references:
        raise ValidationError("--source-model oracle requires --references")
    if args.source_model == "dnn" and not args.weights:
        raise ValidationError("--source-model dnn requires --weights, one file per source")
    if args.model == "t" and not args.nu > 0.0:
        raise ValidationError(f"--nu must be positive, got {args.nu}")
    if args.outer_rounds < 0 or args.inner_iters < 1 or args.nmf_bases < 1:
        raise ValidationError("rounds/iterations/bases must be positive")
    if args.window_ms <= 0 or args.hop_ms <= 0 or args.hop_ms > args.window_ms:
        raise ValidationError("need 0 < hop_ms <= window_ms")
    if args.ref_channel < 0:
        raise ValidationError("--ref-channel must be nonnegative")
    if args.floor_value is not None and args.floor_value < 0:
        raise ValidationError("--floor-value must be nonnegative")


def _resolve_floor(args) -> FloorPolicy:
    if args.floor_mode is None:
        if args.source_model == "nmf":
            return FloorPolicy.fixed(1e-12)
        return FloorPolicy.relative(0.1)
    value = args.floor_value
    if value is None:
        value = 0.1 if args.floor_mode == "relative" else 1e-12
    return FloorPolicy(args.floor_mode, value)


def _read_single_channel(path) -> MultichannelSignal:
    signal = signal_io.read_wav(path)
    if signal.channels != 1:
        raise ValidationError(f"{path} must be single-channel, has {signal.channels}")
    return signal


def _cmd_mix(args) -> int:
    spec = signal_io.load_mixing_spec(args.spec)
    sources = [_read_single_channel(p) for p in args.sources]
    mixture = signal_io.simulate_mixture(sources, spec)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClippingWarning)
        clipped = signal_io.write_wav(args.out, mixture, encoding=args.encoding)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(json.dumps({"mixing": spec.describe(), "out": str(args.out), "clipped": clipped}))
    return EXIT_OK


def _cmd_separate(args) -> int:
    _validate_separate(args)
    mixture = signal_io.read_wav(args.mixture)
    n_sources = mixture.channels
    if args.ref_channel >= n_sources:
        raise ValidationError(f"--ref-channel {args.ref_channel} >= {n_sources} channels")
    config = StftConfig.from_milliseconds(args.window_ms, args.hop_ms, mixture.sample_rate)
    if mixture.length < config.window_len:
        raise ValidationError(
            f"mixture of {mixture.length} samples is shorter than one "
            f"{config.window_len}-sample window"
        )
    channels = [stft(mixture.samples[m], config) for m in range(n_sources)]

    nu = separation.GAUSS if args.model == "gauss" else args.nu
    floor = _resolve_floor(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = Path(args.trace) if args.trace else out_dir / "trace.jsonl"

    try:
        if args.source_model == "nmf":
            result = separation.run_ilrma(
                channels,
                separation.IlrmaConfig(
                    n_basis=args.nmf_bases,
                    sweeps=args.outer_rounds * args.inner_iters,
                    floor=floor,
                    ref_channel=args.ref_channel,
                    seed=args.seed,
                ),
            )
        else:
            if args.source_model == "oracle":
                if len(args.references) != n_sources:
                    raise ValidationError(
                        f"{len(args.references)} references for {n_sources} sources"
                    )
                models = []
                for path in args.references:
                    ref = _read_single_channel(path)
                    if ref.length != mixture.length or ref.sample_rate != mixture.sample_rate:
                        raise ValidationError(f"{path} is not aligned with the mixture")
                    models.append(OracleModel(stft(ref.samples[0], config)))
            else:
                if len(args.weights) != n_sources:
                    raise ValidationError(
                        f"{len(args.weights)} weight files for {n_sources} sources"
                    )
                models = [DnnModel(load_network(path)) for path in args.weights]
            result = separation.run_idlma(
                channels,
                models,
                separation.IdlmaConfig(
                    nu=nu,
                    outer_rounds=args.outer_rounds,
                    inner_iters=args.inner_iters,
                    floor=floor,
                    ref_channel=args.ref_channel,
                ),
            )
    except separation.SpatialUpdateError as err:
        report.write_trace(trace_path, err.trace)
        raise

    for n, source in enumerate(result.sources()):
        estimate = istft(source, mixture.length)
        signal_io.write_wav(
            out_dir / f"source{n + 1}.wav",
            MultichannelSignal(estimate[None, :], mixture.sample_rate),
            encoding=args.encoding,
        )
    report.write_trace(trace_path, result.trace)
    if args.figure:
        report.render_trace_figure(result.trace, args.figure)
    final_cost = result.trace[-1].cost if result.trace else None
    print(json.dumps({"sources": n_sources, "sweeps": len(result.trace), "cost": final_cost}))
    return EXIT_OK


def _cmd_eval(args) -> int:
    if len(args.estimates) != len(args.references):
        raise ValidationError(
            f"{len(args.estimates)} estimates for {len(args.references)} references"
        )
    estimates = [_read_single_channel(p).samples[0] for p in args.estimates]
    references = [_read_single_channel(p).samples[0] for p in args.references]
    mixture = signal_io.read_wav(args.mixture)
    if args.ref_channel >= mixture.channels:
        raise ValidationError(f"--ref-channel {args.ref_channel} >= {mixture.channels} channels")
    lengths = {len(x) for x in estimates + references} | {mixture.length}
    if len(lengths) != 1:
        raise ValidationError(f"signals disagree on length: {sorted(lengths)}")
    result = metrics.evaluate(estimates, references, mixture.samples[args.ref_channel])
    for line in report.report_to_lines(result):
        print(line)
    if args.report:
        report.write_report(args.report, result)
    if args.figure:
        report.render_eval_figure(result, args.figure)
    return EXIT_OK


def _cmd_inspect_weights(args) -> int:
    net = load_network(args.path)
    dims = net.layer_dims
    print(f"layer 0: input dim {dims[0]}")
    for k in range(1, len(dims)):
        print(f"layer {k}: {dims[k - 1]} -> {dims[k]}")
    print(f"freq_bins {net.freq_bins}")
    print(f"context {net.context}")
    print(f"delta2 {net.delta2:.6g}")
    print(f"checksum {payload_checksum(args.path)}")
    return EXIT_OK


def main(argv=None) -> int:
    """Parse and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    handlers = {
        "mix": _cmd_mix,
        "separate": _cmd_separate,
        "eval": _cmd_eval,
        "inspect-weights": _cmd_inspect_weights,
    }
    try:
        return handlers[args.command](args)
    except (SingularMatrixError, separation.SpatialUpdateError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UnreadableFileError, UnsupportedEncodingError, WeightFormatError, OSError) as err:
        print(f"i/o failure: {err}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
