#!/usr/bin/env python3
"""
Command-line entry point for the multi-user multi-layer MIMO SLNR simulator.

    python app.py --config configs/matched_filter.json --compare --out results/mf.csv

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
import argparse
import logging
import os
import sys
from dataclasses import replace

from dotenv import load_dotenv

from engine.channel_model import ConfigValidationError, LayerNoise, ReceiverType, Scheme
from engine.config import ConfigParseError, load_config
from engine.harness import compare_schemes, run_campaign
from engine.report import emit_summary, write_cdf, write_samples

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class CliParser(argparse.ArgumentParser):
    """Argument errors leave as one config-error line with exit code 2."""

    def error(self, message):
        self.exit(EXIT_CONFIG, f"config-error: {one_line(message)}\n")


def positive_int(text):
    try:
        value = int(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def log_level(text):
    level = logging.getLevelName(str(text).upper())
    if not isinstance(level, int):
        raise argparse.ArgumentTypeError(f"unknown log level {text!r}")
    return level


def build_parser():
    parser = CliParser(description="Multi-user multi-layer MIMO SLNR precoding simulator")
    parser.add_argument("--config", required=True, help="JSON scenario document")
    parser.add_argument("--scheme", choices=[s.value for s in Scheme])
    parser.add_argument("--receiver", choices=[r.value for r in ReceiverType])
    parser.add_argument("--layer-noise", choices=[n.value for n in LayerNoise], dest="layer_noise",
                        help="noise term of the layer objective")
    parser.add_argument("--drops", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--iters", type=int, help="feedback iterations T")
    parser.add_argument("--n-tx", type=int, dest="n_tx", help="override transmit antenna count")
    parser.add_argument("--out", help="samples CSV path")
    parser.add_argument("--compare", action="store_true", help="paired run of both schemes")
    parser.add_argument("--cdf", action="store_true", help="also write the CDF table")
    parser.add_argument("--plot-script", action="store_true", dest="plot_script", help="also write a plotly script")
    parser.add_argument("--workers", type=positive_int, default=os.getenv("MIMO_SIM_WORKERS", "1"))
    parser.add_argument("--log-level", type=log_level, default=os.getenv("MIMO_SIM_LOG_LEVEL", "INFO"))
    return parser


def apply_overrides(config, options, args):
    """Command-line flags win over document values; the result is revalidated."""
    changes = {}
    if args.scheme:
        changes["scheme"] = Scheme(args.scheme)
    if args.receiver:
        changes["receiver"] = ReceiverType(args.receiver)
    if args.layer_noise:
        changes["layer_noise"] = LayerNoise(args.layer_noise)
    if args.drops is not None:
        changes["drops"] = args.drops
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.iters is not None:
        changes["feedback_iters"] = args.iters
    if args.n_tx is not None:
        changes["n_tx"] = args.n_tx
    config = replace(config, **changes) if changes else config

    option_changes = {}
    if args.out:
        option_changes["output_path"] = args.out
    if args.cdf:
        option_changes["emit_cdf"] = True
    if args.plot_script:
        option_changes["emit_plot_script"] = True
    options = replace(options, **option_changes) if option_changes else options
    return config, options


def one_line(text):
    return " ".join(str(text).split())


def sibling_path(path, suffix, ext):
    base, _ = os.path.splitext(path)
    return f"{base}_{suffix}{ext}"


def run(config, options, compare, workers):
    out = options.output_path
    directory = os.path.dirname(out)
    if directory:
        os.makedirs(directory, exist_ok=True)

    if compare:
        report = compare_schemes(config, workers=workers)
        summaries = list(report.summaries.values())
        write_samples(report.samples, out)
        deltas_path = sibling_path(out, "deltas", ".csv")
        report.deltas.to_csv(deltas_path, index=False, float_format="%.6f", lineterminator="\n", encoding="utf-8")
        logger.info(f"Wrote paired deltas to {deltas_path}")
    else:
        result = run_campaign(config, workers=workers)
        summaries = [result.summary]
        write_samples(result.samples, out)

    if options.emit_cdf:
        write_cdf(summaries, sibling_path(out, "cdf", ".csv"))
    plot_path = sibling_path(out, "plot", ".py") if options.emit_plot_script else None
    text = emit_summary(summaries, samples_path=out, plot_script_path=plot_path)
    print(text)
    if compare:
        low, high = report.delta_ci_db
        print(f"\nMean paired gain (layer - original): {report.mean_delta_db:.3f} dB, 95% CI [{low:.3f}, {high:.3f}]")


def main(argv=None):
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code
    logging.basicConfig(level=args.log_level, format='%(asctime)s - %(levelname)s - %(message)s')

    try:
        config, options = load_config(args.config)
        config, options = apply_overrides(config, options, args)
    except (ConfigParseError, ConfigValidationError, OSError) as e:
        print(f"config-error: {one_line(e)}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        run(config, options, args.compare, args.workers)
    except Exception as e:
        logger.error(f"Simulation failed: {e}")
        print(f"runtime-error: {type(e).__name__}: {one_line(e)}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
