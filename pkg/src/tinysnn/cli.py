"""Command-line driver: train, quantize, evaluate, sweep and select.

Exit codes: 0 success, 1 usage or config error, 2 data error,
3 no feasible model under the selection budgets.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import experiment as ex
from .config import ConfigError, describe_keys, parse_config
from .dataio import IdxError, ModelFormatError, load_model, read_report, save_model, write_report
from .evaluation import assign_neuron_labels, evaluate_accuracy
from .quantization import QuantScheme, observe_ranges
from .selection import NoFeasibleModelError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3

log = logging.getLogger("tinysnn")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _configure_logging():
    level = os.environ.get("TINYSNN_LOG", "error").strip().lower()
    if level not in _LOG_LEVELS:
        raise UsageError(f"TINYSNN_LOG must be one of {sorted(_LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=_LOG_LEVELS[level], stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tinysnn",
        description="STDP spiking network with direct lateral inhibition and fixed-point exploration.",
        epilog="config keys (flat TOML; unknown keys are rejected):\n" + describe_keys()
        + "\n\nenvironment: TINYSNN_LOG = error | info | debug (default error)",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train the fp32 model and save it")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("eval", help="label a saved model and report test accuracy")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)

    p = sub.add_parser("ptq", help="post-training quantize a saved model")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True, help="trained fp32 model")
    p.add_argument("--out", required=True)

    p = sub.add_parser("itq", help="train with in-training quantization")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reference", help="fp32 model whose ranges size the formats (when none are explicit)")

    p = sub.add_parser("sweep", help="evaluate the quantization grid into a CSV report")
    p.add_argument("--config", required=True)
    p.add_argument("--report", required=True, help="CSV report; existing rows are kept and not recomputed")
    p.add_argument("--model", help="trained fp32 model (trained from the config if omitted)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    p = sub.add_parser("select", help="mark the best-reward row of a report")
    p.add_argument("--report", required=True)
    p.add_argument("--mu", type=float, required=True, help="trade-off coefficient (>= 0)")
    p.add_argument("--mem-budget", type=float, help="memory budget in bits")
    p.add_argument("--energy-budget", type=float, help="inference energy budget in Joules")
    p.add_argument("--out", help="write the marked report here instead of in place")

    p = sub.add_parser("encode-demo", help="dump the spike raster of one sample")
    p.add_argument("--config", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", help="write the raster here instead of stdout")
    return parser


def _load(args):
    cfg = parse_config(args.config)
    return cfg, ex.load_workspace(cfg)


def cmd_train(args):
    cfg, ws = _load(args)
    model = ex.train_reference(cfg, ws)
    save_model(model, args.out)
    log.info("saved %s", args.out)


def cmd_eval(args):
    cfg, ws = _load(args)
    model = load_model(args.model)
    label_map = assign_neuron_labels(model, ws.label, batch_size=cfg.batch_size)
    acc = evaluate_accuracy(model, label_map, ws.test, cfg.batch_size)
    print(f"accuracy {acc:.4f} ({len(ws.test)} test samples)")


def cmd_ptq(args):
    cfg, ws = _load(args)
    if QuantScheme.parse(cfg.scheme) is not QuantScheme.PTQ:
        raise UsageError("the ptq command needs scheme = \"ptq\" in the config")
    ref = ex.prepare_reference(cfg, ws, load_model(args.model))
    q = ex.quantize_single(cfg, ws, ref)
    acc = evaluate_accuracy(q, ref.label_map, ws.test, cfg.batch_size)
    save_model(q, args.out)
    print(f"{' '.join(ex.single_config(cfg, ref.ranges).key())}: accuracy {acc:.4f} (fp32 {ref.accuracy:.4f})")


def cmd_itq(args):
    cfg, ws = _load(args)
    if QuantScheme.parse(cfg.scheme) is not QuantScheme.ITQ:
        raise UsageError("the itq command needs scheme = \"itq\" in the config")
    ranges = None
    if cfg.explicit_formats() is None:
        if not args.reference:
            raise UsageError("itq needs explicit formats (wfmt ...) or --reference to size them")
        ranges = observe_ranges(load_model(args.reference), ex.calibration_samples(cfg, ws), cfg.batch_size)
    qcfg = ex.single_config(cfg, ranges)
    rng = ex.quant_rng(cfg, qcfg)
    model = ex.train_quantized(cfg, ws, qcfg, rng)
    label_map = assign_neuron_labels(model, ws.label, batch_size=cfg.batch_size)
    acc = evaluate_accuracy(model, label_map, ws.test, cfg.batch_size)
    save_model(model, args.out)
    print(f"{' '.join(qcfg.key())}: accuracy {acc:.4f}")


def cmd_sweep(args):
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    cfg, ws = _load(args)
    existing = read_report(args.report) if os.path.exists(args.report) else []
    model = load_model(args.model) if args.model else ex.train_reference(cfg, ws)
    ref = ex.prepare_reference(cfg, ws, model)
    rows = ex.run_sweep(cfg, ws, ref, existing, args.jobs)
    write_report(rows, args.report)
    print(f"{len(rows)} rows written to {args.report} (fp32 accuracy {ref.accuracy:.4f})")


def cmd_select(args):
    if args.mu < 0:
        raise UsageError("--mu must be non-negative")
    rows = read_report(args.report)
    if not rows:
        raise ValueError(f"{args.report} has no candidate rows")
    candidates = [ex.candidate_from_row(r) for r in rows]
    marked = ex.mark_selected(candidates, args.mu, args.mem_budget, args.energy_budget)
    write_report(marked, args.out or args.report)
    best = next(c for c in marked if c.selected)
    row = best.as_row()
    print(f"selected {row['scheme']} {row['rounding']} {row['wfmt']} {row['vmemfmt']} {row['vthfmt']}: "
          f"acc {best.acc_q:.4f} mem_norm {best.mem_norm:.4f} reward {best.reward:.4f}")


def cmd_encode_demo(args):
    cfg = parse_config(args.config)
    ws = ex.load_workspace(cfg)
    samples = ws.test if args.split == "test" else ws.train
    if not 0 <= args.index < len(samples):
        raise UsageError(f"--index must lie in [0, {len(samples)})")
    train, label = samples[args.index]
    side = int(round(np.sqrt(train.num_inputs)))
    lines = [f"# {args.split} sample {args.index}, label {label}, {train.num_inputs} inputs x {train.num_steps} steps, "
             f"{int(train.spikes.sum())} spikes",
             "# spike counts per input:"]
    counts = train.counts()
    if side * side == train.num_inputs:
        for r in range(side):
            lines.append(" ".join(f"{int(c):2d}" for c in counts[r * side:(r + 1) * side]))
    else:
        lines.append(" ".join(str(int(c)) for c in counts))
    lines.append("# raster (one row per spiking input, '|' = spike):")
    for i in np.flatnonzero(counts):
        lines.append(f"{i:4d} " + "".join("|" if s else "." for s in train.spikes[i]))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


COMMANDS = {
    "train": cmd_train, "eval": cmd_eval, "ptq": cmd_ptq, "itq": cmd_itq, "sweep": cmd_sweep,
    "select": cmd_select, "encode-demo": cmd_encode_demo,
}


def run_subcommand(argv=None) -> int:
    try:
        _configure_logging()
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return exc.code or EXIT_OK
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoFeasibleModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (IdxError, ModelFormatError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run_subcommand())


if __name__ == "__main__":
    main()
