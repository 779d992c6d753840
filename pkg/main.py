#!/usr/bin/env python3
"""
Main script for the transfer-learning workbench
Pre-trains a time-series Transformer on a source domain, ranks target domains
by MMD and fine-tunes with one-step mixing or one of the baseline strategies
"""
import os
import sys
import argparse
import logging
from typing import List, Optional

import trainloop
import tsformer
from config import config
from errors import ConfigInvalid, WorkbenchError
from experiment import ExperimentRunner, check_pct, load_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def setup_logging():
    """Log to LOG_FILE and stdout"""
    log_dir = os.path.dirname(config.LOG_FILE)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, config.LOG_LEVEL),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(config.LOG_FILE),
            logging.StreamHandler(sys.stdout)
        ]
    )


def run_pretrain(runner: ExperimentRunner, args) -> None:
    runner.prepare_output()
    ckpt = runner.pretrain()
    runner.write_manifest("manifest-pretrain.json", "pretrain")
    logger.info(f"Pre-training completed: {ckpt.model_id} after {ckpt.metadata['epochs_run']} epochs")


def run_finetune(runner: ExperimentRunner, args) -> None:
    pct = check_pct(args.pct)
    if args.target not in runner.cfg.domains:
        raise ConfigInvalid([f"--target: unknown domain '{args.target}'"])
    runner.prepare_output()
    base = tsformer.load_checkpoint(args.checkpoint) if args.checkpoint else None
    ckpt = runner.finetune(args.strategy, base, args.target, pct=pct, auto_pct=args.auto_pct)
    name = ckpt.model_id.replace("@", "__")
    runner.write_manifest(f"manifest-{name}.json", "finetune")
    logger.info(f"Fine-tuning completed: {ckpt.model_id}")


def run_mmd(runner: ExperimentRunner, args) -> None:
    runner.prepare_output()
    report = runner.mmd()
    runner.write_manifest("manifest-mmd.json", "mmd", {"sigma": report.sigma})
    for row in report.rows:
        logger.info(f"  - {row.target}: mmd2={row.mmd2:.6g} recommended pct={row.recommended_pct:.2f}")


def run_experiment(runner: ExperimentRunner, args) -> None:
    runner.prepare_output(fresh=True, force=args.force)
    stats = runner.run_experiment()
    logger.info(f"Experiment completed:")
    logger.info(f"  - Checkpoints written: {stats['checkpoints']}")
    logger.info(f"  - Metrics reports: {stats['metrics_reports']}")


def run_sweep(runner: ExperimentRunner, args) -> None:
    runner.prepare_output(fresh=True, force=args.force)
    try:
        base = runner.pretrain()
        frame = runner.sweep(base)
    except WorkbenchError as e:
        runner.mark_failed("sweep", e)
        raise
    runner.write_manifest("manifest.json", "sweep")
    logger.info(f"Sweep completed: {len(frame)} runs")


COMMANDS = {
    "pretrain": run_pretrain,
    "finetune": run_finetune,
    "mmd": run_mmd,
    "experiment": run_experiment,
    "sweep": run_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Time-series transfer-learning workbench')
    parser.add_argument('--config', default=config.EXPERIMENT_FILE,
                        help='Experiment file (JSON)')
    parser.add_argument('--output', default=None,
                        help='Output directory (defaults to the experiment file or TSFT_OUTPUT_ROOT)')
    sub = parser.add_subparsers(dest='command')

    sub.add_parser('pretrain', help='Pre-train the source model')

    finetune = sub.add_parser('finetune', help='Fine-tune on one target domain')
    finetune.add_argument('--strategy', required=True, choices=trainloop.STRATEGIES)
    finetune.add_argument('--checkpoint', default=None, help='Pre-trained checkpoint file')
    finetune.add_argument('--target', required=True, help='Target domain id')
    pct = finetune.add_mutually_exclusive_group()
    pct.add_argument('--pct', type=float, default=None, help='Source mixing percentage (one_step)')
    pct.add_argument('--auto-pct', action='store_true',
                     help='Pick the mixing percentage from the MMD recommendation')

    sub.add_parser('mmd', help='Rank target domains by MMD to the source')

    for name, text in (('experiment', 'Run the full protocol'),
                       ('sweep', 'Run one_step over a range of mixing percentages')):
        command = sub.add_parser(name, help=text)
        command.add_argument('--force', action='store_true',
                             help='Overwrite a non-empty output directory')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_OK

    setup_logging()
    logger.info(f"Workbench {config.VERSION} started: {args.command} with {args.config}")

    try:
        cfg = load_experiment(args.config)
        runner = ExperimentRunner(cfg, args.output)
        COMMANDS[args.command](runner, args)
    except ConfigInvalid as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except WorkbenchError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        return EXIT_RUNTIME

    logger.info("Workbench completed")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
