import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import definitions
from src.core.errors import ConfigError, SRLabError
from src.core.lab import FORMATS, SRLab
from src.utils.config_manager import ConfigManager
from src.utils.logger import LabLogger
from src.utils.report_writer import emit_report

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_CONFIG_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sr-lab",
        description="Seeded simulations of detection-based local models against quantum predictions")
    parser.add_argument("--config-dir", default=definitions.CONFIG_DIR,
                        help="directory holding settings.json and presets.json")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="run one experiment descriptor")
    run.add_argument("config", help="experiment JSON file")
    run.add_argument("--seed", type=int, help="override the descriptor seed")
    run.add_argument("--trials", type=int, help="override the descriptor trial count")
    run.add_argument("--format", choices=FORMATS, help="report format")
    run.add_argument("--output", help="write the report here instead of stdout")

    subparsers.add_parser("presets", help="list built-in models, angle sets, scenarios and states")
    return parser


def setup_logging(config: ConfigManager) -> LabLogger:
    log_dir = Path(config.get_setting("logging.log_dir", "logs"))
    if not log_dir.is_absolute():
        log_dir = Path(definitions.DATA_DIR) / log_dir
    return LabLogger(str(log_dir), {
        'log_level': config.get_setting("logging.level", "INFO"),
        'max_file_size': config.get_setting("logging.max_file_size", 5 * 1024 * 1024),
        'backup_count': config.get_setting("logging.backup_count", 5),
        'console_output': config.get_setting("logging.console_output", True),
    })


def list_presets(lab: SRLab) -> str:
    lines = []
    for section, entries in lab.presets.describe().items():
        lines.append(f"{section}:")
        width = max((len(name) for name in entries), default=0)
        lines.extend(f"  {name.ljust(width)}  {text}" for name, text in sorted(entries.items()))
    return "\n".join(lines) + "\n"


def run(args: argparse.Namespace, lab: SRLab, lab_logger: LabLogger) -> int:
    logger = logging.getLogger("SRLab")
    try:
        experiment = lab.load_experiment(args.config, trials=args.trials, seed=args.seed,
                                         format=args.format, output=args.output)
        report = lab.run_experiment(experiment)
        data = emit_report(report, experiment.format, lab.config.get_setting("output.indent"))
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"sr-lab: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except SRLabError as e:
        logger.error(f"Run failed: {e}")
        report_file = lab_logger.create_error_report(e, {"config": args.config, "seed": args.seed,
                                                          "trials": args.trials})
        print(f"sr-lab: {e} (error report: {report_file})", file=sys.stderr)
        return EXIT_RUNTIME_ERROR

    lab_logger.log_run(lab_logger.create_run_ledger(), {
        "kind": experiment.kind, "model": experiment.model, "trials": experiment.trials,
        "seed": experiment.seed, "format": experiment.format,
        "elapsed_seconds": f"{report.elapsed_seconds:.3f}",
        "config": json.dumps(experiment.to_dict(), sort_keys=True),
    })
    if experiment.output:
        output = Path(experiment.output)
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_bytes(data)
        logger.info(f"Report written to {output}")
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = ConfigManager(args.config_dir)
    except ConfigError as e:
        print(f"sr-lab: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    lab_logger = setup_logging(config)
    if not config.validate_configs():
        print("sr-lab: configuration is incomplete, see the log", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    lab = SRLab(config)
    if args.command == "presets":
        sys.stdout.write(list_presets(lab))
        return EXIT_OK
    return run(args, lab, lab_logger)


if __name__ == "__main__":
    sys.exit(main())
