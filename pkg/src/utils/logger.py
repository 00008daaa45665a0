import csv
import logging
import logging.handlers
import sys
import traceback
from pathlib import Path
from datetime import datetime
import json
from typing import Optional, Dict, Any


class LabLogger:
    ROOT = "SRLab"
    SUBSYSTEMS = ["Hilbert", "Ensemble", "Bell", "Measurement", "Models", "Lab", "Config"]
    RUN_COLUMNS = ["timestamp", "kind", "model", "trials", "seed", "format", "elapsed_seconds", "config"]

    def __init__(self, log_dir: str = "data/logs", config: Optional[Dict[str, Any]] = None):
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)

        # Defaults
        self.config = {
            'log_level': logging.INFO,
            'max_file_size': 5 * 1024 * 1024,  # 5MB
            'backup_count': 5,
            'console_output': True
        }

        if config:
            self.config.update(config)
        if isinstance(self.config['log_level'], str):
            self.config['log_level'] = logging.getLevelName(self.config['log_level'].upper())

        self.setup_logger()
        self.setup_subsystem_loggers()

    def setup_logger(self):
        """Configure the lab root logger"""
        logger = logging.getLogger(self.ROOT)
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()
        logger.setLevel(self.config['log_level'])
        logger.propagate = False

        formatter = logging.Formatter(
            '%(asctime)s | %(name)-18s | %(levelname)-8s | %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        log_file = self.log_dir / f"sr_lab_{datetime.now():%Y%m%d}.log"
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=self.config['max_file_size'],
            backupCount=self.config['backup_count'],
            encoding='utf-8'
        )
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

        # Console goes to stderr; stdout carries reports
        if self.config['console_output']:
            console_handler = logging.StreamHandler(sys.stderr)
            console_handler.setFormatter(formatter)
            logger.addHandler(console_handler)

    def setup_subsystem_loggers(self):
        """Subsystem loggers are children of the root and propagate to it"""
        for subsystem in self.SUBSYSTEMS:
            logger = logging.getLogger(f"{self.ROOT}.{subsystem}")
            logger.setLevel(logging.NOTSET)
            logger.propagate = True

    def create_run_ledger(self) -> Path:
        """Daily CSV of completed runs"""
        ledger_file = self.log_dir / f"runs_{datetime.now():%Y%m%d}.csv"
        if not ledger_file.exists():
            with open(ledger_file, 'w', encoding='utf-8', newline='') as f:
                csv.writer(f, lineterminator='\n').writerow(self.RUN_COLUMNS)
        return ledger_file

    def log_run(self, ledger_file: Path, run: Dict[str, Any]):
        """Append one run; a failed write is logged, never raised"""
        try:
            with open(ledger_file, 'a', encoding='utf-8', newline='') as f:
                writer = csv.DictWriter(f, fieldnames=self.RUN_COLUMNS, extrasaction='ignore',
                                        lineterminator='\n')
                writer.writerow({"timestamp": datetime.now().isoformat(), **run})
        except OSError as e:
            logging.getLogger(self.ROOT).error(f"Run ledger write failed: {e}")

    def create_error_report(self, error: Exception, context: Dict[str, Any]) -> Path:
        """Write a JSON error report next to the logs"""
        report_file = self.log_dir / f"error_{datetime.now():%Y%m%d_%H%M%S}.json"

        report_data = {
            "timestamp": datetime.now().isoformat(),
            "error_type": type(error).__name__,
            "error_message": str(error),
            "traceback": "".join(traceback.format_exception(type(error), error, error.__traceback__)),
            "context": context
        }

        with open(report_file, 'w', encoding='utf-8') as f:
            json.dump(report_data, f, indent=4, default=str)

        return report_file
