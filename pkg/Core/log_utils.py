# ============================================================================
# log_utils.py - Logging for LosaTAL
#
# Provides log(), the single call every module uses to report status, and
# setup_logging(), which attaches a persistent log file under the run's
# output directory. Until setup_logging() is called messages only go to stderr.
# ============================================================================

import logging
import os
import sys

from Core.constants import LOG_DIR, LOG_NAME

logger = logging.getLogger("LoSA")
logger.setLevel(logging.INFO)
logger.propagate = False

_FORMAT = logging.Formatter("%(asctime)s %(levelname)s %(message)s")

if not logger.handlers:
    _stream = logging.StreamHandler(sys.stderr)
    _stream.setFormatter(_FORMAT)
    logger.addHandler(_stream)


def setup_logging(output_dir):
    # Attach (or replace) the file handler so this run's log lands in <output_dir>/logs.
    log_path = os.path.join(output_dir, LOG_DIR, LOG_NAME)
    os.makedirs(os.path.dirname(log_path), exist_ok=True)
    for handler in list(logger.handlers):
        if isinstance(handler, logging.FileHandler):
            logger.removeHandler(handler)
            handler.close()
    file_handler = logging.FileHandler(log_path, encoding="utf-8")
    file_handler.setFormatter(_FORMAT)
    logger.addHandler(file_handler)
    return log_path


def log(msg, level=logging.INFO):
    logger.log(level, msg)


def warn(msg):
    log(msg, level=logging.WARNING)
