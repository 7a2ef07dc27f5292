# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

import datetime
import hashlib
import logging as lg
import sys
from pathlib import Path

from .errors import FmpError

_logger = lg.getLogger("fmpscore")
_use_logging = False


def use_logging(level="INFO"):
    """
    Route all fmpscore messages through the ``logging`` module (on stderr)
    instead of printing them. Called once by the command-line interface.
    """
    global _use_logging
    # always bind the current stderr
    for old in list(_logger.handlers):
        _logger.removeHandler(old)
    handler = lg.StreamHandler(sys.stderr)
    handler.setFormatter(lg.Formatter("%(message)s"))
    _logger.addHandler(handler)
    _logger.setLevel(level.upper() if isinstance(level, str) else level)
    _logger.propagate = False
    _use_logging = True


def timestamp(ms=False):
    ms = -3 if ms else -7
    return datetime.datetime.now().strftime("%Y-%m-%d %H:%M:%S.%f")[:ms]


def log_debug(message, cmd=None):
    if _use_logging:
        cmd = "" if cmd is None else f"  {cmd}:"
        _logger.debug("DEBUG %s%s  %s", timestamp(ms=True), cmd, message)


def log_info(message, cmd=None):
    if _use_logging:
        cmd = "" if cmd is None else f"  {cmd}:"
        _logger.info("INFO  %s%s  %s", timestamp(ms=True), cmd, message)
    else:
        print(message)


def log_warning(message, cmd=None):
    if _use_logging:
        cmd = "" if cmd is None else f"  {cmd}:"
        _logger.warning("WARN  %s%s  %s", timestamp(ms=True), cmd, message)
    else:
        print(f"Warning: {message}")


def log_error(message, e=None, cmd=None):
    """
    Log an error. In library mode the error is raised instead: ``e`` if it is
    an FmpError, otherwise a plain FmpError wrapping it.
    """
    if _use_logging:
        cmd = "" if cmd is None else f"  {cmd}:"
        _logger.error(
            "ERROR %s%s  %s",
            timestamp(ms=True),
            cmd,
            message,
            exc_info=e is not None,
        )
    else:
        if isinstance(e, FmpError):
            raise e
        raise FmpError(message, e)


def sha256_file(filename, chunk_size=1 << 20):
    """Hex SHA-256 digest of a file, read in chunks."""
    digest = hashlib.sha256()
    with Path(filename).open("rb") as fid:
        while chunk := fid.read(chunk_size):
            digest.update(chunk)
    return digest.hexdigest()
