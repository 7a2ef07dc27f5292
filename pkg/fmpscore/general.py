# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

from pathlib import Path

_pkg_root = Path(__file__).parent.absolute()


# ==============================================================================
# Do not change
# ==============================================================================

__version__ = '0.1.0'

# Binary artifact format versions. Bump together with a minor version whenever
# the byte layout of snapshots or models changes, so that old files are refused
# instead of being misread.
__format_versions__ = {
    'snapshot' : 1,
    'model'    : 1,
}
# ==============================================================================

SECONDS_PER_DAY = 24 * 60 * 60
