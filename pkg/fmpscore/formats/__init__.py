# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

from .container import decode_container, encode_container, read_container, write_container
from .version import app_version, app_version_int, assert_format_version, format_version
