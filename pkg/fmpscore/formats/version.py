# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

from packaging.version import Version

from ..errors import VersionMismatch
from ..general import __format_versions__, __version__


# XXX.YYY.ZZZ to XXXYYY  (ignore patch)
def _version_to_int(version):
    vers = Version(version)
    return vers.major * 1000 + vers.minor


app_version = '.'.join(__version__.split('.')[:2])
app_version_int = _version_to_int(__version__)


def format_version(kind):
    """Current on-disk format version of an artifact kind ('snapshot' or 'model')."""
    return __format_versions__[kind]


def assert_format_version(kind, found, filename=None):
    """
    Raise VersionMismatch if an artifact was written with another format version.

    Parameters
    ----------
    kind : str
        'snapshot' or 'model'.
    found : int
        The version byte read from the file.
    filename : pathlib.Path, optional
        Only used in the error message.
    """
    expected = format_version(kind)
    if found != expected:
        filename = 'This file' if filename is None else f'File {filename}'
        raise VersionMismatch(
            f"Incompatible {kind} format! {filename} has format version {found}, "
            f"but fmpscore {__version__} reads version {expected}."
        )
