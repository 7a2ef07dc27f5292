# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

"""
Exception hierarchy of fmpscore.

Every error raised on purpose by the library derives from :class:`FmpError`
and carries an ``exit_code`` used by the command-line interface.

Exit codes
----------
=====  ===================================================================
code   meaning
=====  ===================================================================
0      success
1      any other FmpError
2      usage error (bad command line, reported by argparse)
3      ConfigError
4      malformed input (MalformedRecord, InvalidField)
5      data errors (EmptyDataset, DegenerateData, SingleClass, EmptyInput,
       LengthMismatch, CategoryMismatch, OutOfRange)
6      numerical errors (DomainError, EmptySeries, NonFinite, InvalidRatio,
       InvalidFraction, AlreadySubsampled)
7      artifact errors (CorruptSnapshot, CorruptModel, VersionMismatch,
       SchemaMismatch)
8      IoError
=====  ===================================================================
"""


class FmpError(Exception):
    exit_code = 1


class ConfigError(FmpError, ValueError):
    exit_code = 3


# Input records
class MalformedRecord(FmpError, ValueError):
    exit_code = 4


class InvalidField(FmpError, ValueError):
    exit_code = 4


# Data
class EmptyDataset(FmpError, ValueError):
    exit_code = 5


class DegenerateData(FmpError, ValueError):
    exit_code = 5


class SingleClass(FmpError, ValueError):
    exit_code = 5


class EmptyInput(FmpError, ValueError):
    exit_code = 5


class LengthMismatch(FmpError, ValueError):
    exit_code = 5


class CategoryMismatch(FmpError, ValueError):
    exit_code = 5


class OutOfRange(FmpError, ValueError):
    exit_code = 5


# Numerics
class DomainError(FmpError, ValueError):
    exit_code = 6


class EmptySeries(FmpError, ValueError):
    exit_code = 6


class NonFinite(FmpError, ArithmeticError):
    exit_code = 6


class InvalidRatio(FmpError, ValueError):
    exit_code = 6


class InvalidFraction(FmpError, ValueError):
    exit_code = 6


class AlreadySubsampled(FmpError, ValueError):
    exit_code = 6


# Artifacts
class CorruptSnapshot(FmpError, ValueError):
    exit_code = 7


class CorruptModel(FmpError, ValueError):
    exit_code = 7


class VersionMismatch(FmpError, ImportError):
    exit_code = 7


class SchemaMismatch(FmpError, ValueError):
    exit_code = 7


class IoError(FmpError, OSError):
    exit_code = 8
