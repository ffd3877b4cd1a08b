#!/usr/bin/env python3
"""
Simulation Errors
=================

Exception types raised across the toolkit. Parameter and shape problems are
ValueErrors, broken numerical contracts are RuntimeErrors.
"""


class OptomechError(Exception):
    """Base class for every error raised by the toolkit"""


class InvalidDimensionError(OptomechError, ValueError):
    """A Fock-space truncation is not a positive integer"""


class InvalidParameterError(OptomechError, ValueError):
    """A physical parameter lies outside its admissible range"""


class SpaceMismatchError(OptomechError, ValueError):
    """Operands live on different (or incompatible) Fock spaces"""


class ConstraintViolationError(OptomechError, ValueError):
    """A driving amplitude or search coordinate breaks its bound"""


class NumericalContractError(OptomechError, RuntimeError):
    """An input that must be Hermitian / positive is not, beyond tolerance"""


class AccuracyError(OptomechError, RuntimeError):
    """A propagation failed its convergence or trace-preservation check"""


class ContractError(OptomechError, RuntimeError):
    """An operation was called with data it cannot work on"""


class UsageError(OptomechError):
    """Invalid command-line invocation or experiment configuration"""
