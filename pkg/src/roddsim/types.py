## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import enum


class Status(enum.Enum):
    """
    Enumeration of status codes that can be used as return values to indicate
    the result of an operation, or as the status code of a log record.
    """

    SUCCESS = 1
    FAILURE = 0
    ABORT = -2


class Scheme(str, enum.Enum):
    """
    Tags for the schemes that a sweep can evaluate, used as the first column
    of the result files.
    """

    RODD = "rodd"
    ALOHA_MC = "aloha_mc"
    CSMA_MC = "csma_mc"
    ALOHA_BOUND = "aloha_bound"
    CSMA_BOUND = "csma_bound"


class InterferenceMode(str, enum.Enum):
    # Non-neighbors folded into circular Gaussian noise of variance σ².
    GAUSSIAN = "gaussian"
    # Non-neighbors transmit their actual signatures on top of thermal noise.
    EXPLICIT = "explicit"


class SnrWiring(str, enum.Enum):
    # Decoder uses γ_s = γ M_s q(1-q) / σ² on the σ-normalized observation.
    EFFECTIVE = "effective"
    # Decoder uses γ M_s q(1-q) on the unnormalized observation.
    NOMINAL = "nominal"


class SweepAxis(str, enum.Enum):
    FRAME_LENGTH = "frame_length"
    THRESHOLD = "threshold"
    SNR = "snr"


class RoddError(Exception):
    """
    Base class for all errors raised by the simulator.  Extra information is
    attached as keyword context, in the same way as log records.
    """

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


class ParameterError(RoddError, ValueError):
    pass


class CapacityError(RoddError):
    pass


class GridRefinementError(RoddError):
    pass


class QuadratureError(RoddError):
    pass


class NumericalConsistencyError(RoddError):
    pass


class DegenerateInstanceError(RoddError):
    pass


class OutputError(RoddError):

    def __init__(self, message: str, path: str, **context):
        super().__init__(f"{message} [{path}]", path=path, **context)
        self.path = path
