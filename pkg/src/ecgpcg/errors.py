"""Exception hierarchy shared by all ecgpcg modules."""


class EcgPcgError(Exception):
    """Base class for every error raised by this package."""


# signal_io
class MalformedFile(EcgPcgError, ValueError):
    pass


class LengthMismatch(EcgPcgError, ValueError):
    pass


class NonFiniteSample(EcgPcgError, ValueError):
    pass


class OrderingViolation(EcgPcgError, ValueError):
    pass


class InvalidConfig(EcgPcgError, ValueError):
    pass


class IoFailure(EcgPcgError, OSError):
    pass


# preprocess
class InvalidBand(EcgPcgError, ValueError):
    pass


class InvalidFrequency(EcgPcgError, ValueError):
    pass


class SignalTooShort(EcgPcgError, ValueError):
    pass


class WindowTooShort(EcgPcgError, ValueError):
    pass


class DegenerateSegment(EcgPcgError, ValueError):
    pass


class NonIntegerFactor(EcgPcgError, ValueError):
    pass


class StageError(EcgPcgError):
    """A preprocessing stage failed; ``stage`` and ``channel`` name where."""

    def __init__(self, stage, channel, cause):
        self.stage = stage
        self.channel = channel
        self.cause = cause
        super().__init__(f"{channel}: stage '{stage}' failed: {cause}")


# windowing
class EmptyDataset(EcgPcgError, ValueError):
    pass


class RecordTooShort(EcgPcgError, ValueError):
    pass


class TooFewRecords(EcgPcgError, ValueError):
    pass


# models
class NonFiniteFeature(EcgPcgError, ValueError):
    pass


class DivergedTraining(EcgPcgError, ArithmeticError):
    pass


class SchemeMismatch(EcgPcgError, ValueError):
    pass


# metrics
class EmptySelection(EcgPcgError, ValueError):
    pass


class ZeroSignal(EcgPcgError, ValueError):
    pass


class DegenerateVariance(EcgPcgError, ValueError):
    pass


class InsufficientAveraging(EcgPcgError, ValueError):
    pass


# fiducial
class NoMatchedBeats(EcgPcgError, ValueError):
    pass
