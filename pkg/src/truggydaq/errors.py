"""Exception types shared across the toolkit."""


class TruggyDaqError(Exception):
    """Base class for all errors raised by this package."""


# record / log
class InvalidRecord(TruggyDaqError):
    pass


class BadLength(TruggyDaqError):
    pass


class CorruptRecord(TruggyDaqError):
    pass


class SequenceError(TruggyDaqError):
    pass


class BadLogFile(TruggyDaqError):
    pass


# encoder
class NonMonotonicPulse(TruggyDaqError):
    pass


class BadWindow(TruggyDaqError):
    pass


# orientation
class DegenerateQuaternion(TruggyDaqError):
    pass


class NotNormalized(TruggyDaqError):
    pass


# power / thermal
class OverloadEvent(TruggyDaqError):
    pass


class BusConfigError(TruggyDaqError):
    pass


class InsufficientData(TruggyDaqError):
    pass


# analysis
class IncomparableRuns(TruggyDaqError):
    pass


class NoGps(TruggyDaqError):
    pass
