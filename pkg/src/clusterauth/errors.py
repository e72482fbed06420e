"""Exception types raised across the protocol suite.

Everything derives from ProtocolError so callers (and the tamper sweep)
can treat any raise as a rejection.
"""


class ProtocolError(Exception):
    """Base class for all protocol-level failures."""


# group / encoding
class InvalidGroup(ProtocolError):
    pass


class ZeroInverse(ProtocolError):
    pass


class OutOfRange(ProtocolError):
    pass


class DuplicateAbscissa(ProtocolError):
    pass


class ZeroAbscissa(ProtocolError):
    pass


class MalformedMessage(ProtocolError):
    pass


# registry
class DuplicateRegistration(ProtocolError):
    pass


class UnknownCluster(ProtocolError):
    pass


class DuplicateInsert(ProtocolError):
    pass


# join phase
class EmptyBatch(ProtocolError):
    pass


class MismatchedCluster(ProtocolError):
    pass


class StaleTimestamp(ProtocolError):
    pass


class BatchRejected(ProtocolError):
    pass


class ResultMismatch(ProtocolError):
    pass


class AggregateInvalid(ProtocolError):
    pass


class TokenMismatch(ProtocolError):
    pass


class AckInvalid(ProtocolError):
    pass


# cross-cluster
class UnknownMember(ProtocolError):
    pass


class UnknownPid(ProtocolError):
    pass


# key update
class EmptyCluster(ProtocolError):
    pass


class AbscissaCollision(ProtocolError):
    pass


class MalformedShare(ProtocolError):
    pass


class MissingEnvelope(ProtocolError):
    pass


class ConfirmMismatch(ProtocolError):
    pass


# overhead / simulator / harness
class UnknownStage(ProtocolError):
    pass


class ConfigInvalid(ProtocolError):
    pass


class ProtocolAbort(ProtocolError):
    """A verification failed inside a simulated honest scenario."""


class UnknownQueryKind(ProtocolError):
    pass


class RepeatedChallenge(ProtocolError):
    pass
