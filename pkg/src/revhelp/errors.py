"""Exception types shared across the package."""


class RevhelpError(Exception):
    """Base class for errors raised by this package."""


class CorpusError(RevhelpError):
    """Unusable corpus input: unreadable file, bad split request, bad dates."""


class CheckpointError(RevhelpError):
    """Checkpoint directory is missing, incomplete, or incompatible."""


class NumericsError(RevhelpError):
    """Non-finite values encountered where the model requires finite ones."""


class TrainingDiverged(RevhelpError):
    """Training loss became non-finite; the model holds the last finite state."""
