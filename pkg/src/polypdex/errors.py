"""Exception hierarchy shared by all polypdex modules."""


class PolypdexError(Exception):
    """Base class for every error raised by this package."""


class ZeroVectorError(PolypdexError):
    """Vector norm is below the zero guard; normalization is undefined."""


class DimMismatchError(PolypdexError):
    """Operands have incompatible dimensions or bit lengths."""


class NotNormalizedError(PolypdexError):
    """An embedding expected to be unit-norm is not."""


class BadSpecError(PolypdexError):
    """Synthetic-data spec violates its invariants."""


class EmptyMaskError(PolypdexError):
    """A mask plan with no masked patches was passed to the reconstruction loss."""


class DivergenceError(PolypdexError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, step: int, value: float):
        super().__init__(f"loss became non-finite at epoch {epoch}, step {step}: {value}")
        self.epoch = epoch
        self.step = step
        self.value = value


class EmptyDatabaseError(PolypdexError):
    """Operation requires at least one reference record."""


class KTooLargeError(PolypdexError):
    """Requested neighbor count exceeds the reference database size."""


class UnknownIdError(PolypdexError):
    """A neighbor id does not resolve to any known record."""


class CorruptFileError(PolypdexError):
    """File is truncated, has a bad magic, or fails structural checks."""


class VersionMismatchError(PolypdexError):
    """File carries a recognized family magic but an unsupported version."""


class LengthMismatchError(PolypdexError):
    """Paired sequences have different lengths."""


class NoPositivesError(PolypdexError):
    """Ranking metric needs at least one positive pair."""


class TooFewItemsError(PolypdexError):
    """Fewer items than folds requested."""


class ConfigError(PolypdexError):
    """Pipeline configuration is malformed or carries unknown keys."""
