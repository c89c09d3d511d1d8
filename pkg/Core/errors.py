# errors.py - Exception hierarchy for LosaTAL
# Every failure the pipeline can raise derives from LosaError so the CLI can
# map it onto the exit-code table in Core/constants.py.


class LosaError(Exception):
    pass


class DimensionError(LosaError, ValueError):
    pass


class ContractError(LosaError):
    pass


class InputError(LosaError, ValueError):
    pass


class GenerationError(LosaError):
    pass


class ConfigError(LosaError, ValueError):
    # Raised with the dotted name of the offending field first in the message.
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DatasetIOError(LosaError, OSError):
    pass


class ManifestError(DatasetIOError):
    pass


class MissingPayloadError(DatasetIOError):
    pass


class TruncatedPayloadError(DatasetIOError):
    pass


class VersionMismatchError(DatasetIOError):
    pass


class AuditError(LosaError):
    pass


class CheckpointError(LosaError, OSError):
    pass


class CheckpointMismatchError(CheckpointError):
    pass
