"""Exception hierarchy.

CLI exit codes are attached to the base classes so the command layer can map
any failure to the right status without a lookup table.
"""


class RahlError(Exception):
    exit_code = 1


class InvalidArgumentError(RahlError, ValueError):
    exit_code = 1


class DataError(RahlError):
    exit_code = 2


class CsvFileNotFoundError(DataError, FileNotFoundError):
    pass


class ColumnNotFoundError(DataError):
    def __init__(self, column, available):
        self.column = column
        self.available = list(available)
        super().__init__(
            f"column {column!r} not found; available columns: {', '.join(self.available) or '(none)'}"
        )


class NoDataRowsError(DataError):
    pass


class EmptyAfterCleanError(DataError):
    pass


class DegenerateScaleError(DataError):
    pass


class SplitTooSmallError(DataError):
    pass


class UndefinedMapeError(DataError):
    pass


class CheckpointError(DataError):
    pass


class ChecksumError(CheckpointError):
    pass


class VersionError(CheckpointError):
    pass


class TrainingDivergedError(RahlError):
    exit_code = 3

    def __init__(self, message, *, param=None, epoch=None, batch=None):
        self.param = param
        self.epoch = epoch
        self.batch = batch
        where = []
        if param is not None:
            where.append(f"param={param}")
        if epoch is not None:
            where.append(f"epoch={epoch}")
        if batch is not None:
            where.append(f"batch={batch}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
