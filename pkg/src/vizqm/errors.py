"""Exception hierarchy shared across the package."""


class VizQMError(Exception):
    """Base class for all errors raised by vizqm."""


class InputError(VizQMError):
    """Bad user input: missing file, undecodable image, invalid schema, ..."""


class DecodeError(InputError):
    pass


class MissingDataError(VizQMError):
    """A bundled data table (CVD matrices, WAVE palette) is absent or corrupt."""


class MissingMatrixData(MissingDataError):
    pass


class MissingWaveData(MissingDataError):
    pass


class CorruptRecord(InputError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"corrupt corpus record at line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateId(InputError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate submission id: {record_id!r}")
        self.record_id = record_id


class UnknownMetric(InputError):
    def __init__(self, metric: str):
        super().__init__(f"unknown metric: {metric!r}")
        self.metric = metric


class SchemaError(InputError):
    def __init__(self, path: str, reason: str = "invalid value"):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class MissingObjective(InputError):
    def __init__(self, objective_id: str):
        super().__init__(f"feedback is missing objective {objective_id!r}")
        self.objective_id = objective_id


class MarkOutOfRange(InputError):
    def __init__(self, objective_id: str, mark: float, max_points: float):
        super().__init__(
            f"mark {mark} for objective {objective_id!r} outside [0, {max_points}]"
        )
        self.objective_id = objective_id
        self.mark = mark
        self.max_points = max_points


class IncompleteBundle(InputError):
    def __init__(self, artifact: str):
        super().__init__(f"analysis bundle is missing {artifact}")
        self.artifact = artifact


class StageError(VizQMError):
    """Wraps an error raised inside a pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
