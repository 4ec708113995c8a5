"""Exception hierarchy.

``DataError`` subclasses signal bad input data (CLI exit code 2); artifact
and I/O problems derive from ``ArtifactError`` or ``OSError`` (exit code 3).
"""


class ClickSuggestError(Exception):
    pass


class DataError(ClickSuggestError):
    pass


class MalformedLineError(DataError):
    def __init__(self, line_no: int, reason: str, line: str = ""):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason
        self.line = line


class GraphConstructionError(DataError):
    pass


class NotInGraphError(DataError, KeyError):
    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return f"query not in click graph: {self.key!r}"


class TrainingError(DataError):
    pass


class NoCoverageError(DataError):
    """None of the query tokens is in the embedding vocabulary."""


class DegenerateVectorError(DataError, ValueError):
    pass


class EmptyIndexError(DataError):
    pass


class UnclassifiableQueryError(DataError):
    pass


class WrongPathError(DataError):
    pass


class AnnotationError(DataError):
    pass


class ArtifactError(ClickSuggestError):
    pass


class MissingManifestError(ArtifactError):
    pass


class MissingArtifactError(ArtifactError):
    pass


class VersionError(ArtifactError):
    pass


class IntegrityError(ArtifactError):
    pass


class ArtifactLockedError(ArtifactError):
    pass
