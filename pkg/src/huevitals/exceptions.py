"""Exception hierarchy. CLI maps ``VitalsError`` subclasses to exit code 2."""


class VitalsError(Exception):
    """Base class for data and format errors raised by the pipeline."""


class FormatError(VitalsError, ValueError):
    """Plane or buffer dimensions inconsistent with the declared format."""


class IngestError(VitalsError):
    pass


class UnreadableFileError(IngestError):
    pass


class MalformedHeaderError(IngestError):
    pass


class FrameSizeError(IngestError):
    """Frames in one stream disagree on size, or a payload is truncated."""


class GeometryError(VitalsError, ValueError):
    pass


class LandmarkParseError(VitalsError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InsufficientDataError(VitalsError, ValueError):
    pass


class BandResolutionError(VitalsError, ValueError):
    """No spectrum bin falls inside the requested band."""


class OrderingError(VitalsError, ValueError):
    pass


class AlignmentError(VitalsError, ValueError):
    """Two series share no common timestamp."""


class ConfigError(VitalsError, ValueError):
    pass
