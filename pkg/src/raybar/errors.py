class RaybarError(Exception):
    """Base class for raybar errors."""


class SceneParseError(RaybarError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SceneValidationError(RaybarError):
    pass


class ProtocolError(RaybarError):
    pass


class ImageValueError(RaybarError):
    pass
