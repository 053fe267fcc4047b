"""Exception hierarchy shared by all umbra modules."""


class UmbraError(Exception):
    """Base class for every error raised by umbra."""


class GeometryError(UmbraError, ValueError):
    pass


class BallContainsCenter(GeometryError):
    """The ball holds the origin, so no cone of directions exists under it."""


class NotUnit(GeometryError):
    pass


class SingularMap(GeometryError):
    pass


class NoCommonTangent(GeometryError):
    """The two cones share no tangent line through the origin."""


class NonPositiveX2(GeometryError):
    pass


class OutOfDomain(UmbraError, ValueError):
    pass


class EmptyScene(UmbraError, ValueError):
    pass


class SingularSystem(UmbraError, ArithmeticError):
    """The three ball centers are coplanar with the origin."""


class BadBracket(UmbraError, ValueError):
    pass


class ParseError(UmbraError):
    def __init__(self, path: str, message: str = "missing or malformed field"):
        self.path = path
        super().__init__(f"{path}: {message}")


class ValidationError(UmbraError):
    def __init__(self, path: str, message: str, deviation: float | None = None):
        self.path = path
        self.deviation = deviation
        super().__init__(f"{path}: {message}")
