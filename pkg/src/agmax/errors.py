"""Exception types shared across the package."""


class AgmaxError(Exception):
    """Base class for all package errors."""


class ShapeError(AgmaxError, ValueError):
    """An op received operands whose shapes do not conform."""

    def __init__(self, op, *shapes, detail=""):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        msg = f"{op}: incompatible shapes " + " vs ".join(str(s) for s in self.shapes)
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NumericError(AgmaxError, ArithmeticError):
    """A computation produced NaN/Inf or otherwise left the valid domain."""


class GradCheckError(NumericError):
    pass


class ConfigError(AgmaxError, ValueError):
    """Invalid configuration, optionally tied to a dotted field name."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class PolicyError(ConfigError):
    pass


class DataFormatError(AgmaxError, ValueError):
    """Malformed dataset file; `offset` is the byte position of the problem."""

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte offset {offset}")
        super().__init__(f"{message} [{', '.join(where)}]" if where else message)


class CheckpointError(AgmaxError, ValueError):
    pass
