"""Exception hierarchy shared by every blockgraph module."""


class BlockGraphError(Exception):
    """Base class for all library errors."""


class ParseError(BlockGraphError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RangeError(BlockGraphError, ValueError):
    pass


class GraphFormatError(BlockGraphError, ValueError):
    """Binary graph file could not be decoded."""


class BadMagicError(GraphFormatError):
    pass


class UnsupportedVersionError(GraphFormatError):
    pass


class TruncatedFileError(GraphFormatError):
    pass


class ContractError(BlockGraphError, ValueError):
    """An input violated a documented precondition."""


class ConfigError(BlockGraphError, ValueError):
    pass


class ArenaCapacityError(ConfigError):
    """A single block-list can never fit into the device arena."""


class KernelError(BlockGraphError, RuntimeError):
    def __init__(self, message: str, task=None):
        self.task = task
        super().__init__(message)
