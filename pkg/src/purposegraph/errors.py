"""Exception hierarchy shared by every purposegraph module."""

from __future__ import annotations


class PurposeGraphError(Exception):
    """Base class for all errors raised by this package."""


class PolicySyntaxError(PurposeGraphError):
    """The policy document is not well-formed JSON."""

    def __init__(self, line: int, col: int, message: str) -> None:
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class SchemaError(PurposeGraphError):
    """A document is valid JSON but does not follow the expected schema."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class DanglingEdge(PurposeGraphError):
    def __init__(self, edge, missing: str) -> None:
        super().__init__(f"edge {edge.parent!r} -> {edge.child!r} references unknown purpose {missing!r}")
        self.edge = edge
        self.missing = missing


class UnknownAttribute(PurposeGraphError):
    """A privacy model attribute cannot be compared."""

    def __init__(self, model: str, attribute: str) -> None:
        super().__init__(f"privacy model {model!r}: cannot compare attribute {attribute!r}")
        self.model = model
        self.attribute = attribute


class CycleDetected(PurposeGraphError):
    def __init__(self, witness: list[str]) -> None:
        super().__init__("composition cycle: " + " -> ".join(witness))
        self.witness = witness


class UnknownPurpose(PurposeGraphError):
    pass


class UnknownService(PurposeGraphError):
    pass


class ServiceModelError(PurposeGraphError):
    """Structural problem in a service model (bad net, component cycle, missing net)."""


class SourceError(PurposeGraphError):
    """Positioned diagnostic in MiniSvc source."""

    def __init__(self, line: int, col: int, message: str, path: str = "<input>") -> None:
        super().__init__(f"{path}:{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message
        self.path = path


class LexError(SourceError):
    def __init__(self, line: int, col: int, char: str, path: str = "<input>") -> None:
        super().__init__(line, col, f"unexpected character {char!r}", path)
        self.char = char


class ParseError(SourceError):
    def __init__(self, expected: str, found: str, line: int, col: int, path: str = "<input>") -> None:
        super().__init__(line, col, f"expected {expected}, found {found}", path)
        self.expected = expected
        self.found = found


class DuplicateName(PurposeGraphError):
    def __init__(self, name: str, paths: list[str]) -> None:
        super().__init__(f"duplicate name {name!r} in {', '.join(paths)}")
        self.name = name
        self.paths = paths


class UnknownInterface(PurposeGraphError):
    def __init__(self, name: str, cls: str = "") -> None:
        where = f" (implemented by {cls})" if cls else ""
        super().__init__(f"unknown interface {name!r}{where}")
        self.name = name


class UnknownEntry(PurposeGraphError):
    pass
