"""Exception hierarchy shared by all engine layers."""


class BitegraError(Exception):
    pass


# storage -----------------------------------------------------------------------

class StorageError(BitegraError):
    pass


class DuplicateGraph(StorageError):
    pass


class UnknownGraph(StorageError):
    pass


class InvalidPeriod(StorageError):
    pass


class UnknownEndpoint(StorageError):
    pass


class UnknownElement(StorageError):
    pass


class DuplicateId(StorageError):
    pass


class ReferentialViolation(StorageError):
    pass


class TypeMismatch(StorageError):
    pass


class PlacementError(StorageError):
    """A write is incompatible with the fixed column/table placement of a key."""


class ConstraintViolation(StorageError):
    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class TransactionError(StorageError):
    pass


class SchemaConfigError(StorageError):
    pass


# query -------------------------------------------------------------------------

class QueryError(BitegraError):
    pass


class LexError(QueryError):
    def __init__(self, message, pos):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


class ParseError(QueryError):
    def __init__(self, message, pos=None):
        super().__init__(message if pos is None else f"{message} at position {pos}")
        self.pos = pos


class ValidationError(QueryError):
    pass


class QueryTypeError(QueryError):
    """An operand has the wrong type at evaluation time."""


# notifications -------------------------------------------------------------------

class UnknownRegistration(BitegraError):
    pass
