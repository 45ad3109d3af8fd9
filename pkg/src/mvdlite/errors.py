class MvdLiteError(Exception):
    """Base class for every error raised by this package."""


class LocatedError(MvdLiteError):
    def __init__(self, message, line=None, column=None, offset=None, source=None):
        self.message = message
        self.line, self.column, self.offset = line, column, offset
        self.source = source
        where = ""
        if line is not None:
            where = f"line {line}, column {column}: "
        if source:
            where = f"{source}: {where}"
        super().__init__(where + message)


class SchemaError(MvdLiteError):
    pass


class UnknownTypeError(SchemaError):
    pass


class StepSyntaxError(LocatedError):
    pass


class UnresolvedReferenceError(MvdLiteError):
    pass


class LexError(LocatedError):
    pass


class ParseError(LocatedError):
    pass


class ResolveError(LocatedError):
    pass


class EvaluationError(MvdLiteError):
    pass


class MvdXmlError(MvdLiteError):
    pass


class InexpressibleError(MvdXmlError):
    """A ruleset construct has no mvdXML V1.1 equivalent."""


class ExtractionIntegrityError(MvdLiteError):
    pass
