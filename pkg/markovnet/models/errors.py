class MarkovNetError(Exception):
    """Base class for every error raised by the library"""


class SchemaViolation(MarkovNetError, ValueError):
    """A variable index or value does not fit the schema"""


class UnsupportedSchema(SchemaViolation):
    """The schema is valid but the requested learner cannot handle it"""


class ParseError(MarkovNetError, ValueError):
    """A data or model file could not be parsed"""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        location = ''
        if line is not None:
            location = f"line {line}"
            if column is not None:
                location += f", column {column}"
            location += ': '
        super().__init__(f"{location}{message}")


class StateSpaceTooLarge(MarkovNetError):
    """Exact enumeration was requested for a model over the size guard"""


class PositivityError(MarkovNetError, ValueError):
    """A CPD produced a zero (or negative) probability"""


class FeatureTooLong(MarkovNetError, ValueError):
    """A feature exceeds the length bound for all-orderings averaging"""


class MalformedModel(MarkovNetError, ValueError):
    """A model is structurally inconsistent"""


class EmptyDataset(MarkovNetError, ValueError):
    """An operation that needs data was given none"""


class ConfigurationError(MarkovNetError, ValueError):
    """A configuration file or flag value is invalid"""
