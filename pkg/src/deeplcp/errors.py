"""Exception types shared across the package."""


class DeepLcpError(Exception):
    """Base class for all package errors."""


class SchemaError(DeepLcpError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix = f"line {line}: "
        if field is not None:
            prefix += f"[{field}] "
        super().__init__(prefix + message)


class HeaderMismatch(DeepLcpError):
    pass


class CleaningError(DeepLcpError):
    def __init__(self, attribute, value):
        self.attribute = attribute
        self.value = value
        super().__init__(f"value {value!r} for attribute {attribute!r} is not "
                         "schema-valid after cleaning")


class ValueParseError(DeepLcpError):
    pass


class PlanOverflow(DeepLcpError):
    pass


class ShapeError(DeepLcpError):
    pass


class EmptyMap(DeepLcpError):
    pass


class ConfigError(DeepLcpError):
    pass


class FormatVersionError(DeepLcpError):
    pass


class EmptyIndex(DeepLcpError):
    pass


class KTooLarge(DeepLcpError):
    pass


class EmptyData(DeepLcpError):
    pass


class TooFewRecords(DeepLcpError):
    pass


class LengthMismatch(DeepLcpError):
    pass


class SingleClassAuc(DeepLcpError):
    pass
