"""Exception types. Config problems map to CLI exit code 1, the rest to 2."""


class SisomError(Exception):
    pass


class ConfigError(SisomError, ValueError):
    pass


class ShapeError(SisomError, ValueError):
    pass


class EmptyPoolError(SisomError, ValueError):
    pass


class DivergenceError(SisomError, ArithmeticError):
    def __init__(self, msg, epoch=None):
        super().__init__(msg)
        self.epoch = epoch


class ModelParseError(SisomError, ValueError):
    def __init__(self, msg, line=None):
        super().__init__(msg)
        self.line = line


class ModelSchemaError(SisomError, ValueError):
    pass


class MissingClassError(SisomError, ValueError):
    """No stored entry for the class a distance query needs."""

    def __init__(self, msg, sample_id=None):
        super().__init__(msg)
        self.sample_id = sample_id


class SeparabilityError(SisomError, ValueError):
    pass


class MetricError(SisomError, ValueError):
    pass


class SizeError(SisomError, ValueError):
    pass


class DataParseError(SisomError, ValueError):
    def __init__(self, msg, row=None):
        super().__init__(msg)
        self.row = row
