from __future__ import annotations


class OrdinalQwkError(ValueError):
    """Базовая ошибка пакета. Наследует ValueError, чтобы верхний уровень ловил одно и то же."""


class ShapeError(OrdinalQwkError):
    pass


class InputError(OrdinalQwkError):
    pass


class ConfigError(OrdinalQwkError):
    pass


class LabelError(OrdinalQwkError):
    pass


class DomainError(OrdinalQwkError):
    pass


class DegenerateBatchError(DomainError):
    """Знаменатель QWK вырожден на батче (один класс или пустая сумма)."""


class OracleError(OrdinalQwkError):
    pass


class ParseError(OrdinalQwkError):
    pass


class GenerationError(OrdinalQwkError):
    pass


class SplitError(OrdinalQwkError):
    pass


class UnsupportedHeadError(OrdinalQwkError):
    pass
