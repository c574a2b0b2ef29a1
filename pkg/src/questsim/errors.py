"""Exception types shared across the package."""


class QuestSimError(Exception):
    """Base class for all errors raised by this package."""


class DataError(QuestSimError):
    """A card database or scenario file failed to parse or validate."""


class StageError(QuestSimError):
    """An engine operation was called at a stage of the wrong kind."""


class IllegalActionError(QuestSimError):
    """An action violated a game rule; the message names the rule."""


class ConfigError(QuestSimError):
    """An agent spec, policy map or experiment configuration is invalid."""
