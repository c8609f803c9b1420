"""Exception types shared across the package."""


class AlgoEvolveError(Exception):
    """Base class for all package errors."""


class ConfigError(AlgoEvolveError):
    """Invalid or missing configuration."""


class LlmUnavailable(AlgoEvolveError):
    """The chat endpoint could not be reached after the configured retries."""


class AuthError(AlgoEvolveError):
    """The chat endpoint rejected the credential."""


class ScriptExhausted(AlgoEvolveError):
    """A scripted responder ran out of canned responses."""


class ResponseParseError(AlgoEvolveError):
    """Base class for failures turning a raw model response into an individual."""


class NoCodeBlock(ResponseParseError):
    """The response contains no fenced code block."""


class WrongFunctionSignature(ResponseParseError):
    """The code block does not define the required callable with the required arity."""


class EmptyDescription(ResponseParseError):
    """No usable one-line algorithm description could be extracted."""


class MissingParentProgram(AlgoEvolveError):
    """A parent individual has no textual rendering of its program."""


class InitializationExhausted(AlgoEvolveError):
    """Population initialization could not produce the required number of individuals."""


class InvalidStep(AlgoEvolveError):
    """A step selector returned a node that is out of range or already visited."""


class InstanceTooLarge(AlgoEvolveError):
    """Instance exceeds the size limit of an exact solver."""
