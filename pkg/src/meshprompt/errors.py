"""Exception types shared across the pipeline."""


class MeshPromptError(Exception):
    """Base class for all pipeline errors."""


class InvalidViewpointError(MeshPromptError):
    pass


class InvalidIntrinsicsError(MeshPromptError):
    pass


class InvalidRotationError(MeshPromptError):
    pass


class BehindCameraError(MeshPromptError):
    pass


class MeshFormatError(MeshPromptError):
    """Malformed OBJ content; carries the offending line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyMeshError(MeshPromptError):
    pass


class EmptyRenderError(MeshPromptError):
    pass


class InvalidThresholdError(MeshPromptError):
    pass


class PromptError(MeshPromptError):
    pass


class DescriptionUnavailableError(MeshPromptError):
    """The LLM endpoint could not produce a description (network, timeout,
    or malformed response). Callers fall back to the simple prompt."""


class GenerationError(MeshPromptError):
    """Image generation failure with a category used for manifest accounting.

    ``retryable`` categories: connect, timeout, server. Non-retryable:
    client, decode, dimension.
    """

    def __init__(self, category, message, retryable=False):
        super().__init__(f"{category}: {message}")
        self.category = category
        self.retryable = retryable


class ConsistencyError(MeshPromptError):
    pass


class ManifestError(MeshPromptError):
    pass


class ManifestVersionError(ManifestError):
    pass


class ManifestParseError(ManifestError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CoverageError(MeshPromptError):
    """Predictions are missing for some ground-truth ids."""

    def __init__(self, missing_ids):
        self.missing_ids = list(missing_ids)
        shown = ", ".join(self.missing_ids[:5])
        more = "" if len(self.missing_ids) <= 5 else f" (+{len(self.missing_ids) - 5} more)"
        super().__init__(f"missing predictions for {len(self.missing_ids)} ids: {shown}{more}")


class ConfigError(MeshPromptError):
    pass
