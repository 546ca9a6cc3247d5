"""Exception hierarchy shared by the toolkit.

Everything raised intentionally derives from ToolError so the CLI can map
data-level failures to exit code 2 and keep genuine bugs (anything else)
at exit code 3.
"""


class ToolError(Exception):
    """Base class for all anticipated, user-facing failures."""


class ImageError(ToolError):
    """Invalid raster data, unsupported file format, or bad op arguments."""


class ConfigError(ToolError):
    """Malformed pipeline configuration (unknown kinds/keys, bad params)."""


class PipelineError(ToolError):
    """A stage failed while running a pipeline; message names the stage."""


class ManifestError(ToolError):
    """Unreadable dataset layout or malformed manifest file."""


class MetricsError(ToolError):
    """Bad prediction/history files or empty metric inputs."""
