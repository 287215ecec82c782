"""Error taxonomy mirrored onto the renderer's exit codes."""


class FigureError(Exception):
    """Base class for everything this package raises on purpose."""


class ManifestError(FigureError):
    """Unusable manifest or figure spec (missing file, bad JSON, unknown kind)."""


class InputDataError(FigureError):
    """Unusable input CSV (missing file, missing columns, no rows)."""
