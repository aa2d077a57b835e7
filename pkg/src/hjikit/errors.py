"""Common exception hierarchy for the workbench."""


class HjikitError(Exception):
    """Base class for all workbench errors."""
