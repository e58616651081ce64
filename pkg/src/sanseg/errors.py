"""Error type shared across the package."""


class SansegError(Exception):
    """User-actionable failure: bad input file, bad config, bad arguments."""
