"""Two-sided strategy-proof matching: mechanisms, audits and LP synthesis."""
__version__ = "0.1.0"
MODEL_FORMAT_VERSION = "1"
