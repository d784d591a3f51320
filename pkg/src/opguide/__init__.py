"""opguide: learn operator instruction policies from task demonstrations."""

__version__ = "0.1.0"
