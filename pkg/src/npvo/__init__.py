"""Online obstacle motion prediction, probabilistic velocity obstacles and
statistical verification tools."""

__version__ = "0.1.0"
