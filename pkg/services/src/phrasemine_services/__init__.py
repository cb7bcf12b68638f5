"""Model services behind the phrasemine wire protocol and file schemas."""

__version__ = "0.1.0"
