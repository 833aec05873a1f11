"""
Exception hierarchy shared by every module.
Validation failures subclass ValueError so plain `except ValueError` still works.
"""


class HepfacError(Exception):
    """Root of all errors raised by this package."""


class ValidationError(HepfacError, ValueError):
    """Bad input: the caller asked for something the engine cannot do."""


class ConfigError(ValidationError):
    pass


class AlphabetError(ValidationError):
    pass


class PatternError(ValidationError):
    pass


class CompressionError(ValidationError):
    pass


class TrieFormatError(HepfacError, ValueError):
    """A serialized trie is truncated, corrupt or from another format version."""
