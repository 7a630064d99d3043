"""Active-space integral bundle generator with a built-in SCF/CASSCF engine."""

__version__ = "0.1.0"
