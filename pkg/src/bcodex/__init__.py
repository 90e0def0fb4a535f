"""Bosonic quantum error-correction workbench."""

__version__ = "0.1.0"
