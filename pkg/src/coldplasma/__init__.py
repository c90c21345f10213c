"""Linearised Euler-Maxwell toolkit for magnetised cold plasmas."""

__version__ = "0.1.0"
