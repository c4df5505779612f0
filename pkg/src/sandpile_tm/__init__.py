"""Sandpiles on Z^3 that simulate Turing machines, plus the deciders around them."""

__version__ = "0.1.0"
