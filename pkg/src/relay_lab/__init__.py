"""Looped and auto-regressive chain-of-thought transformers on synthetic reasoning tasks."""

__version__ = "0.1.0"
