"""Extractive-QA HTTP sidecar speaking the span-extractor wire protocol."""

__version__ = "0.1.0"
