"""Offline transcript sentiment labeler emitting the sentiment CSV contract."""

__version__ = "0.1.0"
