"""Inference service exposing a captioner and dual image/text encoders over HTTP."""

__version__ = "0.1.0"

from .app import create_app
from .backends import HashBackend, TransformersBackend, make_backend

__all__ = ["HashBackend", "TransformersBackend", "create_app", "make_backend"]
