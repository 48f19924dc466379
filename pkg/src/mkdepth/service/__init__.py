"""HTTP service wrapping the depth library."""

from .app import app, create_app

__all__ = ["app", "create_app"]
