"""Reference server for the edge-conditioned image generation protocol."""

from .config import ServerConfig
from .server import create_app

__version__ = "0.1.0"

__all__ = ["ServerConfig", "create_app"]
