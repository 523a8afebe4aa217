"""Reference server for the external-scorer wire protocol (PROTOCOL.md)."""

from .config import AdapterConfig, AdapterError
from .model import GlmModel, PickleModel, load_model, startup_probe
from .server import handle_line, handle_request, serve_http, serve_stdio

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "GlmModel",
    "PickleModel",
    "load_model",
    "startup_probe",
    "handle_line",
    "handle_request",
    "serve_http",
    "serve_stdio",
    "__version__",
]
