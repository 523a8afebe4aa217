"""Adapter configuration."""

from dataclasses import dataclass


class AdapterError(Exception):
    """Configuration or model-artifact problem; exits nonzero at startup."""


@dataclass(frozen=True)
class AdapterConfig:
    """How to load the wrapped model and where to serve it.

    ``columns`` is the column order the wrapped model expects. Incoming
    requests may list columns in any order; rows are reordered to match.
    ``None`` means "trust the request order".
    """

    artifact: str
    kind: str = "glm"  # glm | pickle
    predict_mode: str = "value"  # value | probability
    columns: tuple | None = None
    server: str = "stdio"  # stdio | http
    host: str = "127.0.0.1"
    port: int = 8000

    def __post_init__(self):
        if self.kind not in ("glm", "pickle"):
            raise AdapterError(f"unknown model kind {self.kind!r}")
        if self.predict_mode not in ("value", "probability"):
            raise AdapterError(f"unknown predict mode {self.predict_mode!r}")
        if self.server not in ("stdio", "http"):
            raise AdapterError(f"unknown server mode {self.server!r}")
        if self.columns is not None and len(set(self.columns)) != len(self.columns):
            raise AdapterError("expected column order contains duplicates")
