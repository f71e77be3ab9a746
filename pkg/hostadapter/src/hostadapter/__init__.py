"""Host-side bridge to the tora CLI over the array file format."""

from .adapter import (
    AdapterError,
    AdapterValidationError,
    CliInvocationError,
    CliUnavailableError,
    DumpManifest,
    dump_embeddings,
    load_embeddings,
    load_manifest,
    transform_roundtrip,
)

__all__ = [
    "AdapterError",
    "AdapterValidationError",
    "CliInvocationError",
    "CliUnavailableError",
    "DumpManifest",
    "dump_embeddings",
    "load_embeddings",
    "load_manifest",
    "transform_roundtrip",
]
