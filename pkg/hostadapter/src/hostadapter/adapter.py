"""File-based bridge between a host pipeline and the ``tora`` CLI.

The adapter dumps per-(timestep, block) text embeddings as little-endian
row-major .npy files plus a JSON manifest, shells out to the CLI for the
transform, and loads the results back. It never imports the transform
library itself, so every exchange is inspectable and replayable, and it
never mutates host tensors in place.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_DTYPE_TAGS = {np.dtype(np.float32): "<f4", np.dtype(np.float64): "<f8"}
_ERROR_PREFIX = "tora-error:"


class AdapterError(Exception):
    """Base class for adapter failures."""


class AdapterValidationError(AdapterError):
    """Host tensors or manifest contents violate the exchange contract."""


class CliUnavailableError(AdapterError):
    """The transform CLI is not on PATH."""


class CliInvocationError(AdapterError):
    """The CLI exited nonzero; ``code`` carries its machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class DumpManifest:
    """Index of one dump: where each (timestep, block) embedding lives.

    Paths are stored relative to ``root`` so a dump directory can be moved
    wholesale.
    """

    root: Path
    run_id: str
    dtype: str
    shape: tuple
    entries: tuple = field(default_factory=tuple)
    cond_path: str | None = None
    null_path: str | None = None

    def path_for(self, timestep: int, block: int) -> Path:
        for t, b, rel in self.entries:
            if (t, b) == (timestep, block):
                return self.root / rel
        raise AdapterValidationError(f"no entry for (timestep={timestep}, block={block})")

    def manifest_path(self) -> Path:
        return self.root / "manifest.json"


def _dtype_tag(array: np.ndarray) -> str:
    tag = _DTYPE_TAGS.get(array.dtype)
    if tag is None:
        raise AdapterValidationError(
            f"unsupported host dtype {array.dtype}; expected float32 or float64"
        )
    return tag


def _validate_tensors(tensors: dict) -> tuple:
    if not tensors:
        raise AdapterValidationError("nothing to dump")
    arrays = {}
    shape = dtype = None
    for key, tensor in tensors.items():
        try:
            timestep, block = (int(part) for part in key)
        except (TypeError, ValueError) as exc:
            raise AdapterValidationError(
                f"tensor key {key!r} is not a (timestep, block) pair"
            ) from exc
        array = np.asarray(tensor)
        if array.ndim != 2:
            raise AdapterValidationError(
                f"tensor at {key} has rank {array.ndim}, expected 2 (tokens x dim)"
            )
        tag = _dtype_tag(array)
        if shape is None:
            shape, dtype = array.shape, tag
        elif array.shape != shape or tag != dtype:
            raise AdapterValidationError(
                f"tensor at {key} is {array.shape}/{tag}, expected {shape}/{dtype}"
            )
        if (timestep, block) in arrays:
            raise AdapterValidationError(f"duplicate (timestep, block) pair {key}")
        arrays[(timestep, block)] = array
    return arrays, shape, dtype


def dump_embeddings(tensors, out_dir, run_id=None, cond=None, null=None) -> DumpManifest:
    """Write one array file per (timestep, block) tensor plus a manifest.

    ``tensors`` maps (timestep, block) pairs to 2-D arrays; all must share
    one shape and dtype. Validation happens before any file is written.
    """
    arrays, shape, dtype = _validate_tensors(dict(tensors))
    pair = {}
    for name, tensor in (("cond", cond), ("null", null)):
        if tensor is not None:
            array = np.asarray(tensor)
            if array.ndim != 2 or _dtype_tag(array) != dtype or array.shape != shape:
                raise AdapterValidationError(
                    f"{name} tensor must match the dump shape {shape} and dtype {dtype}"
                )
            pair[name] = array
    if len(pair) == 1:
        raise AdapterValidationError("cond and null must be provided together")

    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for (timestep, block), array in sorted(arrays.items()):
        rel = f"emb_t{timestep:04d}_b{block:04d}.npy"
        np.save(root / rel, np.ascontiguousarray(array))
        entries.append((timestep, block, rel))
    for name, array in pair.items():
        np.save(root / f"{name}.npy", np.ascontiguousarray(array))

    manifest = DumpManifest(
        root=root,
        run_id=run_id or uuid.uuid4().hex,
        dtype=dtype,
        shape=tuple(shape),
        entries=tuple(entries),
        cond_path="cond.npy" if pair else None,
        null_path="null.npy" if pair else None,
    )
    payload = {
        "run_id": manifest.run_id,
        "dtype": manifest.dtype,
        "shape": list(manifest.shape),
        "entries": [
            {"timestep": t, "block": b, "path": rel} for t, b, rel in manifest.entries
        ],
        "cond_path": manifest.cond_path,
        "null_path": manifest.null_path,
    }
    manifest.manifest_path().write_text(json.dumps(payload, sort_keys=True, indent=2))
    return manifest


def load_manifest(path) -> DumpManifest:
    """Read a manifest and check that every referenced file exists and parses."""
    path = Path(path)
    payload = json.loads(path.read_text())
    manifest = DumpManifest(
        root=path.parent,
        run_id=payload["run_id"],
        dtype=payload["dtype"],
        shape=tuple(payload["shape"]),
        entries=tuple((e["timestep"], e["block"], e["path"]) for e in payload["entries"]),
        cond_path=payload.get("cond_path"),
        null_path=payload.get("null_path"),
    )
    seen = set()
    for t, b, rel in manifest.entries:
        if (t, b) in seen:
            raise AdapterValidationError(f"duplicate manifest entry ({t}, {b})")
        seen.add((t, b))
        _checked_load(manifest.root / rel, manifest)
    for rel in (manifest.cond_path, manifest.null_path):
        if rel is not None:
            _checked_load(manifest.root / rel, manifest)
    return manifest


def _checked_load(path: Path, manifest: DumpManifest) -> np.ndarray:
    if not path.exists():
        raise AdapterValidationError(f"manifest references missing file {path}")
    try:
        array = np.load(path)
    except ValueError as exc:
        raise AdapterValidationError(f"{path} does not parse as an array file") from exc
    if tuple(array.shape) != manifest.shape or _DTYPE_TAGS.get(array.dtype) != manifest.dtype:
        raise AdapterValidationError(
            f"{path} is {array.shape}/{array.dtype}, manifest says "
            f"{manifest.shape}/{manifest.dtype}"
        )
    return array


def load_embeddings(manifest: DumpManifest) -> dict:
    """Load the dumped tensors back without invoking the CLI."""
    return {
        (t, b): _checked_load(manifest.root / rel, manifest)
        for t, b, rel in manifest.entries
    }


def transform_roundtrip(
    manifest: DumpManifest,
    sigma: float = 1.0,
    cli: str = "tora",
    align: bool = True,
    out_dir=None,
) -> dict:
    """Run the CLI transform on every dumped embedding and load the results.

    Returns a new {(timestep, block): array} mapping with the dump's shape
    and dtype. Raises CliUnavailableError before writing anything when the
    CLI is missing, and CliInvocationError carrying the CLI's
    machine-readable code when an invocation fails.
    """
    executable = shutil.which(cli)
    if executable is None:
        raise CliUnavailableError(f"transform CLI {cli!r} not found on PATH")

    out_root = Path(out_dir) if out_dir is not None else manifest.root / "transformed"
    out_root.mkdir(parents=True, exist_ok=True)
    results = {}
    for timestep, block, rel in sorted(manifest.entries):
        source = manifest.root / rel
        target = out_root / rel
        command = [
            executable,
            "transform",
            "--input", str(source),
            "--output", str(target),
            "--sigma", repr(float(sigma)),
            "--report", str(out_root / f"{rel}.manifest.json"),
        ]
        if not align:
            command.append("--no-align")
        if manifest.cond_path and manifest.null_path:
            command += [
                "--cond", str(manifest.root / manifest.cond_path),
                "--null", str(manifest.root / manifest.null_path),
            ]
        proc = subprocess.run(command, capture_output=True, text=True)
        if proc.returncode != 0:
            raise CliInvocationError(*_parse_cli_error(proc.stderr, proc.returncode))
        results[(timestep, block)] = _checked_load(target, manifest)
    return results


def _parse_cli_error(stderr: str, returncode: int) -> tuple:
    for line in stderr.splitlines():
        if line.startswith(_ERROR_PREFIX):
            remainder = line[len(_ERROR_PREFIX):].strip()
            code, _, message = remainder.partition(":")
            return code.strip(), message.strip()
    return "unknown_error", f"exit status {returncode}: {stderr.strip()}"
