from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Union, runtime_checkable

__all__ = [
    "StorageObject",
    "StorageAdapter",
    "StorageAdapterRegistry",
    "LocalDirectoryStorage",
    "InMemoryStorage",
]

_META_SUFFIX = ".meta.json"


@dataclass(frozen=True)
class StorageObject:
    """A report, snapshot or sidecar as bytes plus string metadata."""

    key: str
    data: bytes
    metadata: Dict[str, str]

    def as_text(self, encoding: str = "utf-8") -> str:
        return self.data.decode(encoding)

    def as_base64(self) -> str:
        return base64.b64encode(self.data).decode("ascii")


@runtime_checkable
class StorageAdapter(Protocol):
    """Protocol for pluggable report and snapshot storage."""

    def put_object(self, key: str, data: bytes, *, metadata: Optional[Dict[str, str]] = None) -> StorageObject:
        ...

    def get_object(self, key: str) -> StorageObject:
        ...

    def delete_object(self, key: str) -> None:
        ...


class StorageAdapterRegistry:
    """Named output targets; ``resolve_storage`` checks here before treating a string as a path."""

    def __init__(self) -> None:
        self._targets: Dict[str, StorageAdapter] = {}

    @staticmethod
    def _normalize(name: str) -> str:
        return name.strip().lower()

    def register(self, name: str, adapter: StorageAdapter, *, override: bool = False) -> None:
        key = self._normalize(name)
        if key in self._targets and not override:
            raise ValueError(f"output target '{name}' is already registered")
        self._targets[key] = adapter

    def get(self, name: str) -> StorageAdapter:
        try:
            return self._targets[self._normalize(name)]
        except KeyError:
            raise KeyError(f"no output target named '{name}'; known: {', '.join(self.list()) or 'none'}") from None

    def __contains__(self, name: object) -> bool:
        return isinstance(name, str) and self._normalize(name) in self._targets

    def list(self) -> List[str]:
        return sorted(self._targets)


class LocalDirectoryStorage:
    """Objects as files under ``root``; metadata goes to a ``.meta.json`` sidecar."""

    def __init__(self, root: Union[str, Path]) -> None:
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        relative = Path(key)
        if relative.is_absolute() or ".." in relative.parts or not relative.parts:
            raise ValueError(f"storage keys must be relative paths inside the root, got '{key}'")
        return self.root / relative

    def put_object(self, key: str, data: bytes, *, metadata: Optional[Dict[str, str]] = None) -> StorageObject:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        meta = dict(metadata or {})
        if meta:
            sidecar = path.with_name(path.name + _META_SUFFIX)
            sidecar.write_text(json.dumps(meta, sort_keys=True, indent=2), encoding="utf-8")
        return StorageObject(key=key, data=data, metadata=meta)

    def get_object(self, key: str) -> StorageObject:
        path = self._path(key)
        try:
            data = path.read_bytes()
        except FileNotFoundError as exc:
            raise KeyError(f"Object '{key}' does not exist under {self.root}") from exc
        sidecar = path.with_name(path.name + _META_SUFFIX)
        metadata: Dict[str, str] = {}
        if sidecar.exists():
            metadata = json.loads(sidecar.read_text(encoding="utf-8"))
        return StorageObject(key=key, data=data, metadata=metadata)

    def delete_object(self, key: str) -> None:
        path = self._path(key)
        path.unlink(missing_ok=True)
        path.with_name(path.name + _META_SUFFIX).unlink(missing_ok=True)

    def list_keys(self, prefix: str = "") -> List[str]:
        if not self.root.exists():
            return []
        keys = [
            path.relative_to(self.root).as_posix()
            for path in self.root.rglob("*")
            if path.is_file() and not path.name.endswith(_META_SUFFIX)
        ]
        return sorted(key for key in keys if key.startswith(prefix))


class InMemoryStorage:
    """Dictionary-backed adapter for tests and dry runs."""

    def __init__(self) -> None:
        self._objects: Dict[str, StorageObject] = {}

    def put_object(self, key: str, data: bytes, *, metadata: Optional[Dict[str, str]] = None) -> StorageObject:
        stored = StorageObject(key=key, data=bytes(data), metadata=dict(metadata or {}))
        self._objects[key] = stored
        return stored

    def get_object(self, key: str) -> StorageObject:
        if key not in self._objects:
            raise KeyError(f"Object '{key}' does not exist")
        return self._objects[key]

    def delete_object(self, key: str) -> None:
        self._objects.pop(key, None)

    def list_keys(self, prefix: str = "") -> List[str]:
        return sorted(key for key in self._objects if key.startswith(prefix))
