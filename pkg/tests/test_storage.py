from __future__ import annotations

from pathlib import Path

import pytest

from ppflow.storage import InMemoryStorage, LocalDirectoryStorage, StorageAdapter, StorageAdapterRegistry


def test_local_storage_round_trip_with_sidecar(tmp_path: Path) -> None:
    storage = LocalDirectoryStorage(tmp_path)

    stored = storage.put_object("reports/study.csv", b"epsilon\n", metadata={"format": "csv"})

    assert stored.as_text() == "epsilon\n"
    assert (tmp_path / "reports" / "study.csv.meta.json").exists()
    loaded = storage.get_object("reports/study.csv")
    assert loaded.data == b"epsilon\n"
    assert loaded.metadata == {"format": "csv"}
    assert storage.list_keys() == ["reports/study.csv"]

    storage.delete_object("reports/study.csv")
    assert storage.list_keys() == []
    with pytest.raises(KeyError):
        storage.get_object("reports/study.csv")


def test_local_storage_skips_empty_metadata(tmp_path: Path) -> None:
    storage = LocalDirectoryStorage(tmp_path)
    storage.put_object("a.bin", b"\x00\x01")
    assert not (tmp_path / "a.bin.meta.json").exists()
    assert storage.get_object("a.bin").as_base64() == "AAE="


@pytest.mark.parametrize("key", ["../escape.txt", "/abs/path.txt", ""])
def test_local_storage_rejects_keys_outside_root(tmp_path: Path, key: str) -> None:
    with pytest.raises(ValueError):
        LocalDirectoryStorage(tmp_path).put_object(key, b"")


def test_in_memory_storage() -> None:
    storage = InMemoryStorage()
    storage.put_object("profiles/U_P_t0.bin", b"x")
    storage.put_object("report.json", b"{}")

    assert isinstance(storage, StorageAdapter)
    assert storage.list_keys("profiles/") == ["profiles/U_P_t0.bin"]
    with pytest.raises(KeyError):
        storage.get_object("missing")


def test_registry() -> None:
    registry = StorageAdapterRegistry()
    registry.register("Memory", InMemoryStorage())

    with pytest.raises(ValueError):
        registry.register("memory", InMemoryStorage())
    registry.register("memory", InMemoryStorage(), override=True)
    registry.register("disk", LocalDirectoryStorage("."))

    assert registry.list() == ["disk", "memory"]
    with pytest.raises(KeyError):
        registry.get("s3")
